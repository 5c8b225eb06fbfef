from __future__ import annotations

import pytest

from tandemfluid import SystemParams


@pytest.fixture
def nominal() -> SystemParams:
    return SystemParams(v=0.75, u1=1.0, u2=0.5, lam=1.0, mu=1.0, theta=1.0)
