"""The two-state capacity-switching Markov process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Xoshiro256StarStar


@dataclass(frozen=True)
class SteadyState:
    p1: float
    p2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2])


def transition_matrix(lam: float, mu: float) -> np.ndarray:
    """Generator matrix with rows summing to zero exactly."""
    _require_positive(lam, mu)
    return np.array([[-lam, lam], [mu, -mu]])


def steady_state(lam: float, mu: float) -> SteadyState:
    """Stationary mode distribution: p1 = mu/(lam+mu), p2 = lam/(lam+mu)."""
    _require_positive(lam, mu)
    total = lam + mu
    return SteadyState(p1=mu / total, p2=lam / total)


def sample_holding_time(mode: int, lam: float, mu: float, rng: Xoshiro256StarStar) -> float:
    """Exponential sojourn in `mode`: rate lam in mode 1, mu in mode 2."""
    _require_positive(lam, mu)
    if mode not in (1, 2):
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    return rng.exponential(lam if mode == 1 else mu)


def _require_positive(lam: float, mu: float) -> None:
    if lam <= 0.0 or mu <= 0.0:
        raise ValueError(f"transition rates must be positive, got lam={lam}, mu={mu}")
