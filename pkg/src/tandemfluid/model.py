"""Discharge-rate map and vector field of the two-link system.

The discharge rates follow the standard fluid-network rules:

* link 1 sends ``min(r, v)`` while empty and ``v`` while backed up, except
  that a full downstream buffer (spillback) caps its discharge at the
  current downstream capacity ``u_i``;
* link 2 serves at ``u_i`` while it holds a queue, and otherwise passes
  through ``min(s1, u_i)``.

Written as case tables:

    s1 = r    if q1 = 0, q2 < theta, r <= v
         v    if q1 > 0, q2 < theta
         v    if q1 > 0, q2 = theta, v <= u_i
         u_i  during spillback (q2 = theta, v > u_i), never exceeding
              what link 1 can supply

    s2 = r    if q1 = q2 = 0 and r <= min(v, u_i)
         v    if q2 = 0, link 1 backed up or saturated, v <= u_i
         u_i  otherwise

Boundary ties (e.g. q2 = theta with v = u_i) resolve to the non-spillback
branch; the values coincide either way.  Queue positions within
``BOUNDARY_TOL`` of a boundary are classified as on it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .params import BOUNDARY_TOL, SystemParams, check_state


@dataclass(frozen=True)
class DischargeRates:
    s1: float
    s2: float


def capacity(mode: int, p: SystemParams) -> float:
    """Current capacity of link 2."""
    return p.u1 if mode == 1 else p.u2


def discharge_rates(mode: int, q: tuple[float, float], r: float, p: SystemParams) -> DischargeRates:
    """Outflow rates (s1, s2) of both links at state (mode, q) with inflow r."""
    q1, q2 = q
    check_state(mode, q1, q2, p.theta)
    u = capacity(mode, p)

    supply = p.v if q1 > BOUNDARY_TOL else min(r, p.v)
    s1 = min(supply, u) if q2 >= p.theta - BOUNDARY_TOL else supply
    s2 = u if q2 > BOUNDARY_TOL else min(s1, u)
    return DischargeRates(s1=s1, s2=s2)


def vector_field(mode: int, q: tuple[float, float], r: float, p: SystemParams) -> tuple[float, float]:
    """Queue derivative (dq1/dt, dq2/dt) = (r - s1, s1 - s2)."""
    s = discharge_rates(mode, q, r, p)
    return (r - s.s1, s.s1 - s.s2)
