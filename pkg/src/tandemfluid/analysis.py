"""Throughput bounds, parameter sweeps and resilience metrics.

The maximum stable throughput J is unknown in closed form; the necessary
condition brackets it from above and the certificate LP from below:

* upper bound: largest inflow passing the spillback-adjusted throughput
  test, found by bisection on r -> r - [(1-p_hat(r)) v + p_hat(r) u2]
  over [0, min(v, mean capacity));
* lower bound: largest inflow with a drift certificate, found by bisection
  on LP feasibility over [0, v].

Feasibility is expected to be monotone in the bisected parameter; each
bisection re-checks its final bracket and falls back to a linear scan if
a non-monotone pair shows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Union

from .params import ParamError, SystemParams, validate_params
from .stability import (
    Infeasible,
    IndeterminateError,
    StabilityCertificate,
    certificate_program,
    check_necessary,
    check_sufficient,
)
from .lp import lp_maximize

#: Default bisection resolution in r and theta.
DEFAULT_TOL = 1e-4
_MAX_BISECT = 60
#: Search ceiling for the smallest stabilising buffer size.
THETA_CAP = 100.0


@dataclass(frozen=True)
class ThroughputBounds:
    upper: float
    lower: float
    tol: float


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    upper: float
    lower: float


@dataclass(frozen=True)
class ResilienceResult:
    r_hat: float
    theta_hat: float
    theta_min: Optional[float]  # None when no buffer up to the cap stabilises
    alpha: Optional[float]      # None encodes "no-guarantee"

    @property
    def status(self) -> str:
        return "ok" if self.alpha is not None else "no-guarantee"


def _bisect_boundary(pred: Callable[[float], bool], lo: float, hi: float,
                     tol: float) -> float:
    """Largest x in [lo, hi] with pred(x) true, assuming pred is a
    down-set (true below a threshold).  Returns lo if pred fails at lo,
    hi if it holds at hi.  The final bracket is re-verified; if the
    expected monotone pattern is broken a linear scan from hi refines
    the answer instead.
    """
    if not pred(lo):
        return lo
    if pred(hi):
        return hi
    a, b = lo, hi
    for _ in range(_MAX_BISECT):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        if pred(mid):
            a = mid
        else:
            b = mid
    # Bracket sanity: a holds, b fails by construction.  Probe slightly
    # beyond b for non-monotone islands; scan if one is found.
    probe = min(hi, b + 10.0 * tol)
    if probe > b and pred(probe):
        x = hi
        while x > a:
            if pred(x):
                return x
            x -= tol
        return a
    return a


def throughput_upper_bound(p: SystemParams, tol: float = DEFAULT_TOL) -> float:
    """Largest inflow passing the necessary condition, within tol."""
    _validated(p)
    _positive_tol(tol)
    hi = min(p.v, p.mean_capacity)

    def holds(r: float) -> bool:
        if r < 0.0:
            return True
        if r >= hi:
            return False
        try:
            return check_necessary(r, p).holds
        except IndeterminateError:
            # Singular drift at this inflow: classify from a nearby point.
            for cand in (r - 10.0 * tol, r + 10.0 * tol):
                if 0.0 <= cand < hi:
                    try:
                        return check_necessary(cand, p).holds
                    except IndeterminateError:
                        continue
            return False

    return _bisect_boundary(holds, 0.0, hi - min(tol, hi * 0.5), tol)


def throughput_lower_bound(p: SystemParams, tol: float = DEFAULT_TOL) -> float:
    """Largest inflow with a drift certificate, within tol."""
    _validated(p)
    _positive_tol(tol)

    def feasible(r: float) -> bool:
        return _is_feasible(r, p)

    return _bisect_boundary(feasible, 0.0, p.v, tol)


def _is_feasible(r: float, p: SystemParams) -> bool:
    """Certificate-LP feasibility (pure feasibility, no optimisation)."""
    prog = certificate_program(r, r, p)
    prog.objective = (0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    return lp_maximize(prog).status == "optimal"


def throughput_bounds(p: SystemParams, tol: float = DEFAULT_TOL) -> ThroughputBounds:
    return ThroughputBounds(upper=throughput_upper_bound(p, tol),
                            lower=throughput_lower_bound(p, tol), tol=tol)


SweepParameter = Literal["delta_u", "lambda_mu", "theta"]


def sweep_params(p_base: SystemParams, parameter: SweepParameter, value: float) -> SystemParams:
    """Rebuild parameters for one sweep point.

    delta_u varies the capacity gap u1 - u2 around the base mean capacity
    (the mean is held fixed); lambda_mu sets both transition rates; theta
    sets the buffer size.
    """
    if parameter == "delta_u":
        mean = 0.5 * (p_base.u1 + p_base.u2)
        u1 = mean + value / 2.0
        u2 = mean - value / 2.0
        if u2 < 0.0:
            raise ParamError(f"delta_u={value} drives u2 below zero")
        if not u2 <= p_base.v <= u1:
            raise ParamError(f"delta_u={value} violates u2 <= v <= u1")
        return SystemParams(v=p_base.v, u1=u1, u2=u2, lam=p_base.lam,
                            mu=p_base.mu, theta=p_base.theta)
    if parameter == "lambda_mu":
        if value <= 0.0:
            raise ParamError("transition rates must be positive")
        return SystemParams(v=p_base.v, u1=p_base.u1, u2=p_base.u2, lam=value,
                            mu=value, theta=p_base.theta)
    if parameter == "theta":
        if value < 0.0:
            raise ParamError("theta must be nonnegative")
        return SystemParams(v=p_base.v, u1=p_base.u1, u2=p_base.u2,
                            lam=p_base.lam, mu=p_base.mu, theta=value)
    raise ParamError(f"unknown sweep parameter {parameter!r}")


def sweep(p_base: SystemParams, parameter: SweepParameter, values: list[float],
          tol: float = DEFAULT_TOL) -> list[SweepRow]:
    rows = []
    for value in values:
        p = sweep_params(p_base, parameter, value)
        rows.append(SweepRow(parameter=parameter, value=value,
                             upper=throughput_upper_bound(p, tol),
                             lower=throughput_lower_bound(p, tol)))
    return rows


def theta_min(r: float, p: SystemParams, tol: float = DEFAULT_TOL) -> Optional[float]:
    """Smallest buffer size whose certificate LP is feasible at inflow r.

    Returns 0.0 when no buffer is needed, None when no theta up to
    THETA_CAP works.  Feasibility is expected to be monotone (larger
    buffers only help); the bisection uses the same scan fallback as the
    throughput bounds.
    """
    _validated(p)
    _positive_tol(tol)

    def feasible(theta: float) -> bool:
        return _is_feasible(r, _with_theta(p, theta))

    if feasible(0.0) or feasible(tol):
        return 0.0
    if not feasible(THETA_CAP):
        return None
    # Infeasible below the threshold, feasible above: bisect on the
    # complement to reuse the down-set helper.
    boundary = _bisect_boundary(lambda th: not feasible(th), 0.0, THETA_CAP, tol)
    return boundary


def resilience_alpha(r_hat: float, theta_hat: float, p: SystemParams,
                     tol: float = DEFAULT_TOL) -> ResilienceResult:
    """Tolerable relative misjudgment of the buffer size at inflow r_hat.

    alpha = (theta_hat - theta_min)/theta_hat when the required buffer is
    within the assumed one; 1 when any buffer size works; no-guarantee
    (alpha None) when even theta_hat is not certifiably enough.
    """
    if theta_hat <= 0.0:
        raise ParamError(f"theta_hat must be positive, got {theta_hat}")
    tmin = theta_min(r_hat, p, tol)
    if tmin is None or tmin > theta_hat:
        return ResilienceResult(r_hat=r_hat, theta_hat=theta_hat, theta_min=tmin, alpha=None)
    return ResilienceResult(r_hat=r_hat, theta_hat=theta_hat, theta_min=tmin,
                            alpha=(theta_hat - tmin) / theta_hat)


def queue_bound(r: float, p: SystemParams, grid_points: int = 32) -> float:
    """Tightest certified long-run average total queue bound d/c at inflow r.

    The certificate family is scanned over a log grid of fixed c values up
    to the feasibility maximum, minimizing d at each; raises when no
    certificate exists at all.
    """
    _validated(p)
    base = certificate_program(r, r, p)
    base.objective = (0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
    top = lp_maximize(base)
    if top.status != "optimal":
        raise ParamError(f"no certificate exists at inflow {r}")
    c_star = float(top.x[4])
    best = math.inf
    c_lo = max(1e-6 * c_star, 1e-9)
    for i in range(grid_points):
        c_fix = c_lo * (c_star / c_lo) ** (i / (grid_points - 1))
        prog = certificate_program(r, r, p)
        prog.objective = (0.0, 0.0, 0.0, 0.0, 0.0, -1.0)
        prog.add([0.0, 0.0, 0.0, 0.0, 1.0, 0.0], "=", c_fix)
        sol = lp_maximize(prog)
        if sol.status == "optimal":
            best = min(best, float(sol.x[5]) / c_fix)
    if not math.isfinite(best):  # pragma: no cover - c* itself is feasible
        raise ParamError(f"queue bound optimisation failed at inflow {r}")
    return best


def _with_theta(p: SystemParams, theta: float) -> SystemParams:
    return SystemParams(v=p.v, u1=p.u1, u2=p.u2, lam=p.lam, mu=p.mu, theta=theta)


def _validated(p: SystemParams) -> None:
    report = validate_params(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))


def _positive_tol(tol: float) -> None:
    if tol <= 0.0:
        raise ParamError(f"tolerance must be positive, got {tol}")
