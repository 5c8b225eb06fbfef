"""Necessary and sufficient stability conditions for the two-link system.

Necessary side: a stable system must satisfy the prerequisite
``r < min(v, mean capacity)`` and the spillback-adjusted throughput bound
``r <= (1 - p_hat) v + p_hat u2`` where p_hat is the buffer-full
probability of the isolated downstream link.

Sufficient side: positive constants (a1, a2, b1, b2, c, d) satisfying a
set of linear inequalities certify the drift condition

    L V(i, q) <= -c (q1 + q2) + d,    V(i, q) = q1^2 + a_i q1 q2 + b_i q1,

which bounds the long-run average total queue by d/c from any initial
condition.  The inequality system bounds the q1-coefficient of L V in each
affine regime of the dynamics by -c, and bounds the q1-independent part by
d - c q2.  The full generator of V carries the term b_i dq1/dt in addition
to the bilinear ones; on the buffer-full boundary that term is positive,
so the certificate includes offset rows with the b_i contribution (they
constrain only d, never feasibility, and make the numeric drift check
below airtight).

``verify_drift`` is the independent oracle: it evaluates the generator of
V directly from the simulated vector field on a grid covering all affine
regimes (boundaries included exactly) and checks the drift inequality
pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .lp import Constraint, LinearProgram, LpOutcome, lp_maximize
from .model import vector_field
from .params import (
    ConstantInflow,
    InflowSpec,
    ModeResponsiveInflow,
    ParamError,
    SystemParams,
    validate_params,
)
from .spectral import (
    SingularDriftError,
    StabilityPreconditionError,
    finite_buffer_spectrum,
    spillback_prob_feedback,
)

#: Strict positivity of the certificate constants, encoded as lower bounds.
EPSILON = 1e-9
#: Tolerance on certificate residuals.
CERT_TOL = 1e-8
#: Pass threshold for the numeric drift verifier.
DRIFT_TOL = 1e-6


class IndeterminateError(ValueError):
    """The spectral machinery is singular at this inflow; perturb and retry."""


@dataclass(frozen=True)
class NecessaryVerdict:
    prerequisite_ok: bool
    p_hat: Optional[float]
    rhs: Optional[float]
    lhs: float
    holds: bool


@dataclass(frozen=True)
class StabilityCertificate:
    a1: float
    a2: float
    b1: float
    b2: float
    c: float
    d: float

    @property
    def queue_bound(self) -> float:
        return self.d / self.c

    def as_vector(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.b1, self.b2, self.c, self.d])


@dataclass(frozen=True)
class Infeasible:
    """No certificate exists for this inflow (no stability guarantee)."""

    max_c: float = 0.0


@dataclass(frozen=True)
class DriftReport:
    passed: bool
    max_violation: float
    argmax_state: tuple[int, float, float]
    grid_shape: tuple[int, int]


def check_necessary(r: float, p: SystemParams) -> NecessaryVerdict:
    """Throughput bound from the spillback probability (necessary for
    stability).  Raises IndeterminateError at spectral singularities."""
    _validated(p)
    if r < 0.0:
        raise ParamError(f"inflow must be nonnegative, got {r}")
    prerequisite = r < min(p.v, p.mean_capacity)
    if not prerequisite:
        return NecessaryVerdict(prerequisite_ok=False, p_hat=None, rhs=None,
                                lhs=r, holds=False)
    try:
        p_hat = finite_buffer_spectrum(r, p).p_hat
    except SingularDriftError as exc:
        raise IndeterminateError(f"indeterminate at r={r}: {exc}") from exc
    rhs = (1.0 - p_hat) * p.v + p_hat * p.u2
    return NecessaryVerdict(prerequisite_ok=True, p_hat=p_hat, rhs=rhs,
                            lhs=r, holds=r <= rhs)


def check_necessary_feedback(r1: float, r2: float, p: SystemParams) -> NecessaryVerdict:
    """Mode-responsive analogue: the average admitted inflow must not
    exceed the spillback-adjusted service rate."""
    _validated(p)
    try:
        p_tilde = spillback_prob_feedback(r1, r2, p)
    except SingularDriftError as exc:
        raise IndeterminateError(f"indeterminate at ({r1}, {r2}): {exc}") from exc
    total = p.lam + p.mu
    lhs = (p.mu * min(r1, p.v) + p.lam * min(r2, p.v)) / total
    rhs = (1.0 - p_tilde) * p.v + p_tilde * p.u2
    return NecessaryVerdict(prerequisite_ok=True, p_hat=p_tilde, rhs=rhs,
                            lhs=lhs, holds=lhs <= rhs)


def certificate_program(r1: float, r2: float, p: SystemParams) -> LinearProgram:
    """The certificate inequalities as an LP over (a1, a2, b1, b2, c, d).

    ``r1`` enters the mode-1 rows, ``r2`` the mode-2 rows (equal for a
    constant inflow).  The objective is left zero; callers set it.
    Variables are bounded below by EPSILON to encode strict positivity.

    Rows, with y shorthand for the jump differences:
      mode 1, buffer empty:   2(r1-v) + lam(b2-b1) <= -c
      mode 1, buffer > 0:     2(r1-v) + a1(v-u1) + lam(a2-a1)theta
                                       + lam(b2-b1) <= -c
      mode 2, buffer empty:   2(r2-v) + a2(v-u2) + mu(b1-b2) <= -c
      mode 2, buffer < full:  2(r2-v) + a2(v-u2) + mu(a1-a2)theta
                                       + mu(b1-b2) <= -c
      mode 2, buffer full:    2(r2-u2) + mu(a1-a2)theta + mu(b1-b2) <= -c
      plus the d rows bounding the q1-independent part of the generator:
        d >= a1(r1-v) + c theta
        d >= a2(r2-u2) + c theta
        d >= c theta
        d >= (r2-u2)(a2 theta + b2) + c theta   (buffer-full offset, mode 2)
        d >= (r1-v) (a1 theta + b1) + c theta   (upstream-saturation offset)
    """
    _validated(p)
    v, u1, u2, lam, mu, th = p.v, p.u1, p.u2, p.lam, p.mu, p.theta
    # variables: a1, a2, b1, b2, c, d
    prog = LinearProgram(objective=(0.0,) * 6, lower_bounds=(EPSILON,) * 6)
    prog.add([0.0, 0.0, -lam, lam, 1.0, 0.0], "<=", 2.0 * (v - r1))
    prog.add([(v - u1) - lam * th, lam * th, -lam, lam, 1.0, 0.0], "<=", 2.0 * (v - r1))
    prog.add([0.0, v - u2, mu, -mu, 1.0, 0.0], "<=", 2.0 * (v - r2))
    prog.add([mu * th, (v - u2) - mu * th, mu, -mu, 1.0, 0.0], "<=", 2.0 * (v - r2))
    prog.add([mu * th, -mu * th, mu, -mu, 1.0, 0.0], "<=", 2.0 * (u2 - r2))
    prog.add([r1 - v, 0.0, 0.0, 0.0, th, -1.0], "<=", 0.0)
    prog.add([0.0, r2 - u2, 0.0, 0.0, th, -1.0], "<=", 0.0)
    prog.add([0.0, 0.0, 0.0, 0.0, th, -1.0], "<=", 0.0)
    prog.add([0.0, (r2 - u2) * th, 0.0, r2 - u2, th, -1.0], "<=", 0.0)
    prog.add([(r1 - v) * th, 0.0, r1 - v, 0.0, th, -1.0], "<=", 0.0)
    return prog


def _solve_certificate(r1: float, r2: float, p: SystemParams) -> Union[StabilityCertificate, Infeasible]:
    prog = certificate_program(r1, r2, p)
    prog.objective = (0.0, 0.0, 0.0, 0.0, 1.0, 0.0)  # maximize c
    outcome = lp_maximize(prog)
    if outcome.status != "optimal":
        return Infeasible()
    c_star = float(outcome.x[4])
    if c_star <= 0.0:  # pragma: no cover - lower bound keeps c >= EPSILON
        return Infeasible(max_c=c_star)

    # Fixing c below the maximum keeps the system feasible (every row only
    # loosens as c decreases); then tighten the queue bound by minimizing d.
    c_fix = max(EPSILON, min(1.0, c_star / 2.0))
    prog2 = certificate_program(r1, r2, p)
    prog2.objective = (0.0, 0.0, 0.0, 0.0, 0.0, -1.0)  # minimize d
    prog2.add([0.0, 0.0, 0.0, 0.0, 1.0, 0.0], "=", c_fix)
    outcome2 = lp_maximize(prog2)
    if outcome2.status != "optimal":  # pragma: no cover - see monotonicity note
        return Infeasible(max_c=c_star)
    a1, a2, b1, b2, c, d = (float(x) for x in outcome2.x)
    cert = StabilityCertificate(a1=a1, a2=a2, b1=b1, b2=b2, c=c, d=d)
    _check_certificate(cert, r1, r2, p)
    return cert


def _check_certificate(cert: StabilityCertificate, r1: float, r2: float, p: SystemParams) -> None:
    from .lp import max_violation

    prog = certificate_program(r1, r2, p)
    violation = max_violation(prog, cert.as_vector())
    if violation > CERT_TOL:
        raise ArithmeticError(f"certificate violates its inequalities by {violation}")


def check_sufficient(r: float, p: SystemParams) -> Union[StabilityCertificate, Infeasible]:
    """Drift certificate for constant inflow r, or Infeasible."""
    _validated(p)
    if r < 0.0:
        raise ParamError(f"inflow must be nonnegative, got {r}")
    return _solve_certificate(r, r, p)


def check_sufficient_feedback(r1: float, r2: float, p: SystemParams) -> Union[StabilityCertificate, Infeasible]:
    """Drift certificate for the mode-responsive inflow (r1, r2)."""
    _validated(p)
    if r1 < 0.0 or r2 < 0.0:
        raise ParamError("inflow rates must be nonnegative")
    return _solve_certificate(r1, r2, p)


def generator_of_certificate(cert: StabilityCertificate, mode: int, q1: float, q2: float,
                             inflow: InflowSpec, p: SystemParams) -> float:
    """Generator of V(i,q) = q1^2 + a_i q1 q2 + b_i q1 at one state,
    evaluated directly from the model vector field (flow part) plus the
    mode-jump part."""
    r = inflow.rate_in_mode(mode)
    dq1, dq2 = vector_field(mode, (q1, q2), r, p)
    if mode == 1:
        a_own, b_own = cert.a1, cert.b1
        a_oth, b_oth = cert.a2, cert.b2
        rate = p.lam
    else:
        a_own, b_own = cert.a2, cert.b2
        a_oth, b_oth = cert.a1, cert.b1
        rate = p.mu
    flow = dq1 * (2.0 * q1 + a_own * q2 + b_own) + dq2 * (a_own * q1)
    jump = rate * ((a_oth - a_own) * q1 * q2 + (b_oth - b_own) * q1)
    return flow + jump


def verify_drift(cert: StabilityCertificate, inflow: Union[float, tuple[float, float], InflowSpec],
                 p: SystemParams, q1_max: Optional[float] = None,
                 n_q1: int = 201, n_q2: int = 51) -> DriftReport:
    """Numerically check L V + c(q1+q2) - d <= DRIFT_TOL on a grid.

    The regimes of the dynamics are affine in q, so a grid that contains
    the boundary lines q1 = 0, q2 = 0, q2 = theta exactly (linspace
    endpoints) together with interior points is decisive; q1_max defaults
    to 20 theta + 10 to expose any positive q1-coefficient.
    """
    spec = _as_inflow(inflow)
    if min(cert.a1, cert.a2, cert.b1, cert.b2, cert.c, cert.d) <= 0.0:
        raise ParamError("certificate fields must be positive")
    if n_q1 < 2 or (n_q2 < 2 and p.theta > 0.0):
        raise ParamError("malformed grid")
    if q1_max is None:
        q1_max = 20.0 * p.theta + 10.0
    q1s = np.linspace(0.0, q1_max, n_q1)
    q2s = np.linspace(0.0, p.theta, n_q2) if p.theta > 0.0 else np.array([0.0])

    worst = -math.inf
    arg = (1, 0.0, 0.0)
    for mode in (1, 2):
        for q1r in q1s:
            for q2r in q2s:
                q1, q2 = float(q1r), float(q2r)
                lv = generator_of_certificate(cert, mode, q1, q2, spec, p)
                slack = lv + cert.c * (q1 + q2) - cert.d
                if slack > worst:
                    worst = slack
                    arg = (mode, q1, q2)
    return DriftReport(passed=worst <= DRIFT_TOL, max_violation=worst,
                       argmax_state=arg, grid_shape=(len(q1s), len(q2s)))


def _as_inflow(inflow: Union[float, tuple[float, float], InflowSpec]) -> InflowSpec:
    if isinstance(inflow, (ConstantInflow, ModeResponsiveInflow)):
        return inflow
    if isinstance(inflow, tuple):
        return ModeResponsiveInflow(*inflow)
    return ConstantInflow(float(inflow))


def _validated(p: SystemParams) -> None:
    report = validate_params(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))
