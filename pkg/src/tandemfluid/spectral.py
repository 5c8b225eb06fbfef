"""Closed-form steady-state analysis of single switching-capacity links.

Two solvers live here:

* the finite-buffer link: spectral decomposition of the stationary queue
  distribution and the buffer-full probability ``p_hat`` (the spillback
  probability seen by an upstream link);
* the infinite-buffer link: stationary measure consisting of an atom at
  zero in the high-capacity mode plus exponential densities.

For the finite buffer, with drifts rho_i = f_i - u_i per mode and generator
matrix L, the stationary CDF row vector F solves F'(x) D = F(x) L with
D = diag(rho1, rho2).  The eigenproblem det[w D - L] = 0 always has the
root w1 = 0; the second root is

    w2 = -(mu*rho1 + lam*rho2) / (rho1 * rho2),

so both roots are hard-coded instead of calling a generic root finder.
Boundary conditions (no mass at 0 in the up mode, no mass at theta in the
down mode) fix the expansion coefficients, and the full probability is the
stationary mass sitting at the buffer limit.  When the mean drift is zero
the two roots collide and the expansion degenerates to an affine CDF; that
confluent branch is solved explicitly.  When both drifts are <= 0 the
measure collapses to an atom at zero and the full probability vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .markov import steady_state, transition_matrix
from .params import ParamError, SystemParams, validate_params

#: Drifts closer to zero than this are treated as singular (degenerate D).
DRIFT_TOL = 1e-9
#: Relative tolerance for the residual checks on construction.
RESIDUAL_RTOL = 1e-9


class SingularDriftError(ValueError):
    """Inflow coincides with a capacity: the drift matrix is singular."""


class StabilityPreconditionError(ValueError):
    """Inflow is not strictly below min(v, mean capacity)."""


class DomainError(ValueError):
    """Input outside the operating region of the formula."""


@dataclass(frozen=True)
class SpectralSolution:
    """Spectral data of the finite-buffer stationary distribution."""

    D: np.ndarray
    w1: float
    w2: float
    phi1: np.ndarray
    phi2: np.ndarray
    k1: float
    k2: float
    p_hat: float
    theta: float
    lam: float
    mu: float
    #: 'spillback' (rho1 < 0 < rho2) or 'drain' (both drifts <= 0, measure
    #: is the atom at zero and the boundary-condition system does not apply).
    regime: str

    def cdf(self, x: float) -> tuple[float, float]:
        """Stationary (mode 1, mode 2) mass with queue <= x (diagnostic)."""
        if x < 0.0:
            return (0.0, 0.0)
        x = min(x, self.theta)
        f = self.k1 * self.phi1 * math.exp(self.w1 * x) + self.k2 * self.phi2 * math.exp(self.w2 * x)
        return (float(f[0]), float(f[1]))


def _normalize(vec: np.ndarray) -> np.ndarray:
    return vec / vec[np.argmax(np.abs(vec))]


def _regular_full_fraction(rho1: float, rho2: float, lam: float, mu: float,
                           theta: float) -> tuple[float, float, float]:
    """Buffer-full probability for rho1 < 0 < rho2; returns (p_hat, k1, k2).

    The k's are the expansion coefficients for phi1 = (mu, lam)/norm and
    phi2 = (rho2, -rho1)/norm.  Written to stay finite for either sign of
    w2 (for positive mean drift the terms are rescaled by exp(-w2 theta)).
    """
    w2 = -(mu * rho1 + lam * rho2) / (rho1 * rho2)
    s = lam * rho2 + mu * rho1  # equals -w2*rho1*rho2
    p2 = lam / (lam + mu)
    if w2 <= 0.0:
        e = math.exp(w2 * theta)
        denom = mu * rho1 + lam * rho2 * e
        p_hat = p2 * e * s / denom
    else:
        e_inv = math.exp(-w2 * theta)
        denom = mu * rho1 * e_inv + lam * rho2
        p_hat = p2 * s / denom
    return p_hat, w2, s


def _confluent_full_fraction(rho1: float, rho2: float, lam: float, mu: float,
                             theta: float) -> float:
    """Zero-mean-drift case (w2 = w1 = 0): the stationary CDF is affine.

    F(x) = alpha + b*(p1, p2)*x with F2(0) = 0 and F1(theta) = p1 gives
    b = p1 / (p2*rho2/lam + p1*theta) and full probability p2*(1 - b*theta).
    """
    ss = steady_state(lam, mu)
    b = ss.p1 / (ss.p2 * rho2 / lam + ss.p1 * theta)
    return ss.p2 * (1.0 - b * theta)


def two_mode_full_fraction(rho1: float, rho2: float, lam: float, mu: float,
                           theta: float) -> float:
    """Stationary full-buffer probability of a two-mode finite-buffer link.

    Handles every drift-sign regime: both drifts <= 0 give 0, both >= 0
    give 1 (the queue reaches the buffer and stays), mixed signs use the
    spectral solution (confluent branch at zero mean drift).
    """
    if theta < 0.0:
        raise DomainError(f"buffer size must be nonnegative, got {theta}")
    near1 = abs(rho1) < DRIFT_TOL
    near2 = abs(rho2) < DRIFT_TOL
    if near1 and near2:
        raise SingularDriftError("both mode drifts vanish; occupancy is initial-condition dependent")
    if rho1 <= 0.0 and rho2 <= 0.0:
        return 0.0
    if rho1 >= 0.0 and rho2 >= 0.0:
        return 1.0
    if rho1 > 0.0:  # mirrored roles: mode 2 drains, mode 1 fills
        return two_mode_full_fraction(rho2, rho1, mu, lam, theta)
    mean_drift = mu * rho1 + lam * rho2
    if abs(mean_drift) <= 1e-9 * (mu * abs(rho1) + lam * rho2):
        return _confluent_full_fraction(rho1, rho2, lam, mu, theta)
    p_hat, _, _ = _regular_full_fraction(rho1, rho2, lam, mu, theta)
    return min(max(p_hat, 0.0), 1.0)


def finite_buffer_spectrum(r: float, p: SystemParams) -> SpectralSolution:
    """Spectral solution of the isolated downstream link fed at constant r.

    Preconditions: r strictly below min(v, mean capacity) and r bounded
    away from both capacities (nonsingular drift matrix).
    """
    report = validate_params(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))
    cap = min(p.v, p.mean_capacity)
    if not r < cap:
        raise StabilityPreconditionError(
            f"inflow {r} is not strictly below min(v, mean capacity) = {cap}")
    if r < 0.0:
        raise DomainError(f"inflow must be nonnegative, got {r}")
    rho1, rho2 = r - p.u1, r - p.u2
    if abs(rho1) < DRIFT_TOL or abs(rho2) < DRIFT_TOL:
        raise SingularDriftError(
            f"inflow {r} coincides with a capacity (u1={p.u1}, u2={p.u2})")

    lam, mu = p.lam, p.mu
    w2 = -(mu * rho1 + lam * rho2) / (rho1 * rho2)
    if abs(w2) < 1e-12:
        raise SingularDriftError("coincident eigenroots: inflow equals the mean capacity")
    phi1 = _normalize(np.array([mu, lam], dtype=float))
    phi2 = _normalize(np.array([rho2, -rho1], dtype=float))
    ss = steady_state(lam, mu)

    if rho2 < 0.0:
        # Queue drains in both modes; all stationary mass is the atom at 0
        # and the spillback probability vanishes.  F(x) = k1*phi1 = (p1, p2).
        k1 = ss.p1 / phi1[0]
        sol = SpectralSolution(D=np.diag([rho1, rho2]), w1=0.0, w2=w2,
                               phi1=phi1, phi2=phi2, k1=k1, k2=0.0, p_hat=0.0,
                               theta=p.theta, lam=lam, mu=mu, regime="drain")
        _check_residuals(sol, boundary=False)
        return sol

    # Spillback regime rho1 < 0 < rho2 (rho1 < 0 follows from r < v <= u1).
    e = math.exp(w2 * p.theta)
    # k1*phi1[1] + k2*phi2[1] = 0 ; k1*phi1[0] + k2*phi2[0]*e = p1
    det = phi1[1] * phi2[0] * e - phi2[1] * phi1[0]
    k1 = -ss.p1 * phi2[1] / det
    k2 = ss.p1 * phi1[1] / det
    p_hat, _, _ = _regular_full_fraction(rho1, rho2, lam, mu, p.theta)
    p_hat = min(max(p_hat, 0.0), 1.0)
    sol = SpectralSolution(D=np.diag([rho1, rho2]), w1=0.0, w2=w2,
                           phi1=phi1, phi2=phi2, k1=k1, k2=k2, p_hat=p_hat,
                           theta=p.theta, lam=lam, mu=mu, regime="spillback")
    _check_residuals(sol, boundary=True)
    return sol


def _check_residuals(sol: SpectralSolution, boundary: bool) -> None:
    """Invariant checks on every construction (determinant, null vectors,
    boundary conditions, probability range)."""
    lmd = transition_matrix(sol.lam, sol.mu)
    scale = max(sol.lam, sol.mu, float(np.abs(sol.D).max()))
    for w, phi in ((sol.w1, sol.phi1), (sol.w2, sol.phi2)):
        m = w * sol.D - lmd
        det = float(np.linalg.det(m))
        if abs(det) > RESIDUAL_RTOL * max(scale * (abs(w) + 1.0), 1.0) ** 2:
            raise ArithmeticError(f"eigenroot residual too large: det={det}")
        res = float(np.abs(phi @ m).max())
        if res > RESIDUAL_RTOL * max(scale * (abs(w) + 1.0), 1.0):
            raise ArithmeticError(f"null-vector residual too large: {res}")
    if boundary:
        ss = steady_state(sol.lam, sol.mu)
        e1 = math.exp(sol.w1 * sol.theta)
        e2 = math.exp(sol.w2 * sol.theta)
        bc1 = sol.k1 * sol.phi1[1] + sol.k2 * sol.phi2[1]
        bc2 = sol.k1 * sol.phi1[0] * e1 + sol.k2 * sol.phi2[0] * e2 - ss.p1
        if abs(bc1) > 1e-9 or abs(bc2) > 1e-9:
            raise ArithmeticError(f"boundary-condition residuals too large: {bc1}, {bc2}")
    if not -1e-9 <= sol.p_hat <= 1.0 + 1e-9:
        raise ArithmeticError(f"full probability out of range: {sol.p_hat}")


def spillback_prob_feedback(r1: float, r2: float, p: SystemParams) -> float:
    """Buffer-full probability of the isolated link under mode-responsive
    inflow: the link receives min(r_i, v) in mode i.

    Zero-drift modes are handled by continuity (a mode that cannot push the
    queue up contributes no full time), which covers inflows that exactly
    match a capacity.
    """
    report = validate_params(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))
    if r1 < 0.0 or r2 < 0.0:
        raise DomainError("inflow rates must be nonnegative")
    rho1 = min(r1, p.v) - p.u1
    rho2 = min(r2, p.v) - p.u2
    return two_mode_full_fraction(rho1, rho2, p.lam, p.mu, p.theta)


@dataclass(frozen=True)
class BpdqInvariantMeasure:
    """Stationary measure of the infinite-buffer switching link.

    Atom ``z1`` at queue 0 in mode 1, densities a_i * exp(-s q) over q > 0.
    """

    z1: float
    a1: float
    a2: float
    s: float

    @property
    def total_mass(self) -> float:
        return self.z1 + (self.a1 + self.a2) / self.s

    def cdf(self, x: float) -> float:
        """P(queue <= x), both modes combined."""
        if x < 0.0:
            return 0.0
        return self.z1 + (self.a1 + self.a2) / self.s * (1.0 - math.exp(-self.s * x))

    def mode_marginals(self) -> tuple[float, float]:
        return (self.z1 + self.a1 / self.s, self.a2 / self.s)


def bpdq_is_stable(f: float, p: SystemParams) -> bool:
    """The infinite-buffer link is stable iff f is strictly below the mean
    capacity (equality already diverges)."""
    if f < 0.0:
        raise DomainError(f"inflow must be nonnegative, got {f}")
    return f < p.mean_capacity


def bpdq_invariant_measure(f: float, p: SystemParams) -> BpdqInvariantMeasure:
    """Stationary measure of the infinite-buffer link for u2 < f < mean
    capacity.  Only u1, u2, lam, mu enter; v and theta play no role.

    z1 comes from mass conservation across the mode cycle; the density
    coefficients come from requiring the stationarity functional to vanish
    for every smooth test function, which pins

        a1 = lam*z1/(u1-f),  a2 = lam*z1/(f-u2),
        s  = mu/(f-u2) - lam/(u1-f),

    and makes the total mass exactly one.
    """
    lam, mu = p.lam, p.mu
    ubar = p.mean_capacity
    if not p.u2 < f < ubar:
        raise DomainError(f"need u2 < f < mean capacity, got f={f}, u2={p.u2}, ubar={ubar}")
    z1 = (mu - lam * (f - p.u2) / (p.u1 - f)) / (lam + mu)
    a1 = lam * z1 / (p.u1 - f)
    a2 = lam * z1 / (f - p.u2)
    s = mu / (f - p.u2) - lam / (p.u1 - f)
    measure = BpdqInvariantMeasure(z1=z1, a1=a1, a2=a2, s=s)
    if abs(measure.total_mass - 1.0) > 1e-9:
        raise ArithmeticError(f"invariant measure mass {measure.total_mass} != 1")
    return measure
