"""Model parameters, inflow specifications and the hybrid state.

The system is two fluid links in series.  Link 1 has constant capacity ``v``
and an infinite buffer; link 2 has a finite buffer ``theta`` and a capacity
that switches between ``u1`` (mode 1) and ``u2`` (mode 2) with exponential
rates ``lam`` (1 -> 2) and ``mu`` (2 -> 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

#: Absolute tolerance used to classify a queue value as sitting on a
#: state-space boundary (empty, or at the buffer limit).
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """All constants of the two-link model."""

    v: float
    u1: float
    u2: float
    lam: float
    mu: float
    theta: float

    @property
    def mean_capacity(self) -> float:
        """Steady-state average capacity of the switching link."""
        return (self.mu * self.u1 + self.lam * self.u2) / (self.lam + self.mu)

    def validated(self) -> "SystemParams":
        report = validate_params(self)
        if not report.valid:
            raise ParamError("; ".join(report.violations))
        return self


@dataclass(frozen=True)
class ConstantInflow:
    """Constant inflow rate into link 1."""

    r: float

    def rate_in_mode(self, mode: int) -> float:
        return self.r


@dataclass(frozen=True)
class ModeResponsiveInflow:
    """Inflow switched with the capacity mode: r1 in mode 1, r2 in mode 2."""

    r1: float
    r2: float

    def rate_in_mode(self, mode: int) -> float:
        return self.r1 if mode == 1 else self.r2


InflowSpec = Union[ConstantInflow, ModeResponsiveInflow]


@dataclass(frozen=True)
class HybridState:
    """Discrete mode plus the two queue lengths."""

    mode: int
    q1: float
    q2: float


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: tuple[str, ...]


class ParamError(ValueError):
    """Raised when parameters violate the model assumptions."""


class StateSpaceError(ValueError):
    """Raised when a queue vector lies outside the state space."""


def validate_params(p: SystemParams) -> ValidationReport:
    """Check every model invariant; reports all violations, raises nothing."""
    violations = []
    if not 0.0 <= p.u2:
        violations.append(f"u2 must be nonnegative, got {p.u2}")
    if not p.u2 <= p.v:
        violations.append(f"u2 <= v required, got u2={p.u2}, v={p.v}")
    if not p.v <= p.u1:
        violations.append(f"v <= u1 required, got v={p.v}, u1={p.u1}")
    if not p.lam > 0.0:
        violations.append(f"lam must be positive, got {p.lam}")
    if not p.mu > 0.0:
        violations.append(f"mu must be positive, got {p.mu}")
    if not p.theta >= 0.0:
        violations.append(f"theta must be nonnegative, got {p.theta}")
    return ValidationReport(valid=not violations, violations=tuple(violations))


def validate_switching_link(p: SystemParams) -> ValidationReport:
    """Invariants of the switching link alone (merge/split topologies,
    where the upstream capacities are unrelated to u1, u2)."""
    violations = []
    if not 0.0 <= p.u2 <= p.u1:
        violations.append(f"0 <= u2 <= u1 required, got u2={p.u2}, u1={p.u1}")
    if not p.v > 0.0:
        violations.append(f"upstream capacity must be positive, got {p.v}")
    if not p.lam > 0.0:
        violations.append(f"lam must be positive, got {p.lam}")
    if not p.mu > 0.0:
        violations.append(f"mu must be positive, got {p.mu}")
    if not p.theta >= 0.0:
        violations.append(f"theta must be nonnegative, got {p.theta}")
    return ValidationReport(valid=not violations, violations=tuple(violations))


def validate_inflow(inflow: InflowSpec) -> ValidationReport:
    violations = []
    if isinstance(inflow, ConstantInflow):
        if not inflow.r >= 0.0:
            violations.append(f"inflow rate must be nonnegative, got {inflow.r}")
    else:
        if not inflow.r1 >= 0.0:
            violations.append(f"r1 must be nonnegative, got {inflow.r1}")
        if not inflow.r2 >= 0.0:
            violations.append(f"r2 must be nonnegative, got {inflow.r2}")
    return ValidationReport(valid=not violations, violations=tuple(violations))


def check_state(mode: int, q1: float, q2: float, theta: float) -> None:
    """Raise StateSpaceError unless (mode, q) lies in the state space."""
    if mode not in (1, 2):
        raise StateSpaceError(f"mode must be 1 or 2, got {mode}")
    if q1 < -BOUNDARY_TOL:
        raise StateSpaceError(f"q1 must be nonnegative, got {q1}")
    if q2 < -BOUNDARY_TOL or q2 > theta + BOUNDARY_TOL:
        raise StateSpaceError(f"q2 must lie in [0, {theta}], got {q2}")
