"""Small dense linear-program solver.

Two-phase primal simplex with Bland's anti-cycling rule, built for the
stability-certificate systems (at most a dozen variables and a couple of
dozen constraints).  Dense tableau, deterministic pivoting, no external
solver dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

Relation = Literal["<=", ">=", "="]

_TOL = 1e-9
_MAX_ITER = 50_000


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[float, ...]
    relation: Relation
    rhs: float


@dataclass
class LinearProgram:
    """maximize objective @ x subject to constraints and x >= lower_bounds."""

    objective: tuple[float, ...]
    constraints: list[Constraint] = field(default_factory=list)
    lower_bounds: tuple[float, ...] = ()

    def add(self, coeffs: Sequence[float], relation: Relation, rhs: float) -> None:
        if len(coeffs) != len(self.objective):
            raise ValueError(f"constraint has {len(coeffs)} coefficients, expected {len(self.objective)}")
        if relation not in ("<=", ">=", "="):
            raise ValueError(f"unknown relation {relation!r}")
        self.constraints.append(Constraint(tuple(float(c) for c in coeffs), relation, float(rhs)))

    def validate(self) -> None:
        n = len(self.objective)
        if self.lower_bounds and len(self.lower_bounds) != n:
            raise ValueError("lower_bounds dimension mismatch")
        values = list(self.objective) + list(self.lower_bounds)
        for con in self.constraints:
            values.extend(con.coeffs)
            values.append(con.rhs)
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite coefficient in linear program")


@dataclass(frozen=True)
class LpOutcome:
    status: Literal["optimal", "infeasible", "unbounded"]
    x: np.ndarray | None
    objective_value: float | None


def max_violation(prog: LinearProgram, x: np.ndarray) -> float:
    """Largest absolute constraint/bound violation of a candidate point."""
    worst = 0.0
    for con in prog.constraints:
        lhs = float(np.dot(con.coeffs, x))
        if con.relation == "<=":
            worst = max(worst, lhs - con.rhs)
        elif con.relation == ">=":
            worst = max(worst, con.rhs - lhs)
        else:
            worst = max(worst, abs(lhs - con.rhs))
    lbs = prog.lower_bounds or (0.0,) * len(x)
    for xi, lb in zip(x, lbs):
        worst = max(worst, lb - xi)
    return worst


def lp_maximize(prog: LinearProgram) -> LpOutcome:
    """Solve the program; certified optimal / infeasible / unbounded."""
    prog.validate()
    n = len(prog.objective)
    lbs = np.array(prog.lower_bounds if prog.lower_bounds else [0.0] * n)

    # Shift to y = x - lb >= 0.
    rows = []
    rels = []
    rhss = []
    for con in prog.constraints:
        a = np.array(con.coeffs)
        rows.append(a)
        rels.append(con.relation)
        rhss.append(con.rhs - float(a @ lbs))

    m = len(rows)
    n_slack = sum(1 for rel in rels if rel != "=")
    # Artificials for every row keep the construction uniform; phase 1
    # drives them all to zero or proves infeasibility.
    a_mat = np.zeros((m, n + n_slack + m))
    b = np.zeros(m)
    slack_at = n
    art_at = n + n_slack
    basis = np.zeros(m, dtype=int)
    for i in range(m):
        a = rows[i].copy()
        rel = rels[i]
        rhs = rhss[i]
        if rhs < 0.0:
            a = -a
            rhs = -rhs
            rel = {"<=": ">=", ">=": "<=", "=": "="}[rel]
        a_mat[i, :n] = a
        b[i] = rhs
        if rel == "<=":
            a_mat[i, slack_at] = 1.0
            slack_at += 1
        elif rel == ">=":
            a_mat[i, slack_at] = -1.0
            slack_at += 1
        a_mat[i, art_at + i] = 1.0
        basis[i] = art_at + i

    n_total = n + n_slack + m
    tableau = np.hstack([a_mat, b.reshape(-1, 1)])

    # Phase 1: minimize the artificial total.
    cost1 = np.zeros(n_total)
    cost1[art_at:] = 1.0
    status = _simplex(tableau, basis, cost1, allowed=n_total)
    if status != "optimal":  # pragma: no cover - phase 1 is always bounded
        return LpOutcome("infeasible", None, None)
    if float(cost1[basis] @ tableau[:, -1]) > 1e-8:
        return LpOutcome("infeasible", None, None)

    # Pivot remaining artificials out of the basis where possible.
    for i in range(m):
        if basis[i] >= art_at:
            for j in range(art_at):
                if abs(tableau[i, j]) > _TOL:
                    _pivot(tableau, basis, i, j)
                    break

    # Phase 2: maximize the real objective over the original + slack columns.
    cost2 = np.zeros(n_total)
    cost2[:n] = -np.array(prog.objective)  # minimize the negation
    status = _simplex(tableau, basis, cost2, allowed=art_at)
    if status == "unbounded":
        return LpOutcome("unbounded", None, None)

    y = np.zeros(n_total)
    y[basis] = tableau[:, -1]
    # Degenerate pivots can leave basic values a rounding error below zero;
    # clip to the bound (the distortion is within the solver tolerance).
    x = np.maximum(y[:n], 0.0) + lbs
    return LpOutcome("optimal", x, float(np.dot(prog.objective, x)))


def _simplex(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray,
             allowed: int) -> str:
    """Bland-rule simplex on an equality tableau with a starting basis.

    Only columns < `allowed` may enter (phase 2 excludes artificials).
    """
    m = tableau.shape[0]
    for _ in range(_MAX_ITER):
        cb = cost[basis]
        entering = -1
        for j in range(allowed):
            if j in basis:
                continue
            reduced = cost[j] - float(cb @ tableau[:, j])
            if reduced < -_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        leaving = -1
        best_ratio = np.inf
        for i in range(m):
            aij = tableau[i, entering]
            if aij > _TOL:
                ratio = tableau[i, -1] / aij
                if ratio < best_ratio - _TOL or (
                    abs(ratio - best_ratio) <= _TOL
                    and (leaving < 0 or basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            return "unbounded"
        _pivot(tableau, basis, leaving, entering)
    raise ArithmeticError("simplex iteration limit exceeded")


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col
