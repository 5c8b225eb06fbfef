"""Topologies, replication handling and trajectory statistics.

Five topologies share one exact event-driven engine:

* ``TwoLink`` - the full system (infinite upstream buffer, finite switching
  downstream buffer with spillback);
* ``SingleFinite`` - the downstream link in isolation, fed directly;
* ``SingleInfinite`` - a single switching-capacity link with an infinite
  buffer;
* ``Merge`` - two constant-capacity upstream links feeding the switching
  link, link 1 prioritised at the junction;
* ``Split`` - one upstream link whose outflow is divided evenly between a
  constant-capacity link and the switching link; a full switching buffer
  throttles the upstream discharge to twice its current capacity.

Replications differ only by their derived seed stream and may run on
parallel threads (capped by ``TANDEMFLUID_THREADS``) when the compiled
kernel is active.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import backend, engine_py
from .engine_py import (
    N_STATS,
    S_EVENTS,
    S_FULL,
    S_INFLOW_ALL,
    S_INIT_TOTAL,
    S_INT_Q,
    S_INT_Q1,
    S_MAX_EXCESS,
    S_MIN_Q,
    S_MODE1,
    S_OUTFLOW,
    S_OUTFLOW_ALL,
    S_Q1_ZERO,
    S_TERM_Q1,
    S_TERM_TOTAL,
    S_ZERO_MODE1,
    TOPO_MERGE,
    TOPO_SINGLE_FINITE,
    TOPO_SINGLE_INFINITE,
    TOPO_SPLIT,
    TOPO_TWO_LINK,
)
from .model import vector_field
from .params import (
    ConstantInflow,
    HybridState,
    InflowSpec,
    ModeResponsiveInflow,
    ParamError,
    SystemParams,
    validate_inflow,
    validate_params,
    validate_switching_link,
)
from .rng import replication_seed


@dataclass(frozen=True)
class TwoLink:
    params: SystemParams
    inflow: InflowSpec


@dataclass(frozen=True)
class SingleFinite:
    """The switching-capacity link fed directly (buffer theta)."""

    params: SystemParams
    inflow: InflowSpec


@dataclass(frozen=True)
class SingleInfinite:
    """The switching-capacity link with an infinite buffer."""

    params: SystemParams
    inflow: ConstantInflow


@dataclass(frozen=True)
class Merge:
    """Two upstream links (capacities params.v and v2) into the switching link."""

    params: SystemParams
    v2: float
    inflow1: float
    inflow2: float


@dataclass(frozen=True)
class Split:
    """One upstream link splitting evenly into a constant link (v2) and the switching link."""

    params: SystemParams
    v2: float
    inflow: float


Topology = Union[TwoLink, SingleFinite, SingleInfinite, Merge, Split]

TOPOLOGY_NAMES = {
    TwoLink: "two-link",
    SingleFinite: "single-finite",
    SingleInfinite: "single-infinite",
    Merge: "merge",
    Split: "split",
}


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int
    warmup: float = 0.0
    replications: int = 1
    initial_mode: int = 1
    initial_queues: Optional[tuple[float, ...]] = None
    # Occupation histogram of the infinite-buffer link (ignored elsewhere).
    hist_bins: int = 0
    hist_qmax: float = 0.0

    def validate(self) -> None:
        if not self.horizon > self.warmup >= 0.0:
            raise ValueError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.initial_mode not in (1, 2):
            raise ValueError("initial mode must be 1 or 2")


@dataclass(frozen=True)
class FieldStat:
    mean: float
    stderr: float


@dataclass
class SimStats:
    """Replication-averaged trajectory statistics over [warmup, horizon]."""

    time_avg_total_queue: FieldStat
    frac_time_q2_full: FieldStat
    frac_time_q1_zero: FieldStat
    frac_time_mode: tuple[FieldStat, FieldStat]
    terminal_q_over_t: FieldStat
    mean_throughput: FieldStat
    replications: int
    horizon: float
    warmup: float
    # Diagnostics
    min_queue_seen: float
    max_buffer_excess: float
    mass_balance_rel_error: float
    frac_time_zero_mode1: FieldStat
    total_events: float
    per_rep: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    histogram: Optional[np.ndarray] = field(repr=False, default=None)
    hist_width: float = 0.0


def pack_params(topology: Topology) -> tuple[int, int, np.ndarray, int]:
    """Translate a topology object into engine codes.

    Returns (topo_code, feedback_flag, parameter vector, queue count).
    """
    pars = np.zeros(9)
    p = topology.params
    if isinstance(topology, (Merge, Split)):
        report = validate_switching_link(p)
    else:
        report = validate_params(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))
    pars[engine_py.P_U1] = p.u1
    pars[engine_py.P_U2] = p.u2
    pars[engine_py.P_LAM] = p.lam
    pars[engine_py.P_MU] = p.mu
    pars[engine_py.P_THETA] = p.theta

    if isinstance(topology, TwoLink):
        _check_inflow(topology.inflow)
        pars[engine_py.P_V1] = p.v
        fb = isinstance(topology.inflow, ModeResponsiveInflow)
        pars[engine_py.P_RA] = topology.inflow.rate_in_mode(1)
        pars[engine_py.P_RB] = topology.inflow.rate_in_mode(2)
        return TOPO_TWO_LINK, int(fb), pars, 2
    if isinstance(topology, SingleFinite):
        _check_inflow(topology.inflow)
        fb = isinstance(topology.inflow, ModeResponsiveInflow)
        pars[engine_py.P_RA] = topology.inflow.rate_in_mode(1)
        pars[engine_py.P_RB] = topology.inflow.rate_in_mode(2)
        return TOPO_SINGLE_FINITE, int(fb), pars, 1
    if isinstance(topology, SingleInfinite):
        _check_inflow(topology.inflow)
        pars[engine_py.P_THETA] = math.inf
        pars[engine_py.P_RA] = topology.inflow.r
        return TOPO_SINGLE_INFINITE, 0, pars, 1
    if isinstance(topology, Merge):
        if topology.v2 <= 0.0 or topology.inflow1 < 0.0 or topology.inflow2 < 0.0:
            raise ParamError("merge needs v2 > 0 and nonnegative inflows")
        pars[engine_py.P_V1] = p.v
        pars[engine_py.P_V2] = topology.v2
        pars[engine_py.P_RA] = topology.inflow1
        pars[engine_py.P_RB] = topology.inflow2
        return TOPO_MERGE, 0, pars, 3
    if isinstance(topology, Split):
        if topology.v2 <= 0.0 or topology.inflow < 0.0:
            raise ParamError("split needs v2 > 0 and a nonnegative inflow")
        pars[engine_py.P_V1] = p.v
        pars[engine_py.P_V2] = topology.v2
        pars[engine_py.P_RA] = topology.inflow
        return TOPO_SPLIT, 0, pars, 3
    raise TypeError(f"unsupported topology {topology!r}")


def _check_inflow(inflow: InflowSpec) -> None:
    report = validate_inflow(inflow)
    if not report.valid:
        raise ParamError("; ".join(report.violations))


def _worker_count(replications: int) -> int:
    # Serial by default: thread scheduling is pathologically slow on some
    # sandboxed kernels, and the compiled event loop is fast enough that
    # parallelism is an opt-in (TANDEMFLUID_THREADS=N).
    cap = os.environ.get("TANDEMFLUID_THREADS")
    workers = int(cap) if cap else 1
    return max(1, min(workers, os.cpu_count() or 1, replications))


def simulate(topology: Topology, cfg: SimConfig, force_python: bool = False) -> SimStats:
    """Exact simulation of `topology`; statistics over [warmup, horizon]."""
    cfg.validate()
    topo, fb, pars, nq = pack_params(topology)

    q0 = np.zeros(3)
    if cfg.initial_queues is not None:
        if len(cfg.initial_queues) != nq:
            raise ValueError(f"topology has {nq} queues, got {len(cfg.initial_queues)} initial values")
        q0[:nq] = cfg.initial_queues

    want_hist = topo == TOPO_SINGLE_INFINITE and cfg.hist_bins > 0
    hist_width = (cfg.hist_qmax / cfg.hist_bins) if want_hist else 0.0

    raw = np.zeros((cfg.replications, N_STATS))
    hists = np.zeros((cfg.replications, cfg.hist_bins + 1)) if want_hist else None

    def one(rep: int) -> None:
        # Fresh per-replication buffers: the kernel updates them on every
        # event, and rows of a shared matrix would false-share cache lines
        # between worker threads.
        out = np.zeros(N_STATS)
        hist = np.zeros(cfg.hist_bins + 1) if want_hist else None
        seed = replication_seed(cfg.seed, rep)
        backend.run_sim(topo, fb, cfg.initial_mode, q0, pars, cfg.horizon, cfg.warmup,
                        seed, out, hist=hist, hist_width=hist_width,
                        force_python=force_python)
        raw[rep] = out
        if want_hist:
            hists[rep] = hist

    workers = _worker_count(cfg.replications)
    if workers > 1 and backend.kernel_releases_gil() and not force_python:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(cfg.replications)))
    else:
        for rep in range(cfg.replications):
            one(rep)

    return _collect(raw, hists, hist_width, cfg)


def _field(values: np.ndarray) -> FieldStat:
    mean = float(np.mean(values))
    if len(values) > 1:
        stderr = float(np.std(values, ddof=1) / math.sqrt(len(values)))
    else:
        stderr = 0.0
    return FieldStat(mean=mean, stderr=stderr)


def _collect(raw: np.ndarray, hists, hist_width: float, cfg: SimConfig) -> SimStats:
    teff = cfg.horizon - cfg.warmup
    avg_q = raw[:, S_INT_Q] / teff
    frac_full = raw[:, S_FULL] / teff
    frac_zero = raw[:, S_Q1_ZERO] / teff
    frac_m1 = raw[:, S_MODE1] / teff
    growth = raw[:, S_TERM_Q1] / cfg.horizon
    throughput = raw[:, S_OUTFLOW] / teff
    zero_m1 = raw[:, S_ZERO_MODE1] / teff

    balance_err = np.abs(
        (raw[:, S_INFLOW_ALL] - raw[:, S_OUTFLOW_ALL])
        - (raw[:, S_TERM_TOTAL] - raw[:, S_INIT_TOTAL])
    ) / np.maximum(raw[:, S_INFLOW_ALL], 1.0)

    histogram = None
    if hists is not None:
        histogram = hists.sum(axis=0)

    return SimStats(
        time_avg_total_queue=_field(avg_q),
        frac_time_q2_full=_field(frac_full),
        frac_time_q1_zero=_field(frac_zero),
        frac_time_mode=(_field(frac_m1), _field(1.0 - frac_m1)),
        terminal_q_over_t=_field(growth),
        mean_throughput=_field(throughput),
        replications=len(raw),
        horizon=cfg.horizon,
        warmup=cfg.warmup,
        min_queue_seen=float(raw[:, S_MIN_Q].min()),
        max_buffer_excess=float(raw[:, S_MAX_EXCESS].max()),
        mass_balance_rel_error=float(balance_err.max()),
        frac_time_zero_mode1=_field(zero_m1),
        total_events=float(raw[:, S_EVENTS].sum()),
        per_rep={
            "time_avg_total_queue": avg_q,
            "frac_time_q2_full": frac_full,
            "terminal_q_over_t": growth,
            "time_avg_q1": raw[:, S_INT_Q1] / teff,
            "frac_time_zero_mode1": zero_m1,
        },
        histogram=histogram,
        hist_width=hist_width,
    )


def next_event(state: HybridState, mode_deadline: float, inflow: InflowSpec,
               p: SystemParams) -> tuple[float, str]:
    """Earliest event from `state` for the two-link system.

    Both the returned time and ``mode_deadline`` are measured from now.
    The candidates are the mode switch at the deadline and the closed-form
    boundary crossings of the affine flow; a derivative of exactly zero
    toward a boundary yields no crossing.
    """
    r = inflow.rate_in_mode(state.mode)
    dq1, dq2 = vector_field(state.mode, (state.q1, state.q2), r, p)
    best_t, best_kind = math.inf, "none"
    if mode_deadline < best_t:
        best_t, best_kind = mode_deadline, "mode-switch"
    if dq1 < 0.0 and state.q1 / -dq1 < best_t:
        best_t, best_kind = state.q1 / -dq1, "q1-hits-zero"
    if dq2 < 0.0 and state.q2 / -dq2 < best_t:
        best_t, best_kind = state.q2 / -dq2, "q2-hits-zero"
    if dq2 > 0.0 and (p.theta - state.q2) / dq2 < best_t:
        best_t, best_kind = (p.theta - state.q2) / dq2, "q2-hits-buffer"
    return best_t, best_kind


def simulate_merge_stability_demo(total_inflow: float, split: tuple[float, float],
                                  merge: Merge, cfg: SimConfig) -> tuple[SimStats, SimStats]:
    """Run the merge under a given inflow split and under a balanced one.

    The given split (typically overloading link 1) is compared against the
    capacity-proportional redistribution of the same total, which keeps
    each upstream inflow below its link capacity whenever that is possible
    at all.
    """
    r1, r2 = split
    if not math.isclose(r1 + r2, total_inflow, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"split {split} does not sum to {total_inflow}")
    given = Merge(merge.params, merge.v2, r1, r2)
    v1 = merge.params.v
    balanced_r1 = total_inflow * v1 / (v1 + merge.v2)
    balanced = Merge(merge.params, merge.v2, balanced_r1, total_inflow - balanced_r1)
    return simulate(given, cfg), simulate(balanced, cfg)


def write_trajectory_csv(topology: Topology, cfg: SimConfig, path: str) -> None:
    """Dump the event trajectory of replication 0 as CSV.

    One row per event: t, mode, queues, discharge rates.  Uses the
    reference engine; the compiled kernel produces the identical
    trajectory (covered by the parity tests).
    """
    topo, fb, pars, nq = pack_params(topology)
    q0 = np.zeros(3)
    if cfg.initial_queues is not None:
        q0[:nq] = cfg.initial_queues
    seed = replication_seed(cfg.seed, 0)
    qcols = ",".join(f"q{k+1}" for k in range(nq))
    scols = ",".join(f"s{k+1}" for k in range(nq))
    with open(path, "w") as fh:
        fh.write(f"t,mode,{qcols},{scols}\n")
        for t, mode, q, s in engine_py.iter_trajectory(topo, fb, cfg.initial_mode, q0,
                                                       pars, cfg.horizon, seed):
            qtxt = ",".join(f"{x:.12g}" for x in q)
            stxt = ",".join(f"{x:.12g}" for x in s)
            fh.write(f"{t:.12g},{mode},{qtxt},{stxt}\n")
