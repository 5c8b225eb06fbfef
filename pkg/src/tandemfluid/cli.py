"""Command-line front end.

Subcommands: check, simulate, throughput, sweep, theta-min, resilience,
invariant, verify-drift.  Parameters come from (in increasing precedence)
a named --preset, a JSON --config file, and individual flags.  Outputs are
deterministic: floats are rounded to 12 significant digits and keys are
sorted, so identical inputs produce byte-identical files.

Exit codes: 0 success, 2 invalid parameters or arguments, 3 when a command
that requires a stability certificate finds none.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from typing import Any, Optional

import numpy as np

from . import analysis, backend, spectral, stability
from . import simulate as _simmod  # noqa: F401 - keeps the submodule loaded
from .simulate import (
    Merge,
    SimConfig,
    SimStats,
    SingleFinite,
    SingleInfinite,
    Split,
    FieldStat,
    TOPOLOGY_NAMES,
    Topology,
    TwoLink,
    simulate,
    write_trajectory_csv,
)
from .params import (
    ConstantInflow,
    InflowSpec,
    ModeResponsiveInflow,
    ParamError,
    SystemParams,
    validate_params,
    validate_switching_link,
)
from .presets import PRESETS

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

_PARAM_KEYS = ("v", "u1", "u2", "lambda", "mu", "theta")
_DEFAULTS = {
    "seed": 1,
    "horizon": 10000.0,
    "warmup": 0.0,
    "replications": 1,
    "tol": analysis.DEFAULT_TOL,
}

# Minimal JSON schemas of the emitted documents, keyed by subcommand; the
# test suite validates every emitted payload against these.
SCHEMAS: dict[str, dict] = {
    "check": {
        "type": "object",
        "required": ["params", "inflow", "necessary", "sufficient"],
        "properties": {
            "necessary": {
                "type": "object",
                "required": ["prerequisite_ok", "holds", "lhs"],
            },
            "sufficient": {
                "type": "object",
                "required": ["feasible"],
            },
        },
    },
    "simulate": {
        "type": "object",
        "required": ["topology", "stats", "backend"],
        "properties": {
            "stats": {
                "type": "object",
                "required": [
                    "time_avg_total_queue", "frac_time_q2_full",
                    "frac_time_q1_zero", "frac_time_mode",
                    "terminal_q_over_t", "mean_throughput",
                ],
            },
        },
    },
    "throughput": {
        "type": "object",
        "required": ["upper", "lower", "tol"],
    },
    "theta-min": {
        "type": "object",
        "required": ["r", "theta_min", "within_cap"],
    },
    "resilience": {
        "type": "object",
        "required": ["r_hat", "theta_hat", "theta_min", "alpha", "status"],
    },
    "invariant": {
        "type": "object",
        "required": ["f", "z1", "a1", "a2", "s", "total_mass"],
    },
    "verify-drift": {
        "type": "object",
        "required": ["passed", "max_violation", "certificate"],
    },
    "sweep": {
        "type": "array",
        "items": {
            "type": "object",
            "required": ["parameter", "value", "upper", "lower"],
        },
    },
}

SWEEP_CSV_HEADER = "parameter,value,upper,lower"


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        cfg = _resolve_config(args)
        payload, exit_code = _COMMANDS[args.command](args, cfg)
    except (ParamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _emit(payload, args)
    return exit_code


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--preset", choices=sorted(PRESETS), help="named parameter preset")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", help="write to this path instead of stdout")
    for key in _PARAM_KEYS:
        common.add_argument(f"--{key}", type=float, dest=key.replace("lambda", "lambda_"))
    common.add_argument("--v2", type=float, help="second constant capacity (merge/split)")
    common.add_argument("--r", type=float, help="constant inflow")
    common.add_argument("--r1", type=float, help="mode-1 inflow (feedback) or merge inflow 1")
    common.add_argument("--r2", type=float, help="mode-2 inflow (feedback) or merge inflow 2")
    common.add_argument("--seed", type=int)
    common.add_argument("--horizon", type=float)
    common.add_argument("--warmup", type=float)
    common.add_argument("--replications", type=int)
    common.add_argument("--tol", type=float)

    parser = argparse.ArgumentParser(prog="tandemfluid",
                                     description="two-link stochastic fluid queue analysis")
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("check", parents=[common], help="necessary/sufficient stability verdicts")
    psim = sub.add_parser("simulate", parents=[common], help="exact event-driven simulation")
    psim.add_argument("--topology",
                      choices=["two-link", "single-finite", "single-infinite", "merge", "split"])
    psim.add_argument("--dump-trajectory", help="write the per-event trajectory CSV here")
    sub.add_parser("throughput", parents=[common], help="upper and lower throughput bounds")
    psweep = sub.add_parser("sweep", parents=[common], help="bounds along a parameter sweep")
    psweep.add_argument("--parameter", required=True, choices=["delta_u", "lambda_mu", "theta"])
    psweep.add_argument("--values", required=True, help="comma-separated sweep values")
    ptm = sub.add_parser("theta-min", parents=[common], help="smallest stabilising buffer size")
    del ptm
    pres = sub.add_parser("resilience", parents=[common], help="buffer-misjudgment margin")
    pres.add_argument("--theta-hat", type=float, default=None)
    pinv = sub.add_parser("invariant", parents=[common],
                          help="stationary measure of the infinite-buffer link")
    pinv.add_argument("--f", type=float, help="inflow to the infinite-buffer link")
    pinv.add_argument("--compare-sim", action="store_true",
                      help="also simulate and report the empirical distance")
    pvd = sub.add_parser("verify-drift", parents=[common],
                         help="numeric drift check of the certificate")
    pvd.add_argument("--q1-max", type=float, default=None)
    del pvd
    return parser


def _resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg: dict[str, Any] = dict(_DEFAULTS)
    if args.preset:
        cfg.update(PRESETS[args.preset])
    if args.config:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key in ("v", "u1", "u2", "mu", "theta", "v2", "r", "r1", "r2",
                "seed", "horizon", "warmup", "replications", "tol"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "lambda_", None) is not None:
        cfg["lambda"] = args.lambda_
    return cfg


def _params(cfg: dict[str, Any], tandem: bool = True) -> SystemParams:
    missing = [k for k in _PARAM_KEYS if k not in cfg]
    if missing:
        raise ParamError(f"missing parameters: {', '.join(missing)}")
    p = SystemParams(v=float(cfg["v"]), u1=float(cfg["u1"]), u2=float(cfg["u2"]),
                     lam=float(cfg["lambda"]), mu=float(cfg["mu"]), theta=float(cfg["theta"]))
    report = validate_params(p) if tandem else validate_switching_link(p)
    if not report.valid:
        raise ParamError("; ".join(report.violations))
    return p


def _inflow(cfg: dict[str, Any]) -> InflowSpec:
    if "r1" in cfg and "r2" in cfg:
        return ModeResponsiveInflow(r1=float(cfg["r1"]), r2=float(cfg["r2"]))
    if "r" in cfg:
        return ConstantInflow(r=float(cfg["r"]))
    raise ParamError("an inflow is required: --r, or --r1 with --r2")


def _sim_config(cfg: dict[str, Any]) -> SimConfig:
    return SimConfig(horizon=float(cfg["horizon"]), seed=int(cfg["seed"]),
                         warmup=float(cfg["warmup"]), replications=int(cfg["replications"]))


def _cmd_check(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    inflow = _inflow(cfg)
    if isinstance(inflow, ModeResponsiveInflow):
        necessary = stability.check_necessary_feedback(inflow.r1, inflow.r2, p)
        sufficient = stability.check_sufficient_feedback(inflow.r1, inflow.r2, p)
    else:
        necessary = stability.check_necessary(inflow.r, p)
        sufficient = stability.check_sufficient(inflow.r, p)
    feasible = isinstance(sufficient, stability.StabilityCertificate)
    cert = None
    if feasible:
        cert = asdict(sufficient)
        cert["queue_bound"] = sufficient.queue_bound
    return {
        "params": asdict(p),
        "inflow": asdict(inflow),
        "necessary": asdict(necessary),
        "sufficient": {"feasible": feasible, "certificate": cert},
    }, EXIT_OK


def _topology(cfg, args) -> Topology:
    name = getattr(args, "topology", None) or cfg.get("topology", "two-link")
    p = _params(cfg, tandem=name not in ("merge", "split"))
    if name == "two-link":
        return TwoLink(p, _inflow(cfg))
    if name == "single-finite":
        return SingleFinite(p, _inflow(cfg))
    if name == "single-infinite":
        inflow = _inflow(cfg)
        if not isinstance(inflow, ConstantInflow):
            raise ParamError("single-infinite takes a constant inflow (--r)")
        return SingleInfinite(p, inflow)
    if name == "merge":
        if "v2" not in cfg or "r1" not in cfg or "r2" not in cfg:
            raise ParamError("merge needs --v2, --r1 and --r2")
        return Merge(p, v2=float(cfg["v2"]), inflow1=float(cfg["r1"]),
                         inflow2=float(cfg["r2"]))
    if name == "split":
        if "v2" not in cfg or "r" not in cfg:
            raise ParamError("split needs --v2 and --r")
        return Split(p, v2=float(cfg["v2"]), inflow=float(cfg["r"]))
    raise ParamError(f"unknown topology {name!r}")


def _cmd_simulate(args, cfg) -> tuple[dict, int]:
    topology = _topology(cfg, args)
    scfg = _sim_config(cfg)
    stats = simulate(topology, scfg)
    if args.dump_trajectory:
        write_trajectory_csv(topology, scfg, args.dump_trajectory)
    doc = {
        "topology": TOPOLOGY_NAMES[type(topology)],
        "backend": backend.active_backend(),
        "config": {"horizon": scfg.horizon, "warmup": scfg.warmup,
                   "seed": scfg.seed, "replications": scfg.replications},
        "stats": _stats_doc(stats),
    }
    return doc, EXIT_OK


def _stats_doc(stats: SimStats) -> dict:
    def f(field: FieldStat) -> dict:
        return {"mean": field.mean, "stderr": field.stderr}

    return {
        "time_avg_total_queue": f(stats.time_avg_total_queue),
        "frac_time_q2_full": f(stats.frac_time_q2_full),
        "frac_time_q1_zero": f(stats.frac_time_q1_zero),
        "frac_time_mode": [f(stats.frac_time_mode[0]), f(stats.frac_time_mode[1])],
        "terminal_q_over_t": f(stats.terminal_q_over_t),
        "mean_throughput": f(stats.mean_throughput),
        "mass_balance_rel_error": stats.mass_balance_rel_error,
        "min_queue_seen": stats.min_queue_seen,
        "max_buffer_excess": stats.max_buffer_excess,
        "total_events": stats.total_events,
        "replications": stats.replications,
    }


def _cmd_throughput(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    bounds = analysis.throughput_bounds(p, float(cfg["tol"]))
    return {"upper": bounds.upper, "lower": bounds.lower, "tol": bounds.tol}, EXIT_OK


def _cmd_sweep(args, cfg) -> tuple[list, int]:
    p = _params(cfg)
    values = [float(x) for x in args.values.split(",") if x.strip()]
    rows = analysis.sweep(p, args.parameter, values, float(cfg["tol"]))
    return [asdict(row) for row in rows], EXIT_OK


def _cmd_theta_min(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    if "r" not in cfg:
        raise ParamError("theta-min needs --r")
    tmin = analysis.theta_min(float(cfg["r"]), p, float(cfg["tol"]))
    return {"r": float(cfg["r"]), "theta_min": tmin,
            "within_cap": tmin is not None, "theta_cap": analysis.THETA_CAP}, EXIT_OK


def _cmd_resilience(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    if "r" not in cfg:
        raise ParamError("resilience needs --r")
    theta_hat = args.theta_hat if args.theta_hat is not None else p.theta
    res = analysis.resilience_alpha(float(cfg["r"]), theta_hat, p, float(cfg["tol"]))
    doc = asdict(res)
    doc["status"] = res.status
    return doc, EXIT_OK


def _cmd_invariant(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    f = args.f if args.f is not None else cfg.get("r")
    if f is None:
        raise ParamError("invariant needs --f (or r in the config)")
    f = float(f)
    measure = spectral.bpdq_invariant_measure(f, p)
    doc = {"f": f, "z1": measure.z1, "a1": measure.a1, "a2": measure.a2,
           "s": measure.s, "total_mass": measure.total_mass,
           "stable": spectral.bpdq_is_stable(f, p)}
    if args.compare_sim:
        comparison = compare_invariant_measure(f, p, _sim_config(cfg))
        doc["empirical"] = comparison
    return doc, EXIT_OK


def compare_invariant_measure(f: float, p: SystemParams, scfg: SimConfig,
                              bins: int = 8000) -> dict:
    """Simulate the infinite-buffer link and compare the empirical
    occupation measure with the analytic one; returns atom and CDF errors.

    The analytic tail fixes the histogram range so the truncated mass is
    negligible at the reported precision.
    """
    measure = spectral.bpdq_invariant_measure(f, p)
    qmax = math.log((measure.a1 + measure.a2) / (measure.s * 1e-9)) / measure.s
    cfg = SimConfig(horizon=scfg.horizon, seed=scfg.seed, warmup=scfg.warmup,
                        replications=scfg.replications, hist_bins=bins, hist_qmax=qmax)
    stats = simulate(SingleInfinite(p, ConstantInflow(f)), cfg)
    teff = (cfg.horizon - cfg.warmup) * cfg.replications
    atom = stats.frac_time_zero_mode1.mean
    edges = np.arange(1, bins + 1) * (qmax / bins)
    emp_cdf = stats.frac_time_q1_zero.mean + np.cumsum(stats.histogram[:bins]) / teff
    ana_cdf = np.array([measure.cdf(x) for x in edges])
    ks = float(np.max(np.abs(emp_cdf - ana_cdf)))
    ks = max(ks, abs(stats.frac_time_q1_zero.mean - measure.z1))
    return {
        "atom_mode1": atom,
        "atom_error": abs(atom - measure.z1),
        "ks_distance": ks,
        "horizon": cfg.horizon,
    }


_COMMANDS = {
    "check": _cmd_check,
    "simulate": _cmd_simulate,
    "throughput": _cmd_throughput,
    "sweep": _cmd_sweep,
    "theta-min": _cmd_theta_min,
    "resilience": _cmd_resilience,
    "invariant": _cmd_invariant,
    "verify-drift": None,  # filled below (needs stability + exit code 3)
}


def _cmd_verify_drift(args, cfg) -> tuple[dict, int]:
    p = _params(cfg)
    inflow = _inflow(cfg)
    if isinstance(inflow, ModeResponsiveInflow):
        cert = stability.check_sufficient_feedback(inflow.r1, inflow.r2, p)
    else:
        cert = stability.check_sufficient(inflow.r, p)
    if not isinstance(cert, stability.StabilityCertificate):
        return {"passed": False, "max_violation": None, "certificate": None,
                "reason": "no certificate exists at this inflow"}, EXIT_INFEASIBLE
    report = stability.verify_drift(cert, inflow, p, q1_max=args.q1_max)
    doc = {"passed": report.passed, "max_violation": report.max_violation,
           "argmax_state": list(report.argmax_state),
           "grid_shape": list(report.grid_shape),
           "certificate": {**asdict(cert), "queue_bound": cert.queue_bound}}
    return doc, EXIT_OK


_COMMANDS["verify-drift"] = _cmd_verify_drift


def _round12(obj: Any) -> Any:
    """Round every float to 12 significant digits for stable serialisation."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return None
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _emit(payload: Any, args: argparse.Namespace) -> None:
    if args.format == "csv":
        text = _to_csv(payload, args.command)
    else:
        text = json.dumps(_round12(payload), indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _to_csv(payload: Any, command: str) -> str:
    if command == "sweep":
        lines = [SWEEP_CSV_HEADER]
        for row in payload:
            lines.append(f"{row['parameter']},{row['value']:.12g},"
                         f"{row['upper']:.12g},{row['lower']:.12g}")
        return "\n".join(lines) + "\n"
    # Generic flat rendering: one key,value row per scalar leaf.
    lines = ["key,value"]
    for key, value in _flatten(payload):
        lines.append(f"{key},{value}")
    return "\n".join(lines) + "\n"


def _flatten(obj: Any, prefix: str = "") -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows.extend(_flatten(obj[k], f"{prefix}{k}."))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            rows.extend(_flatten(v, f"{prefix}{i}."))
    else:
        key = prefix[:-1]
        if isinstance(obj, float):
            rows.append((key, f"{obj:.12g}"))
        else:
            rows.append((key, str(obj)))
    return rows


if __name__ == "__main__":
    sys.exit(main())
