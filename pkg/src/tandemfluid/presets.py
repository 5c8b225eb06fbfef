"""Named parameter presets usable from the CLI and tests.

Keys follow the JSON config schema: v, u1, u2, lambda, mu, theta plus the
inflow (r, or r1/r2 for mode-responsive control) and, for the merge/split
topologies, the second constant capacity v2 and the topology name.
"""

from __future__ import annotations

from typing import Any

PRESETS: dict[str, dict[str, Any]] = {
    # Baseline two-link system.
    "nominal": {
        "v": 0.75, "u1": 1.0, "u2": 0.5, "lambda": 1.0, "mu": 1.0, "theta": 1.0,
    },
    # Constant inflow matching the worst-case average capacity of the
    # zero-buffer limit; stable but with persistent queues.
    "paper-s1": {
        "v": 0.75, "u1": 1.0, "u2": 0.5, "lambda": 1.0, "mu": 1.0, "theta": 1.0,
        "r": 0.625,
    },
    # Mode-responsive control: full capacity in the good mode, reduced in
    # the degraded mode; stable with zero queues.
    "paper-s2": {
        "v": 0.75, "u1": 1.0, "u2": 0.5, "lambda": 1.0, "mu": 1.0, "theta": 1.0,
        "r1": 0.75, "r2": 0.5,
    },
    # Split counterexample: each route carries less than its average
    # capacity, yet blocking by the zero-buffer switching branch starves
    # the whole junction and the upstream queue diverges.
    "paper-split": {
        "topology": "split",
        "v": 2.0, "v2": 1.0, "u1": 1.0, "u2": 0.5, "lambda": 1.0, "mu": 1.0,
        "theta": 0.0, "r": 1.6,
    },
    # Merge counterexample: total inflow below the low capacity, but the
    # distribution overloads upstream link 1 (r1 > v1).
    "paper-merge": {
        "topology": "merge",
        "v": 0.2, "v2": 1.0, "u1": 1.0, "u2": 0.5, "lambda": 1.0, "mu": 1.0,
        "theta": 1.0, "r1": 0.3, "r2": 0.1,
    },
}
