"""Simulation backend selection.

The compiled kernel is preferred when importable; the pure-Python engine is
a drop-in fallback producing bit-identical results.  Set
``TANDEMFLUID_FORCE_PYTHON=1`` to force the fallback (used by the parity
tests and the backend benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import engine_py


def _load_compiled():
    if os.environ.get("TANDEMFLUID_FORCE_PYTHON"):
        return None
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_COMPILED = _load_compiled()


def active_backend() -> str:
    return "compiled" if _COMPILED is not None else "python"


def run_sim(topo, fb, mode0, q0, pars, horizon, warmup, seed, out, hist=None, hist_width=0.0, force_python=False):
    """Run one replication on the active (or forced pure-Python) backend.

    ``out`` is a float64 array of engine_py.N_STATS slots; ``hist`` an
    optional float64 histogram array for the infinite-buffer topology.
    """
    if _COMPILED is None or force_python:
        engine_py.run_sim(topo, fb, mode0, q0, pars, horizon, warmup, seed, out,
                          hist=hist, hist_width=hist_width)
        return
    use_hist = hist is not None
    if hist is None:
        hist = np.zeros(1)
    _COMPILED.run_sim(topo, fb, mode0,
                      np.ascontiguousarray(q0, dtype=np.float64),
                      np.ascontiguousarray(pars, dtype=np.float64),
                      float(horizon), float(warmup), int(seed),
                      out, hist, float(hist_width), use_hist)


def kernel_releases_gil() -> bool:
    """True when replications can run on concurrent threads effectively."""
    return _COMPILED is not None
