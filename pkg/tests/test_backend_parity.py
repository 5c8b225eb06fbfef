"""Bit-level equivalence of the compiled kernel and the pure-Python engine."""

import numpy as np
import pytest

from tandemfluid import backend, engine_py
from tandemfluid.engine_py import N_STATS

pytestmark = pytest.mark.skipif(backend.active_backend() != "compiled",
                                reason="compiled kernel not built")


def _pars(**kw):
    pars = np.zeros(9)
    pars[engine_py.P_U1] = kw.get("u1", 1.0)
    pars[engine_py.P_U2] = kw.get("u2", 0.5)
    pars[engine_py.P_LAM] = kw.get("lam", 1.0)
    pars[engine_py.P_MU] = kw.get("mu", 1.0)
    pars[engine_py.P_THETA] = kw.get("theta", 1.0)
    pars[engine_py.P_V1] = kw.get("v1", 0.75)
    pars[engine_py.P_V2] = kw.get("v2", 1.0)
    pars[engine_py.P_RA] = kw.get("ra", 0.65)
    pars[engine_py.P_RB] = kw.get("rb", 0.5)
    return pars


CASES = [
    (engine_py.TOPO_TWO_LINK, 0, _pars()),
    (engine_py.TOPO_TWO_LINK, 1, _pars(ra=0.75, rb=0.5)),
    (engine_py.TOPO_SINGLE_FINITE, 0, _pars(ra=0.7)),
    (engine_py.TOPO_SINGLE_INFINITE, 0, _pars(ra=0.7, theta=np.inf)),
    (engine_py.TOPO_MERGE, 0, _pars(v1=0.2, ra=0.3, rb=0.1)),
    (engine_py.TOPO_SPLIT, 0, _pars(v1=2.0, ra=1.6, theta=0.0)),
]


@pytest.mark.parametrize("topo,fb,pars", CASES)
@pytest.mark.parametrize("seed", [1, 982451653])
def test_stats_bitwise_equal(topo, fb, pars, seed):
    q0 = np.zeros(3)
    out_c = np.zeros(N_STATS)
    out_p = np.zeros(N_STATS)
    backend.run_sim(topo, fb, 1, q0, pars, 5000.0, 500.0, seed, out_c)
    backend.run_sim(topo, fb, 1, q0, pars, 5000.0, 500.0, seed, out_p, force_python=True)
    assert out_c.tolist() == out_p.tolist()


def test_histogram_bitwise_equal():
    pars = _pars(ra=0.7, theta=np.inf)
    q0 = np.zeros(3)
    nbins = 500
    width = 10.0 / nbins
    out_c = np.zeros(N_STATS)
    out_p = np.zeros(N_STATS)
    h_c = np.zeros(nbins + 1)
    h_p = np.zeros(nbins + 1)
    backend.run_sim(engine_py.TOPO_SINGLE_INFINITE, 0, 1, q0, pars, 20000.0, 100.0,
                    777, out_c, hist=h_c, hist_width=width)
    backend.run_sim(engine_py.TOPO_SINGLE_INFINITE, 0, 1, q0, pars, 20000.0, 100.0,
                    777, out_p, hist=h_p, hist_width=width, force_python=True)
    assert out_c.tolist() == out_p.tolist()
    assert h_c.tolist() == h_p.tolist()
    # histogram plus atom accounts for the whole stats window
    teff = 20000.0 - 100.0
    assert h_c.sum() + out_c[engine_py.S_Q1_ZERO] == pytest.approx(teff, rel=1e-9)


def test_rng_streams_match():
    from tandemfluid.rng import Xoshiro256StarStar

    rng = Xoshiro256StarStar(123456789)
    draws_py = [rng.exponential(1.0) for _ in range(5)]
    # the kernel consumes one exponential per mode entry; replicate via a
    # zero-horizon trick is awkward, so check the Python RNG against its
    # own reinitialisation plus the kernel's first switch time indirectly:
    # a two-link run with no crossings (zero inflow from empty) has its
    # first mode-switch at exactly the first exponential draw.
    pars = _pars(ra=0.0)
    q0 = np.zeros(3)
    out = np.zeros(N_STATS)
    horizon = draws_py[0] / 2.0  # end before the first switch
    backend.run_sim(engine_py.TOPO_TWO_LINK, 0, 1, q0, pars, horizon, 0.0, 123456789, out)
    assert out[engine_py.S_EVENTS] == 0.0
    horizon = draws_py[0] * 1.0000001  # end just after it
    backend.run_sim(engine_py.TOPO_TWO_LINK, 0, 1, q0, pars, horizon, 0.0, 123456789, out)
    assert out[engine_py.S_EVENTS] == 1.0
