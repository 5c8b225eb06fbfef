"""Pure-Python event-driven simulation engine.

Reference implementation of the exact piecewise-affine integrator.  The
compiled kernel in ``_kernels.pyx`` mirrors this code operation for
operation so both backends produce bit-identical trajectories and
statistics from the same seed.

Between events the queue vector moves along a constant derivative, so every
boundary-hitting time is available in closed form and statistics are
accumulated as exact segment integrals; there is no time-stepping error.
Event kinds: mode switch at the exponential deadline, a queue hitting zero,
or the finite buffer filling.  Sliding regimes (e.g. the buffer pinned full
under spillback) have derivative exactly zero toward the boundary and
therefore generate no event.
"""

from __future__ import annotations

import math

from .rng import Xoshiro256StarStar

# Topology codes shared with the compiled kernel.
TOPO_TWO_LINK = 0
TOPO_SINGLE_FINITE = 1
TOPO_SINGLE_INFINITE = 2
TOPO_MERGE = 3
TOPO_SPLIT = 4

_NQ = {0: 2, 1: 1, 2: 1, 3: 3, 4: 3}
# Index of the finite-buffer queue, -1 when every buffer is infinite.
_FIN = {0: 1, 1: 0, 2: -1, 3: 2, 4: 2}

# Parameter-vector layout (see simulate.pack_params).
P_U1, P_U2, P_LAM, P_MU, P_THETA, P_V1, P_V2, P_RA, P_RB = range(9)

# Output-statistics layout.
S_TEFF = 0          # statistics window length (horizon - warmup)
S_INT_Q = 1         # integral of the total queue over the window
S_FULL = 2          # time the finite buffer spends exactly full
S_Q1_ZERO = 3       # time the first queue spends exactly empty
S_MODE1 = 4         # time in mode 1
S_OUTFLOW = 5       # integral of the system outflow over the window
S_TERM_Q1 = 6       # terminal first-queue length
S_TERM_TOTAL = 7    # terminal total queue
S_EVENTS = 8        # number of processed events
S_MIN_Q = 9         # smallest queue value ever seen (invariance check)
S_MAX_EXCESS = 10   # largest q_finite - theta ever seen (invariance check)
S_ZERO_MODE1 = 11   # time with first queue empty while in mode 1
S_INFLOW_ALL = 12   # admitted inflow integral over [0, horizon]
S_OUTFLOW_ALL = 13  # outflow integral over [0, horizon]
S_INIT_TOTAL = 14   # initial total queue
S_INT_Q1 = 15       # integral of the first queue over the window
N_STATS = 16


def rates(topo: int, fb: int, mode: int, q, pars):
    """Discharge bookkeeping for one affine segment.

    Returns (dq, outflow, admitted_inflow, s) where dq and s are tuples
    sized for the topology.  ``fb`` selects the mode-responsive inflow
    (slot RB applies in mode 2).
    """
    u = pars[P_U1] if mode == 1 else pars[P_U2]
    theta = pars[P_THETA]

    if topo == TOPO_TWO_LINK:
        r = pars[P_RB] if (fb and mode == 2) else pars[P_RA]
        v = pars[P_V1]
        supply = v if q[0] > 0.0 else (r if r < v else v)
        if q[1] >= theta:
            s1 = supply if supply < u else u
        else:
            s1 = supply
        s2 = u if q[1] > 0.0 else (s1 if s1 < u else u)
        return (r - s1, s1 - s2), s2, r, (s1, s2)

    if topo == TOPO_SINGLE_FINITE:
        f = pars[P_RB] if (fb and mode == 2) else pars[P_RA]
        s = u if q[0] > 0.0 else (f if f < u else u)
        d = f - s
        if q[0] >= theta and d > 0.0:
            d = 0.0  # buffer full: the excess is blocked and never enters
        return (d,), s, s + d, (s,)

    if topo == TOPO_SINGLE_INFINITE:
        f = pars[P_RA]
        s = u if q[0] > 0.0 else (f if f < u else u)
        return (f - s,), s, f, (s,)

    if topo == TOPO_MERGE:
        ra, rb = pars[P_RA], pars[P_RB]
        v1, v2 = pars[P_V1], pars[P_V2]
        d1 = v1 if q[0] > 0.0 else (ra if ra < v1 else v1)
        d2 = v2 if q[1] > 0.0 else (rb if rb < v2 else v2)
        if q[2] >= theta:
            s1 = d1 if d1 < u else u
            rem = u - s1
            s2 = d2 if d2 < rem else rem
        else:
            s1 = d1
            s2 = d2
        tot = s1 + s2
        s3 = u if q[2] > 0.0 else (tot if tot < u else u)
        return (ra - s1, rb - s2, tot - s3), s3, ra + rb, (s1, s2, s3)

    if topo == TOPO_SPLIT:
        r = pars[P_RA]
        v1, v2 = pars[P_V1], pars[P_V2]
        d1 = v1 if q[0] > 0.0 else (r if r < v1 else v1)
        if q[2] >= theta:
            cap = 2.0 * u
            s1 = d1 if d1 < cap else cap
        else:
            s1 = d1
        half = 0.5 * s1
        s2 = v2 if q[1] > 0.0 else (half if half < v2 else v2)
        s3 = u if q[2] > 0.0 else (half if half < u else u)
        return (r - s1, half - s2, half - s3), s2 + s3, r, (s1, s2, s3)

    raise ValueError(f"unknown topology code {topo}")


def run_sim(topo, fb, mode0, q0, pars, horizon, warmup, seed, out, hist=None, hist_width=0.0):
    """Simulate one replication; accumulate statistics into ``out``.

    ``out`` must hold N_STATS slots.  For the infinite-buffer single link a
    histogram of queue occupation time (bin width ``hist_width``, last bin
    = overflow) may be accumulated into ``hist``.
    """
    nq = _NQ[topo]
    fin = _FIN[topo]
    theta = pars[P_THETA]
    lam = pars[P_LAM]
    mu = pars[P_MU]
    use_hist = hist is not None and topo == TOPO_SINGLE_INFINITE
    nbins = (len(hist) - 1) if use_hist else 0
    diff = [0.0] * (nbins + 1) if use_hist else None

    rng = Xoshiro256StarStar(seed)
    q = [float(q0[k]) for k in range(nq)]
    mode = mode0
    t = 0.0
    switch_at = rng.exponential(lam if mode == 1 else mu)

    init_total = 0.0
    for k in range(nq):
        init_total += q[k]

    # Accumulate in locals; `out` is written once at the end (the compiled
    # kernel relies on this to avoid shared-memory traffic in the loop).
    acc_int_q = acc_int_q1 = acc_full = acc_q1zero = 0.0
    acc_mode1 = acc_outflow = acc_zero_m1 = 0.0
    acc_inflow_all = acc_outflow_all = 0.0
    min_q = math.inf
    max_exc = -math.inf
    events = 0.0

    while t < horizon:
        dq, outflow, inflow, _ = rates(topo, fb, mode, q, pars)

        # Earliest of: end of horizon, mode switch, boundary crossings.
        dt = horizon - t
        kind = 0  # 0 end, 1 switch, 2 crossing
        cross_k = -1
        cross_to = 0.0
        dts = switch_at - t
        if dts < dt:
            dt = dts
            kind = 1
        for k in range(nq):
            dk = dq[k]
            if dk < 0.0:
                tc = q[k] / (-dk)
            elif dk > 0.0 and k == fin:
                tc = (theta - q[k]) / dk
            else:
                continue
            if tc < dt:
                dt = tc
                kind = 2
                cross_k = k
                cross_to = 0.0 if dk < 0.0 else theta

        # Whole-horizon conservation bookkeeping.
        acc_inflow_all += inflow * dt
        acc_outflow_all += outflow * dt

        # Statistics restricted to [warmup, horizon].
        t_end = t + dt
        if t_end > warmup:
            w0 = warmup if t < warmup else t
            dtw = t_end - w0
            lead = w0 - t
            for k in range(nq):
                qk = q[k] + dq[k] * lead
                contrib = qk * dtw + 0.5 * dq[k] * dtw * dtw
                acc_int_q += contrib
                if k == 0:
                    acc_int_q1 += contrib
            if fin >= 0 and q[fin] >= theta and dq[fin] == 0.0:
                acc_full += dtw
            q1_zero = q[0] == 0.0 and dq[0] == 0.0
            if q1_zero:
                acc_q1zero += dtw
                if mode == 1:
                    acc_zero_m1 += dtw
            if mode == 1:
                acc_mode1 += dtw
            acc_outflow += outflow * dtw
            if use_hist and not q1_zero:
                a = q[0] + dq[0] * lead
                b = a + dq[0] * dtw
                _hist_segment(hist, diff, nbins, hist_width, a, b, dtw)

        for k in range(nq):
            q[k] += dq[k] * dt
        if kind == 2:
            q[cross_k] = cross_to  # land exactly on the boundary
        t = t_end

        for k in range(nq):
            if q[k] < min_q:
                min_q = q[k]
        if fin >= 0:
            exc = q[fin] - theta
            if exc > max_exc:
                max_exc = exc

        if kind == 0:
            break
        events += 1.0
        if kind == 1:
            mode = 3 - mode
            switch_at = t + rng.exponential(lam if mode == 1 else mu)

    if use_hist:
        run = 0.0
        for j in range(nbins):
            run += diff[j]
            hist[j] += run * hist_width

    term = 0.0
    for k in range(nq):
        term += q[k]

    out[S_TEFF] = horizon - warmup
    out[S_INT_Q] = acc_int_q
    out[S_FULL] = acc_full
    out[S_Q1_ZERO] = acc_q1zero
    out[S_MODE1] = acc_mode1
    out[S_OUTFLOW] = acc_outflow
    out[S_TERM_Q1] = q[0]
    out[S_TERM_TOTAL] = term
    out[S_EVENTS] = events
    out[S_MIN_Q] = min_q
    out[S_MAX_EXCESS] = max_exc
    out[S_ZERO_MODE1] = acc_zero_m1
    out[S_INFLOW_ALL] = acc_inflow_all
    out[S_OUTFLOW_ALL] = acc_outflow_all
    out[S_INIT_TOTAL] = init_total
    out[S_INT_Q1] = acc_int_q1


def _hist_segment(hist, diff, nbins, width, a, b, dt):
    """Spread the occupation time of one linear segment across bins.

    Exact allocation: a segment moving from a to b spends dt/(hi-lo) per
    unit of queue length.  Full interior bins are handled with a difference
    array (folded in at the end of the run); the two partial end bins are
    added directly.
    """
    if a <= b:
        lo, hi = a, b
    else:
        lo, hi = b, a
    if hi == lo:
        j = int(lo / width)
        if j > nbins:
            j = nbins
        hist[j] += dt
        return
    dens = dt / (hi - lo)
    j_lo = int(lo / width)
    if j_lo > nbins:
        j_lo = nbins
    j_hi = int(hi / width)
    if j_hi > nbins:
        j_hi = nbins
    if j_lo == j_hi:
        hist[j_lo] += dt
        return
    hist[j_lo] += dens * ((j_lo + 1) * width - lo)
    hist[j_hi] += dens * (hi - j_hi * width)
    if j_hi > j_lo + 1:
        diff[j_lo + 1] += dens
        diff[j_hi] -= dens


def iter_trajectory(topo, fb, mode0, q0, pars, horizon, seed):
    """Yield one row per event: (t, mode, q tuple, s tuple).

    Same event sequence as run_sim with the same seed (shared rates and
    draw discipline), exposed for trajectory dumps and exactness tests.
    """
    nq = _NQ[topo]
    fin = _FIN[topo]
    theta = pars[P_THETA]
    lam = pars[P_LAM]
    mu = pars[P_MU]

    rng = Xoshiro256StarStar(seed)
    q = [float(q0[k]) for k in range(nq)]
    mode = mode0
    t = 0.0
    switch_at = rng.exponential(lam if mode == 1 else mu)

    while True:
        dq, _, _, s = rates(topo, fb, mode, q, pars)
        yield (t, mode, tuple(q), s)
        if t >= horizon:
            return

        dt = horizon - t
        kind = 0
        cross_k = -1
        cross_to = 0.0
        dts = switch_at - t
        if dts < dt:
            dt = dts
            kind = 1
        for k in range(nq):
            dk = dq[k]
            if dk < 0.0:
                tc = q[k] / (-dk)
            elif dk > 0.0 and k == fin:
                tc = (theta - q[k]) / dk
            else:
                continue
            if tc < dt:
                dt = tc
                kind = 2
                cross_k = k
                cross_to = 0.0 if dk < 0.0 else theta

        for k in range(nq):
            q[k] += dq[k] * dt
        if kind == 2:
            q[cross_k] = cross_to
        t = t + dt
        if kind == 1:
            mode = 3 - mode
            switch_at = t + rng.exponential(lam if mode == 1 else mu)
