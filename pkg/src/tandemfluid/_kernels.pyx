# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled event-driven simulation kernel.

Mirrors engine_py.run_sim operation for operation (same RNG, same float-op
order) so both backends produce bit-identical results; built with
-ffp-contract=off to keep that true.  The event loop runs without the GIL,
so replications can execute on real threads.
"""

from libc.math cimport log, INFINITY
from libc.stdlib cimport malloc, free

ctypedef unsigned long long u64

cdef u64 _GOLDEN = <u64>0x9E3779B97F4A7C15
cdef double _INV53 = 1.0 / 9007199254740992.0

DEF TOPO_TWO_LINK = 0
DEF TOPO_SINGLE_FINITE = 1
DEF TOPO_SINGLE_INFINITE = 2
DEF TOPO_MERGE = 3
DEF TOPO_SPLIT = 4

DEF P_U1 = 0
DEF P_U2 = 1
DEF P_LAM = 2
DEF P_MU = 3
DEF P_THETA = 4
DEF P_V1 = 5
DEF P_V2 = 6
DEF P_RA = 7
DEF P_RB = 8

DEF S_TEFF = 0
DEF S_INT_Q = 1
DEF S_FULL = 2
DEF S_Q1_ZERO = 3
DEF S_MODE1 = 4
DEF S_OUTFLOW = 5
DEF S_TERM_Q1 = 6
DEF S_TERM_TOTAL = 7
DEF S_EVENTS = 8
DEF S_MIN_Q = 9
DEF S_MAX_EXCESS = 10
DEF S_ZERO_MODE1 = 11
DEF S_INFLOW_ALL = 12
DEF S_OUTFLOW_ALL = 13
DEF S_INIT_TOTAL = 14
DEF S_INT_Q1 = 15
DEF N_STATS = 16


cdef struct Rng:
    u64 s0
    u64 s1
    u64 s2
    u64 s3


cdef inline u64 _splitmix_next(u64* state) nogil:
    cdef u64 z
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline u64 _rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline void _rng_init(Rng* r, u64 seed) nogil:
    cdef u64 state = seed
    r.s0 = _splitmix_next(&state)
    r.s1 = _splitmix_next(&state)
    r.s2 = _splitmix_next(&state)
    r.s3 = _splitmix_next(&state)


cdef inline u64 _rng_next(Rng* r) nogil:
    cdef u64 result = _rotl(r.s1 * <u64>5, 7) * <u64>9
    cdef u64 t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


cdef inline double _rng_exp(Rng* r, double rate) nogil:
    cdef double u = <double>(_rng_next(r) >> 11) * _INV53
    return -log(1.0 - u) / rate


cdef inline void _rates(int topo, int fb, int mode, double* q, double* pars,
                        double* dq, double* outflow, double* inflow) nogil:
    cdef double u = pars[P_U1] if mode == 1 else pars[P_U2]
    cdef double theta = pars[P_THETA]
    cdef double r, v, v1, v2, supply, s1, s2, s3, f, s, d
    cdef double ra, rb, d1, d2, rem, tot, cap, half

    if topo == TOPO_TWO_LINK:
        r = pars[P_RB] if (fb and mode == 2) else pars[P_RA]
        v = pars[P_V1]
        supply = v if q[0] > 0.0 else (r if r < v else v)
        if q[1] >= theta:
            s1 = supply if supply < u else u
        else:
            s1 = supply
        s2 = u if q[1] > 0.0 else (s1 if s1 < u else u)
        dq[0] = r - s1
        dq[1] = s1 - s2
        outflow[0] = s2
        inflow[0] = r
    elif topo == TOPO_SINGLE_FINITE:
        f = pars[P_RB] if (fb and mode == 2) else pars[P_RA]
        s = u if q[0] > 0.0 else (f if f < u else u)
        d = f - s
        if q[0] >= theta and d > 0.0:
            d = 0.0
        dq[0] = d
        outflow[0] = s
        inflow[0] = s + d
    elif topo == TOPO_SINGLE_INFINITE:
        f = pars[P_RA]
        s = u if q[0] > 0.0 else (f if f < u else u)
        dq[0] = f - s
        outflow[0] = s
        inflow[0] = f
    elif topo == TOPO_MERGE:
        ra = pars[P_RA]
        rb = pars[P_RB]
        v1 = pars[P_V1]
        v2 = pars[P_V2]
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
        dq[0] = ra - s1
        dq[1] = rb - s2
        dq[2] = tot - s3
        outflow[0] = s3
        inflow[0] = ra + rb
    else:
        r = pars[P_RA]
        v1 = pars[P_V1]
        v2 = pars[P_V2]
        d1 = v1 if q[0] > 0.0 else (r if r < v1 else v1)
        if q[2] >= theta:
            cap = 2.0 * u
            s1 = d1 if d1 < cap else cap
        else:
            s1 = d1
        half = 0.5 * s1
        s2 = v2 if q[1] > 0.0 else (half if half < v2 else v2)
        s3 = u if q[2] > 0.0 else (half if half < u else u)
        dq[0] = r - s1
        dq[1] = half - s2
        dq[2] = half - s3
        outflow[0] = s2 + s3
        inflow[0] = r


cdef inline void _hist_segment(double* hist, double* diff, Py_ssize_t nbins,
                               double width, double a, double b, double dt) nogil:
    cdef double lo, hi, dens
    cdef Py_ssize_t j, j_lo, j_hi
    if a <= b:
        lo = a
        hi = b
    else:
        lo = b
        hi = a
    if hi == lo:
        j = <Py_ssize_t>(lo / width)
        if j > nbins:
            j = nbins
        hist[j] += dt
        return
    dens = dt / (hi - lo)
    j_lo = <Py_ssize_t>(lo / width)
    if j_lo > nbins:
        j_lo = nbins
    j_hi = <Py_ssize_t>(hi / width)
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


def run_sim(int topo, int fb, int mode0, double[::1] q0, double[::1] pars,
            double horizon, double warmup, u64 seed, double[::1] out,
            double[::1] hist, double hist_width, bint use_hist):
    cdef int nq
    cdef int fin
    if topo == TOPO_TWO_LINK:
        nq = 2; fin = 1
    elif topo == TOPO_SINGLE_FINITE:
        nq = 1; fin = 0
    elif topo == TOPO_SINGLE_INFINITE:
        nq = 1; fin = -1
    else:
        nq = 3; fin = 2

    cdef double theta = pars[P_THETA]
    cdef double lam = pars[P_LAM]
    cdef double mu = pars[P_MU]
    cdef Py_ssize_t nbins = hist.shape[0] - 1 if use_hist else 0
    cdef double* diff = NULL

    cdef Rng rng
    cdef double q[3]
    cdef double dq[3]
    cdef double outflow = 0.0
    cdef double inflow = 0.0
    cdef int mode = mode0
    cdef double t = 0.0
    cdef double switch_at
    cdef double events = 0.0
    cdef double dt, dts, tc, dk, t_end, w0, dtw, lead, qk, contrib, a, b
    cdef double init_total, term, run, exc, cross_to
    cdef int i, k, kind, cross_k
    cdef bint q1_zero
    # Loop accumulators stay in locals; `out` is written once at the end so
    # concurrent replications never touch shared cache lines in the loop.
    cdef double acc_int_q = 0.0, acc_int_q1 = 0.0, acc_full = 0.0
    cdef double acc_q1zero = 0.0, acc_mode1 = 0.0, acc_outflow = 0.0
    cdef double acc_zero_m1 = 0.0, acc_inflow_all = 0.0, acc_outflow_all = 0.0
    cdef double min_q = INFINITY
    cdef double max_exc = -INFINITY

    use_hist = use_hist and topo == TOPO_SINGLE_INFINITE
    if use_hist:
        diff = <double*>malloc((nbins + 1) * sizeof(double))
        if diff == NULL:
            raise MemoryError()

    with nogil:
        if use_hist:
            for i in range(<int>nbins + 1):
                diff[i] = 0.0
        _rng_init(&rng, seed)
        for k in range(nq):
            q[k] = q0[k]
        switch_at = _rng_exp(&rng, lam if mode == 1 else mu)

        init_total = 0.0
        for k in range(nq):
            init_total += q[k]

        while t < horizon:
            _rates(topo, fb, mode, q, &pars[0], dq, &outflow, &inflow)

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

            acc_inflow_all += inflow * dt
            acc_outflow_all += outflow * dt

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
                    _hist_segment(&hist[0], diff, nbins, hist_width, a, b, dtw)

            for k in range(nq):
                q[k] += dq[k] * dt
            if kind == 2:
                q[cross_k] = cross_to
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
                switch_at = t + _rng_exp(&rng, lam if mode == 1 else mu)

        if use_hist:
            run = 0.0
            for i in range(<int>nbins):
                run += diff[i]
                hist[i] += run * hist_width

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

    if diff != NULL:
        free(diff)
