# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernel.

Lock-step mirror of ``_pykernel``: same xoshiro256++ stream, same draw order,
same floating-point expressions in the same order, so a given seed produces
bit-identical results on either backend.  See the _pykernel module docstring
for the draw-order contract; anything changed there must be changed here.

The one addition over the Python kernel is the opt-in uniform-grid index
(``use_grid`` + ``grid_hint``): stored events are bucketed into cells of
width L/ceil(L/(2*alpha*grid_hint)) and membership queries only walk the
cells within the largest live cone radius (plus slack cells that absorb
floating-point placement at cell boundaries).  Every candidate event found
this way is tested with the exact scan predicate, so accept/reject decisions
are identical to the linear scan -- the grid changes lookup cost only.
"""

import numpy as np

from libc.math cimport INFINITY, NAN, ceil, fabs, isnan, log, pow, sqrt
from libc.stdint cimport int64_t, uint64_t
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy

NAME = "compiled"

STATUS_DONE = 0
STATUS_TIMEOUT_TIME = 1
STATUS_TIMEOUT_CAP = 2

cdef enum:
    _GROW = 1024
    _MAX_CELLS = 1 << 20
    _DONE = 0
    _TIMEOUT_TIME = 1
    _TIMEOUT_CAP = 2

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef double INV_2_53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# RNG (mirror of rng.py)

cdef inline uint64_t _splitmix64(uint64_t z) noexcept nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline void rng_seed(Rng* r, uint64_t seed) noexcept nogil:
    r.s0 = _splitmix64(seed + GOLDEN)
    r.s1 = _splitmix64(seed + 2 * GOLDEN)
    r.s2 = _splitmix64(seed + 3 * GOLDEN)
    r.s3 = _splitmix64(seed + 4 * GOLDEN)
    if r.s0 == 0 and r.s1 == 0 and r.s2 == 0 and r.s3 == 0:
        r.s0 = GOLDEN


cdef inline uint64_t rng_next(Rng* r) noexcept nogil:
    cdef uint64_t result = _rotl(r.s0 + r.s3, 23) + r.s0
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


cdef inline double rng_uniform(Rng* r) noexcept nogil:
    return <double>(rng_next(r) >> 11) * INV_2_53


cdef inline double rng_uniform_pos(Rng* r) noexcept nogil:
    return <double>((rng_next(r) >> 11) + 1) * INV_2_53


# ---------------------------------------------------------------------------
# membership

cdef inline bint _covered_scan(double* xs, double t, int64_t n,
                               double* et, double* ex,
                               int d, double L, double alpha) noexcept nogil:
    """Newest-first scan with early exit; exact predicate, no RNG."""
    cdef int64_t e
    cdef int i
    cdef double r, dist2, delta, flipped
    for e in range(n - 1, -1, -1):
        r = alpha * (t - et[e])
        dist2 = 0.0
        for i in range(d):
            delta = fabs(ex[e * d + i] - xs[i])
            flipped = L - delta
            if flipped < delta:
                delta = flipped
            dist2 += delta * delta
        if dist2 <= r * r:
            return True
    return False


cdef inline int64_t _cell_of(double* xs, int d, int64_t ncell, double w) noexcept nogil:
    cdef int64_t idx = 0, c
    cdef int i
    for i in range(d):
        c = <int64_t>(xs[i] / w)
        if c >= ncell:
            c = ncell - 1
        if c < 0:
            c = 0
        idx = idx * ncell + c
    return idx


cdef bint _covered_grid(double* xs, double t, double* et, double* ex,
                        int64_t* head, int64_t* nxt,
                        int d, double L, double alpha,
                        int64_t ncell, double w,
                        int64_t* cbase, int64_t* ccount, int64_t* ccur) noexcept nogil:
    """Grid-indexed membership: identical boolean to _covered_scan.

    Every stored event within reach of ``xs`` sits in a cell at per-dim
    circular offset <= floor(r_max/w) + 2 from xs's cell (one cell of slack
    for the interval gap, one more because floating-point division can
    misplace either endpoint by a cell at a boundary); we search + 4 and
    recheck each candidate with the exact predicate.
    """
    cdef double r_max = alpha * (t - et[0])
    cdef int64_t span = <int64_t>(r_max / w) + 4
    cdef int64_t cx, m, idx, e
    cdef int i
    cdef double r, dist2, delta, flipped
    for i in range(d):
        cx = <int64_t>(xs[i] / w)
        if cx >= ncell:
            cx = ncell - 1
        if cx < 0:
            cx = 0
        if 2 * span + 1 >= ncell:
            cbase[i] = 0
            ccount[i] = ncell
        else:
            cbase[i] = cx - span
            ccount[i] = 2 * span + 1
        ccur[i] = 0
    while True:
        idx = 0
        for i in range(d):
            m = (cbase[i] + ccur[i]) % ncell
            if m < 0:
                m += ncell
            idx = idx * ncell + m
        e = head[idx]
        while e != -1:
            r = alpha * (t - et[e])
            dist2 = 0.0
            for i in range(d):
                delta = fabs(ex[e * d + i] - xs[i])
                flipped = L - delta
                if flipped < delta:
                    delta = flipped
                dist2 += delta * delta
            if dist2 <= r * r:
                return True
            e = nxt[e]
        i = d - 1
        while i >= 0:
            ccur[i] += 1
            if ccur[i] < ccount[i]:
                break
            ccur[i] = 0
            i -= 1
        if i < 0:
            return False


# ---------------------------------------------------------------------------
# core candidate loop

cdef int _core(int d, double L, double alpha, double* mu, int k,
               double t_max, int64_t cap,
               bint stop_at_first_k, bint record_events,
               bint use_grid, double grid_hint,
               double* sigma_out, int64_t* ncand_out,
               double* first_times, int64_t* counts,
               double** ev_t, double** ev_x, int64_t* n_ev, int64_t* ev_cap,
               Rng* rng) noexcept nogil:
    """Run one replicate on caller-owned buffers; returns status or -1 (OOM).

    Buffer arrays are indexed 1..k; NULL entries are allocated here (at
    capacity _GROW) and grown by doubling, and stay owned by the caller so
    repeated calls can reuse them.  n_ev / counts / first_times are reset.
    """
    cdef int j, i, status
    cdef int64_t n, ncand = 0, ntotal, max_per_dim
    cdef double t = 0.0, sigma = NAN, u, acc, total_mu = 0.0, N, R, wrap_time
    cdef double cells
    cdef bint ok, gon
    cdef double* x = NULL
    cdef double* cover_after = NULL
    cdef int64_t** g_head = NULL
    cdef int64_t** g_nxt = NULL
    cdef int64_t* scratch = NULL
    cdef int64_t ncell = 0
    cdef double w = 0.0
    cdef int64_t cell

    for j in range(k):
        total_mu += mu[j]
    N = pow(L, <double>d)
    R = N * total_mu
    if alpha > 0.0:
        wrap_time = sqrt(<double>d) * L / (2.0 * alpha)
    else:
        wrap_time = INFINITY

    x = <double*>malloc(d * sizeof(double))
    cover_after = <double*>malloc((k + 1) * sizeof(double))
    if x == NULL or cover_after == NULL:
        free(x); free(cover_after)
        return -1
    cover_after[0] = 0.0
    for j in range(1, k + 1):
        cover_after[j] = INFINITY
        first_times[j] = NAN
        counts[j] = 0
        n_ev[j] = 0
        if ev_t[j] == NULL:
            ev_t[j] = <double*>malloc(_GROW * sizeof(double))
            ev_x[j] = <double*>malloc(_GROW * d * sizeof(double))
            ev_cap[j] = _GROW
            if ev_t[j] == NULL or ev_x[j] == NULL:
                free(x); free(cover_after)
                return -1

    # optional spatial index over stages 1..k-1 (the ones queried)
    gon = use_grid and grid_hint > 0.0 and alpha > 0.0 and k >= 2
    if gon:
        cells = L / (2.0 * alpha * grid_hint)
        ncell = <int64_t>ceil(cells)
        max_per_dim = <int64_t>pow(<double>_MAX_CELLS, 1.0 / d)
        if max_per_dim < 1:
            max_per_dim = 1
        if ncell > max_per_dim:
            ncell = max_per_dim
        if ncell < 2:
            gon = False
    if gon:
        w = L / <double>ncell
        ntotal = 1
        for i in range(d):
            ntotal *= ncell
        g_head = <int64_t**>malloc((k + 1) * sizeof(int64_t*))
        g_nxt = <int64_t**>malloc((k + 1) * sizeof(int64_t*))
        scratch = <int64_t*>malloc(3 * d * sizeof(int64_t))
        if g_head == NULL or g_nxt == NULL or scratch == NULL:
            free(x); free(cover_after); free(g_head); free(g_nxt); free(scratch)
            return -1
        for j in range(k + 1):
            g_head[j] = NULL
            g_nxt[j] = NULL
        for j in range(1, k):
            g_head[j] = <int64_t*>malloc(ntotal * sizeof(int64_t))
            g_nxt[j] = <int64_t*>malloc(ev_cap[j] * sizeof(int64_t))
            if g_head[j] == NULL or g_nxt[j] == NULL:
                status = -1
                sigma_out[0] = sigma
                ncand_out[0] = ncand
                _free_grid(g_head, g_nxt, k)
                free(x); free(cover_after); free(scratch)
                return status
            for cell in range(ntotal):
                g_head[j][cell] = -1

    status = _DONE
    while True:
        if ncand >= cap:
            status = _TIMEOUT_CAP
            break
        t = t + (-log(rng_uniform_pos(rng)) / R)
        if t > t_max:
            if stop_at_first_k:
                status = _TIMEOUT_TIME
            break
        ncand += 1

        u = rng_uniform(rng) * total_mu
        j = 1
        acc = mu[0]
        while u >= acc and j < k:
            acc += mu[j]
            j += 1
        for i in range(d):
            x[i] = rng_uniform(rng) * L

        if t >= cover_after[j - 1]:
            ok = True
        elif n_ev[j - 1] == 0:
            ok = False
        elif gon and g_head[j - 1] != NULL:
            ok = _covered_grid(x, t, ev_t[j - 1], ev_x[j - 1],
                               g_head[j - 1], g_nxt[j - 1],
                               d, L, alpha, ncell, w,
                               scratch, scratch + d, scratch + 2 * d)
        else:
            ok = _covered_scan(x, t, n_ev[j - 1], ev_t[j - 1], ev_x[j - 1],
                               d, L, alpha)
        if not ok:
            continue

        counts[j] += 1
        if isnan(first_times[j]):
            first_times[j] = t
            cover_after[j] = t + wrap_time
        if j == k:
            if isnan(sigma):
                sigma = t
            if stop_at_first_k:
                status = _DONE
                break
        if (j < k or record_events) and t < cover_after[j]:
            n = n_ev[j]
            if n == ev_cap[j]:
                ev_t[j] = <double*>realloc(ev_t[j], 2 * n * sizeof(double))
                ev_x[j] = <double*>realloc(ev_x[j], 2 * n * d * sizeof(double))
                if ev_t[j] == NULL or ev_x[j] == NULL:
                    status = -1
                    break
                if gon and g_nxt[j] != NULL:
                    g_nxt[j] = <int64_t*>realloc(g_nxt[j], 2 * n * sizeof(int64_t))
                    if g_nxt[j] == NULL:
                        status = -1
                        break
                ev_cap[j] = 2 * n
            ev_t[j][n] = t
            for i in range(d):
                ev_x[j][n * d + i] = x[i]
            if gon and j < k and g_head[j] != NULL:
                cell = _cell_of(x, d, ncell, w)
                g_nxt[j][n] = g_head[j][cell]
                g_head[j][cell] = n
            n_ev[j] = n + 1

    sigma_out[0] = sigma
    ncand_out[0] = ncand
    if gon:
        _free_grid(g_head, g_nxt, k)
        free(scratch)
    else:
        free(g_head); free(g_nxt); free(scratch)
    free(x)
    free(cover_after)
    return status


cdef void _free_grid(int64_t** g_head, int64_t** g_nxt, int k) noexcept nogil:
    cdef int j
    if g_head != NULL:
        for j in range(k + 1):
            free(g_head[j])
        free(g_head)
    if g_nxt != NULL:
        for j in range(k + 1):
            free(g_nxt[j])
        free(g_nxt)


cdef void _free_buffers(double** ev_t, double** ev_x,
                        int64_t* n_ev, int64_t* ev_cap, int k) noexcept nogil:
    cdef int j
    if ev_t != NULL:
        for j in range(k + 1):
            free(ev_t[j])
        free(ev_t)
    if ev_x != NULL:
        for j in range(k + 1):
            free(ev_x[j])
        free(ev_x)
    free(n_ev)
    free(ev_cap)


cdef int _alloc_buffers(int k, double*** ev_t, double*** ev_x,
                        int64_t** n_ev, int64_t** ev_cap) noexcept nogil:
    cdef int j
    ev_t[0] = <double**>malloc((k + 1) * sizeof(double*))
    ev_x[0] = <double**>malloc((k + 1) * sizeof(double*))
    n_ev[0] = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    ev_cap[0] = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    if ev_t[0] == NULL or ev_x[0] == NULL or n_ev[0] == NULL or ev_cap[0] == NULL:
        return -1
    for j in range(k + 1):
        ev_t[0][j] = NULL
        ev_x[0][j] = NULL
        n_ev[0][j] = 0
        ev_cap[0][j] = 0
    return 0


def simulate_core(int d, double L, double alpha, mu, int k, seed, double t_max,
                  int64_t cap, bint stop_at_first_k=True, bint record_events=False,
                  bint use_grid=False, double grid_hint=0.0):
    """Run one replicate; see _pykernel.simulate_core for the contract."""
    cdef uint64_t seed_u = <uint64_t>(<unsigned long long>(seed & 0xFFFFFFFFFFFFFFFF))
    cdef double* mu_c = <double*>malloc(k * sizeof(double))
    cdef double* first_times = <double*>malloc((k + 1) * sizeof(double))
    cdef int64_t* counts = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    cdef double** ev_t = NULL
    cdef double** ev_x = NULL
    cdef int64_t* n_ev = NULL
    cdef int64_t* ev_cap = NULL
    cdef double sigma = NAN
    cdef int64_t ncand = 0
    cdef Rng rng
    cdef int status, j
    cdef int64_t n
    cdef double[::1] tv
    cdef double[:, ::1] xv

    if mu_c == NULL or first_times == NULL or counts == NULL:
        free(mu_c); free(first_times); free(counts)
        raise MemoryError
    if _alloc_buffers(k, &ev_t, &ev_x, &n_ev, &ev_cap) != 0:
        free(mu_c); free(first_times); free(counts)
        _free_buffers(ev_t, ev_x, n_ev, ev_cap, k)
        raise MemoryError
    for j in range(k):
        mu_c[j] = mu[j]
    rng_seed(&rng, seed_u)

    status = _core(d, L, alpha, mu_c, k, t_max, cap,
                   stop_at_first_k, record_events, use_grid, grid_hint,
                   &sigma, &ncand, first_times, counts,
                   ev_t, ev_x, n_ev, ev_cap, &rng)
    if status < 0:
        free(mu_c); free(first_times); free(counts)
        _free_buffers(ev_t, ev_x, n_ev, ev_cap, k)
        raise MemoryError

    events = None
    if record_events:
        events = []
        for j in range(1, k + 1):
            n = n_ev[j]
            times_arr = np.empty(n, dtype=np.float64)
            coords_arr = np.empty((n, d), dtype=np.float64)
            if n > 0:
                tv = times_arr
                xv = coords_arr
                memcpy(&tv[0], ev_t[j], n * sizeof(double))
                memcpy(&xv[0, 0], ev_x[j], n * d * sizeof(double))
            events.append((times_arr, coords_arr))

    out_first = [first_times[j] for j in range(1, k + 1)]
    out_counts = [counts[j] for j in range(1, k + 1)]
    state = (rng.s0, rng.s1, rng.s2, rng.s3)
    free(mu_c); free(first_times); free(counts)
    _free_buffers(ev_t, ev_x, n_ev, ev_cap, k)
    return status, sigma, ncand, out_first, out_counts, events, state


def hit_test_count(times, coords, int d, double L, double alpha, double t,
                   int64_t n_samples, state):
    """Count covered sample points; see _pykernel.hit_test_count."""
    cdef Rng rng
    rng.s0 = <uint64_t>(<unsigned long long>(state[0] & 0xFFFFFFFFFFFFFFFF))
    rng.s1 = <uint64_t>(<unsigned long long>(state[1] & 0xFFFFFFFFFFFFFFFF))
    rng.s2 = <uint64_t>(<unsigned long long>(state[2] & 0xFFFFFFFFFFFFFFFF))
    rng.s3 = <uint64_t>(<unsigned long long>(state[3] & 0xFFFFFFFFFFFFFFFF))

    pts_arr = np.empty((n_samples, d), dtype=np.float64)
    cdef double[:, ::1] pts = pts_arr
    cdef int64_t s
    cdef int i
    for s in range(n_samples):
        for i in range(d):
            pts[s, i] = rng_uniform(&rng) * L

    times_a = np.ascontiguousarray(np.asarray(times, dtype=np.float64))
    cdef int64_t n_ev = times_a.shape[0]
    coords_a = np.ascontiguousarray(np.asarray(coords, dtype=np.float64).reshape(n_ev, d))
    cdef double[::1] et = times_a
    cdef double[:, ::1] ex = coords_a

    cdef int64_t count = 0, e
    cdef double r, dist2, delta, flipped
    cdef bint hit
    with nogil:
        for s in range(n_samples):
            hit = False
            for e in range(n_ev):
                r = alpha * (t - et[e])
                if r < 0.0:
                    continue
                dist2 = 0.0
                for i in range(d):
                    delta = fabs(pts[s, i] - ex[e, i])
                    flipped = L - delta
                    if flipped < delta:
                        delta = flipped
                    dist2 += delta * delta
                if dist2 <= r * r:
                    hit = True
                    break
            if hit:
                count += 1
    return int(count), (rng.s0, rng.s1, rng.s2, rng.s3)


def occupancy_count(int d, double L, double alpha, mu, int stage, double t,
                    int64_t n_reps, base_seed, int64_t cap):
    """Count replicates whose stage-``stage`` set covers the origin at time t."""
    cdef uint64_t base = <uint64_t>(<unsigned long long>(base_seed & 0xFFFFFFFFFFFFFFFF))
    cdef int k = stage
    cdef double* mu_c = <double*>malloc(k * sizeof(double))
    cdef double* first_times = <double*>malloc((k + 1) * sizeof(double))
    cdef int64_t* counts = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    cdef double* origin = <double*>malloc(d * sizeof(double))
    cdef double** ev_t = NULL
    cdef double** ev_x = NULL
    cdef int64_t* n_ev = NULL
    cdef int64_t* ev_cap = NULL
    cdef double sigma = NAN
    cdef int64_t ncand = 0, rep, hits = 0
    cdef Rng rng
    cdef int status = 0, j, oom = 0
    cdef uint64_t seed_u

    if mu_c == NULL or first_times == NULL or counts == NULL or origin == NULL:
        free(mu_c); free(first_times); free(counts); free(origin)
        raise MemoryError
    if _alloc_buffers(k, &ev_t, &ev_x, &n_ev, &ev_cap) != 0:
        free(mu_c); free(first_times); free(counts); free(origin)
        _free_buffers(ev_t, ev_x, n_ev, ev_cap, k)
        raise MemoryError
    for j in range(k):
        mu_c[j] = mu[j]
    for j in range(d):
        origin[j] = 0.0

    with nogil:
        for rep in range(n_reps):
            seed_u = _splitmix64(base + (<uint64_t>(rep + 1)) * GOLDEN)
            rng_seed(&rng, seed_u)
            status = _core(d, L, alpha, mu_c, k, t, cap,
                           False, True, False, 0.0,
                           &sigma, &ncand, first_times, counts,
                           ev_t, ev_x, n_ev, ev_cap, &rng)
            if status < 0:
                oom = 1
                break
            if n_ev[k] > 0 and _covered_scan(origin, t, n_ev[k],
                                             ev_t[k], ev_x[k], d, L, alpha):
                hits += 1

    free(mu_c); free(first_times); free(counts); free(origin)
    _free_buffers(ev_t, ev_x, n_ev, ev_cap, k)
    if oom:
        raise MemoryError
    return int(hits)
