"""Pure-Python simulation kernel.

This is the fallback (and the readable reference) for the compiled kernel in
``_ckernel.pyx``.  The two must stay in lock-step: same RNG, same draw order,
same floating-point expressions, so that a given seed produces bit-identical
results on either backend.  Anything changed here must be changed there.

Draw order per candidate:
    1. one (0,1] uniform  -> exponential waiting time at total rate R
    2. one [0,1) uniform  -> stage label (cumulative scan of the rates)
    3. d   [0,1) uniforms -> location coordinates, each scaled by L

Membership of a stage-j candidate is checked against accepted stage-(j-1)
events only; no randomness is consumed by the check, so scan order and
indexing strategy cannot affect the stream.

Two exact shortcuts are shared with the compiled kernel:

* once ``t >= first_time[j] + sqrt(d)*L/(2*alpha)``, the earliest stage-j
  region has wrapped the whole torus, so stage-(j+1) candidates are accepted
  without scanning and further stage-j events are not stored (they can never
  change a future decision);
* a stage-j candidate with no accepted stage-(j-1) events is rejected
  without scanning.

The uniform-grid index of the compiled kernel is a pure lookup optimization
with identical accept/reject results, so this backend simply ignores
``use_grid`` and always scans.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import Xoshiro256PP, replicate_seed

NAME = "python"

STATUS_DONE = 0
STATUS_TIMEOUT_TIME = 1
STATUS_TIMEOUT_CAP = 2

_GROW = 1024


def _covered(x, t, n, times, coords, d, L, alpha):
    """Does any of the first n cones cover x at time t? (vectorized scan)"""
    if n == 0:
        return False
    r = alpha * (t - times[:n])
    dist2 = np.zeros(n)
    for i in range(d):
        delta = np.abs(coords[:n, i] - x[i])
        delta = np.minimum(delta, L - delta)
        dist2 += delta * delta
    return bool(np.any(dist2 <= r * r))


def simulate_core(
    d,
    L,
    alpha,
    mu,
    k,
    seed,
    t_max,
    cap,
    stop_at_first_k=True,
    record_events=False,
    use_grid=False,
    grid_hint=0.0,
):
    """Run one replicate of the multi-stage growth process.

    Returns (status, sigma, candidates, first_times, counts, events, rng_state)
    where events is a per-stage list of (times, coords) arrays when
    ``record_events`` is true, else None.  sigma is NaN until some site
    reaches stage k.
    """
    rng = Xoshiro256PP(seed)
    N = float(L) ** d
    total_mu = 0.0
    for m in mu:
        total_mu += m
    R = N * total_mu

    n_ev = [0] * (k + 1)  # accepted events stored, per stage (1-based)
    ev_times = [None] + [np.empty(_GROW) for _ in range(k)]
    ev_coords = [None] + [np.empty((_GROW, d)) for _ in range(k)]
    counts = [0] * (k + 1)
    first_times = [math.nan] * (k + 1)
    # time after which stage j certainly covers the whole torus
    cover_after = [math.inf] * (k + 1)
    cover_after[0] = 0.0
    wrap_time = math.sqrt(d) * L / (2.0 * alpha) if alpha > 0.0 else math.inf

    t = 0.0
    sigma = math.nan
    ncand = 0
    status = STATUS_DONE
    x = [0.0] * d

    while True:
        if ncand >= cap:
            status = STATUS_TIMEOUT_CAP
            break
        t = t + (-math.log(rng.uniform_pos()) / R)
        if t > t_max:
            if stop_at_first_k:
                status = STATUS_TIMEOUT_TIME
            break
        ncand += 1

        u = rng.uniform() * total_mu
        j = 1
        acc = mu[0]
        while u >= acc and j < k:
            acc += mu[j]
            j += 1
        for i in range(d):
            x[i] = rng.uniform() * L

        # membership in stage j-1 (stage 0 is the whole torus: cover_after[0] = 0)
        if t >= cover_after[j - 1]:
            ok = True
        elif n_ev[j - 1] == 0:
            ok = False
        else:
            ok = _covered(x, t, n_ev[j - 1], ev_times[j - 1], ev_coords[j - 1], d, L, alpha)
        if not ok:
            continue

        counts[j] += 1
        if math.isnan(first_times[j]):
            first_times[j] = t
            cover_after[j] = t + wrap_time
        if j == k:
            if math.isnan(sigma):
                sigma = t
            if stop_at_first_k:
                status = STATUS_DONE
                break
        if (j < k or record_events) and t < cover_after[j]:
            n = n_ev[j]
            if n == ev_times[j].shape[0]:
                ev_times[j] = np.resize(ev_times[j], n * 2)
                ev_coords[j] = np.resize(ev_coords[j], (n * 2, d))
            ev_times[j][n] = t
            for i in range(d):
                ev_coords[j][n, i] = x[i]
            n_ev[j] = n + 1

    events = None
    if record_events:
        events = [
            (ev_times[j][: n_ev[j]].copy(), ev_coords[j][: n_ev[j]].copy())
            for j in range(1, k + 1)
        ]
    return (
        status,
        sigma,
        ncand,
        first_times[1:],
        counts[1:],
        events,
        rng.getstate(),
    )


def hit_test_count(times, coords, d, L, alpha, t, n_samples, state):
    """Count uniform sample points covered by the union of cones.

    Consumes exactly n_samples*d uniforms from the stream in sample-major
    order.  Returns (count, new_state).
    """
    rng = Xoshiro256PP(0)
    rng.setstate(state)
    pts = np.empty((n_samples, d))
    for s in range(n_samples):
        for i in range(d):
            pts[s, i] = rng.uniform() * L

    times_a = np.asarray(times, dtype=float)
    n_ev = times_a.shape[0]
    coords_a = np.asarray(coords, dtype=float).reshape(n_ev, d)
    covered = np.zeros(n_samples, dtype=bool)
    for e in range(n_ev):
        r = alpha * (t - times_a[e])
        if r < 0.0:
            continue
        rest = ~covered
        if not rest.any():
            break
        dist2 = np.zeros(int(rest.sum()))
        sub = pts[rest]
        for i in range(d):
            delta = np.abs(sub[:, i] - coords_a[e, i])
            delta = np.minimum(delta, L - delta)
            dist2 += delta * delta
        hit = dist2 <= r * r
        idx = np.flatnonzero(rest)
        covered[idx[hit]] = True
    return int(covered.sum()), rng.getstate()


def occupancy_count(d, L, alpha, mu, stage, t, n_reps, base_seed, cap):
    """Monte Carlo count of replicates whose stage-``stage`` set covers the origin at time t."""
    origin = [0.0] * d
    hits = 0
    for i in range(n_reps):
        seed = replicate_seed(base_seed, i)
        _, _, _, _, _, events, _ = simulate_core(
            d, L, alpha, mu, stage, seed, t, cap,
            stop_at_first_k=False, record_events=True,
        )
        ev_t, ev_x = events[stage - 1]
        if ev_t.shape[0] and _covered(origin, t, ev_t.shape[0], ev_t, ev_x, d, L, alpha):
            hits += 1
    return hits
