"""Exact event-driven simulation of the multi-stage mutation process.

The model: a d-dimensional torus of area ``sites`` (side ``sites**(1/d)``).
Stage-j mutations arrive as a Poisson process with rate ``rates[j-1]`` per
unit area, restricted to the region already reached by stage j-1 (stage-1
arrivals land anywhere).  Each accepted mutation spawns a ball growing at
``speed``.  The quantity of interest is the first time any point of the
torus accumulates all k stages.

There is no time discretization.  Candidate arrivals across all stages form
a single Poisson clock with rate ``sites * sum(rates)``; each candidate gets
a stage label and a uniform location, and is accepted iff its location lies
inside the union of grown balls of the previous stage (space-time thinning).
Rejection consumes no extra randomness, so the accepted process is exact.

Results are reproducible bit-for-bit: the stream of draws is fixed by the
seed alone (see mutclock.rng), independent of backend and worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .backend import get_backend
from .rng import Xoshiro256PP, replicate_seed, splitmix64
from .stats import EmpiricalSample
from .torus import Cone, hit_test_volume, in_cone

DEFAULT_CANDIDATE_CAP = 100_000_000

_STATUS = {0: "done", 1: "timeout", 2: "cap"}


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one model instance.

    Args:
        dimension: spatial dimension d of the torus (>= 1).
        sites: total area N of the torus; the side is N**(1/d).
        speed: radial growth speed of mutant regions (> 0).
        rates: per-unit-area arrival rate of each stage, length k (> 0 each).
    """

    dimension: int
    sites: float
    speed: float
    rates: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not self.sites > 0.0:
            raise ValueError(f"sites must be positive, got {self.sites!r}")
        if not self.speed > 0.0:
            raise ValueError(f"speed must be positive, got {self.speed!r}")
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.rates) == 0:
            raise ValueError("rates must contain at least one stage rate")
        for r in self.rates:
            if not r > 0.0:
                raise ValueError(f"all stage rates must be positive, got {self.rates!r}")

    @property
    def stages(self) -> int:
        return len(self.rates)

    @property
    def side(self) -> float:
        return float(self.sites) ** (1.0 / self.dimension)


@dataclass
class SimOutcome:
    """Result of one replicate.

    sigma is the first-passage time to the final stage, or NaN if the run
    ended first.  status is "done", "timeout" (time horizon hit before the
    final stage appeared) or "cap" (candidate budget exhausted).  counts and
    first_times have one entry per stage.  events, when recorded, is a list
    of (times, locations) array pairs per stage.
    """

    sigma: float
    status: str
    candidates: int
    first_times: list[float]
    counts: list[int]
    events: list | None


def simulate_sigma(
    params: ModelParams,
    seed: int,
    t_max: float = math.inf,
    cap: int = DEFAULT_CANDIDATE_CAP,
    record_events: bool = False,
    use_grid: bool = False,
    grid_hint: float = 0.0,
) -> SimOutcome:
    """Simulate until the first final-stage mutation (or a budget runs out)."""
    return _run(params, seed, t_max, cap, True, record_events, use_grid, grid_hint)


def simulate_until(
    params: ModelParams,
    t: float,
    seed: int,
    cap: int = DEFAULT_CANDIDATE_CAP,
    record_events: bool = True,
    use_grid: bool = False,
    grid_hint: float = 0.0,
) -> SimOutcome:
    """Simulate the full process on [0, t], not stopping at the final stage."""
    return _run(params, seed, t, cap, False, record_events, use_grid, grid_hint)


def _run(params, seed, t_max, cap, stop, record, use_grid, grid_hint):
    status, sigma, ncand, first_times, counts, events, _ = get_backend().simulate_core(
        params.dimension,
        params.side,
        params.speed,
        params.rates,
        params.stages,
        seed,
        t_max,
        cap,
        stop_at_first_k=stop,
        record_events=record,
        use_grid=use_grid,
        grid_hint=grid_hint,
    )
    return SimOutcome(
        sigma=sigma,
        status=_STATUS[status],
        candidates=ncand,
        first_times=list(first_times),
        counts=list(counts),
        events=events,
    )


def origin_occupancy(
    params: ModelParams,
    stage: int,
    t: float,
    n_reps: int,
    base_seed: int,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> tuple[float, float]:
    """Estimate the probability that the origin is stage-``stage`` at time t.

    Runs n_reps independent replicates and checks origin membership in each.
    Returns (estimate, standard error).
    """
    if not 1 <= stage <= params.stages:
        raise ValueError(f"stage must be in 1..{params.stages}, got {stage}")
    # stages above `stage` never influence lower ones, so drop them; the
    # truncated process has exactly the law of the stage-`stage` set
    hits = get_backend().occupancy_count(
        params.dimension,
        params.side,
        params.speed,
        params.rates[:stage],
        stage,
        t,
        n_reps,
        base_seed,
        cap,
    )
    p = hits / n_reps
    return p, math.sqrt(p * (1.0 - p) / n_reps)


def _worker_count(requested: int | None, n: int) -> int:
    if requested is None:
        env = os.environ.get("MUTCLOCK_WORKERS")
        requested = int(env) if env else (os.cpu_count() or 1)
    if requested < 1:
        raise ValueError(f"workers must be >= 1, got {requested}")
    return min(requested, n)


def _replicate_chunk(params, base_seed, lo, hi, t_max, cap, use_grid, grid_hint):
    finite = []
    timeouts = 0
    for i in range(lo, hi):
        out = simulate_sigma(
            params,
            replicate_seed(base_seed, i),
            t_max=t_max,
            cap=cap,
            use_grid=use_grid,
            grid_hint=grid_hint,
        )
        if out.status == "done":
            finite.append(out.sigma)
        else:
            timeouts += 1
    return finite, timeouts


def replicate(
    params: ModelParams,
    n: int,
    base_seed: int,
    t_max: float = math.inf,
    cap: int = DEFAULT_CANDIDATE_CAP,
    workers: int | None = None,
    use_grid: bool = False,
    grid_hint: float = 0.0,
) -> EmpiricalSample:
    """Draw n independent first-passage times.

    Replicate i always uses seed replicate_seed(base_seed, i), so the result
    is identical for any worker count; workers only split the index range.
    Defaults to MUTCLOCK_WORKERS (else the CPU count) processes.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    w = _worker_count(workers, n)
    if w == 1:
        finite, timeouts = _replicate_chunk(
            params, base_seed, 0, n, t_max, cap, use_grid, grid_hint
        )
    else:
        bounds = [(n * j) // w for j in range(w + 1)]
        finite = []
        timeouts = 0
        with ProcessPoolExecutor(max_workers=w) as pool:
            futures = [
                pool.submit(
                    _replicate_chunk,
                    params, base_seed, bounds[j], bounds[j + 1],
                    t_max, cap, use_grid, grid_hint,
                )
                for j in range(w)
            ]
            for fut in futures:
                part, nt = fut.result()
                finite.extend(part)
                timeouts += nt
    finite.sort()
    return EmpiricalSample(values=finite, timeouts=timeouts, base_seed=base_seed)


def stage_volume_samples(
    params: ModelParams,
    stage: int,
    t: float,
    n_reps: int,
    n_points: int,
    base_seed: int,
    cap: int = DEFAULT_CANDIDATE_CAP,
) -> list[float]:
    """Hit-test estimates of the stage-``stage`` covered area at time t, one per replicate.

    Each replicate runs the process to time t and then throws n_points
    uniform probes at the torus; the probe stream is seeded independently of
    the simulation stream (both derive from base_seed), so results stay
    deterministic.
    """
    if not 1 <= stage <= params.stages:
        raise ValueError(f"stage must be in 1..{params.stages}, got {stage}")
    estimates = []
    for i in range(n_reps):
        seed_i = replicate_seed(base_seed, i)
        res = simulate_until(params, t, seed_i, cap=cap, record_events=True)
        times, coords = res.events[stage - 1]
        probe_rng = Xoshiro256PP(splitmix64(seed_i))
        est, _ = hit_test_volume(
            list(zip(times, coords)), t, params.speed, params.side, n_points, probe_rng
        )
        estimates.append(est)
    return estimates


def simulate_z(dimension: int, c: tuple[float, ...], seed: int,
               t_max: float = 1e4, cap: int = DEFAULT_CANDIDATE_CAP) -> SimOutcome:
    """Simulate the scale-free first-passage time Z once.

    Z is the final-stage first-passage time of the process on the unit
    torus with unit speed and per-stage rates c; every instance of the
    model reduces to this by rescaling space and time.
    """
    p = ModelParams(dimension=dimension, sites=1.0, speed=1.0, rates=tuple(c))
    return simulate_sigma(p, seed, t_max=t_max, cap=cap)


def is_member(events, stage: int, x, t: float, side: float, speed: float) -> bool:
    """Membership test against recorded events: is x stage-``stage`` at time t?

    events is the per-stage list from SimOutcome (stage 0 is the whole
    torus).  Used for inspection and cross-checks; the kernels carry their
    own equivalent logic.
    """
    if stage == 0:
        return True
    if stage > len(events):
        raise ValueError(f"stage {stage} exceeds recorded stages ({len(events)})")
    times, coords = events[stage - 1]
    for i in range(len(times)):
        if in_cone(x, t, Cone(tuple(coords[i]), float(times[i]), speed), side):
            return True
    return False


def candidate_stream(
    dimension: int,
    side: float,
    dominating_rates: tuple[float, ...],
    seed: int,
    t_max: float,
    cap: int = DEFAULT_CANDIDATE_CAP,
):
    """Generate raw candidates at dominating rates, with one extra keep-uniform each.

    Yields (time, stage, location, u_keep) in time order.  Thinning the same
    stream with different keep probabilities couples runs at different rate
    vectors on common randomness; see sigma_from_stream.
    """
    rng = Xoshiro256PP(seed)
    total = sum(dominating_rates)
    rate = (side**dimension) * total
    k = len(dominating_rates)
    t = 0.0
    for _ in range(cap):
        t += rng.exponential(rate)
        if t > t_max:
            return
        u = rng.uniform() * total
        j = 1
        acc = dominating_rates[0]
        while u >= acc and j < k:
            acc += dominating_rates[j]
            j += 1
        x = tuple(rng.uniform() * side for _ in range(dimension))
        yield t, j, x, rng.uniform()


def sigma_from_stream(stream, keep_prob, dimension: int, side: float, speed: float) -> float:
    """First-passage time from a thinned candidate stream.

    keep_prob[j-1] is the probability of keeping a stage-j candidate
    (target rate / dominating rate).  Returns NaN if the stream ends before
    the final stage appears.
    """
    k = len(keep_prob)
    accepted = [[] for _ in range(k + 1)]
    for t, j, x, u_keep in stream:
        if u_keep >= keep_prob[j - 1]:
            continue
        if j > 1:
            ok = False
            for s, y in accepted[j - 1]:
                if in_cone(x, t, Cone(y, s, speed), side):
                    ok = True
                    break
            if not ok:
                continue
        if j == k:
            return t
        accepted[j].append((t, x))
    return math.nan
