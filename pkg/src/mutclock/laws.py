"""Limiting first-passage laws and the closed-form quantities behind them.

Everything here is analytic (or quadrature of an analytic integrand); the
only sampling happens when an empirical law is requested for the balanced
regime, where no closed form exists and the law is backed by draws of the
scale-free variable Z (see sim.simulate_z).

A LimitLaw describes the distribution of ``time_scale * sigma`` in the
N -> infinity limit of a given regime.  The supported kinds:

    exponential             rate
    hypoexponential         rates (sum of independent exponentials)
    gamma                   shape, rate
    stretched_exponential   survival exp(-coefficient * t**exponent)
    thinning_integral       survival exp(-int_0^t 1-exp(-c*g_d*y^(d+1)/(d+1)) dy)
    saturating_integral     like thinning_integral but with the growth
                            exponent damped by c^((d+1)/(d+2)), for regimes
                            where first-stage coverage saturates
    empirical               ECDF of n draws of Z (carries its own DKW band)

where g_d is the d-dimensional unit-ball volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc, gammaln

from .rng import replicate_seed
from .sim import ModelParams, simulate_z
from .stats import dkw_band
from .torus import unit_ball_volume

DEFAULT_Z_SAMPLES = 4000
DEFAULT_Z_SEED = 271828

# below this relative pairwise gap, the partial-fraction hypoexponential
# formula loses too many digits and we fall back to the matrix exponential
_HYPOEXP_GAP = 1e-6


def occupied_fraction(t: float, rate: float, speed: float, dimension: int) -> float:
    """Chance that a fixed point is covered by first-stage growth at time t.

    Equals 1 - exp(-g_d * rate * speed**d * t**(d+1) / (d+1)).  Exact as
    long as no single region has wrapped around the torus (radius <= L/2).
    """
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    g = unit_ball_volume(dimension)
    return -math.expm1(-g * rate * speed**dimension * t ** (dimension + 1) / (dimension + 1))


def mean_stage1_volume(t: float, params: ModelParams) -> float:
    """Expected area covered by stage 1 at time t: sites * occupied_fraction.

    Only valid while a region cannot wrap, i.e. 0 <= t <= side/(2*speed);
    outside that window the formula does not hold and we refuse to evaluate.
    """
    window = params.side / (2.0 * params.speed)
    if not 0.0 <= t <= window:
        raise ValueError(f"t={t} outside the validity window [0, {window}]")
    return params.sites * occupied_fraction(t, params.rates[0], params.speed, params.dimension)


def stage_volume_bound(t: float, params: ModelParams, stage: int | None = None) -> float:
    """Upper-bound approximation v for the expected stage-``stage`` area at t.

    v_0 = sites;  v_j(t) = int_0^t rates[j-1] * v_{j-1}(r) * g_d*(speed*(t-r))**d dr,
    which telescopes to

        g_d**j * (d!)**j / (j(d+1))! * prod(rates[:j]) * sites * speed**(jd) * t**(j(d+1)).

    Computed in log space (the factorial reaches j*(d+1) ~ 60).  Note this
    ignores overlaps, so it can exceed the torus area for large t.
    """
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    j = params.stages if stage is None else stage
    if not 0 <= j <= params.stages:
        raise ValueError(f"stage must be in 0..{params.stages}, got {stage}")
    if j == 0:
        return float(params.sites)
    if t == 0.0:
        return 0.0
    d = params.dimension
    g = unit_ball_volume(d)
    log_v = (
        j * math.log(g)
        + j * gammaln(d + 1)
        - gammaln(j * (d + 1) + 1)
        + sum(math.log(r) for r in params.rates[:j])
        + math.log(params.sites)
        + j * d * math.log(params.speed)
        + j * (d + 1) * math.log(t)
    )
    return math.exp(log_v)


def stage_fraction_bound(t: float, params: ModelParams, stage: int | None = None) -> float:
    """stage_volume_bound normalized by the torus area (bounds occupancy of a point)."""
    return stage_volume_bound(t, params, stage) / params.sites


def characteristic_time(params: ModelParams, stage: int | None = None) -> float:
    """Natural time unit of the final stage in growth-limited regimes.

    (sites * speed**((j-1)d) * prod(rates[:j])) ** (-1/((j-1)d + j)).
    """
    j = params.stages if stage is None else stage
    if not 1 <= j <= params.stages:
        raise ValueError(f"stage must be in 1..{params.stages}, got {stage}")
    d = params.dimension
    log_b = -(
        math.log(params.sites)
        + (j - 1) * d * math.log(params.speed)
        + sum(math.log(r) for r in params.rates[:j])
    ) / ((j - 1) * d + j)
    return math.exp(log_b)


def fixation_time_bound(dimension: int, sites: float, speed: float) -> float:
    """Worst-case time for one region to engulf the torus: sqrt(d)*side/(2*speed)."""
    if sites <= 0 or speed <= 0:
        raise ValueError("sites and speed must be positive")
    return math.sqrt(dimension) * sites ** (1.0 / dimension) / (2.0 * speed)


def hypoexp_cdf(rates, t: float) -> float:
    """CDF of a sum of independent exponentials with the given rates.

    Infinite rates contribute a zero summand and are dropped.  Distinct
    rates use the partial-fraction closed form; once any pairwise gap falls
    below 1e-6 of the largest rate that form cancels catastrophically, so we
    switch to the phase-type matrix exponential (exactly Erlang at equal
    rates, and smooth through the near-equal neighbourhood).
    """
    rs = []
    for r in rates:
        if math.isinf(r):
            continue
        if not r > 0.0:
            raise ValueError(f"rates must be positive, got {rates!r}")
        rs.append(float(r))
    if t <= 0.0:
        return 0.0 if rs or t < 0.0 else 1.0
    if not rs:
        return 1.0
    n = len(rs)
    if n == 1:
        return -math.expm1(-rs[0] * t)
    if all(r == rs[0] for r in rs):
        return float(gammainc(n, rs[0] * t))
    gap = min(abs(a - b) for i, a in enumerate(rs) for b in rs[i + 1:])
    if gap > _HYPOEXP_GAP * max(rs):
        total = 0.0
        for i, li in enumerate(rs):
            w = 1.0
            for jj, lj in enumerate(rs):
                if jj != i:
                    w *= lj / (lj - li)
            total += w * math.exp(-li * t)
        return min(1.0, max(0.0, 1.0 - total))
    q = np.zeros((n, n))
    for i, r in enumerate(rs):
        q[i, i] = -r
        if i + 1 < n:
            q[i, i + 1] = r
    survival = expm(q * t)[0].sum()
    return min(1.0, max(0.0, 1.0 - float(survival)))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature of f on [a, b] to absolute tolerance tol."""
    if b < a:
        raise ValueError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0

    def rec(x0, x2, f0, f1, f2, whole, eps, depth):
        x1 = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + x1)
        xr = 0.5 * (x1 + x2)
        fl = f(xl)
        fr = f(xr)
        h = x2 - x0
        left = h / 12.0 * (f0 + 4.0 * fl + f1)
        right = h / 12.0 * (f1 + 4.0 * fr + f2)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return rec(x0, x1, f0, fl, f1, left, eps / 2.0, depth - 1) + rec(
            x1, x2, f1, fr, f2, right, eps / 2.0, depth - 1
        )

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return rec(a, b, fa, fm, fb, whole, tol, max_depth)


def small_time_constant(dimension: int, k: int, c) -> float:
    """Leading coefficient of P(Z <= t) as t -> 0: limit of P(Z<=t)/t^((k-1)d+k)."""
    if k < 1 or len(c) != k:
        raise ValueError("need k >= 1 rates")
    d = dimension
    g = unit_ball_volume(d)
    log_c = (
        (k - 1) * gammaln(d + 1)
        + (k - 1) * math.log(g)
        + sum(math.log(ci) for ci in c)
        - gammaln((k - 1) * d + k + 1)
    )
    return math.exp(log_c)


def small_time_upper(dimension: int, k: int, c, t: float) -> float:
    """Markov-type upper bound on P(Z <= t), valid for all t >= 0."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    return small_time_constant(dimension, k, c) * t ** ((k - 1) * dimension + k)


def small_time_bounds(dimension: int, k: int, c, t: float) -> tuple[float, float]:
    """(lower, upper) bounds on P(Z <= t) for small t.

    The lower bound multiplies the upper bound by

        J(t) = exp(-c_1 t) * prod_{j>=2} exp(-c_j g_d t^(d+1)/(d+1)),

    which is only a valid correction for t < 1/2; larger t raises.
    """
    if not 0.0 <= t < 0.5:
        raise ValueError(f"lower bound only valid for 0 <= t < 1/2, got {t}")
    upper = small_time_upper(dimension, k, c, t)
    g = unit_ball_volume(dimension)
    log_j = -c[0] * t
    for cj in c[1:]:
        log_j -= cj * g * t ** (dimension + 1) / (dimension + 1)
    return math.exp(log_j) * upper, upper


@dataclass
class LimitLaw:
    """A limiting distribution plus the scale that maps sigma onto it.

    cdf/survival accept scalars or arrays.  time_scale is the multiplier m
    such that m * sigma converges to this law.
    """

    kind: str
    time_scale: float
    params: dict
    description: str = ""
    meta: dict = field(default_factory=dict)

    def cdf(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self._cdf_array(ts)
        return float(out[0]) if np.isscalar(t) or np.ndim(t) == 0 else out

    def survival(self, t):
        c = self.cdf(t)
        return 1.0 - c

    def _cdf_array(self, ts):
        kind = self.kind
        pos = np.clip(ts, 0.0, None)
        if kind == "exponential":
            return -np.expm1(-self.params["rate"] * pos)
        if kind == "gamma":
            return gammainc(self.params["shape"], self.params["rate"] * pos)
        if kind == "stretched_exponential":
            coef = self.params["coefficient"]
            expo = self.params["exponent"]
            return -np.expm1(-coef * pos**expo)
        if kind == "hypoexponential":
            rates = self.params["rates"]
            return np.array([hypoexp_cdf(rates, x) for x in ts], dtype=float)
        if kind == "thinning_integral":
            return self._integral_cdf(ts, self.params["c"], 1.0)
        if kind == "saturating_integral":
            c = self.params["c"]
            d = self.params["dimension"]
            damp = c ** ((d + 1.0) / (d + 2.0))
            return self._integral_cdf(ts, 1.0 / damp, damp)
        if kind == "empirical":
            draws = self.params["draws"]
            return np.searchsorted(draws, ts, side="right") / draws.size
        raise ValueError(f"unknown law kind {self.kind!r}")

    def _integral_cdf(self, ts, c_eff, outer):
        """survival = exp(-outer * int_0^t (1 - exp(-c_eff*g_d*y^(d+1)/(d+1))) dy).

        Evaluated cumulatively over the sorted query points so a whole KS
        sample costs one pass.
        """
        d = self.params["dimension"]
        g = unit_ball_volume(d)
        a = c_eff * g / (d + 1.0)

        def integrand(y):
            return -math.expm1(-a * y ** (d + 1))

        order = np.argsort(ts)
        out = np.empty_like(ts)
        acc = 0.0
        prev = 0.0
        for idx in order:
            t = float(ts[idx])
            if t <= 0.0:
                out[idx] = 0.0
                continue
            if t > prev:
                acc += adaptive_simpson(integrand, prev, t)
                prev = t
            out[idx] = -math.expm1(-outer * acc)
        return out


def _exp_law(scale: float, why: str) -> LimitLaw:
    return LimitLaw("exponential", scale, {"rate": 1.0}, description=why)


def z_empirical_law(
    dimension: int,
    c,
    time_scale: float,
    n_samples: int = DEFAULT_Z_SAMPLES,
    seed: int = DEFAULT_Z_SEED,
) -> LimitLaw:
    """Build the balanced-regime law from n draws of Z (ties carry a DKW band).

    The draws are deterministic in ``seed``, so two calls agree exactly.
    """
    draws = []
    dropped = 0
    for i in range(n_samples):
        out = simulate_z(dimension, tuple(c), replicate_seed(seed, i))
        if out.status == "done":
            draws.append(out.sigma)
        else:
            dropped += 1
    arr = np.sort(np.array(draws))
    return LimitLaw(
        "empirical",
        time_scale,
        {"draws": arr, "c": tuple(c), "dimension": dimension},
        description="ECDF of the scale-free first-passage time",
        meta={
            "sample_size": arr.size,
            "dropped": dropped,
            "seed": seed,
            "band": dkw_band(arr.size, 0.01),
        },
    )


_CASE_IDS_K2 = tuple(f"case_{i}" for i in range(1, 12))
_CASE_IDS_MULTI = ("case_1", "case_2", "case_3")


def time_scale_for_case(case_id: str, params: ModelParams) -> float:
    """The multiplier m such that m * sigma is on the unit scale of the case's law."""
    d = params.dimension
    N = params.sites
    a = params.speed
    mu = params.rates
    k = params.stages
    if k == 1:
        if case_id != "case_1":
            raise ValueError(f"single-stage models only have case_1, got {case_id!r}")
        return N * mu[0]
    if k == 2:
        if case_id not in _CASE_IDS_K2:
            raise ValueError(f"unknown two-stage case {case_id!r}")
        if case_id in ("case_2", "case_8", "case_10"):
            return N * mu[1]
        if case_id in ("case_6", "case_7"):
            return 1.0 / characteristic_time(params)
        if case_id == "case_11":
            return a / N ** (1.0 / d)
        return N * mu[0]
    if case_id not in _CASE_IDS_MULTI:
        raise ValueError(f"unknown multi-stage case {case_id!r}")
    if case_id == "case_2":
        return 1.0 / characteristic_time(params)
    if case_id == "case_3":
        return a / N ** (1.0 / d)
    return N * mu[0]


def law_for_case(
    case_id: str,
    params: ModelParams,
    z_samples: int = DEFAULT_Z_SAMPLES,
    z_seed: int = DEFAULT_Z_SEED,
) -> LimitLaw:
    """Limit law and time scale for a classified regime.

    case_id names follow the classifier ("case_1" ... "case_11" for two
    stages, "case_1" ... "case_3" for three or more).
    """
    d = params.dimension
    N = params.sites
    a = params.speed
    mu = params.rates
    k = params.stages
    g = unit_ball_volume(d)

    if k == 1:
        if case_id != "case_1":
            raise ValueError(f"single-stage models only have case_1, got {case_id!r}")
        return _exp_law(N * mu[0], "exact exponential arrival of the only stage")

    if k == 2:
        scale_1 = N * mu[0]
        scale_2 = N * mu[1]
        scale_growth = 1.0 / characteristic_time(params)
        if case_id in ("case_1", "case_4", "case_9"):
            return _exp_law(scale_1, "first arrival dominates the wait")
        if case_id in ("case_2", "case_8", "case_10"):
            return _exp_law(scale_2, "second arrival after saturation dominates")
        if case_id == "case_3":
            return LimitLaw(
                "hypoexponential",
                scale_1,
                {"rates": (1.0, mu[1] / mu[0])},
                description="two comparable waits in series",
            )
        if case_id == "case_5":
            c = mu[1] * a**d / (N * mu[0]) ** (d + 1)
            return LimitLaw(
                "thinning_integral",
                scale_1,
                {"c": c, "dimension": d},
                description="scattered regions racing to host the second arrival",
            )
        if case_id == "case_6":
            return LimitLaw(
                "stretched_exponential",
                scale_growth,
                {"coefficient": g / ((d + 1.0) * (d + 2.0)), "exponent": d + 2.0},
                description="second arrival inside growing disjoint regions",
            )
        if case_id == "case_7":
            c = N * mu[1] / (mu[0] * a**d) ** (1.0 / (d + 1.0))
            return LimitLaw(
                "saturating_integral",
                scale_growth,
                {"c": c, "dimension": d},
                description="second arrival while coverage saturates",
            )
        if case_id == "case_11":
            c = tuple(m * N ** ((d + 1.0) / d) / a for m in mu)
            return z_empirical_law(d, c, a / N ** (1.0 / d), z_samples, z_seed)
        raise ValueError(f"unknown two-stage case {case_id!r}")

    # k >= 3: results only cover equal per-stage rates
    lo, hi = min(mu), max(mu)
    if hi - lo > 1e-12 * hi:
        raise ValueError("multi-stage laws require equal per-stage rates")
    if case_id == "case_1":
        return LimitLaw(
            "gamma",
            N * mu[0],
            {"shape": k, "rate": 1.0},
            description="k fast-fixating waits in series",
        )
    if case_id == "case_2":
        expo = d * (k - 1) + k
        log_coef = (k - 1) * (math.log(g) + gammaln(d + 1)) - gammaln(expo + 1)
        return LimitLaw(
            "stretched_exponential",
            1.0 / characteristic_time(params),
            {"coefficient": math.exp(log_coef), "exponent": float(expo)},
            description="final arrival inside nested growing regions",
        )
    if case_id == "case_3":
        c = tuple(m * N ** ((d + 1.0) / d) / a for m in mu)
        return z_empirical_law(d, c, a / N ** (1.0 / d), z_samples, z_seed)
    raise ValueError(f"unknown multi-stage case {case_id!r}")


def z_cdf_envelope(dimension: int, k: int, c, t):
    """Pointwise (lower, upper) envelope for the CDF of Z from the sandwich.

    sum(W_i) <= Z <= (k-1)*sqrt(d)/2 + sum(W_i) in stochastic order, with
    W_i ~ Exponential(c_i), so the CDF of Z is bounded above by the plain
    hypoexponential CDF and below by its shift.
    """
    shift = (k - 1) * math.sqrt(dimension) / 2.0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    hi = np.array([hypoexp_cdf(c, x) for x in ts])
    lo = np.array([hypoexp_cdf(c, x - shift) for x in ts])
    if np.ndim(t) == 0:
        return float(lo[0]), float(hi[0])
    return lo, hi
