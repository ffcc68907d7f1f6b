"""Map a concrete parameter tuple onto its asymptotic regime.

The limit laws are indexed by order-of-magnitude comparisons between
parameter combinations (is the first arrival slow or fast relative to
fixation?  is the second arrival rate large or small relative to first-stage
coverage?).  For a single finite tuple those comparisons have no literal
meaning, so we adopt a transparent proxy: a dimensionless ratio r counts as
"small" below 1/threshold, "large" above threshold, and "comparable"
in between (threshold defaults to one order of magnitude).

The diagnostics consulted:

    r_fix_i   rates[i-1] * sites**((d+1)/d) / speed
              arrival of stage i vs fixation speed; also the natural
              parameter c_i of the scale-free limit Z
    r_beta    rates[1] * speed**d / (sites*rates[0])**(d+1)
              second arrival vs the single-region race window
    r_sat     sites * rates[1] / (rates[0]*speed**d)**(1/(d+1))
              second arrival vs first-stage saturation
    r_mu      rates[1] / rates[0]

All four are exactly invariant under the model's space-time rescaling
(sites -> l**d * sites, speed -> l * speed, rates -> rates / l**d), so
classification is scale-consistent by construction.

Every two-stage tuple lands in exactly one of eleven regimes ("case_1" ...
"case_11"); with three or more stages the published results cover equal
per-stage rates only ("case_1" ... "case_3"), and unequal rates raise
UnclassifiableError rather than guessing.

The reported margin is the multiplicative distance from each consulted
ratio to the nearest band edge, minimized over consulted ratios; margin m
means every decision would survive changing the ratio by a factor m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .laws import LimitLaw, law_for_case, time_scale_for_case
from .sim import ModelParams

DEFAULT_THRESHOLD = 10.0

_EQUAL_RATES_RTOL = 1e-12


class UnclassifiableError(ValueError):
    """Raised when no published regime covers the tuple; carries diagnostics."""

    def __init__(self, message: str, ratios: dict):
        super().__init__(message)
        self.ratios = ratios


@dataclass
class RegimeReport:
    case_id: str
    stages: int
    ratios: dict
    law: LimitLaw | None
    timescale: float
    margin: float
    threshold: float


def diagnostics(params: ModelParams) -> dict:
    """All dimensionless regime ratios for the tuple (see module docstring)."""
    d = params.dimension
    N = params.sites
    a = params.speed
    mu = params.rates
    out = {}
    for i, m in enumerate(mu, start=1):
        out[f"r_fix_{i}"] = m * N ** ((d + 1.0) / d) / a
    if len(mu) >= 2:
        out["r_beta"] = mu[1] * a**d / (N * mu[0]) ** (d + 1)
        out["r_sat"] = N * mu[1] / (mu[0] * a**d) ** (1.0 / (d + 1))
        if len(mu) == 2:
            out["r_mu"] = mu[1] / mu[0]
    return out


def _band(r: float, theta: float) -> int:
    """-1 below the comparable band, +1 above it, 0 inside."""
    if r < 1.0 / theta:
        return -1
    if r > theta:
        return 1
    return 0


def _edge_margin(r: float, theta: float) -> float:
    """Multiplicative distance from r to the nearest band edge (>= 1)."""
    b = _band(r, theta)
    if b < 0:
        return (1.0 / theta) / r
    if b > 0:
        return r / theta
    return min(r * theta, theta / r)


def classify(
    params: ModelParams,
    threshold: float = DEFAULT_THRESHOLD,
    z_samples: int | None = None,
    with_law: bool = True,
) -> RegimeReport:
    """Pick the regime for a tuple and attach its limit law.

    z_samples overrides the sample size of the empirical law in the
    balanced regimes (it has no effect elsewhere).  with_law=False skips
    building the law (cheap when only the case id or timescale is needed;
    the balanced-regime law is backed by simulation and costs seconds).
    """
    if not threshold > 1.0:
        raise ValueError(f"threshold must be > 1, got {threshold}")
    ratios = diagnostics(params)
    k = params.stages
    consulted = []

    if k == 1:
        case = "case_1"
    elif k == 2:
        b_fix = _band(ratios["r_fix_1"], threshold)
        consulted.append("r_fix_1")
        if b_fix < 0:
            consulted.append("r_mu")
            case = {1: "case_1", -1: "case_2", 0: "case_3"}[_band(ratios["r_mu"], threshold)]
        elif b_fix > 0:
            consulted.append("r_beta")
            b_beta = _band(ratios["r_beta"], threshold)
            if b_beta > 0:
                case = "case_4"
            elif b_beta == 0:
                case = "case_5"
            else:
                consulted.append("r_sat")
                case = {1: "case_6", 0: "case_7", -1: "case_8"}[
                    _band(ratios["r_sat"], threshold)
                ]
        else:
            consulted.append("r_beta")
            case = {1: "case_9", -1: "case_10", 0: "case_11"}[
                _band(ratios["r_beta"], threshold)
            ]
    else:
        lo, hi = min(params.rates), max(params.rates)
        if hi - lo > _EQUAL_RATES_RTOL * hi:
            raise UnclassifiableError(
                f"no published regime for {k} stages with unequal rates "
                f"(spread {hi - lo:.3e} over {hi:.3e})",
                ratios,
            )
        consulted.append("r_fix_1")
        case = {-1: "case_1", 1: "case_2", 0: "case_3"}[_band(ratios["r_fix_1"], threshold)]

    margin = min(
        (_edge_margin(ratios[name], threshold) for name in consulted),
        default=math.inf,
    )
    if with_law:
        kwargs = {} if z_samples is None else {"z_samples": z_samples}
        law = law_for_case(case, params, **kwargs)
        timescale = law.time_scale
    else:
        law = None
        timescale = time_scale_for_case(case, params)
    return RegimeReport(
        case_id=case,
        stages=k,
        ratios=ratios,
        law=law,
        timescale=timescale,
        margin=margin,
        threshold=threshold,
    )


def predicted_timescale(report: RegimeReport) -> float:
    """Multiplier m such that m * sigma is on the unit scale of the law."""
    return report.timescale


def default_horizon(report: RegimeReport, multiplier: float = 20.0) -> float:
    """Default simulation horizon: ``multiplier`` characteristic waits."""
    return multiplier / report.timescale
