"""mutclock: exact simulation and limit laws of multi-stage spatial mutation waits.

A population living on a d-dimensional torus accumulates mutations in
stages: stage-j mutations arrive at rate rates[j-1] per unit area inside
the regions already carrying stage j-1, and every mutant region grows
radially at a fixed speed.  This package simulates the first time any site
collects all k stages — exactly, by thinning one Poisson clock, with no
time discretization — evaluates the known limiting distributions of that
time in every parameter regime, classifies concrete parameter tuples into
those regimes, and checks simulation against law statistically.
"""

__version__ = "0.1.0"

from .laws import LimitLaw, law_for_case
from .regimes import RegimeReport, UnclassifiableError, classify
from .sim import (
    ModelParams,
    SimOutcome,
    replicate,
    simulate_sigma,
    simulate_until,
    simulate_z,
)
from .stats import EmpiricalSample, dkw_band, ks_statistic, two_sample_ks

__all__ = [
    "__version__",
    "EmpiricalSample",
    "LimitLaw",
    "ModelParams",
    "RegimeReport",
    "SimOutcome",
    "UnclassifiableError",
    "classify",
    "dkw_band",
    "ks_statistic",
    "law_for_case",
    "replicate",
    "simulate_sigma",
    "simulate_until",
    "simulate_z",
    "two_sample_ks",
]
