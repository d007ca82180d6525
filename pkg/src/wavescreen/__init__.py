"""Regional genome-association screening with Haar wavelet spectra.

Windows of dense SNP dosage data are mapped to Haar wavelet spectra per
individual, association of each coefficient with the phenotype is scored
by a closed-form Bayes factor under reverse regression, evidence is
aggregated into a per-locus likelihood-ratio statistic maximized by EM,
and p-values come from a simulated null with a Generalized Pareto tail.
"""

from wavescreen.dataio import CohortData, SnpRecord, Window, define_windows, load_cohort
from wavescreen.bayes import DesignContext, build_design, bayes_factor, lambda1
from wavescreen.screening import (
    LocusResult,
    fisher_combine,
    lambda_of_pi,
    maximize_lambda,
    screen_window,
)
from wavescreen.nullsim import (
    NullModel,
    build_null_model,
    fit_gpd_tail,
    p_value,
    required_permutations,
    simulate_null,
)

__all__ = [
    "CohortData",
    "SnpRecord",
    "Window",
    "define_windows",
    "load_cohort",
    "DesignContext",
    "build_design",
    "bayes_factor",
    "lambda1",
    "LocusResult",
    "fisher_combine",
    "lambda_of_pi",
    "maximize_lambda",
    "screen_window",
    "NullModel",
    "build_null_model",
    "fit_gpd_tail",
    "p_value",
    "required_permutations",
    "simulate_null",
]

__version__ = "0.1.0"
