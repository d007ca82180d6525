"""Null distribution of the locus statistic: simulation, GPD tail, p-values.

Under the null, 2 log BF = lambda1 * Q + log(1 - lambda1) with Q ~ chi2(1),
so the locus statistic can be simulated directly from the design constant
lambda1 without touching genotypes. The simulated sample covers the bulk of
the distribution; a Generalized Pareto fit to exceedances over a high
threshold extrapolates the extreme tail.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import genpareto

from wavescreen.screening import maximize_lambda_batch

SIM_CHUNK = 4096  # fixed so results are independent of threading and memory
MIN_EXCEEDANCES = 30
DEFAULT_M = 100_000
DEFAULT_THRESHOLD_RULE = "quantile-99"


class NullSimError(ValueError):
    """Invalid input to a null-model operation."""


class GPDFitError(RuntimeError):
    """Tail fit failed; caller may fall back to empirical-only p-values."""


@dataclass
class GPDDiagnostics:
    threshold_rule: str
    n_exceedances: int
    se_shape: float
    se_scale: float
    log_likelihood: float


@dataclass
class NullModel:
    """Simulated null sample of Lambda_hat plus its fitted Pareto tail."""

    lambda1: float
    depth: int
    M: int
    seed: int
    sample: np.ndarray  # sorted ascending
    threshold: float | None = None
    gpd_shape: float | None = None
    gpd_scale: float | None = None
    n_exceedances: int = 0
    diagnostics: GPDDiagnostics | None = None

    @property
    def has_tail(self) -> bool:
        return self.gpd_scale is not None

    @property
    def n_coefficients_per_scale(self) -> list[int]:
        return [1 << s for s in range(self.depth + 1)]


def required_permutations(P: float) -> int:
    """Permutation count needed for a reliable p-value at level P: ceil(1/(4 P^2))."""
    if not 0.0 < P < 1.0:
        raise NullSimError("P must lie in (0, 1)")
    return math.ceil(1.0 / (4.0 * P * P))


def simulate_null(lambda1: float, depth: int, M: int, seed: int) -> np.ndarray:
    """Simulate M maximized Lambda values under the null; returns them sorted.

    Per replicate, each coefficient (2^s per scale s = 0..depth) draws
    Q ~ chi2(1) and BF = exp((lambda1*Q + log(1-lambda1))/2); the per-scale
    EM maximization then yields Lambda_hat. Chunks use independent
    counter-based RNG streams keyed by (seed, chunk index), so the output
    is identical regardless of scheduling.
    """
    if not 0.0 < lambda1 < 1.0:
        raise NullSimError("lambda1 must lie in (0, 1)")
    if M < 1:
        raise NullSimError("M must be positive")
    if depth < 0:
        raise NullSimError("depth must be >= 0")
    log_const = math.log1p(-lambda1)
    out = np.empty(M)
    n_chunks = (M + SIM_CHUNK - 1) // SIM_CHUNK
    for ci in range(n_chunks):
        lo = ci * SIM_CHUNK
        hi = min(lo + SIM_CHUNK, M)
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, ci], dtype=np.uint64))
        )
        r = hi - lo
        bf_by_scale = []
        for s in range(depth + 1):
            q = rng.chisquare(1, size=(r, 1 << s))
            bf_by_scale.append(np.exp(0.5 * (lambda1 * q + log_const)))
        out[lo:hi] = maximize_lambda_batch(bf_by_scale)
    out.sort()
    return out


def _choose_threshold(sample: np.ndarray, rule: str) -> float:
    if rule == "quantile-99":
        return float(np.quantile(sample, 0.99))
    if rule == "van-kerm":
        return float(
            min(10.0 * np.median(sample), np.quantile(sample, 0.975))
        )
    raise NullSimError(f"unknown threshold rule {rule!r}")


def _gpd_negloglik(params: np.ndarray, exc: np.ndarray) -> float:
    xi, log_beta = params
    beta = math.exp(log_beta)
    z = exc / beta
    if abs(xi) < 1e-12:
        return len(exc) * log_beta + float(np.sum(z))
    t = 1.0 + xi * z
    if np.any(t <= 0.0):
        return np.inf
    return len(exc) * log_beta + (1.0 + 1.0 / xi) * float(np.sum(np.log(t)))


def fit_gpd_exceedances(exc: np.ndarray, threshold_rule: str = "direct") -> tuple[float, float, GPDDiagnostics]:
    """ML GPD(shape, scale) fit to raw exceedances (measured from zero).

    Standard errors come from the numerically observed information at the
    optimum. Raises GPDFitError on too few points, degenerate data, or
    non-convergence.
    """
    exc = np.asarray(exc, dtype=float)
    if len(exc) < MIN_EXCEEDANCES:
        raise GPDFitError(f"only {len(exc)} exceedances; need {MIN_EXCEEDANCES}")
    if np.ptp(exc) == 0.0:
        raise GPDFitError("exceedances are constant; GPD likelihood is degenerate")
    x0 = np.array([0.1, math.log(float(np.mean(exc)))])
    res = minimize(_gpd_negloglik, x0, args=(exc,), method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 20000})
    if not res.success:
        raise GPDFitError(f"GPD maximum likelihood did not converge: {res.message}")
    xi, beta = float(res.x[0]), float(math.exp(res.x[1]))

    # observed information in (xi, beta) by central finite differences
    def nll_nat(p):
        return _gpd_negloglik(np.array([p[0], math.log(p[1])]), exc)

    h = np.array([1e-5, max(beta * 1e-5, 1e-12)])
    H = np.empty((2, 2))
    p0 = np.array([xi, beta])
    for i in range(2):
        for j in range(2):
            pp = p0.copy(); pp[i] += h[i]; pp[j] += h[j]
            pm = p0.copy(); pm[i] += h[i]; pm[j] -= h[j]
            mp = p0.copy(); mp[i] -= h[i]; mp[j] += h[j]
            mm = p0.copy(); mm[i] -= h[i]; mm[j] -= h[j]
            H[i, j] = (nll_nat(pp) - nll_nat(pm) - nll_nat(mp) + nll_nat(mm)) / (
                4.0 * h[i] * h[j]
            )
    try:
        cov = np.linalg.inv(H)
        se_xi, se_beta = float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))
    except (np.linalg.LinAlgError, ValueError):
        se_xi = se_beta = float("nan")
    diag = GPDDiagnostics(
        threshold_rule=threshold_rule,
        n_exceedances=len(exc),
        se_shape=se_xi,
        se_scale=se_beta,
        log_likelihood=-float(res.fun),
    )
    return xi, beta, diag


def fit_gpd_tail(
    sample: np.ndarray, threshold_rule: str = DEFAULT_THRESHOLD_RULE
) -> tuple[float, float, float, GPDDiagnostics]:
    """Choose a threshold by the configured rule and ML-fit the tail above it.

    Returns (u, shape, scale, diagnostics).
    """
    sample = np.asarray(sample, dtype=float)
    u = _choose_threshold(sample, threshold_rule)
    exc = sample[sample > u] - u
    if len(exc) < MIN_EXCEEDANCES:
        raise GPDFitError(
            f"only {len(exc)} exceedances above u={u:.6g}; need {MIN_EXCEEDANCES}"
        )
    xi, beta, diag = fit_gpd_exceedances(exc, threshold_rule)
    return u, xi, beta, diag


def build_null_model(
    lambda1: float,
    depth: int,
    M: int = DEFAULT_M,
    seed: int = 0,
    threshold_rule: str = DEFAULT_THRESHOLD_RULE,
    sample: np.ndarray | None = None,
) -> NullModel:
    """Simulate (or adopt) a null sample and fit its tail.

    A failed tail fit is not fatal: the model falls back to empirical-only
    p-values with the failure recorded in ``diagnostics``.
    """
    if sample is None:
        sample = simulate_null(lambda1, depth, M, seed)
    model = NullModel(lambda1=lambda1, depth=depth, M=len(sample), seed=seed, sample=sample)
    try:
        u, xi, beta, diag = fit_gpd_tail(sample, threshold_rule)
    except GPDFitError:
        return model
    model.threshold = u
    model.gpd_shape = xi
    model.gpd_scale = beta
    model.n_exceedances = diag.n_exceedances
    model.diagnostics = diag
    return model


def p_value(model: NullModel, lambda_obs: float) -> float:
    """Null survival probability of an observed Lambda_hat.

    Empirical below the tail threshold; GPD tail survival above it. Uses
    the (count >= obs + 1)/(M + 1) convention for the empirical part.
    """
    if lambda_obs < 1.0:
        raise NullSimError("Lambda_hat cannot be below 1")
    M = len(model.sample)
    if model.has_tail and lambda_obs > model.threshold:
        sf = genpareto.sf(
            lambda_obs - model.threshold, model.gpd_shape, scale=model.gpd_scale
        )
        return float(model.n_exceedances / M * sf)
    n_ge = M - int(np.searchsorted(model.sample, lambda_obs, side="left"))
    return (n_ge + 1.0) / (M + 1.0)


def _cache_name(lambda1: float, depth: int, M: int, seed: int) -> str:
    return f"null_l{round(lambda1, 7):.7f}_d{depth}_M{M}_s{seed}.tsv"


def save_null_model(model: NullModel, cache_dir: str) -> str:
    """Write the sorted sample (with its key) to the cache directory."""
    os.makedirs(cache_dir, exist_ok=True)
    path = os.path.join(cache_dir, _cache_name(model.lambda1, model.depth, model.M, model.seed))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda1\tdepth\tM\tseed\n")
        fh.write(f"{model.lambda1:.7f}\t{model.depth}\t{model.M}\t{model.seed}\n")
        fh.write("lambda_hat\n")
        for v in model.sample:
            fh.write(f"{v:.17g}\n")
    return path


def load_or_build_null_model(
    lambda1: float,
    depth: int,
    M: int,
    seed: int,
    cache_dir: str | None = None,
    threshold_rule: str = DEFAULT_THRESHOLD_RULE,
) -> NullModel:
    """Reuse a cached simulation when one exists for this exact key."""
    sample = None
    if cache_dir is not None:
        path = os.path.join(cache_dir, _cache_name(lambda1, depth, M, seed))
        if os.path.exists(path):
            sample = np.loadtxt(path, skiprows=3)
    model = build_null_model(lambda1, depth, M, seed, threshold_rule, sample=sample)
    if cache_dir is not None and sample is None:
        save_null_model(model, cache_dir)
    return model
