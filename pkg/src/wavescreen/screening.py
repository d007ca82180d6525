"""Per-locus evidence aggregation: EM over per-scale association proportions.

Within a window, the Bayes factors of all analyzed coefficients combine into
the likelihood ratio Lambda(pi) = prod_{s,l} [pi_s BF_sl + (1 - pi_s)],
maximized over pi by per-scale EM (the product factorizes over scales).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from wavescreen import wavelet
from wavescreen.bayes import DesignContext, log_bayes_factor
from wavescreen.dataio import CohortData, Window

EM_TOL = 1e-8
EM_MAX_ITER = 10_000


class ScreeningError(ValueError):
    """Invalid input to a screening operation."""


@dataclass
class LocusResult:
    """Everything screened for one window and one coefficient kind."""

    window: Window
    coefficient_kind: str  # "c" or "d"
    bf: list[np.ndarray]  # per scale, BF of non-degenerate coefficients
    locations: list[np.ndarray]  # per scale, locations matching ``bf``
    pi_hat: np.ndarray
    lambda_hat: float
    posterior_gamma: list[np.ndarray]
    degenerate: bool = False  # all coefficients degenerate
    p_value: float | None = None


def _check_bfs(bfs_by_scale: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for bf in bfs_by_scale:
        bf = np.asarray(bf, dtype=float)
        if bf.size and np.any(bf <= 0.0):
            raise ScreeningError("Bayes factors must be positive")
        out.append(bf)
    return out


def lambda_of_pi(bfs_by_scale: list[np.ndarray], pi: np.ndarray) -> float:
    """Lambda(pi) = prod over scales s and locations l of (pi_s BF + 1 - pi_s)."""
    bfs_by_scale = _check_bfs(bfs_by_scale)
    pi = np.asarray(pi, dtype=float)
    if len(pi) != len(bfs_by_scale):
        raise ScreeningError("pi length must match the number of scales")
    log_lam = 0.0
    for bf, p in zip(bfs_by_scale, pi):
        if bf.size:
            log_lam += float(np.sum(np.log1p(p * (bf - 1.0))))
    return float(np.exp(log_lam))


def _em_batch(bf: np.ndarray, trace: list | None = None) -> np.ndarray:
    """Maximize sum_l log(pi*BF_l + 1 - pi) over pi in [0,1] for each row of bf.

    log Lambda_s is concave in pi, so the endpoint derivatives decide
    boundary solutions exactly; interior rows run the EM fixed point
    alpha = pi BF / (pi BF + 1 - pi), pi <- mean(alpha) from pi = 0.5.
    """
    bf = np.atleast_2d(np.asarray(bf, dtype=float))
    R = bf.shape[0]
    pi = np.zeros(R)
    grad0 = np.sum(bf - 1.0, axis=1)  # d/dpi at 0
    grad1 = np.sum((bf - 1.0) / bf, axis=1)  # d/dpi at 1
    pi[grad1 >= 0.0] = 1.0
    interior = (grad0 > 0.0) & (grad1 < 0.0)
    if np.any(interior):
        idx = np.where(interior)[0]
        p = np.full(len(idx), 0.5)
        active = np.arange(len(idx))
        for _ in range(EM_MAX_ITER):
            b = bf[idx[active]]
            pa = p[active]
            a = pa[:, None] * b
            alpha = a / (a + 1.0 - pa[:, None])
            p_new = alpha.mean(axis=1)
            if trace is not None:
                trace.append(p_new.copy())
            moved = np.abs(p_new - pa) >= EM_TOL
            p[active] = p_new
            active = active[moved]
            if active.size == 0:
                break
        pi[idx] = p
    return pi


def _log_lambda_rows(bf: np.ndarray, pi: np.ndarray) -> np.ndarray:
    bf = np.atleast_2d(np.asarray(bf, dtype=float))
    return np.sum(np.log1p(pi[:, None] * (bf - 1.0)), axis=1)


def maximize_lambda(bfs_by_scale: list[np.ndarray]) -> tuple[np.ndarray, float]:
    """EM-maximized (pi_hat, Lambda_hat) over all scales of one window.

    Scales with no (non-degenerate) coefficients get pi_s = 0. Boundary
    solutions pi_s in {0, 1} are permitted.
    """
    bfs_by_scale = _check_bfs(bfs_by_scale)
    pi_hat = np.zeros(len(bfs_by_scale))
    log_lam = 0.0
    for s, bf in enumerate(bfs_by_scale):
        if bf.size == 0:
            continue
        p = _em_batch(bf[None, :])[0]
        pi_hat[s] = p
        log_lam += float(_log_lambda_rows(bf[None, :], np.array([p]))[0])
    return pi_hat, float(np.exp(log_lam))


def maximize_lambda_batch(bf_by_scale: list[np.ndarray]) -> np.ndarray:
    """Vectorized Lambda_hat over replicates.

    ``bf_by_scale[s]`` has shape (R, 2^s); returns the R maximized Lambda
    values (used by the null simulator).
    """
    R = bf_by_scale[0].shape[0]
    log_lam = np.zeros(R)
    for bf in bf_by_scale:
        pi = _em_batch(bf)
        log_lam += _log_lambda_rows(bf, pi)
    return np.exp(log_lam)


def posterior_gamma(bf: np.ndarray, pi_s: float) -> np.ndarray:
    """Posterior association probability pi BF / (pi BF + 1 - pi)."""
    a = pi_s * np.asarray(bf, dtype=float)
    return a / (a + 1.0 - pi_s)


def fisher_combine(p_values) -> float:
    """Fisher's method: survival of chi2(2k) at -2 sum log p_i."""
    p = np.asarray(list(p_values), dtype=float)
    if p.size == 0:
        raise ScreeningError("need at least one p-value")
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise ScreeningError("p-values must lie in (0, 1]")
    stat = -2.0 * np.sum(np.log(p))
    return float(chi2.sf(stat, df=2 * len(p)))


def window_spectra(
    window: Window,
    cohort: CohortData,
    coefficient_kind: str,
    sigma0_sq: float = wavelet.DEFAULT_SIGMA0_SQ,
):
    """Interpolate, transform, shrink and quantile-normalize one window.

    Returns (scores, degenerate) as per-scale lists; scores[s] has shape
    (2^s, n_individuals) of Blom scores, degenerate[s] flags coefficients
    with zero cross-cohort variance.
    """
    if coefficient_kind not in ("c", "d"):
        raise ScreeningError(f"unknown coefficient kind {coefficient_kind!r}")
    block = cohort.blocks[window.chromosome]
    sl = slice(window.snp_start, window.snp_end)
    positions = wavelet.normalize_positions(
        block.positions[sl], window.start_bp, window.end_bp
    )
    dosages = block.dosages[sl]  # (m, n)
    sig2 = wavelet.snp_noise_variance(block.imputation_quality[sl], sigma0_sq)
    grid = wavelet.DyadicGrid(window.grid_exponent)
    W = wavelet.interpolation_matrix(positions, grid)
    # all scales <= depth derive from the 2^(depth+1) block sums, so
    # aggregate the interpolation weights before touching the dense dosages
    n_top = 1 << (window.depth + 1)
    if n_top < grid.n_points:
        W = wavelet.block_sum_matrix(grid.n_points, n_top) @ W
    # centering at 1 makes the allele flip g -> 2 - g an exact floating-point
    # negation of the input, so every linear stage below negates exactly and
    # the d-screen statistic is bitwise invariant under strand flips
    top_sums = W @ (dosages - 1.0)
    c, d = wavelet.haar_pyramid(top_sums, window.depth, n_grid=grid.n_points)
    if coefficient_kind == "d":
        _, var_d = wavelet.pyramid_variances(W, sig2, window.depth, n_grid=grid.n_points)
        coeffs = wavelet.visushrink(d, var_d, grid.n_points)
    else:
        coeffs = c
    scores, degenerate = [], []
    for arr in coeffs:
        sc, deg = wavelet.quantile_transform(arr, axis=-1)
        scores.append(sc)
        degenerate.append(np.atleast_1d(deg))
    return scores, degenerate


def screen_window(
    window: Window,
    cohort: CohortData,
    ctx: DesignContext,
    coefficient_kind: str,
    sigma0_sq: float = wavelet.DEFAULT_SIGMA0_SQ,
) -> LocusResult:
    """Full per-window screen: spectra -> Bayes factors -> EM over pi.

    Degenerate coefficients are dropped from the product (a BF = 1 factor).
    The p-value is left unset; the null model assigns it later.
    """
    scores, degenerate = window_spectra(window, cohort, coefficient_kind, sigma0_sq)
    bf_by_scale: list[np.ndarray] = []
    loc_by_scale: list[np.ndarray] = []
    any_kept = False
    for sc, deg in zip(scores, degenerate):
        keep = ~deg
        locs = np.where(keep)[0]
        if locs.size:
            logbf = log_bayes_factor(ctx, sc[locs].T)
            bf_by_scale.append(np.exp(logbf))
            any_kept = True
        else:
            bf_by_scale.append(np.empty(0))
        loc_by_scale.append(locs)
    if not any_kept:
        return LocusResult(
            window=window,
            coefficient_kind=coefficient_kind,
            bf=bf_by_scale,
            locations=loc_by_scale,
            pi_hat=np.zeros(window.depth + 1),
            lambda_hat=1.0,
            posterior_gamma=[np.empty(0) for _ in bf_by_scale],
            degenerate=True,
        )
    pi_hat, lam = maximize_lambda(bf_by_scale)
    gamma = [posterior_gamma(bf, pi_hat[s]) for s, bf in enumerate(bf_by_scale)]
    return LocusResult(
        window=window,
        coefficient_kind=coefficient_kind,
        bf=bf_by_scale,
        locations=loc_by_scale,
        pi_hat=pi_hat,
        lambda_hat=lam,
        posterior_gamma=gamma,
    )
