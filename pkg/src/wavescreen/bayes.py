"""Closed-form Bayes factors for reverse regression with covariates.

Each quantile-transformed wavelet coefficient y is regressed on the
phenotype (plus intercept and covariates); the Bayes factor compares the
model with the phenotype term against the covariate-only null under a
normal prior on the phenotype effect and the standard improper prior on
the residual variance. The design constant lambda1 governs the null law
2 log BF = lambda1 * Q1 + log(1 - lambda1), Q1 ~ chi2(1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SIGMA_B = 0.2


class DesignError(ValueError):
    """Degenerate or inconsistent regression design."""


@dataclass(frozen=True)
class DesignContext:
    """Immutable phenotype design shared by all coefficient regressions.

    ``basis`` is an orthonormal basis of span([1, C]); ``x_tilde`` is the
    phenotype projected orthogonal to it.
    """

    n: int
    q: int  # rank of [1, C]
    sigma_b: float
    basis: np.ndarray  # (n, q)
    x_tilde: np.ndarray  # (n,)
    xtx: float

    def residualize(self, y: np.ndarray) -> np.ndarray:
        """Project y (shape (n,) or (n, k)) orthogonal to [1, C]."""
        y = np.asarray(y, dtype=float)
        return y - self.basis @ (self.basis.T @ y)


def build_design(
    phenotype: np.ndarray,
    covariates: np.ndarray | None = None,
    sigma_b: float = DEFAULT_SIGMA_B,
) -> DesignContext:
    """Residualize the phenotype against intercept + covariates.

    Raises DesignError for rank-deficient covariates, zero-variance
    phenotype, or a phenotype collinear with the covariates.
    """
    phi = np.asarray(phenotype, dtype=float).ravel()
    n = len(phi)
    if covariates is None:
        covariates = np.empty((n, 0))
    C = np.asarray(covariates, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if C.shape[0] != n:
        raise DesignError(f"covariates have {C.shape[0]} rows, phenotype {n}")
    if sigma_b <= 0:
        raise DesignError("sigma_b must be positive")
    Z = np.column_stack([np.ones(n), C])
    Q, R = np.linalg.qr(Z)
    q = Z.shape[1]
    if np.any(np.abs(np.diag(R)) < 1e-10 * max(1.0, np.abs(R).max())):
        raise DesignError("covariate matrix is rank-deficient after adding intercept")
    if np.var(phi) == 0.0:
        raise DesignError("phenotype has zero variance")
    x_tilde = phi - Q @ (Q.T @ phi)
    xtx = float(x_tilde @ x_tilde)
    if xtx <= 1e-12 * float(phi @ phi):
        raise DesignError("phenotype is collinear with the covariates")
    if n <= q + 1:
        raise DesignError(f"need n > q + 1 (n={n}, q={q})")
    return DesignContext(n=n, q=q, sigma_b=float(sigma_b), basis=Q, x_tilde=x_tilde, xtx=xtx)


def log_bayes_factor(ctx: DesignContext, y: np.ndarray) -> np.ndarray | float:
    """log BF of the phenotype model over the covariate-only null.

    ``y`` has shape (n,) or (n, k) for k coefficients at once. With
    y_tilde = residualized y, RSS0 = y'y, RSS1 = RSS0 - (x'y)^2/(xtx + sigma_b^-2):

        BF = (1 + sigma_b^2 xtx)^(-1/2) * (RSS0/RSS1)^((n - q)/2)

    Accumulated in log space.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 1
    Y = y[:, None] if scalar else y
    if Y.shape[0] != ctx.n:
        raise DesignError(f"y has {Y.shape[0]} rows, design has {ctx.n}")
    if not np.all(np.isfinite(Y)):
        raise DesignError("y contains non-finite values")
    Yt = ctx.residualize(Y)
    rss0 = np.einsum("ij,ij->j", Yt, Yt)
    xty = ctx.x_tilde @ Yt
    shrink = ctx.xtx + ctx.sigma_b ** -2
    rss1 = rss0 - xty ** 2 / shrink
    if np.any(rss1 <= 0.0):
        raise DesignError("nonpositive residual sum of squares (degenerate response)")
    with np.errstate(divide="ignore"):
        log_ratio = np.where(rss0 > 0.0, np.log(rss0) - np.log(rss1), 0.0)
    logbf = -0.5 * np.log1p(ctx.sigma_b ** 2 * ctx.xtx) + 0.5 * (ctx.n - ctx.q) * log_ratio
    return float(logbf[0]) if scalar else logbf


def bayes_factor(ctx: DesignContext, y: np.ndarray) -> np.ndarray | float:
    """Bayes factor (see log_bayes_factor)."""
    return np.exp(log_bayes_factor(ctx, y))


def lambda1(ctx: DesignContext) -> float:
    """Design constant of the null Bayes-factor law.

    lambda1 = sigma_b^2 xtx / (1 + sigma_b^2 xtx); under the null,
    2 log BF -> lambda1 * chi2(1) + log(1 - lambda1) asymptotically.
    """
    s2x = ctx.sigma_b ** 2 * ctx.xtx
    return s2x / (1.0 + s2x)
