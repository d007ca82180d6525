"""Independent oracles used by the test suite.

These deliberately avoid the closed forms and iterative algorithms they
check: the Bayes factor oracle integrates the marginal likelihoods
numerically over (effect, residual variance), and the Lambda oracle scans
pi on a grid with golden-section refinement inside the winning bracket.
"""

import math

import numpy as np
from scipy.integrate import dblquad, quad
from scipy.optimize import minimize_scalar


def log_bf_numeric(ctx, y, epsrel=1e-11):
    """Numerically integrated log Bayes factor for one response vector.

    Both marginal likelihoods are computed after analytically integrating
    the flat intercept/covariate effects out (the common factor cancels in
    the ratio):

      m1 = int int v^(-(n-q)/2 - 1) N(b; 0, sigma_b^2 v)
               exp(-||yt - b*xt||^2 / (2 v)) db dv
      m0 = int v^(-(n-q)/2 - 1) exp(-||yt||^2 / (2 v)) dv

    Each integrand is rescaled by its own maximum so the quadrature runs on
    O(1) values; the log of the scale factor is added back.
    """
    yt = ctx.residualize(np.asarray(y, dtype=float))
    xt = ctx.x_tilde
    a = 0.5 * (ctx.n - ctx.q)
    rss0 = float(yt @ yt)
    xty = float(xt @ yt)
    xtx = ctx.xtx
    sb2 = ctx.sigma_b ** 2

    def log_f1(b, v):
        s = rss0 - 2.0 * b * xty + b * b * xtx
        return (
            -(a + 1.0) * math.log(v)
            - s / (2.0 * v)
            - 0.5 * math.log(2.0 * math.pi * sb2 * v)
            - b * b / (2.0 * sb2 * v)
        )

    # mode of the integrand, found numerically
    b_hat = xty / (xtx + 1.0 / sb2)
    s_hat = rss0 - b_hat * xty
    v_hat = s_hat / (2.0 * a + 3.0)
    res_b = minimize_scalar(lambda b: -log_f1(b, v_hat),
                            bracket=(b_hat - 1.0, b_hat, b_hat + 1.0))
    res_v = minimize_scalar(lambda lv: -log_f1(res_b.x, math.exp(lv)),
                            bracket=(math.log(v_hat) - 1, math.log(v_hat),
                                     math.log(v_hat) + 1))
    b0, v0 = float(res_b.x), math.exp(float(res_v.x))
    peak1 = log_f1(b0, v0)

    sd_b = math.sqrt(v0 / (xtx + 1.0 / sb2))
    sd_lv = math.sqrt(2.0 / (ctx.n - ctx.q))  # log-variance scale
    b_lo, b_hi = b0 - 12.0 * sd_b, b0 + 12.0 * sd_b
    lv_lo, lv_hi = math.log(v0) - 14.0 * sd_lv, math.log(v0) + 14.0 * sd_lv

    # integrate in (b, log v); the Jacobian contributes a factor v
    val1, _ = dblquad(
        lambda b, lv: math.exp(log_f1(b, math.exp(lv)) + lv - peak1),
        lv_lo, lv_hi, b_lo, b_hi, epsabs=0.0, epsrel=epsrel,
    )
    log_m1 = peak1 + math.log(val1)

    def log_f0(v):
        return -(a + 1.0) * math.log(v) - rss0 / (2.0 * v)

    v0n = rss0 / (2.0 * a + 2.0)
    peak0 = log_f0(v0n)
    val0, _ = quad(
        lambda lv: math.exp(log_f0(math.exp(lv)) + lv - peak0),
        math.log(v0n) - 14.0 * sd_lv, math.log(v0n) + 14.0 * sd_lv,
        epsabs=0.0, epsrel=epsrel, limit=200,
    )
    log_m0 = peak0 + math.log(val0)
    return log_m1 - log_m0


def lambda_max_grid(bfs_by_scale, step=1e-3):
    """Grid maximization of Lambda(pi), refined by golden section per scale.

    The per-scale log likelihood is concave in pi, so refining within one
    grid cell of the winning grid point is exact.
    """
    total = 0.0
    pis = []
    for bf in bfs_by_scale:
        bf = np.asarray(bf, dtype=float)
        if bf.size == 0:
            pis.append(0.0)
            continue

        def neg_ll(p, bf=bf):
            return -float(np.sum(np.log1p(p * (bf - 1.0))))

        grid = np.arange(0.0, 1.0 + step / 2, step)
        vals = np.array([neg_ll(p) for p in grid])
        k = int(np.argmin(vals))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        res = minimize_scalar(neg_ll, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best_p, best_v = float(res.x), float(res.fun)
        for endpoint in (0.0, 1.0):
            if neg_ll(endpoint) < best_v:
                best_p, best_v = endpoint, neg_ll(endpoint)
        pis.append(best_p)
        total += -best_v
    return np.array(pis), float(np.exp(total))
