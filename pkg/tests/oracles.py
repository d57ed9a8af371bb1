"""Independent reference implementations used as test oracles."""

import numpy as np
from scipy import integrate, optimize


def brute_force_split(X, y, features=None):
    """Minimise the weighted daughter variance over every partition by a threshold.

    Returns (feature, threshold, decrease) with thresholds at midpoints; ties
    go to the smallest feature, then the smallest threshold.
    """
    n, d = X.shape
    parent = np.var(y)
    best = None
    for j in features if features is not None else range(d):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals[:-1], vals[1:]):
            s = 0.5 * (lo + hi)
            if not s < hi:
                s = lo
            left = X[:, j] <= s
            nl = left.sum()
            weighted = (nl * np.var(y[left]) + (n - nl) * np.var(y[~left])) / n
            dec = parent - weighted
            if best is None or dec > best[2] + 1e-12 * max(parent, 1e-300):
                best = (j, s, dec)
    return best


def population_delta(f, s, a=0.0, b=1.0, pdf=lambda x: 1.0):
    """P_L P_R (mean_L - mean_R)^2 on [a, b] by adaptive quadrature."""
    mass = lambda lo, hi: integrate.quad(pdf, lo, hi, epsabs=1e-14, epsrel=1e-13)[0]  # noqa: E731
    mean = lambda lo, hi: integrate.quad(lambda x: f(x) * pdf(x), lo, hi, epsabs=1e-14,  # noqa: E731
                                         epsrel=1e-13, limit=200)[0] / mass(lo, hi)
    tot = mass(a, b)
    pl, pr = mass(a, s) / tot, mass(s, b) / tot
    return pl * pr * (mean(a, s) - mean(s, b)) ** 2


def population_argmax(f, a=0.0, b=1.0, pdf=lambda x: 1.0, grid=400):
    s = np.linspace(a, b, grid + 2)[1:-1]
    vals = [population_delta(f, v, a, b, pdf) for v in s]
    i = int(np.argmax(vals))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, len(s) - 1)]
    res = optimize.minimize_scalar(lambda v: -population_delta(f, v, a, b, pdf), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-11})
    return float(res.x), -float(res.fun)
