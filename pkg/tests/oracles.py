"""Independent high-precision reference values used by the tests.

Nothing here imports the package under test.
"""

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def kolmogorov_cdf(x):
    """``P(sup|B| <= x) = 1 - 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)``."""
    x = mp.mpf(x)
    return 1 - 2 * mp.nsum(lambda k: (-1) ** (k - 1) * mp.exp(-2 * k * k * x * x), [1, mp.inf])


def kolmogorov_quantile(p):
    return mp.findroot(lambda x: kolmogorov_cdf(x) - p, mp.mpf("1.3"))


def sup_abs_wiener_cdf(x):
    """``P(sup_{[0,1]} |W| <= x)`` by the theta series."""
    x = mp.mpf(x)
    return 4 / mp.pi * mp.nsum(
        lambda k: (-1) ** k / (2 * k + 1) * mp.exp(-mp.pi ** 2 * (2 * k + 1) ** 2 / (8 * x * x)),
        [0, mp.inf])


def sup_abs_wiener_quantile(p):
    return mp.findroot(lambda x: sup_abs_wiener_cdf(x) - p, mp.mpf("2.5"))


def expected_log_abs_normal(mu=0, sigma=1):
    """``E ln|mu + sigma Z|`` by quadrature split at the log singularity."""
    mu, sigma = mp.mpf(mu), mp.mpf(sigma)
    f = lambda z: mp.log(abs(mu + sigma * z)) * mp.npdf(z)
    root = -mu / sigma
    return mp.quad(f, [-mp.inf, root - 1, root, root + 1, mp.inf])


def gumbel_cv(alpha):
    alpha = mp.mpf(alpha)
    return -mp.log(-mp.log(1 - alpha) / 2)


def a_fn(x):
    return mp.sqrt(2 * mp.log(x))


def b_fn(x):
    lx = mp.log(x)
    return 2 * lx + mp.log(lx) / 2 - mp.log(mp.pi) / 2


def stationary_eta_sq(beta0, s1, s2, n=10**6, burn=2000, seed=12345):
    """Plug-in value of the stationary-branch variance from one long simulated path."""
    rng = np.random.default_rng(seed)
    coef = beta0 + np.sqrt(s1) * rng.standard_normal(n + burn)
    shock = np.sqrt(s2) * rng.standard_normal(n + burn)
    y = np.empty(n + burn)
    prev = 0.0
    for i in range(n + burn):
        prev = coef[i] * prev + shock[i]
        y[i] = prev
    y = y[burn:]
    d = 1 + y * y
    m1 = np.mean((y * y / d) ** 2)
    m2 = np.mean((y / d) ** 2)
    m3 = np.mean(y * y / d)
    return (m1 * s1 + m2 * s2) / m3 ** 2


def brute_beta(y, lo, hi):
    """WLS coefficient over ``i = lo..hi`` by an explicit loop."""
    num = den = 0.0
    for i in range(lo, hi + 1):
        w = 1 + y[i - 1] ** 2
        num += y[i] * y[i - 1] / w
        den += y[i - 1] ** 2 / w
    return num / den
