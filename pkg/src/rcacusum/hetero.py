"""Heteroskedasticity-robust CUSUM process and its estimated covariance kernel.

The modified process multiplies the estimator difference by the left and
right weight mass instead of ``t(1-t)``.  Its covariance is estimated from
the weight mass ``c1`` and the cumulative squared weighted residuals ``b``,
which removes the need to know where the innovation variances change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import CumulantTable, DegenerateSeriesError, build_cumulants, weighted_residuals
from .simulate import TimeSeries
from .stats import CusumProcess, TrimSpec, WeightSpec, _sup, a_norm, b_norm, split_grid

G_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class HeteroKernel:
    """Weight mass and residual variance accumulated up to each split ``k = 0..N``.

    ``c1[k] = N^{-1} sum_{i=2}^{k} y_{i-1}^2/(1+y_{i-1}^2)`` and
    ``b[k] = N^{-1} sum_{i=2}^{k} u_i^2`` with ``u_i`` the weighted residual
    from the full-sample fit.  Both are read at the same split index.
    """

    c1: np.ndarray
    b: np.ndarray
    n: int

    @property
    def c1_total(self) -> float:
        return float(self.c1[self.n])

    @property
    def b_total(self) -> float:
        return float(self.b[self.n])

    @property
    def c2(self) -> np.ndarray:
        return self.c1_total - self.c1

    def index(self, t) -> np.ndarray:
        """Split index ``floor((N+1) t)`` clipped to ``0..N``."""
        return np.clip(np.floor((self.n + 1) * np.asarray(t, dtype=float)).astype(int), 0, self.n)

    def g_index(self, k, l) -> np.ndarray:
        """Estimated covariance between splits ``k`` and ``l``."""
        k = np.asarray(k)
        l = np.asarray(l)
        c = self.c1_total
        c1k, c1l = self.c1[k], self.c1[l]
        bk, bl = self.b[k], self.b[l]
        bmin = self.b[np.minimum(k, l)]
        return c * c * bmin - c * (c1k * bl + c1l * bk) + c1k * c1l * self.b_total

    def g(self, t, s) -> np.ndarray:
        return self.g_index(self.index(t), self.index(s))

    def g_diag(self, k=None) -> np.ndarray:
        k = np.arange(self.n + 1) if k is None else np.asarray(k)
        return self.g_index(k, k)


def build_kernel(series: TimeSeries, table: CumulantTable | None = None) -> HeteroKernel:
    table = table or build_cumulants(series)
    n = table.n
    if table.s_den[n] <= 0:
        raise DegenerateSeriesError("all lagged values are zero")
    u = weighted_residuals(series, table.beta_full)
    b = np.concatenate(([0.0, 0.0], np.cumsum(u * u))) / n
    c1 = np.asarray(table.s_den) / n
    b.setflags(write=False)
    return HeteroKernel(c1=c1, b=b, n=n)


def qbar_process(series: TimeSeries, table: CumulantTable | None = None,
                 kernel: HeteroKernel | None = None) -> CusumProcess:
    """``N^{1/2} c1(t) c2(t) (beta_left - beta_right)`` on the split grid."""
    n = series.n
    if n < 8:
        raise ValueError(f"series too short (n={n}, need >= 8)")
    table = table or build_cumulants(series)
    kernel = kernel or build_kernel(series, table)
    k = split_grid(n)
    left, right, bad = table.left_right(k)
    c1 = kernel.c1[k]
    q = np.where(bad, 0.0, math.sqrt(n) * c1 * (kernel.c1_total - c1) * (left - right))
    return CusumProcess(values=q, k=k, n=n, scaling="hetero", degenerate=bad)


def _studentised(qbar: CusumProcess, kernel: HeteroKernel) -> tuple[np.ndarray, np.ndarray]:
    g = kernel.g_diag(qbar.k)
    usable = g > G_FLOOR
    ratio = np.where(usable, np.abs(qbar.values) / np.sqrt(np.where(usable, g, 1.0)), 0.0)
    return ratio, usable


def hetero_de_profile(qbar: CusumProcess, kernel: HeteroKernel) -> np.ndarray:
    ratio, usable = _studentised(qbar, kernel)
    if not usable.any():
        raise DegenerateSeriesError("no split has a usable variance estimate")
    ln_n = math.log(qbar.n)
    return np.where(usable, a_norm(ln_n) * ratio - b_norm(ln_n), -np.inf)


def hetero_de_stat(qbar: CusumProcess, kernel: HeteroKernel, return_argmax: bool = False):
    """``a(ln N) sup |Qbar(t)|/g(t,t)^{1/2} - b(ln N)`` over splits with ``g > 1e-12``."""
    prof = hetero_de_profile(qbar, kernel)
    j = int(np.argmax(prof))
    return (float(prof[j]), int(qbar.k[j])) if return_argmax else float(prof[j])


def hetero_renyi_profile(qbar: CusumProcess, kernel: HeteroKernel, kappa: float,
                         trim: TrimSpec) -> np.ndarray:
    if not kappa > 0.5:
        raise ValueError("the Renyi statistic needs kappa > 1/2")
    n = qbar.n
    trim.validate(n)
    t = qbar.t
    t1 = trim.r / n
    inside = (t > t1) & (t < 1 - t1)
    ratio, usable = _studentised(qbar, kernel)
    inside &= usable
    if not inside.any():
        raise ValueError("trimmed window is empty")
    scale = t1 ** (kappa - 0.5)
    return np.where(inside, scale * (t * (1 - t)) ** (0.5 - kappa) * ratio, 0.0)


def hetero_renyi_stat(qbar: CusumProcess, kernel: HeteroKernel, kappa: float, trim: TrimSpec,
                      return_argmax: bool = False):
    """``(r_N/N)^{kappa-1/2} sup (t(1-t))^{1/2-kappa} |Qbar(t)|/g(t,t)^{1/2}`` on ``(r_N/N, 1-r_N/N)``."""
    stat, k = _sup(hetero_renyi_profile(qbar, kernel, kappa, trim), qbar.k)
    return (stat, k) if return_argmax else stat


def hetero_weighted_sup(qbar: CusumProcess, weight: WeightSpec) -> tuple[float, int | None]:
    """``sup |Qbar(t)|/w(t)``; the nuisance covariance is left to the critical value."""
    if qbar.degenerate.all():
        raise ValueError("every split is degenerate")
    return _sup(np.abs(qbar.values) / weight(qbar.t), qbar.k)


__all__ = [
    "HeteroKernel", "build_kernel", "qbar_process", "hetero_de_stat", "hetero_renyi_stat",
    "hetero_weighted_sup", "hetero_de_profile", "hetero_renyi_profile",
]
