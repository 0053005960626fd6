"""Weighted CUSUM processes and the three statistic families.

Splits are evaluated on the integer grid ``t = k/(N+1)``, so the process
value at ``t`` uses the estimators split at ``k = floor((N+1) t)`` exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .estimators import CumulantTable, build_cumulants
from .simulate import TimeSeries


def a_norm(x: float) -> float:
    """Darling-Erdos scale ``(2 ln x)^{1/2}``."""
    return math.sqrt(2.0 * math.log(x))


def b_norm(x: float) -> float:
    """Darling-Erdos centring ``2 ln x + ln ln x / 2 - ln(pi) / 2``."""
    lx = math.log(x)
    return 2.0 * lx + 0.5 * math.log(lx) - 0.5 * math.log(math.pi)


@dataclass(frozen=True)
class TrimSpec:
    r1: int
    r2: int

    def __post_init__(self):
        if self.r1 < 1 or self.r2 < 1:
            raise ValueError("trimming lengths must be >= 1")

    @property
    def r(self) -> int:
        return min(self.r1, self.r2)

    def validate(self, n: int) -> TrimSpec:
        if self.r1 + self.r2 >= n:
            raise ValueError(f"trimming r1 + r2 = {self.r1 + self.r2} leaves nothing of n = {n}")
        return self

    @property
    def gammas(self) -> tuple[float, float]:
        return self.r / self.r1, self.r / self.r2

    @classmethod
    def default(cls, n: int) -> TrimSpec:
        r = math.ceil(math.log(n) ** 2)
        return cls(r, r)


class WeightSpec:
    """Weight function ``w(t)`` on (0, 1) dividing the CUSUM process.

    Use :meth:`kappa_power` for ``(t(1-t))^kappa`` or :meth:`custom` for an
    arbitrary positive function.  Custom weights are checked on a grid for
    positivity away from the endpoints and monotonicity next to them.
    """

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], kappa: float | None = None,
                 name: str | None = None):
        self._func = func
        self.kappa = kappa
        self.name = name or (f"kappa={kappa:g}" if kappa is not None else "custom")

    @classmethod
    def kappa_power(cls, kappa: float) -> WeightSpec:
        if not kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {kappa}")
        kappa = float(kappa)
        if kappa == 0:
            return cls(lambda t: np.ones_like(np.asarray(t, dtype=float)), kappa=0.0)
        return cls(lambda t: (np.asarray(t) * (1 - np.asarray(t))) ** kappa, kappa=kappa)

    @classmethod
    def custom(cls, func: Callable[[np.ndarray], np.ndarray], name: str = "custom",
               delta: float = 1e-3, edge: float = 0.05) -> WeightSpec:
        t = np.linspace(delta, 1 - delta, 2001)
        with np.errstate(all="ignore"):
            w = np.asarray(func(t), dtype=float)
        if w.shape != t.shape or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("custom weight must be finite and positive on [delta, 1 - delta]")
        lo = w[t <= edge]
        hi = w[t >= 1 - edge]
        if np.any(np.diff(lo) < -1e-12 * np.abs(lo[:-1])):
            raise ValueError("custom weight must be non-decreasing near 0")
        if np.any(np.diff(hi) > 1e-12 * np.abs(hi[:-1])):
            raise ValueError("custom weight must be non-increasing near 1")
        return cls(func, kappa=None, name=name)

    def __call__(self, t) -> np.ndarray:
        return np.asarray(self._func(np.asarray(t, dtype=float)), dtype=float)

    def __repr__(self):
        return f"WeightSpec({self.name})"


@dataclass(frozen=True, eq=False)
class CusumProcess:
    """Process values at splits ``k`` (usually ``2..N-2``) with ``t = k/(N+1)``.

    ``degenerate`` marks splits where a segment had zero weight; their value
    is recorded as 0.
    """

    values: np.ndarray
    k: np.ndarray
    n: int
    scaling: str = "homoskedastic"
    degenerate: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "k", np.asarray(self.k, dtype=int))
        if self.values.shape != self.k.shape:
            raise ValueError("values and k must have the same shape")
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(self.k.shape, dtype=bool))

    @property
    def t(self) -> np.ndarray:
        return self.k / (self.n + 1)

    def at(self, t: float) -> float:
        """Value of the step process at ``t`` (zero outside the central branch)."""
        k = math.floor((self.n + 1) * t)
        hit = np.flatnonzero(self.k == k)
        if t < 2 / (self.n + 1) or t >= 1 - 2 / (self.n + 1) or hit.size == 0:
            return 0.0
        return float(self.values[hit[0]])


def split_grid(n: int) -> np.ndarray:
    return np.arange(2, n - 1)


def q_process(series: TimeSeries, table: CumulantTable | None = None) -> CusumProcess:
    """``N^{1/2} t(1-t) (beta_left - beta_right)`` at every split ``k = 2..N-2``."""
    n = series.n
    if n < 8:
        raise ValueError(f"series too short (n={n}, need >= 8)")
    table = table or build_cumulants(series)
    k = split_grid(n)
    left, right, bad = table.left_right(k)
    t = k / (n + 1)
    q = np.where(bad, 0.0, math.sqrt(n) * t * (1 - t) * (left - right))
    return CusumProcess(values=q, k=k, n=n, scaling="homoskedastic", degenerate=bad)


def _sup(profile: np.ndarray, k: np.ndarray) -> tuple[float, int | None]:
    if profile.size == 0:
        raise ValueError("empty evaluation grid")
    j = int(np.argmax(profile))
    stat = float(profile[j])
    if stat <= 0:
        return 0.0, None
    return stat, int(k[j])


def weighted_profile(process: CusumProcess, weight: WeightSpec, eta_hat: float = 1.0) -> np.ndarray:
    if not eta_hat > 0:
        raise ValueError("eta_hat must be > 0")
    return np.abs(process.values) / (eta_hat * weight(process.t))


def weighted_sup(process: CusumProcess, weight: WeightSpec, eta_hat: float = 1.0
                 ) -> tuple[float, int | None]:
    """``sup |Q(t)| / (eta_hat w(t))`` and the split where it is attained.

    Ties go to the smallest split.  An identically zero process returns
    ``(0.0, None)``.
    """
    if process.degenerate.all():
        raise ValueError("every split is degenerate")
    return _sup(weighted_profile(process, weight, eta_hat), process.k)


def darling_erdos_profile(table: CumulantTable, eta_hat: float) -> tuple[np.ndarray, np.ndarray]:
    """Standardised statistic at every split ``1 < k < N``."""
    n = table.n
    if n < 20:
        raise ValueError(f"series too short (n={n}, need >= 20)")
    if not eta_hat > 0:
        raise ValueError("eta_hat must be > 0")
    k = np.arange(2, n)
    left, right, bad = table.left_right(k)
    if bad.all():
        raise ValueError("every split is degenerate")
    m = np.where(bad, 0.0, np.sqrt(k * (n - k) / n) * np.abs(left - right)) / eta_hat
    ln_n = math.log(n)
    return k, a_norm(ln_n) * m - b_norm(ln_n)


def darling_erdos_stat(table: CumulantTable, eta_hat: float, return_argmax: bool = False):
    """``a(ln N) M_N - b(ln N)`` with ``M_N`` the standardised maximum over splits."""
    k, prof = darling_erdos_profile(table, eta_hat)
    j = int(np.argmax(prof))
    if return_argmax:
        return float(prof[j]), int(k[j])
    return float(prof[j])


def renyi_window(k: np.ndarray, n: int, trim: TrimSpec) -> np.ndarray:
    t = k / (n + 1)
    return (t >= trim.r1 / n) & (t <= 1 - trim.r2 / n)


def renyi_profile(process: CusumProcess, kappa: float, trim: TrimSpec,
                  eta_hat: float = 1.0) -> np.ndarray:
    """Trimmed, rescaled ``|Q(t)|/(t(1-t))^kappa``; zero outside the window."""
    if not kappa > 0.5:
        raise ValueError("the Renyi statistic needs kappa > 1/2")
    if not eta_hat > 0:
        raise ValueError("eta_hat must be > 0")
    n = process.n
    trim.validate(n)
    inside = renyi_window(process.k, n, trim)
    if not inside.any():
        raise ValueError("trimmed window is empty")
    t = process.t
    scale = (trim.r / n) ** (kappa - 0.5) / eta_hat
    return np.where(inside, scale * np.abs(process.values) / (t * (1 - t)) ** kappa, 0.0)


def renyi_stat(process: CusumProcess, kappa: float, trim: TrimSpec, eta_hat: float = 1.0,
               return_argmax: bool = False):
    """``(r_N/N)^{kappa-1/2} sup_window |Q(t)| / (eta_hat (t(1-t))^kappa)``."""
    stat, k = _sup(renyi_profile(process, kappa, trim, eta_hat), process.k)
    return (stat, k) if return_argmax else stat


def integrability_check(weight: WeightSpec, c: float, max_depth: int = 200,
                        rtol: float = 1e-10) -> bool:
    """Whether ``I(w, c) = int_0^1 exp(-c w^2/(t(1-t))) / (t(1-t)) dt`` is finite.

    Power weights are decided analytically.  Otherwise the integral is
    accumulated over dyadic shells towards each endpoint; it is declared
    finite once the shell contributions fall below ``rtol`` of the running
    total, and divergent (with a warning) if that never happens.
    """
    if not c > 0:
        raise ValueError("c must be > 0")
    if weight.kappa is not None:
        return weight.kappa < 0.5

    def integrand(u, reflect):
        t = 1 - u if reflect else u
        tt = t * (1 - t)
        with np.errstate(all="ignore"):
            w = float(weight(np.array([t]))[0])
        return math.exp(-c * w * w / tt) / tt

    total = 0.0
    for reflect in (False, True):
        core, _ = integrate.quad(integrand, 0.25, 0.5, args=(reflect,), limit=200)
        total += core
        settled = False
        for j in range(2, max_depth):
            lo, hi = 2.0 ** -(j + 1), 2.0 ** -j
            # substitute u = e^s so each shell is an O(1) interval
            piece, _ = integrate.quad(lambda s: integrand(math.exp(s), reflect) * math.exp(s),
                                      math.log(lo), math.log(hi), limit=200)
            total += piece
            if not math.isfinite(total):
                return False
            if j > 8 and piece <= rtol * max(total, 1e-300):
                settled = True
                break
        if not settled:
            warnings.warn("integral functional did not settle; treating as divergent")
            return False
    return True


@dataclass(frozen=True)
class StatisticResult:
    """Value, maximising split and per-split profile of a statistic."""

    value: float
    argmax_k: int | None
    k: np.ndarray
    profile: np.ndarray
    process: np.ndarray
    extra: dict = field(default_factory=dict)
