"""Weighted least squares estimates of the AR coefficient at every split.

Observations are weighted by ``1 + y_{i-1}^2``.  All per-term ratios are
evaluated in a form that stays finite for explosive paths, where ``y^2``
alone would overflow long before ``y`` does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import TimeSeries

KAHAN_THRESHOLD = 100_000
RESIDUAL_RTOL = 1e-10


class DegenerateSeriesError(ValueError):
    """A weighted sum that must be positive is zero (the segment is all zeros)."""


def _lag_weights(y_prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``y^2/(1+y^2)`` and ``y/(1+y^2)`` without forming ``y^2``."""
    with np.errstate(divide="ignore", over="ignore"):
        inv = np.where(y_prev == 0, np.inf, 1.0 / y_prev)
        den = 1.0 / (1.0 + inv * inv)
        lev = np.where(y_prev == 0, 0.0, 1.0 / (y_prev + inv))
    return den, lev


def _prefix(x: np.ndarray, compensated: bool) -> np.ndarray:
    out = np.zeros(x.size + 1)
    if not compensated:
        np.cumsum(x, out=out[1:])
        return out
    s = 0.0
    c = 0.0
    for j, v in enumerate(x.tolist(), start=1):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[j] = s + c
    return out


@dataclass(frozen=True, eq=False)
class CumulantTable:
    """Prefix sums indexed by split point ``k`` (0..N).

    ``s_den[k]`` is the sum over ``i = 2..k`` of ``y_{i-1}^2/(1+y_{i-1}^2)``
    and ``s_num[k]`` the matching sum of ``y_i y_{i-1}/(1+y_{i-1}^2)``;
    entries for ``k < 2`` are zero.  ``r_den`` and ``r_num`` are the same
    sums over ``i = k+1..N``, accumulated from the end so that short right
    segments do not lose precision to cancellation.
    """

    s_den: np.ndarray
    s_num: np.ndarray
    r_den: np.ndarray
    r_num: np.ndarray
    n: int

    def left(self, k: int) -> float:
        return beta_hat_left(self, k)

    def right(self, k: int) -> float:
        return beta_hat_right(self, k)

    @property
    def beta_full(self) -> float:
        return beta_hat_left(self, self.n)

    def left_right(self, ks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised estimates at splits ``ks``; third output flags degenerate splits."""
        ks = np.asarray(ks)
        dl = self.s_den[ks]
        dr = self.r_den[ks]
        nl = self.s_num[ks]
        nr = self.r_num[ks]
        bad = (dl <= 0) | (dr <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(bad, 0.0, nl / np.where(dl > 0, dl, 1.0))
            right = np.where(bad, 0.0, nr / np.where(dr > 0, dr, 1.0))
        return left, right, bad


def _suffix(x: np.ndarray, compensated: bool) -> np.ndarray:
    """Entry ``k`` (0..N) sums the terms for ``i = k+1..N``; ``x[j]`` is term ``i = j+2``."""
    tail = _prefix(x[::-1], compensated)[::-1]
    return np.concatenate(([tail[0]], tail))


def build_cumulants(series: TimeSeries) -> CumulantTable:
    """Prefix sums over ``i = 2..N`` so every split is an O(1) lookup."""
    y = series.values
    n = series.n
    if n < 4:
        raise ValueError(f"series too short (n={n}, need >= 4)")
    den, lev = _lag_weights(y[1:-1])
    num = y[2:] * lev
    compensated = n >= KAHAN_THRESHOLD
    s_den = np.concatenate(([0.0], _prefix(den, compensated)))
    s_num = np.concatenate(([0.0], _prefix(num, compensated)))
    r_den = _suffix(den, compensated)
    r_num = _suffix(num, compensated)
    for a in (s_den, s_num, r_den, r_num):
        a.setflags(write=False)
    return CumulantTable(s_den=s_den, s_num=s_num, r_den=r_den, r_num=r_num, n=n)


def beta_hat_left(table: CumulantTable, k: int) -> float:
    """WLS estimate from observations ``i = 2..k``."""
    if not 2 <= k <= table.n:
        raise ValueError(f"left split must satisfy 2 <= k <= {table.n}, got {k}")
    d = table.s_den[k]
    if d <= 0:
        raise DegenerateSeriesError(f"left segment ending at k={k} has zero weight")
    return float(table.s_num[k] / d)


def beta_hat_right(table: CumulantTable, k: int) -> float:
    """WLS estimate from observations ``i = k+1..N``."""
    n = table.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"right split must satisfy 1 <= k <= {n - 1}, got {k}")
    d = table.r_den[k]
    if d <= 0:
        raise DegenerateSeriesError(f"right segment starting at k={k + 1} has zero weight")
    return float(table.r_num[k] / d)


@dataclass(frozen=True)
class EtaHatSq:
    a_hat_1: float
    a_hat_2: float
    value: float

    @property
    def degenerate(self) -> bool:
        return not self.value > 0

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.value))


def weighted_residuals(series: TimeSeries, beta: float) -> np.ndarray:
    """``(y_i - beta y_{i-1}) y_{i-1}/(1+y_{i-1}^2)`` for ``i = 2..N``.

    When every raw residual is below ``RESIDUAL_RTOL`` relative to its own
    terms the path is noiseless up to rounding and exact zeros are returned.
    """
    y = series.values
    _, lev = _lag_weights(y[1:-1])
    fit = beta * y[1:-1]
    raw = y[2:] - fit
    if np.all(np.abs(raw) <= RESIDUAL_RTOL * (np.abs(y[2:]) + np.abs(fit))):
        return np.zeros_like(raw)
    return raw * lev


def eta_hat_sq(series: TimeSeries, table: CumulantTable) -> EtaHatSq:
    """Variance estimator valid in both the stationary and explosive regimes."""
    n = table.n
    a2 = table.s_den[n] / (n - 1)
    if a2 <= 0:
        raise DegenerateSeriesError("all lagged values are zero")
    u = weighted_residuals(series, table.beta_full)
    a1 = float(np.dot(u, u) / (n - 1))
    return EtaHatSq(a_hat_1=a1, a_hat_2=float(a2), value=a1 / a2**2)
