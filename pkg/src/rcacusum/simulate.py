"""Simulation of RCA(1) paths and stationarity diagnostics.

The model is ``y_i = (beta_i + e_{i,1}) y_{i-1} + e_{i,2}`` with independent
Gaussian innovations whose variances, like the deterministic coefficient,
may change at fixed sample fractions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

OVERFLOW_LIMIT = 1e300


class ExplosiveOverflowError(ArithmeticError):
    """Raised when a simulated path leaves the representable range."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"path overflowed at index {index} (|y| = {abs(value):.3g})")


@dataclass(frozen=True)
class RcaParams:
    beta0: float
    sigma1_sq: float = 0.01
    sigma2_sq: float = 0.5

    def __post_init__(self):
        if not math.isfinite(self.beta0):
            raise ValueError("beta0 must be finite")
        if not self.sigma1_sq >= 0:
            raise ValueError("sigma1_sq must be >= 0")
        if not self.sigma2_sq >= 0:
            raise ValueError("sigma2_sq must be >= 0")


@dataclass(frozen=True)
class Break:
    """A regime change at sample fraction ``tau``.

    By default the new regime starts at index ``floor(n * tau) + 1``.  With
    ``inclusive=True`` it starts at the first index ``i >= n * tau`` instead,
    which is the convention of the indicator ``I(i >= tau N)``.

    Variance scales are relative to the base :class:`RcaParams` variances.
    Fields left as ``None`` carry over from the previous regime.
    """

    tau: float
    beta: float | None = None
    scale1: float | None = None
    scale2: float | None = None
    inclusive: bool = False

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ValueError(f"break fraction must lie in (0, 1), got {self.tau}")
        if self.beta is None and self.scale1 is None and self.scale2 is None:
            raise ValueError("a break must change at least one of beta, scale1, scale2")
        for s in (self.scale1, self.scale2):
            if s is not None and not s > 0:
                raise ValueError("variance scales must be > 0")

    def start(self, n: int) -> int:
        if self.inclusive:
            return max(1, math.ceil(n * self.tau))
        return math.floor(n * self.tau) + 1


@dataclass(frozen=True)
class RcaSimSpec:
    params: RcaParams
    n: int
    breaks: tuple[Break, ...] = ()
    burn_in: int = 1000
    y0: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(self.breaks))
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        taus = [b.tau for b in self.breaks]
        if any(b < a for a, b in zip(taus, taus[1:])):
            raise ValueError("break fractions must be increasing")
        starts = [b.start(self.n) for b in self.breaks]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"breaks must start at strictly increasing indices at n={self.n}")
        if starts and starts[-1] > self.n:
            raise ValueError("break falls beyond the sample")

    def regime_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-index coefficient and innovation variances for ``i = 1..n``."""
        p = self.params
        beta = np.full(self.n, p.beta0, dtype=float)
        var1 = np.full(self.n, p.sigma1_sq, dtype=float)
        var2 = np.full(self.n, p.sigma2_sq, dtype=float)
        for b in self.breaks:
            j = b.start(self.n) - 1
            if b.beta is not None:
                beta[j:] = b.beta
            if b.scale1 is not None:
                var1[j:] = b.scale1 * p.sigma1_sq
            if b.scale2 is not None:
                var2[j:] = b.scale2 * p.sigma2_sq
        return beta, var1, var2


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Observations ``y_0 .. y_N``; ``n`` counts everything after ``y_0``."""

    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a series needs at least y_0 and y_1")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite value at index {bad}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def segment(self, start: int, stop: int, label: str | None = None) -> TimeSeries:
        """Sub-series ``y_start .. y_stop`` (inclusive); ``y_start`` becomes the initial value."""
        return TimeSeries(self.values[start : stop + 1], label=self.label if label is None else label,
                          meta={**self.meta, "offset": self.meta.get("offset", 0) + start})


def simulate_rca(spec: RcaSimSpec) -> TimeSeries:
    """Simulate one path of length ``n + 1`` after discarding ``burn_in`` steps.

    The burn-in runs under the first regime.  Draws come from a generator
    seeded only by ``spec.seed`` so equal specs give bit-identical paths.
    """
    beta, var1, var2 = spec.regime_arrays()
    total = spec.burn_in + spec.n
    rng = np.random.default_rng(spec.seed)
    z1 = rng.standard_normal(total)
    z2 = rng.standard_normal(total)

    coef = np.empty(total)
    coef[: spec.burn_in] = beta[0] + math.sqrt(var1[0]) * z1[: spec.burn_in]
    coef[spec.burn_in :] = beta + np.sqrt(var1) * z1[spec.burn_in :]
    shock = np.empty(total)
    shock[: spec.burn_in] = math.sqrt(var2[0]) * z2[: spec.burn_in]
    shock[spec.burn_in :] = np.sqrt(var2) * z2[spec.burn_in :]

    path = _recurse(spec.y0, coef.tolist(), shock.tolist())
    return TimeSeries(np.array(path[spec.burn_in :]), label="rca",
                      meta={"seed": spec.seed, "beta0": spec.params.beta0})


def _recurse(y0: float, coef: Sequence[float], shock: Sequence[float]) -> list[float]:
    out = [y0]
    y = y0
    for i, (a, e) in enumerate(zip(coef, shock)):
        y = a * y + e
        if not abs(y) <= OVERFLOW_LIMIT:
            raise ExplosiveOverflowError(i + 1, y)
        out.append(y)
    return out


def estimate_lyapunov(params: RcaParams, n_draws: int = 10**6, seed: int = 0) -> float:
    """Monte Carlo estimate of ``E ln|beta0 + e_1|``.

    Negative values mean the recursion has a strictly stationary solution.
    With ``sigma1_sq == 0`` the value is exactly ``ln|beta0|``.
    """
    if n_draws < 10**4:
        raise ValueError("n_draws must be >= 1e4")
    if params.sigma1_sq == 0:
        return math.log(abs(params.beta0)) if params.beta0 != 0 else -math.inf
    rng = np.random.default_rng(seed)
    x = np.abs(params.beta0 + math.sqrt(params.sigma1_sq) * rng.standard_normal(n_draws))
    zero = x == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} draws hit zero; clipped to the smallest positive float")
        x[zero] = np.finfo(float).tiny
    return float(np.mean(np.log(x)))
