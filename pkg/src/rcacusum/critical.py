"""Critical values: closed forms, simulated limit quantiles and the data-driven F_{N,L}.

Simulations are split into fixed blocks of replications.  Each block draws
from its own stream derived from ``(seed, block index)``, so results do not
depend on how many workers evaluate the blocks or in what order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize, stats as sps

from .hetero import HeteroKernel
from .stats import WeightSpec, a_norm, b_norm, split_grid

CACHE_VERSION = "rcacusum-cv-cache v1"
CACHE_COLUMNS = ("family", "kappa", "alpha", "reps", "grid", "seed", "value")
_CELLS_PER_BLOCK = 4_000_000


class EmpiricalCdf:
    """Step CDF of simulated draws with jumps of ``1/L`` at each draw."""

    def __init__(self, draws):
        self.draws = np.sort(np.asarray(draws, dtype=float))
        if self.draws.size == 0:
            raise ValueError("no draws")

    def __len__(self):
        return self.draws.size

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.draws, x, side="right") / self.draws.size

    def level(self, p: float) -> float:
        """``inf{x : F(x) >= p}``, i.e. the ``ceil(L p)``-th order statistic."""
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        j = max(1, math.ceil(self.draws.size * p - 1e-9))
        return float(self.draws[j - 1])

    def critical_value(self, alpha: float) -> float:
        return self.level(1 - alpha)


# -- closed forms -------------------------------------------------------------

def de_asymptotic_cv(alpha: float) -> float:
    """Quantile of the Gumbel-type limit ``exp(-2 e^{-x})``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return -math.log(-0.5 * math.log(1 - alpha))


def kolmogorov_cv(alpha: float) -> float:
    """Upper ``alpha`` quantile of ``sup |B(t)|`` for a standard Brownian bridge."""
    return float(sps.kstwobign.isf(alpha))


def sup_abs_wiener_cdf(x: float, terms: int = 60) -> float:
    """``P(sup_{0<=s<=1} |W(s)| <= x)`` from its alternating theta series."""
    if x <= 0:
        return 0.0
    k = np.arange(terms)
    odd = 2 * k + 1
    return float(4 / math.pi * np.sum((-1.0) ** k / odd * np.exp(-(math.pi * odd) ** 2 / (8 * x * x))))


def sup_abs_wiener_quantile(p: float) -> float:
    return optimize.brentq(lambda x: sup_abs_wiener_cdf(x) - p, 0.2, 10.0, xtol=1e-12)


def renyi_kappa1_cv(alpha: float) -> float:
    """Two-sided Renyi limit at ``kappa = 1`` under symmetric trimming."""
    return sup_abs_wiener_quantile(math.sqrt(1 - alpha))


# -- simulation plumbing ------------------------------------------------------

def _rows_per_block(width: int) -> int:
    return max(1, min(512, _CELLS_PER_BLOCK // max(width, 1)))


def _blocked(draw: Callable[[np.random.Generator, int], np.ndarray], reps: int, seed: int,
             width: int, workers: int = 1) -> np.ndarray:
    rows = _rows_per_block(width)
    sizes = [min(rows, reps - s) for s in range(0, reps, rows)]

    def run(b):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        return draw(rng, sizes[b])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    return np.concatenate(parts)


def _bridges(rng: np.random.Generator, rows: int, m: int) -> np.ndarray:
    """Brownian bridges at ``j/m``, ``j = 0..m``, from a scaled Gaussian walk."""
    w = np.zeros((rows, m + 1))
    np.cumsum(rng.standard_normal((rows, m)), axis=1, out=w[:, 1:])
    w *= 1 / math.sqrt(m)
    t = np.arange(m + 1) / m
    w -= t * w[:, -1:]
    w[:, -1] = 0.0
    return w


def bridge_paths(reps: int, grid_points: int, seed: int = 0) -> np.ndarray:
    """Simulated standard Brownian bridges; mainly for checking the generator."""
    return _blocked(lambda rng, r: _bridges(rng, r, grid_points), reps, seed, grid_points + 1)


def _interval_abs_sup(x: np.ndarray, var: np.ndarray, mult: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
    """Sup of ``mult * |X|`` with ``X`` interpolated between grid values as Brownian bridges.

    The maximum and minimum on each interval are sampled from their exact
    conditional laws given the endpoint values, which removes the
    downward bias of a grid-only maximum.  ``mult`` is held constant on
    each interval.
    """
    a = x[:, :-1]
    b = x[:, 1:]
    d2 = (a - b) ** 2
    hi = 0.5 * (a + b + np.sqrt(d2 + 2 * var * rng.standard_exponential(a.shape)))
    lo = 0.5 * (a + b - np.sqrt(d2 + 2 * var * rng.standard_exponential(a.shape)))
    return np.max(np.maximum(hi, -lo) * mult, axis=1)


def bridge_sup_draws(weight: WeightSpec, reps: int = 20_000, grid_points: int = 2000,
                     seed: int = 0, workers: int = 1) -> np.ndarray:
    """Draws of ``sup_t |B(t)|/w(t)`` for a standard Brownian bridge.

    The weight is frozen on each grid interval (geometric mean of its end
    values; the inner value on the two boundary intervals).
    """
    if reps < 100 or grid_points < 200:
        raise ValueError("need reps >= 100 and grid_points >= 200")
    m = grid_points
    inv_w = 1 / weight(np.arange(1, m) / m)
    mult = np.concatenate(([inv_w[0]], np.sqrt(inv_w[:-1] * inv_w[1:]), [inv_w[-1]]))
    var = np.full(m, 1 / m)

    def draw(rng, rows):
        return _interval_abs_sup(_bridges(rng, rows, m), var, mult, rng)

    return _blocked(draw, reps, seed, 3 * m, workers)


@lru_cache(maxsize=64)
def _bridge_cdf_cached(kappa: float, reps: int, grid_points: int, seed: int) -> EmpiricalCdf:
    return EmpiricalCdf(bridge_sup_draws(WeightSpec.kappa_power(kappa), reps, grid_points, seed))


def simulate_bridge_cv(weight: WeightSpec, alpha: float, reps: int = 20_000,
                       grid_points: int = 2000, seed: int = 0, workers: int = 1) -> float:
    """Upper ``alpha`` quantile of ``sup |B(t)|/w(t)`` by simulation."""
    if weight.kappa is not None and workers == 1:
        cdf = _bridge_cdf_cached(weight.kappa, reps, grid_points, seed)
    else:
        cdf = EmpiricalCdf(bridge_sup_draws(weight, reps, grid_points, seed, workers))
    return cdf.critical_value(alpha)


def renyi_grid(kappa: float, grid_points: int, per_decade: int = 16) -> np.ndarray:
    """Uniform grid on (0, 1] plus a geometric refinement below ``1/grid_points``."""
    decades = min(20, math.ceil(3 / (kappa - 0.5)))
    h = 1 / grid_points
    fine = h * 10.0 ** (-np.arange(decades * per_decade, 0, -1) / per_decade)
    return np.concatenate((fine, np.arange(1, grid_points + 1) * h))


def renyi_sup_draws(kappa: float, reps: int = 20_000, grid_points: int = 2000, seed: int = 0,
                    workers: int = 1) -> np.ndarray:
    """Draws of ``sup_{t>=1} |W(t)|/t^kappa``.

    Time inversion maps this to ``sup_{0<s<=1} s^{kappa-1} |W(s)|``, which
    is evaluated on :func:`renyi_grid` with bridge interpolation between
    grid points.
    """
    if not kappa > 0.5:
        raise ValueError("kappa must be > 1/2")
    if reps < 100 or grid_points < 200:
        raise ValueError("need reps >= 100 and grid_points >= 200")
    s = renyi_grid(kappa, grid_points)
    var = np.diff(np.concatenate(([0.0], s)))
    step = np.sqrt(var)
    pw = s ** (kappa - 1)
    mult = np.concatenate(([pw[0]], np.sqrt(pw[:-1] * pw[1:])))

    def draw(rng, rows):
        w = np.zeros((rows, s.size + 1))
        np.cumsum(rng.standard_normal((rows, s.size)) * step, axis=1, out=w[:, 1:])
        return _interval_abs_sup(w, var, mult, rng)

    return _blocked(draw, reps, seed, 3 * s.size, workers)


@lru_cache(maxsize=64)
def _renyi_cdf_cached(kappa: float, reps: int, grid_points: int, seed: int) -> EmpiricalCdf:
    return EmpiricalCdf(renyi_sup_draws(kappa, reps, grid_points, seed))


def max_of_two_level(cdf: EmpiricalCdf, p: float, gammas: tuple[float, float], power: float) -> float:
    """Smallest ``c`` with ``F(c/g1^power) F(c/g2^power) >= p`` for independent copies."""
    s1, s2 = (g**power for g in gammas)
    if s1 == s2:
        return s1 * cdf.level(math.sqrt(p))
    cand = np.sort(np.concatenate((cdf.draws * s1, cdf.draws * s2)))
    prob = cdf(cand / s1) * cdf(cand / s2)
    j = int(np.searchsorted(prob >= p - 1e-12, True))
    if j >= cand.size:
        return float(cand[-1])
    return float(cand[j])


def simulate_renyi_cv(kappa: float, alpha: float, reps: int = 20_000, grid_points: int = 2000,
                      seed: int = 0, gammas: tuple[float, float] = (1.0, 1.0)) -> float:
    """Critical value for ``max(g1^{k-1/2} a_1, g2^{k-1/2} a_2)`` with independent copies."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    cdf = _renyi_cdf_cached(float(kappa), reps, grid_points, seed)
    return max_of_two_level(cdf, 1 - alpha, tuple(gammas), kappa - 0.5)


def de_finite_sample_draws(n: int, reps: int = 5000, seed: int = 0, workers: int = 1) -> np.ndarray:
    """Darling-Erdos statistic computed from Brownian bridges observed at sample size ``n``.

    The bridge has ``n - 1`` steps, matching the ``n - 1`` weighted terms
    split as ``k - 1`` left and ``n - k`` right at interior splits.
    """
    if n < 20:
        raise ValueError("n must be >= 20")
    m = n - 1
    t = np.arange(1, m) / m
    inv_sd = 1 / np.sqrt(t * (1 - t))
    ln_n = math.log(n)
    a, b = a_norm(ln_n), b_norm(ln_n)

    def draw(rng, rows):
        br = _bridges(rng, rows, m)[:, 1:-1]
        return a * np.max(np.abs(br) * inv_sd, axis=1) - b

    return _blocked(draw, reps, seed, m + 1, workers)


@lru_cache(maxsize=128)
def _de_cdf_cached(n: int, reps: int, seed: int) -> EmpiricalCdf:
    return EmpiricalCdf(de_finite_sample_draws(n, reps, seed))


def de_finite_sample_cv(n: int, alpha: float, reps: int = 5000, seed: int = 0) -> float:
    return _de_cdf_cached(int(n), reps, seed).critical_value(alpha)


def fnl_draws(kernel: HeteroKernel, weight: WeightSpec, L: int = 200, seed: int = 0) -> np.ndarray:
    """``L`` draws of ``sup |Theta_i(t)|/w(t)`` for the plug-in Gaussian process.

    ``Theta_i(t) = c2(t) W_i(b(t)) - c1(t) (W_i(b(1)) - W_i(b(t)))`` with
    independent Wiener processes ``W_i`` evaluated at the estimated
    variance clock ``b``.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if not kernel.b_total > 0:
        raise ValueError("degenerate kernel: residual variance is zero")
    n = kernel.n
    k = split_grid(n)
    step = np.sqrt(np.diff(kernel.b))
    c1 = kernel.c1[k]
    c2 = kernel.c1_total - c1
    inv_w = 1 / weight(k / (n + 1))
    rng = np.random.default_rng(seed)
    w = np.zeros((L, n + 1))
    np.cumsum(rng.standard_normal((L, n)) * step, axis=1, out=w[:, 1:])
    wk = w[:, k]
    theta = c2 * wk - c1 * (w[:, -1:] - wk)
    return np.max(np.abs(theta) * inv_w, axis=1)


def fnl_cdf(kernel: HeteroKernel, weight: WeightSpec, L: int = 200, seed: int = 0) -> EmpiricalCdf:
    return EmpiricalCdf(fnl_draws(kernel, weight, L, seed))


def hetero_fnl_cv(kernel: HeteroKernel, weight: WeightSpec, L: int = 200, alpha: float = 0.05,
                  seed: int = 0) -> float:
    """``c_{N,L}(alpha) = inf{x : F_{N,L}(x) >= 1 - alpha}``."""
    if L < 100:
        raise ValueError("L must be >= 100")
    return fnl_cdf(kernel, weight, L, seed).critical_value(alpha)


# -- tables and the on-disk cache ---------------------------------------------

@dataclass
class CvTable:
    """Critical values keyed by ``(family, kappa, alpha)``."""

    entries: dict[tuple[str, float, float], float] = field(default_factory=dict)
    provenance: dict[tuple[str, float, float], str] = field(default_factory=dict)

    def to_delimited(self, delimiter: str = ",") -> str:
        alphas = sorted({a for _, _, a in self.entries})
        rows = sorted({(f, k) for f, k, _ in self.entries}, key=lambda r: r[1])
        buf = io.StringIO()
        wr = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        wr.writerow(["family", "kappa", *[f"{a:g}" for a in alphas]])
        for f, k in rows:
            wr.writerow([f, f"{k:g}", *[f"{self.entries[(f, k, a)]:.4f}" if (f, k, a) in self.entries
                                        else "" for a in alphas]])
        return buf.getvalue()


def family_for_kappa(kappa: float) -> str:
    if kappa < 0.5:
        return "weighted"
    return "darling-erdos" if kappa == 0.5 else "renyi"


def asymptotic_table(kappas, alphas=(0.05, 0.10), reps: int = 20_000, grid_points: int = 2000,
                     seed: int = 0) -> CvTable:
    """Limit critical values for power weights across the three families."""
    table = CvTable()
    for kappa in kappas:
        fam = family_for_kappa(kappa)
        for alpha in alphas:
            key = (fam, float(kappa), float(alpha))
            if fam == "weighted":
                table.entries[key] = simulate_bridge_cv(WeightSpec.kappa_power(kappa), alpha, reps,
                                                        grid_points, seed)
                table.provenance[key] = f"simulated(reps={reps}, grid={grid_points}, seed={seed})"
            elif fam == "darling-erdos":
                table.entries[key] = de_asymptotic_cv(alpha)
                table.provenance[key] = "analytic"
            else:
                table.entries[key] = simulate_renyi_cv(kappa, alpha, reps, grid_points, seed)
                table.provenance[key] = f"simulated(reps={reps}, grid={grid_points}, seed={seed})"
    return table


class CvCache:
    """Delimited-text cache of simulated critical values.

    Values are written with ``repr`` so they parse back to the identical
    float.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self._rows: dict[tuple, float] = {}
        if self.path.exists():
            self._load()

    @staticmethod
    def key(family: str, kappa: float, alpha: float, reps: int, grid: int, seed: int) -> tuple:
        return (family, float(kappa), float(alpha), int(reps), int(grid), int(seed))

    def _load(self):
        with self.path.open(newline="") as fh:
            first = fh.readline().strip()
            if first != f"# {CACHE_VERSION}":
                raise ValueError(f"{self.path}: unrecognised cache header {first!r}")
            for row in csv.DictReader(fh):
                k = self.key(row["family"], row["kappa"], row["alpha"], row["reps"], row["grid"],
                             row["seed"])
                self._rows[k] = float(row["value"])

    def get(self, *key) -> float | None:
        return self._rows.get(self.key(*key))

    def put(self, *key_and_value) -> None:
        *key, value = key_and_value
        self._rows[self.key(*key)] = float(value)

    def __len__(self):
        return len(self._rows)

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="") as fh:
            fh.write(f"# {CACHE_VERSION}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(CACHE_COLUMNS)
            for k in sorted(self._rows):
                fam, kappa, alpha, reps, grid, seed = k
                wr.writerow([fam, repr(kappa), repr(alpha), reps, grid, seed, repr(self._rows[k])])

    def get_or_compute(self, family: str, kappa: float, alpha: float, reps: int, grid: int,
                       seed: int, compute: Callable[[], float]) -> float:
        hit = self.get(family, kappa, alpha, reps, grid, seed)
        if hit is not None:
            return hit
        value = compute()
        self.put(family, kappa, alpha, reps, grid, seed, value)
        self.save()
        return value
