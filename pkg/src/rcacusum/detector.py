"""End-to-end change point tests and binary segmentation.

A :class:`TestConfig` picks the statistic family, the variance treatment and
where the critical value comes from.  :func:`run_test` evaluates it on one
series; :func:`binary_segmentation` applies it recursively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import critical as cv
from .estimators import CumulantTable, DegenerateSeriesError, build_cumulants, eta_hat_sq
from .hetero import (HeteroKernel, _studentised, build_kernel, hetero_de_profile, hetero_renyi_profile,
                     qbar_process)
from .simulate import TimeSeries
from .stats import (CusumProcess, TrimSpec, WeightSpec, _sup, a_norm, b_norm, darling_erdos_profile,
                    q_process, renyi_profile, weighted_profile)

STATISTICS = ("weighted", "darling-erdos", "renyi")
CV_KINDS = ("analytic", "simulated", "fnl", "cached")
MIN_LENGTH = 20


@dataclass(frozen=True)
class CvSource:
    """Where the critical value comes from.

    ``analytic`` uses a closed form (Darling-Erdos limit, Kolmogorov at
    ``kappa = 0``, Renyi at ``kappa = 1``); ``simulated`` the limit law by
    Monte Carlo (finite-sample for Darling-Erdos); ``fnl`` the data-driven
    F_{N,L} draws; ``cached`` a simulated value looked up in (and added to)
    the file at ``path``.
    """

    kind: str = "simulated"
    reps: int = 20_000
    grid_points: int = 2000
    seed: int = 0
    L: int = 200
    path: str | None = None

    def __post_init__(self):
        if self.kind not in CV_KINDS:
            raise ValueError(f"unknown critical value source {self.kind!r}")
        if self.kind == "cached" and not self.path:
            raise ValueError("cached critical values need a path")

    @classmethod
    def analytic(cls) -> CvSource:
        return cls("analytic")

    @classmethod
    def simulated(cls, reps: int = 20_000, grid_points: int = 2000, seed: int = 0) -> CvSource:
        return cls("simulated", reps=reps, grid_points=grid_points, seed=seed)

    @classmethod
    def fnl(cls, L: int = 200, seed: int = 0) -> CvSource:
        return cls("fnl", L=L, seed=seed)

    @classmethod
    def cached(cls, path, reps: int = 20_000, grid_points: int = 2000, seed: int = 0) -> CvSource:
        return cls("cached", reps=reps, grid_points=grid_points, seed=seed, path=str(path))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "reps": self.reps, "grid_points": self.grid_points,
                "seed": self.seed, "L": self.L, "path": self.path}


@dataclass(frozen=True)
class TestConfig:
    """Statistic, variance treatment and critical value source.

    ``weight`` is only used by the weighted statistic and defaults to
    ``(t(1-t))^kappa``.  ``trim`` defaults to ``ceil((ln N)^2)`` on both
    sides, evaluated per series.
    """

    __test__ = False

    statistic: str = "weighted"
    kappa: float = 0.0
    weight: WeightSpec | None = None
    trim: TrimSpec | None = None
    hetero: bool = False
    alpha: float = 0.05
    cv_source: CvSource = field(default_factory=CvSource)

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.statistic == "weighted":
            if self.weight is None:
                object.__setattr__(self, "weight", WeightSpec.kappa_power(self.kappa))
            elif self.weight.kappa is not None:
                object.__setattr__(self, "kappa", self.weight.kappa)
            if self.weight.kappa is not None and self.weight.kappa >= 0.5:
                raise ValueError("weighted sup needs kappa < 1/2; use darling-erdos or renyi")
        if self.statistic == "renyi" and not self.kappa > 0.5:
            raise ValueError("the Renyi statistic needs kappa > 1/2")
        if self.statistic == "darling-erdos":
            object.__setattr__(self, "kappa", 0.5)
        kind = self.cv_source.kind
        robust_weighted = self.hetero and self.statistic == "weighted"
        if robust_weighted and kind != "fnl":
            raise ValueError("the robust weighted statistic needs fnl critical values")
        if kind == "fnl" and not robust_weighted:
            raise ValueError("fnl critical values apply only to the robust weighted statistic")
        if kind == "analytic":
            if self.statistic == "weighted" and self.kappa != 0:
                raise ValueError("no closed-form critical value for weighted kappa != 0")
            if self.statistic == "renyi" and self.kappa != 1:
                raise ValueError("no closed-form Renyi critical value for kappa != 1")
        if kind == "cached" and self.statistic == "weighted" and self.weight.kappa is None:
            raise ValueError("custom weights cannot be cached")

    @classmethod
    def for_kappa(cls, kappa: float, hetero: bool = False, alpha: float = 0.05,
                  cv_source: CvSource | None = None, trim: TrimSpec | None = None,
                  seed: int = 0) -> TestConfig:
        """Route ``kappa`` to its family with the default critical values.

        ``kappa < 1/2`` gives the weighted sup (F_{N,L} when robust),
        ``kappa = 1/2`` Darling-Erdos (finite-sample simulated when robust,
        the limit otherwise) and ``kappa > 1/2`` the Renyi statistic.
        """
        if kappa < 0.5:
            statistic = "weighted"
            default = CvSource.fnl(seed=seed) if hetero else (
                CvSource.analytic() if kappa == 0 else CvSource.simulated())
        elif kappa == 0.5:
            statistic = "darling-erdos"
            default = CvSource.simulated(reps=5000) if hetero else CvSource.analytic()
        else:
            statistic = "renyi"
            default = CvSource.simulated()
        return cls(statistic=statistic, kappa=float(kappa), trim=trim, hetero=hetero, alpha=alpha,
                   cv_source=cv_source or default)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "kappa": self.kappa,
                "weight": self.weight.name if self.weight is not None else None,
                "trim": [self.trim.r1, self.trim.r2] if self.trim else None,
                "hetero": self.hetero, "alpha": self.alpha, "cv_source": self.cv_source.to_dict()}


@dataclass
class TestReport:
    """Outcome of one test.

    ``breakdate`` and ``t_hat`` are set only when the null is rejected;
    ``argmax_k`` is always the maximising split.  ``curve`` holds the
    process, the rejection boundary in process units and the split grid.
    """

    __test__ = False

    statistic_value: float
    critical_value: float
    reject: bool
    n: int
    argmax_k: int | None = None
    breakdate: int | None = None
    t_hat: float | None = None
    eta_hat_sq: float | None = None
    diagnostics: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"statistic_value": self.statistic_value, "critical_value": self.critical_value,
                "reject": self.reject, "n": self.n, "argmax_k": self.argmax_k,
                "breakdate": self.breakdate, "t_hat": self.t_hat, "eta_hat_sq": self.eta_hat_sq,
                "diagnostics": list(self.diagnostics), "config": self.config,
                "curve": {k: [float(v) for v in vals] for k, vals in self.curve.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> TestReport:
        d = dict(d)
        d["curve"] = {k: list(v) for k, v in d.get("curve", {}).items()}
        return cls(**d)


@dataclass
class ChangepointSet:
    """Detected breaks in chronological order, each with the test that found it."""

    breaks: list[tuple[int, TestReport]] = field(default_factory=list)
    min_segment: int = MIN_LENGTH

    @property
    def indices(self) -> list[int]:
        return [k for k, _ in self.breaks]

    def __len__(self):
        return len(self.breaks)

    def to_dict(self) -> dict:
        return {"min_segment": self.min_segment,
                "breaks": [{"index": k, "report": r.to_dict()} for k, r in self.breaks]}

    @classmethod
    def from_dict(cls, d: dict) -> ChangepointSet:
        return cls([(b["index"], TestReport.from_dict(b["report"])) for b in d["breaks"]],
                   d["min_segment"])


def _family_key(config: TestConfig, trim: TrimSpec | None) -> str:
    if config.statistic == "renyi" and trim is not None and trim.r1 != trim.r2:
        raise ValueError("cached Renyi critical values assume symmetric trimming")
    return {"weighted": "weighted", "darling-erdos": "darling-erdos-finite", "renyi": "renyi"}[
        config.statistic]


def critical_value(config: TestConfig, n: int, trim: TrimSpec | None = None,
                   kernel: HeteroKernel | None = None) -> float:
    """Critical value for ``config`` at sample size ``n``."""
    src = config.cv_source
    alpha = config.alpha
    stat = config.statistic
    if src.kind == "fnl":
        if kernel is None:
            raise ValueError("fnl critical values need the variance kernel")
        return cv.hetero_fnl_cv(kernel, config.weight, src.L, alpha, src.seed)
    if src.kind == "analytic":
        if stat == "darling-erdos":
            return cv.de_asymptotic_cv(alpha)
        if stat == "weighted":
            return cv.kolmogorov_cv(alpha)
        g1, g2 = trim.gammas
        if g1 != g2:
            raise ValueError("the closed-form Renyi value assumes symmetric trimming")
        return cv.renyi_kappa1_cv(alpha)

    def simulate() -> float:
        if stat == "weighted":
            return cv.simulate_bridge_cv(config.weight, alpha, src.reps, src.grid_points, src.seed)
        if stat == "darling-erdos":
            return cv.de_finite_sample_cv(n, alpha, src.reps, src.seed)
        return cv.simulate_renyi_cv(config.kappa, alpha, src.reps, src.grid_points, src.seed,
                                    trim.gammas)

    if src.kind == "simulated":
        return simulate()
    grid = n if stat == "darling-erdos" else src.grid_points
    cache = cv.CvCache(src.path)
    return cache.get_or_compute(_family_key(config, trim), config.kappa, alpha, src.reps, grid,
                                src.seed, simulate)


def _threshold(config: TestConfig, process: CusumProcess, crit: float, eta: float | None,
               kernel: HeteroKernel | None, trim: TrimSpec | None) -> np.ndarray:
    """Rejection boundary for ``|Q|`` (or ``|Qbar|``) at each split."""
    t = process.t
    n = process.n
    sd = np.sqrt(np.maximum(kernel.g_diag(process.k), 0.0)) if config.hetero else eta
    if config.statistic == "weighted":
        return crit * config.weight(t) * (1.0 if config.hetero else eta)
    if config.statistic == "darling-erdos":
        level = (crit + b_norm(math.log(n))) / a_norm(math.log(n))
        if config.hetero:
            return level * sd
        k = process.k
        return level * eta * math.sqrt(n) * t * (1 - t) / np.sqrt(k * (n - k) / n)
    r = trim.r / n
    if config.hetero:
        inside = (t > r) & (t < 1 - r)
    else:
        inside = (t >= trim.r1 / n) & (t <= 1 - trim.r2 / n)
    bound = crit * sd * (t * (1 - t)) ** (config.kappa - 0.5) / r ** (config.kappa - 0.5)
    if not config.hetero:
        bound = bound * np.sqrt(t * (1 - t))
    return np.where(inside, bound, np.inf)


def run_test(series: TimeSeries, config: TestConfig, table: CumulantTable | None = None,
             kernel: HeteroKernel | None = None) -> TestReport:
    """Compute the configured statistic and critical value and decide.

    The breakdate estimate is the split maximising the same statistic,
    with ties going to the smallest split.
    """
    n = series.n
    if n < MIN_LENGTH:
        raise ValueError(f"series too short (n={n}, need >= {MIN_LENGTH})")
    table = table or build_cumulants(series)
    diagnostics = []
    eta = eta_hat_sq(series, table)
    trim = None
    if config.statistic == "renyi":
        trim = (config.trim or TrimSpec.default(n)).validate(n)

    if config.hetero:
        kernel = kernel or build_kernel(series, table)
        if not kernel.b_total > 0:
            raise DegenerateSeriesError("residual variance is zero")
        process = qbar_process(series, table, kernel)
        _, usable = _studentised(process, kernel)
        if (~usable).any():
            diagnostics.append(f"{int((~usable).sum())} splits below the variance floor")
        if config.statistic == "weighted":
            profile = np.abs(process.values) / config.weight(process.t)
            grid = process.k
        elif config.statistic == "darling-erdos":
            profile, grid = hetero_de_profile(process, kernel), process.k
        else:
            profile, grid = hetero_renyi_profile(process, kernel, config.kappa, trim), process.k
        eta_root = None
    else:
        if eta.degenerate:
            raise DegenerateSeriesError("residual variance is zero")
        eta_root = eta.eta
        process = q_process(series, table)
        if config.statistic == "weighted":
            profile, grid = weighted_profile(process, config.weight, eta_root), process.k
        elif config.statistic == "darling-erdos":
            grid, profile = darling_erdos_profile(table, eta_root)
        else:
            profile, grid = renyi_profile(process, config.kappa, trim, eta_root), process.k
    if process.degenerate.all():
        raise DegenerateSeriesError("every split is degenerate")
    if process.degenerate.any():
        diagnostics.append(f"{int(process.degenerate.sum())} degenerate splits set to zero")

    if config.statistic == "darling-erdos":
        j = int(np.argmax(profile))
        stat, k_hat = float(profile[j]), int(grid[j])
    else:
        stat, k_hat = _sup(profile, grid)
    crit = critical_value(config, n, trim, kernel)
    reject = bool(stat > crit)
    bound = _threshold(config, process, crit, eta_root, kernel, trim)
    return TestReport(
        statistic_value=stat, critical_value=float(crit), reject=reject, n=n, argmax_k=k_hat,
        breakdate=k_hat if reject else None,
        t_hat=k_hat / (n + 1) if reject and k_hat is not None else None,
        eta_hat_sq=None if eta.degenerate else eta.value, diagnostics=diagnostics,
        config=config.to_dict(),
        curve={"k": process.k.astype(float), "t": process.t, "process": process.values,
               "threshold": bound},
    )


def binary_segmentation(series: TimeSeries, config: TestConfig,
                        min_segment: int = MIN_LENGTH) -> ChangepointSet:
    """Test, split at the estimated breakdate, and recurse on both sides.

    A break at split ``k`` ends the left segment at ``y_k``, which also
    starts the right segment.  Segments shorter than ``min_segment`` or
    with zero residual variance are not tested.  Indices are global.
    """
    if min_segment < MIN_LENGTH:
        raise ValueError(f"min_segment must be >= {MIN_LENGTH}")
    found: list[tuple[int, TestReport]] = []
    stack = [(0, series.n)]
    while stack:
        start, stop = stack.pop()
        if stop - start < min_segment:
            continue
        seg = series.segment(start, stop)
        try:
            report = run_test(seg, config)
        except DegenerateSeriesError:
            continue
        if not report.reject or report.breakdate is None:
            continue
        k = start + report.breakdate
        report.diagnostics.append(f"segment [{start}, {stop}]")
        found.append((k, report))
        stack.append((k, stop))
        stack.append((start, k))
    found.sort(key=lambda b: b[0])
    return ChangepointSet(found, min_segment)
