"""Monte Carlo size and power studies.

Every replication draws its own generator from ``(seed, path cell, rep,
attempt)``, where the path cell is ``(beta0, N, heteroskedasticity case)``.
All values of ``kappa`` and ``delta`` therefore see the same innovations
within a replication, and ``delta = 0`` reproduces the size experiment
exactly.  Results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .detector import CvSource, TestConfig, run_test
from .estimators import DegenerateSeriesError, build_cumulants
from .hetero import build_kernel
from .simulate import Break, ExplosiveOverflowError, RcaParams, RcaSimSpec, simulate_rca

HETERO_CASES = {
    "HomoHomo": (None, None),
    "HomoHet2": (None, 1.5),
    "Het1Homo": (1.5, None),
    "Het1Het2": (1.5, 1.5),
}
BREAK_KINDS = {"none": None, "mid": 0.5, "end": 0.9}
MAX_ATTEMPTS = 20


@dataclass(frozen=True)
class ExperimentSpec:
    """A grid of simulation cells.

    ``variance_mode`` is ``"robust"`` for the heteroskedasticity-robust
    tests or ``"homoskedastic"``.  ``cv_mode`` is ``"default"`` (the routing
    of :meth:`TestConfig.for_kappa`) or ``"asymptotic"``, which uses the
    limit quantiles everywhere, with closed forms where they exist.
    """

    betas: tuple[float, ...] = (0.5,)
    n_list: tuple[int, ...] = (400,)
    kappas: tuple[float, ...] = (0.0,)
    deltas: tuple[float, ...] = (0.0,)
    break_kind: str = "none"
    hetero_case: str = "HomoHomo"
    variance_mode: str = "robust"
    cv_mode: str = "default"
    reps: int = 1000
    alpha: float = 0.05
    seed: int = 0
    L: int = 200
    cv_reps: int = 20_000
    cv_grid: int = 2000
    sigma1_sq: float = 0.01
    sigma2_sq: float = 0.5
    burn_in: int = 1000
    workers: int = 1

    def __post_init__(self):
        for name in ("betas", "n_list", "kappas", "deltas"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(k < 0 for k in self.kappas):
            raise ValueError("kappa must be >= 0")
        if self.break_kind not in BREAK_KINDS:
            raise ValueError(f"break_kind must be one of {sorted(BREAK_KINDS)}")
        if self.hetero_case not in HETERO_CASES:
            raise ValueError(f"hetero_case must be one of {sorted(HETERO_CASES)}")
        if self.variance_mode not in ("robust", "homoskedastic"):
            raise ValueError("variance_mode must be 'robust' or 'homoskedastic'")
        if self.cv_mode not in ("default", "asymptotic"):
            raise ValueError("cv_mode must be 'default' or 'asymptotic'")

    def config(self, kappa: float, rep_seed: int) -> TestConfig:
        hetero = self.variance_mode == "robust"
        sim = CvSource.simulated(self.cv_reps, self.cv_grid, 0)
        if kappa < 0.5 and hetero:
            src = CvSource.fnl(self.L, rep_seed)
        elif self.cv_mode == "asymptotic":
            src = CvSource.analytic() if kappa in (0.0, 0.5, 1.0) else sim
        elif kappa == 0.5:
            src = CvSource.simulated(5000, self.cv_grid, 0) if hetero else CvSource.analytic()
        else:
            src = sim
        return TestConfig.for_kappa(kappa, hetero=hetero, alpha=self.alpha, cv_source=src)

    def sim_spec(self, beta: float, n: int, delta: float, seed: int) -> RcaSimSpec:
        s1, s2 = HETERO_CASES[self.hetero_case]
        breaks = []
        tau = BREAK_KINDS[self.break_kind]
        if tau is not None and delta != 0:
            breaks.append(Break(tau, beta=beta + delta, inclusive=True))
        if s1 is not None or s2 is not None:
            breaks.append(Break(0.5, scale1=s1, scale2=s2))
        breaks.sort(key=lambda b: b.start(n))
        return RcaSimSpec(RcaParams(beta, self.sigma1_sq, self.sigma2_sq), n, tuple(breaks),
                          burn_in=self.burn_in, seed=seed)


def paper_preset(**overrides) -> ExperimentSpec:
    """Default size design: four coefficients and four sample sizes over eight weights."""
    base = ExperimentSpec(
        betas=(0.5, 0.75, 1.0, 1.05), n_list=(200, 400, 800, 1600),
        kappas=(0.0, 0.25, 0.45, 0.5, 0.51, 0.75, 0.85, 1.0),
        deltas=tuple(np.round(np.arange(0.05, 0.501, 0.05), 2)), reps=2000,
    )
    return replace(base, **overrides)


PRESETS = {"paper-2021": paper_preset}


def _cell_hash(*key) -> int:
    digest = hashlib.blake2b(repr(key).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rep_seed(master: int, beta: float, n: int, case: str, rep: int, attempt: int) -> int:
    ss = np.random.SeedSequence([master, _cell_hash(float(beta), int(n), case), rep, attempt])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RejectionTable:
    """Rejection frequencies keyed by ``(beta0, N, kappa, delta)``."""

    cells: dict[tuple[float, int, float, float], float] = field(default_factory=dict)
    reps: int = 0
    overflow_redraws: int = 0
    skipped: int = 0
    spec: dict = field(default_factory=dict)

    def half_width(self, key) -> float:
        p = self.cells[key]
        return 1.96 * math.sqrt(p * (1 - p) / self.reps)

    def tolerance(self, key, floor: float = 0.02) -> float:
        """Comparison band ``max(floor, 2 * half-width)`` for a reference cell."""
        return max(floor, 2 * self.half_width(key))

    def get(self, beta: float, n: int, kappa: float, delta: float = 0.0) -> float:
        return self.cells[(float(beta), int(n), float(kappa), float(delta))]

    def to_delimited(self, delimiter: str = ",") -> str:
        """Rows are ``kappa``; columns group ``N`` (and ``delta``) under each ``beta0``."""
        cols = sorted({(b, d, n) for b, n, _, d in self.cells})
        kappas = sorted({k for _, _, k, _ in self.cells})
        buf = io.StringIO()
        wr = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
        wr.writerow(["beta", *[f"{b:g}" for b, _, _ in cols]])
        wr.writerow(["delta", *[f"{d:g}" for _, d, _ in cols]])
        wr.writerow(["N", *[str(n) for _, _, n in cols]])
        for k in kappas:
            wr.writerow([f"{k:g}", *[f"{self.cells[(b, n, k, d)]:.3f}" for b, d, n in cols]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"reps": self.reps, "overflow_redraws": self.overflow_redraws,
                "skipped": self.skipped, "spec": self.spec,
                "cells": [{"beta": b, "n": n, "kappa": k, "delta": d, "rate": p,
                           "half_width": self.half_width((b, n, k, d))}
                          for (b, n, k, d), p in sorted(self.cells.items())]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> RejectionTable:
        cells = {(c["beta"], c["n"], c["kappa"], c["delta"]): c["rate"] for c in d["cells"]}
        return cls(cells, d["reps"], d["overflow_redraws"], d.get("skipped", 0), d.get("spec", {}))


def _one_rep(spec: ExperimentSpec, beta: float, n: int, rep: int) -> tuple[dict, int, int]:
    """Decisions for every ``(kappa, delta)`` in one replication."""
    out = {}
    redraws = skipped = 0
    for delta in spec.deltas:
        for attempt in range(MAX_ATTEMPTS):
            seed = rep_seed(spec.seed, beta, n, spec.hetero_case, rep, attempt)
            try:
                series = simulate_rca(spec.sim_spec(beta, n, delta, seed))
                break
            except ExplosiveOverflowError:
                redraws += 1
        else:
            raise RuntimeError(f"{MAX_ATTEMPTS} overflowing paths in a row at beta={beta}, n={n}")
        table = build_cumulants(series)
        kernel = build_kernel(series, table) if spec.variance_mode == "robust" else None
        for kappa in spec.kappas:
            try:
                rep_ = run_test(series, spec.config(kappa, seed), table, kernel)
                out[(kappa, delta)] = rep_.reject
            except DegenerateSeriesError:
                out[(kappa, delta)] = False
                skipped += 1
    return out, redraws, skipped


def _run(spec: ExperimentSpec) -> RejectionTable:
    table = RejectionTable(reps=spec.reps, spec=asdict(spec))
    for beta in spec.betas:
        for n in spec.n_list:
            reps = range(spec.reps)
            if spec.workers > 1:
                with ThreadPoolExecutor(spec.workers) as ex:
                    results = list(ex.map(lambda r: _one_rep(spec, beta, n, r), reps))
            else:
                results = [_one_rep(spec, beta, n, r) for r in reps]
            for kappa in spec.kappas:
                for delta in spec.deltas:
                    hits = sum(res[(kappa, delta)] for res, _, _ in results)
                    table.cells[(float(beta), int(n), float(kappa), float(delta))] = hits / spec.reps
            table.overflow_redraws += sum(r for _, r, _ in results)
            table.skipped += sum(s for _, _, s in results)
    return table


def size_experiment(spec: ExperimentSpec) -> RejectionTable:
    """Rejection frequencies under the null of no change."""
    if spec.break_kind != "none":
        raise ValueError("size experiments need break_kind='none'")
    return _run(replace(spec, deltas=(0.0,)))


def power_experiment(spec: ExperimentSpec) -> RejectionTable:
    """Rejection frequencies with a coefficient change of size ``delta`` at 0.5N or 0.9N."""
    if spec.break_kind == "none":
        raise ValueError("power experiments need break_kind 'mid' or 'end'")
    return _run(spec)
