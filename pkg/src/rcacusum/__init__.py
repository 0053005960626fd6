"""Weighted CUSUM change point tests for the coefficient of an RCA(1) process."""

from .critical import (CvCache, CvTable, EmpiricalCdf, de_asymptotic_cv, de_finite_sample_cv,
                       hetero_fnl_cv, kolmogorov_cv, renyi_kappa1_cv, simulate_bridge_cv,
                       simulate_renyi_cv)
from .detector import ChangepointSet, CvSource, TestConfig, TestReport, binary_segmentation, run_test
from .estimators import (CumulantTable, DegenerateSeriesError, EtaHatSq, beta_hat_left, beta_hat_right,
                         build_cumulants, eta_hat_sq)
from .harness import ExperimentSpec, RejectionTable, paper_preset, power_experiment, size_experiment
from .hetero import (HeteroKernel, build_kernel, hetero_de_stat, hetero_renyi_stat, hetero_weighted_sup,
                     qbar_process)
from .io import DataError, IngestSpec, ReportDocument, emit_report, load_series, parse_report
from .simulate import (Break, ExplosiveOverflowError, RcaParams, RcaSimSpec, TimeSeries,
                       estimate_lyapunov, simulate_rca)
from .stats import (CusumProcess, TrimSpec, WeightSpec, darling_erdos_stat, integrability_check,
                    q_process, renyi_stat, weighted_sup)

__version__ = "0.1.0"
