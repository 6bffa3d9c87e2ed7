"""Executable property suites for the theorems and lemmas of the library."""

from .convergence import ConvergenceConfig, experiment_emery_convergence, experiment_memin_slominski
from .inequalities import (
    BURKHOLDER_CONSTANT,
    MARTINGALE_CONSTANT,
    check_burkholder_martingale,
    check_burkholder_supermartingale,
    check_doob_meyer_bound,
    check_slicing_lemma,
    doob_meyer_parts,
    slicing_increments,
)
from .put import check_put_characterization, check_put_integral_stability, experiment_nupbr_put
from .report import ExperimentReport, Violation, write_reports
from .sweeps import SUITES, run_suite

__all__ = [
    "BURKHOLDER_CONSTANT", "MARTINGALE_CONSTANT", "ConvergenceConfig", "ExperimentReport", "SUITES",
    "Violation", "check_burkholder_martingale", "check_burkholder_supermartingale", "check_doob_meyer_bound",
    "check_put_characterization", "check_put_integral_stability", "check_slicing_lemma", "doob_meyer_parts",
    "experiment_emery_convergence", "experiment_memin_slominski", "experiment_nupbr_put", "run_suite",
    "slicing_increments", "write_reports",
]
