"""Experiment orchestration: sweeps, diagnostics, verdicts and result files."""

from .diagnostics import (
    Classification,
    ConcentrationDiagnostic,
    DecayFit,
    Verdict,
    classify,
    concentration,
    decay_fit,
    extrapolate,
)
from .experiment import EXPERIMENTS, Experiment
from .experiments import (
    bump_search,
    convergence_study,
    decay_experiment,
    gap_experiment,
    monotonicity_suite,
    nonattainment_probe,
    wider_cone_experiment,
)
from .sweep import SweepPlan, SweepResult, SweepRow, solve_point, sweep_truncation

__all__ = [
    "EXPERIMENTS",
    "Classification",
    "ConcentrationDiagnostic",
    "DecayFit",
    "Experiment",
    "SweepPlan",
    "SweepResult",
    "SweepRow",
    "Verdict",
    "bump_search",
    "classify",
    "concentration",
    "convergence_study",
    "decay_experiment",
    "decay_fit",
    "extrapolate",
    "gap_experiment",
    "monotonicity_suite",
    "nonattainment_probe",
    "solve_point",
    "sweep_truncation",
    "wider_cone_experiment",
]
