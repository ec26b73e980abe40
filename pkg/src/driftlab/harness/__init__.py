"""Experiments: one per structural inequality or explicit counterexample."""

from .analytic import (InstabilityCertificate, find_instability_certificate,
                       run_instability_experiment, verify_heat_kernel_family,
                       verify_nonuniqueness_example)
from .recipe import Setup, certify
from .report import EXIT_CODES, ExperimentReport
from .structural import (run_duality_check, run_energy_experiment, run_l1_decay_experiment,
                         run_max_principle_experiment, run_stability_sweep,
                         run_uniqueness_check)

__all__ = [
    "EXIT_CODES", "ExperimentReport", "InstabilityCertificate", "Setup", "certify",
    "find_instability_certificate", "run_duality_check", "run_energy_experiment",
    "run_instability_experiment", "run_l1_decay_experiment", "run_max_principle_experiment",
    "run_stability_sweep", "run_uniqueness_check", "verify_heat_kernel_family",
    "verify_nonuniqueness_example",
]
