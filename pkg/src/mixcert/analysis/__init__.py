"""Verification pipelines for the sampling bounds and the entropy accounting."""

from .certificates import (
    CertificateError,
    symmetrization_counterexample,
    pure_state_ball_gap,
    random_symmetrized_instance,
    symmetrize_certificate,
    unpermute_ideal,
)
from .decomposition import (
    accepted_purification,
    ball_purification,
    verify_ideal_decomposition,
    verify_symmetric_upper_bound,
)
from .entropy import (
    alice_entropy_experiment,
    bob_entropy_experiment,
    entropy_bound,
    verify_min_entropy_ideal,
)
from .reports import BoundReport, ExperimentReport, dumps, reports_csv
from .suite import ConfigError, default_suite, flatten_reports, run_experiment_suite, validate_suite

__all__ = [
    "BoundReport", "CertificateError", "ConfigError", "ExperimentReport", "accepted_purification",
    "alice_entropy_experiment", "ball_purification", "bob_entropy_experiment", "default_suite",
    "dumps", "entropy_bound", "flatten_reports", "symmetrization_counterexample", "pure_state_ball_gap",
    "random_symmetrized_instance", "reports_csv", "run_experiment_suite", "symmetrize_certificate",
    "unpermute_ideal", "validate_suite", "verify_ideal_decomposition", "verify_min_entropy_ideal",
    "verify_symmetric_upper_bound",
]
