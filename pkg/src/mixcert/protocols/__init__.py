"""Sampling protocols and their strategies, plus randomness generation."""

from .engine import (
    SamplingTranscript,
    acceptance_frequency,
    accepted_channel,
    run_sampling,
)
from .epr import epr_guessing_gamma
from .randomness import (
    RandomnessResult,
    accepted_tables,
    honest_alice_branches,
    randomness_branches,
    run_randomness_generation,
    sample_runs,
)
from .registry import PROTOCOLS, PROVERS, SAMPLERS, build_params, build_prover, build_sampler
from .strategies import *  # noqa: F401,F403
from .symmetrized import (
    SymmetrizedAdversary,
    iid_output_bound_residual,
    labelled_symmetrization,
    symmetrized_adversary,
    symmetrized_equality_residual,
)
