"""Guessing probability of a deviant prover in the EPR protocol."""

from __future__ import annotations

import math

import numpy as np

from ..qcore import fidelity_sq, helstrom_guess, trace_norm
from .strategies import basis_vectors


def epr_guessing_gamma(theta: np.ndarray) -> tuple[float, dict]:
    """Per-position acceptance of the best reply to a pair state ``|theta>_PS``.

    ``gamma`` averages the Helstrom probabilities of guessing the sampler's
    outcome in the computational and diagonal bases. The diagnostics hold
    the quantities of the chain relating ``gamma`` to the distance of
    ``theta_S`` from ``I/2``.
    """
    m = np.asarray(theta, dtype=complex).reshape(2, 2)
    m = m / np.linalg.norm(m)
    cond = []
    for c in (0, 1):
        cond.append([m @ basis_vectors(c)[:, x].conj() for x in (0, 1)])
    guesses = [helstrom_guess(np.outer(a, a.conj()), np.outer(b, b.conj())) for a, b in cond]
    gamma = 0.5 * guesses[0] + 0.5 * guesses[1]
    overlaps = sum(abs(np.vdot(a, b)) for a, b in cond)
    lam = np.linalg.svd(m, compute_uv=False) ** 2
    theta_s = m.T @ m.conj()
    dist = trace_norm(theta_s - np.eye(2) / 2)
    f2 = fidelity_sq(theta_s, np.eye(2) / 2)
    f = math.sqrt(max(f2, 0.0))
    half_gap = 0.5 * abs(lam[0] - lam[-1])
    return float(gamma), {
        "guess_computational": guesses[0],
        "guess_diagonal": guesses[1],
        "overlap_sum": float(overlaps),
        "schmidt": [float(x) for x in lam],
        "half_schmidt_gap": float(half_gap),
        "trace_distance_to_mixed": dist,
        "fidelity_sq": f2,
        "overlap_chain_slack": float(overlaps - half_gap),
        "fidelity_chain_slack": float(dist - 2 * (1 - f)),
    }
