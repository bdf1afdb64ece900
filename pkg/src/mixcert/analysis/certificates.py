"""Symmetrizing and unpermuting ideal-state certificates.

A certificate's witness lives on ``R (x) (P S)^n``. Symmetrizing adds a
permutation register ``Pi`` in front of ``R`` that records which
permutation was applied to the pairs; unpermuting reads it back and undoes
the permutation branch by branch. Both preserve ball membership because
the ball is permutation invariant.

Without the ``Pi`` register the converse direction can fail: a state whose
symmetrization is ideal need not be ideal itself
(see :func:`pure_state_ball_gap`), so :func:`unpermute_ideal` needs a
symmetrized certificate that keeps its permutation branches.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..idealball import (
    HammingBall,
    IdealCertificate,
    _n_from,
    random_ball_state,
    verify_ideal_certificate,
    witness_reduction,
)
from ..qcore import ReferenceState, haar_isometry
from ..symmetry import all_permutations, apply_permutation, interleave, symmetrize_matrix


class CertificateError(ValueError):
    """A certificate does not support the requested construction."""


def certificate_residual(cert: IdealCertificate, ref: ReferenceState) -> tuple[bool, float, dict]:
    ok, info = verify_ideal_certificate(cert, ref)
    worst = max(info.get("reduction_residual", math.inf), info.get("ball_residual", math.inf))
    return ok, float(worst), info


def symmetrize_certificate(cert: IdealCertificate, ref: ReferenceState) -> IdealCertificate:
    """Certificate for ``(1/n!) sum_pi pi psi pi^dagger``.

    The witness is ``(1/sqrt(n!)) sum_pi |pi>_Pi (x) pi_{PS} |w>``, with
    ``Pi`` as the most significant factor of the new ``R``.
    """
    d = ref.d
    psi = np.asarray(cert.psi_Sn, dtype=complex)
    n = _n_from(psi, d)
    D = d * d
    w = np.asarray(cert.witness, dtype=complex).reshape(-1, D**n)
    perms = all_permutations(n)
    branches = np.stack([apply_permutation(w, pi, [D] * n, batch_first=True) for pi in perms])
    branches /= math.sqrt(len(perms))
    return IdealCertificate(symmetrize_matrix(psi, n, d), branches.reshape(-1), cert.epsilon)


def unpermute_ideal(sigma_Sn: np.ndarray, sym_cert: IdealCertificate, epsilon: float,
                    ref: ReferenceState, tol: float = 1e-8) -> IdealCertificate:
    """Certificate for ``sigma`` from a certificate of its symmetrization.

    If the witness already reduces to ``sigma`` it is reused. Otherwise its
    ``R`` register must start with a permutation register ``Pi`` whose
    branch ``pi`` reduces to ``pi sigma pi^dagger / n!``; applying
    ``pi^{-1}`` to the pairs of that branch yields a witness for ``sigma``.

    Raises:
        CertificateError: if ``sym_cert`` does not verify, is not a
            certificate for the symmetrization of ``sigma``, or its branches
            do not unpermute to ``sigma``.
    """
    d = ref.d
    sigma = np.asarray(sigma_Sn, dtype=complex)
    n = _n_from(sigma, d)
    D = d * d
    ok, info = verify_ideal_certificate(sym_cert, ref, tol)
    if not ok:
        raise CertificateError(f"symmetrized certificate does not verify: {info}")
    if np.abs(symmetrize_matrix(sigma, n, d) - sym_cert.psi_Sn).max() > tol:
        raise CertificateError("certificate is not for the symmetrization of sigma")
    direct = IdealCertificate(sigma, sym_cert.witness, epsilon)
    if verify_ideal_certificate(direct, ref, tol)[0]:
        return direct
    perms = all_permutations(n)
    w = np.asarray(sym_cert.witness, dtype=complex)
    if (w.size // D**n) % len(perms):
        raise CertificateError("witness has no permutation register")
    w = w.reshape(len(perms), -1, D**n)
    out = np.stack([apply_permutation(w[i], pi.inverse(), [D] * n, batch_first=True)
                    for i, pi in enumerate(perms)])
    cert = IdealCertificate(sigma, out.reshape(-1), epsilon)
    ok, info = verify_ideal_certificate(cert, ref, tol)
    if not ok:
        raise CertificateError(f"unpermuted witness does not certify sigma: {info}")
    return cert


def random_symmetrized_instance(n: int, radius: int, ref: ReferenceState, dim_r: int,
                                rng: np.random.Generator, scramble: bool = True):
    """Random ideal ``sigma`` and a symmetrized certificate for it.

    With ``scramble`` each permutation branch gets its own Haar unitary on
    the original ``R`` register, which leaves every reduction unchanged.
    Returns ``(sigma, sym_cert, epsilon)``.
    """
    eps = radius / n
    w = random_ball_state(n, radius, ref, dim_r, rng)
    sigma = witness_reduction(w, n, ref.d)
    sym = symmetrize_certificate(IdealCertificate(sigma, w, eps), ref)
    if scramble:
        D = ref.d**2
        br = sym.witness.reshape(math.factorial(n), dim_r, D**n)
        br = np.stack([haar_isometry(dim_r, dim_r, rng) @ b for b in br])
        sym = IdealCertificate(sym.psi_Sn, br.reshape(-1), eps)
    return sigma, sym, eps


def pure_state_ball_gap(s_vec: np.ndarray, n: int, radius: int, ref: ReferenceState) -> float:
    """Distance of the best purification of ``|s><s|`` from the ball.

    Every purification of a pure state is a product ``|xi>_{R P^n} |s>``,
    so ``|s><s|`` is ideal exactly when some ``|p>_{P^n} |s>`` lies in the
    ball. Returns the smallest singular value of
    ``p -> (I - projector)(p (x) s)``, which is zero exactly in that case.
    """
    d = ref.d
    s = np.asarray(s_vec, dtype=complex)
    s = s / np.linalg.norm(s)
    ball = HammingBall(n, radius, ref.phi_PS)
    cols = []
    for j in range(d**n):
        e = np.zeros(d**n, dtype=complex)
        e[j] = 1
        v = interleave(np.kron(e, s), n, d, d)
        cols.append(v - ball.apply(v))
    return float(np.linalg.svd(np.array(cols).T, compute_uv=False).min())


def symmetrization_counterexample(ref: Optional[ReferenceState] = None) -> dict:
    """``|01><01|`` at ``n = 2``, radius 1 around ``|Phi+>^2``.

    It is not ideal, yet its symmetrization is, with the pure witness
    ``(|00>_{P1S1}|11>_{P2S2} - |11>_{P1S1}|00>_{P2S2}) / sqrt(2)``.
    """
    ref = ref or ReferenceState.epr()
    s = np.zeros(4, dtype=complex)
    s[1] = 1
    gap = pure_state_ball_gap(s, 2, 1, ref)
    pair00 = np.array([1, 0, 0, 0], dtype=complex)
    pair11 = np.array([0, 0, 0, 1], dtype=complex)
    w = (np.kron(pair00, pair11) - np.kron(pair11, pair00)) / math.sqrt(2)
    sigma = np.outer(s, s.conj())
    sym = symmetrize_matrix(sigma, 2, 2)
    ok, info = verify_ideal_certificate(IdealCertificate(sym, w, 0.5), ref)
    return {"gap": gap, "symmetrized_ok": ok, "symmetrized_info": info}
