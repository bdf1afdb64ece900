"""Operator inequalities: post-selection versus dominance.

Purifications on ``R (x) Q`` are handled as matrices ``M`` of shape
``(dim R, dim Q)`` with ``|v> = sum M[r, q] |r>|q>``; the reduction on ``Q``
is then ``M.T @ M.conj()``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import TOL_EQ, TOL_PSD, StateError, as_matrix, min_eig, psd_sqrt, trace_norm


@dataclass(frozen=True, eq=False)
class DominancePair:
    """Claim ``rho <= c * sigma``."""

    rho: np.ndarray
    sigma: np.ndarray
    c: float = 1.0


def q_reduction(m: np.ndarray) -> np.ndarray:
    """Reduced state on ``Q`` of the purification matrix ``m``."""
    return m.T @ m.conj()


def canonical_purification_matrix(rho: np.ndarray) -> np.ndarray:
    """Purification matrix of ``rho`` with a copy of its space as purifier."""
    return psd_sqrt(rho).T


def postselect(rho_ab, e_a: np.ndarray, dims: tuple[int, int], check: bool = True) -> np.ndarray:
    """``tr_A((E (x) I) rho_AB)`` for ``0 <= E <= I``.

    ``rho_ab`` is a density matrix or a pure vector on ``A (x) B``. With
    ``check`` the output is asserted to be dominated by ``tr_A(rho_AB)``.
    """
    da, db = dims
    e = np.asarray(e_a, dtype=complex)
    w = np.linalg.eigvalsh((e + e.conj().T) / 2)
    if w.min() < -TOL_PSD or w.max() > 1 + TOL_PSD:
        raise StateError("post-selection operator must satisfy 0 <= E <= I")
    x = as_matrix(rho_ab)
    if x.ndim == 1:
        m = x.reshape(da, db)
        out = m.T @ e.T @ m.conj()
        plain = m.T @ m.conj()
    else:
        t = x.reshape(da, db, da, db)
        out = np.einsum("ay,yiaj->ij", e, t)
        plain = np.einsum("aiaj->ij", t)
    if check and min_eig(plain - out) < -1e-10 * max(1.0, np.abs(plain).max()):
        raise AssertionError("post-selected state exceeds the plain reduction")
    return out


def check_dominance(pair: DominancePair, tol: float = TOL_PSD) -> tuple[bool, float]:
    """Whether ``c * sigma - rho`` is PSD, with its minimum eigenvalue."""
    lam = min_eig(pair.c * np.asarray(pair.sigma) - np.asarray(pair.rho))
    return lam >= -tol, lam


def tight_constant(rho: np.ndarray, sigma: np.ndarray, tol: float = 1e-10) -> float:
    """Smallest ``c`` with ``rho <= c sigma``; ``inf`` if the supports disagree."""
    w, v = np.linalg.eigh(sigma)
    keep = w > tol * max(1.0, w.max())
    vk = v[:, keep]
    outside = rho - vk @ (vk.conj().T @ rho @ vk) @ vk.conj().T
    if np.abs(outside).max() > 1e-8:
        return math.inf
    inv_root = vk @ np.diag(1 / np.sqrt(w[keep])) @ vk.conj().T
    return float(np.linalg.eigvalsh(inv_root @ rho @ inv_root).max())


def _purification_matrix(sigma_t: np.ndarray, tol: float) -> np.ndarray:
    """Low-rank purification matrix of a PSD operator (rows = rank)."""
    w, v = np.linalg.eigh(sigma_t)
    keep = w > tol
    return (v[:, keep] * np.sqrt(w[keep])).T


def construct_postselection_map(pair: DominancePair, rho_purif: np.ndarray,
                                sigma_purif: np.ndarray) -> tuple[np.ndarray, dict]:
    """Build ``A: R1 -> R2`` with ``A^dagger A <= I`` and ``sqrt(c) A|sigma> = |rho>``.

    ``rho_purif`` has shape ``(dim R2, dim Q)`` and ``sigma_purif`` shape
    ``(dim R1, dim Q)``. The remainder ``c sigma - rho`` (clamped PSD) is
    purified next to ``|rho>`` behind a flag qubit; the result is a
    purification of ``sigma``, so it is reached from ``|sigma>`` by a partial
    isometry, whose flag-0 block is ``A``.
    """
    rho = np.asarray(pair.rho, dtype=complex)
    sigma = np.asarray(pair.sigma, dtype=complex)
    c = float(pair.c)
    ok, lam = check_dominance(pair)
    if not ok:
        raise StateError(f"dominance fails (min eigenvalue {lam})")
    m_rho = np.asarray(rho_purif, dtype=complex)
    m_sig = np.asarray(sigma_purif, dtype=complex)
    if np.abs(q_reduction(m_rho) - rho).max() > 1e-8 or np.abs(q_reduction(m_sig) - sigma).max() > 1e-8:
        raise StateError("purification does not reduce to its state")
    rest = c * sigma - rho
    w, v = np.linalg.eigh((rest + rest.conj().T) / 2)
    rest = (v * np.clip(w, 0, None)) @ v.conj().T
    m_rest = _purification_matrix(rest, TOL_PSD)
    d2 = m_rho.shape[0]
    dpad = max(d2, m_rest.shape[0])
    dq = rho.shape[0]
    flagged = np.zeros((2 * dpad, dq), dtype=complex)
    flagged[:d2] = m_rho
    flagged[dpad:dpad + m_rest.shape[0]] = m_rest
    flagged /= math.sqrt(c)
    v_map = flagged @ np.linalg.pinv(m_sig, rcond=1e-10)
    a = v_map[:d2]
    residual = float(np.linalg.norm(math.sqrt(c) * a @ m_sig - m_rho))
    contraction = float(np.linalg.eigvalsh(a.conj().T @ a).max()) if a.size else 0.0
    return a, {"residual": residual, "max_eig_AdagA": contraction}


def superposition_mixture_check(vectors: Sequence[np.ndarray], tol: float = TOL_PSD) -> tuple[bool, float]:
    """``sum_ij |v_i><v_j| <= J sum_i |v_i><v_i|`` via the minimum eigenvalue."""
    vs = np.array([np.asarray(v, dtype=complex) for v in vectors])
    s = vs.sum(axis=0)
    lhs = np.outer(s, s.conj())
    rhs = len(vs) * vs.T @ vs.conj()
    lam = min_eig(rhs - lhs)
    return lam >= -tol, lam


def gentle_measurement_check(rho: np.ndarray, proj: np.ndarray) -> tuple[float, float, bool]:
    """``(||rho - P rho P||_1, 2 sqrt(tr((I - P) rho)), ok)``."""
    rho = as_matrix(rho)
    p = np.asarray(proj, dtype=complex)
    if np.abs(p @ p - p).max() > TOL_EQ:
        raise StateError("operator is not a projector")
    prp = p @ rho @ p
    dist = trace_norm(rho - prp)
    leak = max(float(np.trace(rho).real - np.trace(prp).real), 0.0)
    bound = 2 * math.sqrt(leak)
    return dist, bound, dist <= bound + TOL_EQ
