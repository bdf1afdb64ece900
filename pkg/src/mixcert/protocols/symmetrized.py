"""Symmetrized adversary acting on a symmetric purification.

Given a prover with pure state ``|rho>`` on ``R (x) S^N`` and its replies,
this builds a strategy for a prover that instead holds the purifying half
``P^N`` of a symmetric purification ``|rho_bar>`` of the symmetrized
``S^N`` marginal. It maps ``P^N`` into ``R (x) PiBar`` so that the result is
``(1/sqrt(N!)) sum_pi |pi> (x) (I (x) pi_S)|rho>``, reads off which
permutation was applied, runs the original reply for the sample ``t_pi``
that the fixed sample ``[k]`` corresponds to, and writes the permutation
of the unsampled positions to an output register ``Pi``. The sampler always
checks the first ``k`` positions.
"""

from __future__ import annotations

import math

import numpy as np

from ..qcore import QuantumState, RegisterSystem, reduce_vector
from ..symmetry import (
    Permutation,
    all_permutations,
    apply_permutation,
    deinterleave,
    decompose_permutation,
    grouping_permutation,
    interleave,
    symmetric_purification,
    symmetrize_matrix,
)
from .engine import (
    _checked_isometry,
    _checked_measurement,
    _move_factors,
    _prepared,
    challenges,
    phi_power_blocked,
    reduce_r,
)
from .strategies import PURIFICATION, ProtocolParams, ProverStrategy, basis_vectors


class SymmetrizedAdversary:
    """The symmetrized strategy built from ``prover``.

    ``apply(vec)`` evaluates the accepted output with its ``Pi`` label for an
    arbitrary (possibly unnormalized) input vector on ``P^N S^N`` in the
    interleaved pair layout, returned as ``{tau_bar mapping: operator}``.
    """

    def __init__(self, params: ProtocolParams, prover: ProverStrategy):
        self.params = params
        self.prover = prover
        N, d = params.N, params.d
        psi = _prepared(params, prover)
        self.dim_r = prover.dim_r(params)
        self.r_dims = prover.r_dims(params)
        m_psi = psi.reshape(self.dim_r, d**N)
        rho_s = m_psi.T @ m_psi.conj()
        rho_sym = symmetrize_matrix(rho_s, N, d)
        purif, self.purification_residual = symmetric_purification(
            QuantumState(RegisterSystem.uniform("S", N, d), rho_sym), return_residual=True)
        self.rho_bar = purif.data
        self.perms = all_permutations(N)
        norm = 1 / math.sqrt(math.factorial(N))
        omega = np.stack([apply_permutation(m_psi, pi, [d] * N, batch_first=True) * norm
                          for pi in self.perms], axis=1)  # (R, Pi, S^N)
        self._omega = omega.reshape(-1, d**N)
        m_bar = deinterleave(self.rho_bar, N, d, d).reshape(d**N, d**N)
        self.w = self._omega @ np.linalg.pinv(m_bar, rcond=1e-10)
        self.w_residual = float(np.linalg.norm(self.w @ m_bar - self._omega))
        self._decomp = [decompose_permutation(pi, params.k) for pi in self.perms]
        self._replies: dict = {}

    def _reply(self, t, c=None):
        key = (t, c)
        if key not in self._replies:
            if self.params.protocol_kind == PURIFICATION:
                self._replies[key] = _checked_isometry(self.params, self.prover, t, self.dim_r)
            else:
                self._replies[key] = _checked_measurement(self.params, self.prover, t, c)
        return self._replies[key]

    def apply(self, vec: np.ndarray) -> dict:
        p = self.params
        N, k, n, d = p.N, p.k, p.n, p.d
        m_in = deinterleave(np.asarray(vec, dtype=complex), N, d, d).reshape(d**N, d**N)
        y = (self.w @ m_in).reshape(self.dim_r, len(self.perms), d**N)
        group_k = grouping_permutation(range(k), N)
        out: dict = {}
        for i, pi in enumerate(self.perms):
            t_pi, tau, tau_bar = self._decomp[i]
            chi = y[:, i, :]
            if p.protocol_kind == PURIFICATION:
                op = self._branch_purification(chi, t_pi, tau, group_k)
            else:
                op = self._branch_epr(chi, t_pi, tau, group_k)
            key = tau_bar.mapping
            out[key] = out.get(key, 0) + op
        return out

    def _branch_purification(self, chi, t_pi, tau, group_k):
        p = self.params
        N, k, n, d = p.N, p.k, p.n, p.d
        u = self._reply(t_pi)
        z = (u @ chi).reshape(-1, d**k, d**N)
        r_out = z.shape[0]
        # reorder the returned P^k by tau so it lines up with the permuted S^k
        z = apply_permutation(z.transpose(0, 2, 1).reshape(-1, d**k), tau, [d] * k,
                              batch_first=True).reshape(r_out, d**N, d**k)
        z = apply_permutation(z.transpose(0, 2, 1).reshape(-1, d**N), group_k, [d] * N,
                              batch_first=True).reshape(r_out, d**k, d**n, d**k)
        z = z.transpose(0, 2, 1, 3).reshape(r_out, d**n, -1)
        v = z @ phi_power_blocked(p).conj()
        return reduce_r(v)

    def _branch_epr(self, chi, t_pi, tau, group_k):
        p = self.params
        N, k, n = p.N, p.k, p.n
        z = apply_permutation(chi, group_k, [2] * N, batch_first=True).reshape(self.dim_r, 2**n, 2**k)
        op = np.zeros((2**n, 2**n), dtype=complex)
        for c in challenges(k):
            meas = self._reply(t_pi, c)
            basis = np.ones((1, 1), dtype=complex)
            for cj in c:
                basis = np.kron(basis, basis_vectors(cj))
            # outcome vectors for the sorted sample, moved to the permuted slots
            moved = apply_permutation(basis.T, tau, [2] * k, batch_first=True)
            proj = np.einsum("rsy,xy->xrs", z, moved.conj())
            proj = _move_factors(proj, self.r_dims, meas.factors)
            op += np.einsum("xba,xars,xbrt->st", meas.elements, proj, proj.conj()) / 2**k
        return op

    def accepted_output(self) -> dict:
        return self.apply(self.rho_bar)


def symmetrized_adversary(params: ProtocolParams, prover: ProverStrategy) -> SymmetrizedAdversary:
    return SymmetrizedAdversary(params, prover)


def labelled_symmetrization(accepted: np.ndarray, n: int, d: int) -> dict:
    """``{tau_bar: (1/n!) tau_bar A tau_bar^dagger}`` for every ``tau_bar``."""
    out = {}
    fact = math.factorial(n)
    dims = [d] * n
    for pi in all_permutations(n):
        axes = list(pi.inverse().mapping)
        t = accepted.reshape(dims * 2).transpose(axes + [n + a for a in axes])
        out[pi.mapping] = t.reshape(accepted.shape) / fact
    return out


def symmetrized_equality_residual(params: ProtocolParams, prover: ProverStrategy,
                                  accepted: np.ndarray | None = None) -> float:
    """Largest entry of the difference between both sides of the permutation-invariance identity."""
    from .engine import accepted_channel

    if accepted is None:
        accepted = accepted_channel(params, prover)
    adv = SymmetrizedAdversary(params, prover)
    rhs = adv.accepted_output()
    lhs = labelled_symmetrization(accepted, params.n, params.d)
    zero = np.zeros_like(accepted)
    return max(float(np.abs(np.asarray(rhs.get(key, zero)) - lhs[key]).max()) for key in lhs)


def iid_output_bound_residual(adv: SymmetrizedAdversary, theta: np.ndarray) -> float:
    """Minimum eigenvalue of ``theta_S^n - tr_Pi E_bar(theta^N)`` (nonnegative when it holds)."""
    p = adv.params
    vec = np.ones(1, dtype=complex)
    for _ in range(p.N):
        vec = np.kron(vec, theta)
    out = sum(adv.apply(vec).values())
    th_s = reduce_vector(theta, (p.d, p.d), [1])
    big = np.ones((1, 1), dtype=complex)
    for _ in range(p.n):
        big = np.kron(big, th_s)
    return float(np.linalg.eigvalsh(big - out).min())


__all__ = [
    "SymmetrizedAdversary", "symmetrized_adversary", "labelled_symmetrization",
    "symmetrized_equality_residual", "iid_output_bound_residual", "Permutation", "interleave",
]
