"""Exact and sampled execution of the two cut-and-choose sampling protocols."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..qcore import DEFAULT_LIMITS, DimensionCeilingError
from ..symmetry import apply_permutation, deinterleave, grouping_permutation
from .strategies import (
    EPR_LOCC,
    PURIFICATION,
    Measurement,
    ProtocolParams,
    ProverStrategy,
    SamplerStrategy,
    StrategyError,
    basis_vectors,
)

TOL_ISO = 1e-9


def phi_power_blocked(params: ProtocolParams, k: Optional[int] = None) -> np.ndarray:
    """``|phi_PS>^(x)k`` laid out as ``P^k S^k``."""
    k = params.k if k is None else k
    v = np.ones(1, dtype=complex)
    for _ in range(k):
        v = np.kron(v, params.ref.phi_PS)
    return deinterleave(v, k, params.d, params.d)


def _prepared(params: ProtocolParams, prover: ProverStrategy) -> np.ndarray:
    dim = prover.dim_r(params) * params.d**params.N
    if dim > DEFAULT_LIMITS.max_pure_dim:
        raise DimensionCeilingError(f"prover state of dimension {dim} exceeds ceiling")
    psi = np.asarray(prover.prepare(params), dtype=complex)
    if psi.shape != (dim,):
        raise StrategyError(f"prepared state has shape {psi.shape}, expected ({dim},)")
    if np.vdot(psi, psi).real > 1 + 1e-9:
        raise StrategyError("prepared state has norm above one")
    return psi


def _checked_isometry(params, prover, t, dim_r) -> np.ndarray:
    u = np.asarray(prover.respond(params, t), dtype=complex)
    dk = params.d**params.k
    if u.ndim != 2 or u.shape[1] != dim_r or u.shape[0] % dk:
        raise StrategyError(f"reply of shape {u.shape} is not a map R -> R' P^k")
    if u.shape[0] * u.shape[1] <= 2**22:
        top = np.linalg.eigvalsh(u.conj().T @ u).max()
        if top > 1 + TOL_ISO:
            raise StrategyError("reply is not trace non-increasing")
    return u


def _checked_measurement(params, prover, t, c) -> Measurement:
    m = prover.respond(params, t, c)
    if not isinstance(m, Measurement):
        raise StrategyError("EPR reply must be a Measurement")
    dims = prover.r_dims(params)
    dsub = int(np.prod([dims[i] for i in m.factors]))
    e = np.asarray(m.elements)
    if e.shape != (2**params.k, dsub, dsub):
        raise StrategyError(f"measurement elements have shape {e.shape}")
    total = e.sum(axis=0)
    if np.linalg.eigvalsh((total + total.conj().T) / 2).max() > 1 + TOL_ISO:
        raise StrategyError("measurement elements sum above the identity")
    return m


# ---------------------------------------------------------------------------
# purification protocol


def purification_tensor(params, psi, u, t) -> np.ndarray:
    """Reply applied, laid out as ``(R', P^k, S_tbar, S_t)``."""
    d, k, n, N = params.d, params.k, params.n, params.N
    dim_r = u.shape[1]
    y = u @ psi.reshape(dim_r, d**N)
    y = apply_permutation(y, grouping_permutation(t, N), [d] * N, batch_first=True)
    return y.reshape(-1, d**k, d**n, d**k)


def purification_branch(params, psi, u, t) -> np.ndarray:
    """Accepted vector on ``R' (x) S_tbar`` (matrix ``dim R' x d**n``)."""
    y = purification_tensor(params, psi, u, t)
    y = y.transpose(0, 2, 1, 3).reshape(y.shape[0], y.shape[2], -1)
    return y @ phi_power_blocked(params).conj()


def reduce_r(v: np.ndarray) -> np.ndarray:
    """Reduced state on the trailing factor of a ``(dim R, dim S)`` matrix."""
    return v.T @ v.conj()


# ---------------------------------------------------------------------------
# EPR protocol


def challenges(k: int) -> list[tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=k))


def epr_projected(params, psi, r_dims, t, c) -> np.ndarray:
    """``chi_x`` for every sampler outcome ``x``: shape ``(2**k, dim R, 2**n)``."""
    N, k, n = params.N, params.k, params.n
    dim_r = int(np.prod(r_dims))
    y = apply_permutation(psi.reshape(dim_r, 2**N), grouping_permutation(t, N), [2] * N,
                          batch_first=True).reshape(dim_r, 2**n, 2**k)
    basis = np.ones((1, 1), dtype=complex)
    for cj in c:
        basis = np.kron(basis, basis_vectors(cj))
    # basis[:, x] is the sampler's outcome vector for bits x
    return np.einsum("rsy,yx->xrs", y, basis.conj())


def _move_factors(chi: np.ndarray, r_dims, factors) -> np.ndarray:
    """Reshape ``(X, dim R, S)`` to ``(X, dim sub, dim rest, S)`` with ``factors`` first."""
    x, _, s = chi.shape
    rest = [i for i in range(len(r_dims)) if i not in factors]
    t = chi.reshape([x] + list(r_dims) + [s])
    t = t.transpose([0] + [1 + i for i in factors] + [1 + i for i in rest] + [len(r_dims) + 1])
    dsub = int(np.prod([r_dims[i] for i in factors]))
    return t.reshape(x, dsub, -1, s)


def epr_joint(params, psi, r_dims, meas: Measurement, t, c):
    """Joint table ``p[xhat, x]`` and per-outcome accepted operators ``out[x]``."""
    chi = _move_factors(epr_projected(params, psi, r_dims, t, c), r_dims, meas.factors)
    e = meas.elements
    joint = np.einsum("hba,xars,xbrs->hx", e, chi, chi.conj()).real
    acc = np.einsum("xba,xars,xbrt->st", e, chi, chi.conj())
    return joint, acc


# ---------------------------------------------------------------------------
# exact channel and runs


def accepted_channel(params: ProtocolParams, prover: ProverStrategy,
                     sampler: Optional[SamplerStrategy] = None, per_branch: bool = False):
    """Exact subnormalized accepted state on ``S^n``, averaged over the sampler's choice of ``t``.

    With ``per_branch`` also returns ``{t: accepted operator for t}`` (not
    weighted by the probability of ``t``).
    """
    sampler = sampler or SamplerStrategy()
    if sampler.measures_first:
        raise ValueError("measure-first samplers are handled by the randomness protocol")
    psi = _prepared(params, prover)
    dn = params.d**params.n
    total = np.zeros((dn, dn), dtype=complex)
    branches = {}
    for t, p in sampler.choose_sample(params):
        if params.protocol_kind == PURIFICATION:
            u = _checked_isometry(params, prover, t, prover.dim_r(params))
            op = reduce_r(purification_branch(params, psi, u, t))
        else:
            op = np.zeros((dn, dn), dtype=complex)
            for c in challenges(params.k):
                meas = _checked_measurement(params, prover, t, c)
                op += epr_joint(params, psi, prover.r_dims(params), meas, t, c)[1] / 2**params.k
        branches[t] = op
        total += p * op
    return (total, branches) if per_branch else total


@dataclass
class SamplingTranscript:
    """Record of one run, or of the full branch enumeration in exact mode.

    In exact mode ``t``, ``challenge``, ``reply`` and ``accepted`` are
    ``None``; ``accept_probability`` is the overall acceptance probability
    and ``post_state`` the averaged accepted operator. In trajectory mode
    they describe the sampled run and ``post_state`` is the accepted
    operator of the sampled branch, with trace ``accept_probability``.
    """

    params: dict
    mode: str
    seed: Optional[int]
    t: Optional[tuple[int, ...]] = None
    challenge: Optional[tuple[int, ...]] = None
    reply: Optional[str] = None
    accepted: Optional[bool] = None
    accept_probability: float = 0.0
    branch_probabilities: dict = field(default_factory=dict)
    outcome_record: Optional[list] = None
    post_state: Optional[np.ndarray] = None

    def to_dict(self, dump_matrix: bool = True) -> dict:
        out = {
            "params": self.params, "mode": self.mode, "seed": self.seed,
            "t": list(self.t) if self.t is not None else None,
            "challenge": "".join("+x"[b] for b in self.challenge) if self.challenge is not None else None,
            "reply": self.reply, "accepted": self.accepted,
            "accept_probability": self.accept_probability,
            "branch_probabilities": {",".join(map(str, k)): v for k, v in sorted(self.branch_probabilities.items())},
            "outcome_record": self.outcome_record,
        }
        n = self.params.get("n", 99)
        if dump_matrix and self.post_state is not None and n <= 3:
            out["post_state"] = {"re": np.round(self.post_state.real, 15).tolist(),
                                 "im": np.round(self.post_state.imag, 15).tolist()}
        return out


def params_dict(params: ProtocolParams) -> dict:
    return {"N": params.N, "k": params.k, "n": params.n, "d": params.d,
            "protocol_kind": params.protocol_kind}


def run_sampling(params: ProtocolParams, prover: ProverStrategy,
                 sampler: Optional[SamplerStrategy] = None, mode: str = "exact",
                 seed: Optional[int] = None) -> SamplingTranscript:
    """Run the sampling protocol exactly or along one sampled trajectory."""
    sampler = sampler or SamplerStrategy()
    if prover.kind != params.protocol_kind:
        raise StrategyError(f"{prover.kind} prover used in a {params.protocol_kind} run")
    if mode == "exact":
        total, branches = accepted_channel(params, prover, sampler, per_branch=True)
        return SamplingTranscript(
            params=params_dict(params), mode=mode, seed=seed,
            accept_probability=float(np.trace(total).real),
            branch_probabilities={t: float(np.trace(op).real) for t, op in branches.items()},
            post_state=total)
    if mode != "trajectory":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    dist = sampler.choose_sample(params)
    idx = rng.choice(len(dist), p=np.array([p for _, p in dist]))
    t = dist[idx][0]
    psi = _prepared(params, prover)
    if params.protocol_kind == PURIFICATION:
        return _trajectory_purification(params, prover, psi, t, rng, seed)
    return _trajectory_epr(params, prover, psi, t, rng, seed)


def _trajectory_purification(params, prover, psi, t, rng, seed):
    d, k = params.d, params.k
    u = _checked_isometry(params, prover, t, prover.dim_r(params))
    y = purification_tensor(params, psi, u, t)
    r_out, dn = y.shape[0], y.shape[2]
    # (R', S_tbar, P1..Pk, S1..Sk) -> (R' S_tbar, P1 S1, P2 S2, ...)
    y = y.reshape([r_out] + [d] * k + [dn] + [d] * k)
    axes = [0, k + 1] + [a for j in range(k) for a in (1 + j, k + 2 + j)]
    cur = y.transpose(axes).reshape(r_out * dn, d * d, -1)
    record = []
    norm_prev = float(np.vdot(cur, cur).real)
    for _ in range(k):
        nxt = np.tensordot(cur, params.ref.phi_PS.conj(), axes=([1], [0]))
        norm = float(np.vdot(nxt, nxt).real)
        p_pass = norm / norm_prev if norm_prev > 0 else 0.0
        ok = bool(rng.random() < p_pass)
        record.append(ok)
        if not ok:
            break
        cur = nxt.reshape(r_out * dn, d * d, -1) if nxt.size > r_out * dn else nxt
        norm_prev = norm
    accepted = len(record) == k and all(record)
    v = purification_branch(params, psi, u, t)
    post = reduce_r(v) if dn <= DEFAULT_LIMITS.max_mixed_dim else None
    return SamplingTranscript(
        params=params_dict(params), mode="trajectory", seed=seed, t=tuple(t),
        reply=f"Q[dim={d ** k}]", accepted=accepted,
        accept_probability=float(np.vdot(v, v).real),
        branch_probabilities={tuple(t): float(np.vdot(v, v).real)},
        outcome_record=record, post_state=post)


def _trajectory_epr(params, prover, psi, t, rng, seed):
    k = params.k
    c = tuple(int(b) for b in rng.integers(0, 2, size=k))
    meas = _checked_measurement(params, prover, t, c)
    joint, acc = epr_joint(params, psi, prover.r_dims(params), meas, t, c)
    flat = np.clip(joint.reshape(-1), 0, None)
    cell = rng.choice(flat.size, p=flat / flat.sum())
    xhat, x = divmod(int(cell), joint.shape[1])
    bits = [format(xhat, f"0{k}b"), format(x, f"0{k}b")]
    p_acc = float(np.trace(joint).real)
    return SamplingTranscript(
        params=params_dict(params), mode="trajectory", seed=seed, t=tuple(t), challenge=c,
        reply=bits[0], accepted=xhat == x, accept_probability=p_acc,
        branch_probabilities={tuple(t): p_acc},
        outcome_record=[a == b for a, b in zip(*bits)], post_state=acc)


def acceptance_frequency(params: ProtocolParams, prover: ProverStrategy, trials: int,
                         seed: Optional[int] = None) -> tuple[float, float]:
    """Empirical acceptance rate over many trajectories and its standard error.

    Each branch distribution is computed once and then sampled, which gives
    the same law as repeated :func:`run_sampling` trajectories.
    """
    rng = np.random.default_rng(seed)
    psi = _prepared(params, prover)
    ts = params.samples()
    cache: dict = {}
    t_idx = rng.integers(0, len(ts), size=trials)
    hits = 0
    if params.protocol_kind == PURIFICATION:
        for i in range(len(ts)):
            u = _checked_isometry(params, prover, ts[i], prover.dim_r(params))
            v = purification_branch(params, psi, u, ts[i])
            cache[i] = float(np.vdot(v, v).real)
        probs = np.array([cache[i] for i in t_idx])
        hits = int((rng.random(trials) < probs).sum())
    else:
        cs = challenges(params.k)
        c_idx = rng.integers(0, len(cs), size=trials)
        draws = rng.random(trials)
        for i, j, r in zip(t_idx, c_idx, draws):
            key = (int(i), int(j))
            if key not in cache:
                meas = _checked_measurement(params, prover, ts[i], cs[j])
                joint, _ = epr_joint(params, psi, prover.r_dims(params), meas, ts[i], cs[j])
                cache[key] = float(np.trace(joint))
            hits += int(r < cache[key])
    rate = float(hits) / trials
    return rate, math.sqrt(max(rate * (1 - rate), 1e-300) / trials)
