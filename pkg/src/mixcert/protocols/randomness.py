"""Two-party randomness generation built on the purification sampling protocol.

Alice acts as the prover and Bob as the sampler. After acceptance both
measure their remaining ``n`` qubits in the computational basis. Outcomes
are integers in ``[0, 2**n)`` read big-endian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..qcore import ReferenceState
from .engine import _checked_isometry, _prepared, purification_branch, purification_tensor
from .strategies import (
    PURIFICATION,
    HonestProver,
    OutcomeRecord,
    ParameterError,
    ProtocolParams,
    ProverStrategy,
    SamplerStrategy,
)


def bits(x: int, width: int) -> tuple[int, ...]:
    return tuple(int(b) for b in format(x, f"0{width}b")) if width else ()


@dataclass
class Branch:
    """One ``(y, t)`` branch with the joint outcome tables of both test results.

    ``passed`` and ``failed`` map ``(x_a, x_b)`` to probabilities already
    weighted by ``weight``; ``x_a`` is ``None`` when Alice's leftover
    register is not ``n`` qubits. ``alice_full`` is the weighted distribution
    of Alice's computational outcome on all ``N`` of her qubits, when
    defined.
    """

    t: tuple[int, ...]
    y: Optional[tuple[int, ...]]
    weight: float
    passed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    alice_full: Optional[np.ndarray] = None


def _validate(params: ProtocolParams):
    if params.protocol_kind != PURIFICATION:
        raise ParameterError("randomness generation runs the purification protocol")
    if not np.allclose(params.ref.phi_PS, ReferenceState.epr().phi_PS, atol=1e-12):
        raise ParameterError("randomness generation uses EPR pairs")


def _tables(params, psi, u, t, tol=1e-15):
    n = params.n
    w = purification_tensor(params, psi, u, t)
    tot = (np.abs(w) ** 2).sum(axis=(1, 3))
    v = purification_branch(params, psi, u, t)
    ok = np.abs(v) ** 2
    bad = np.clip(tot - ok, 0.0, None)
    if ok.shape[0] != 2**n:
        ok, bad = ok.sum(axis=0, keepdims=True), bad.sum(axis=0, keepdims=True)
        keys = [None]
    else:
        keys = list(range(2**n))
    passed, failed = {}, {}
    for i, xa in enumerate(keys):
        for xb in range(2**n):
            if ok[i, xb] > tol:
                passed[(xa, xb)] = float(ok[i, xb])
            if bad[i, xb] > tol:
                failed[(xa, xb)] = float(bad[i, xb])
    return passed, failed


def randomness_branches(params: ProtocolParams, alice: ProverStrategy,
                        bob: SamplerStrategy) -> list[Branch]:
    """Enumerate every branch of the protocol exactly with state vectors."""
    _validate(params)
    N = params.N
    psi = _prepared(params, alice)
    dim_r = alice.dim_r(params)
    m = psi.reshape(dim_r, 2**N)
    if bob.measures_first:
        ys = []
        for yi in range(2**N):
            col = np.zeros_like(m)
            col[:, yi] = m[:, yi]
            p_y = float(np.vdot(col, col).real)
            if p_y > 1e-15:
                ys.append((bits(yi, N), col))
    else:
        ys = [(None, m)]
    replies = {}
    out = []
    for y, state in ys:
        full = (np.abs(state) ** 2).sum(axis=1) if dim_r == 2**N else None
        for t, p_t in bob.choose_sample(params, y):
            if p_t <= 0:
                continue
            if t not in replies:
                replies[t] = _checked_isometry(params, alice, t, dim_r)
            passed, failed = _tables(params, state.reshape(-1), replies[t], t)
            br = Branch(t, y, p_t, {k: p_t * v for k, v in passed.items()},
                        {k: p_t * v for k, v in failed.items()},
                        None if full is None else p_t * full)
            br.weight = p_t * float(np.vdot(state, state).real)
            out.append(br)
    return out


def honest_alice_branches(params: ProtocolParams, bob: SamplerStrategy) -> list[Branch]:
    """Classical enumeration for honest Alice, exact for larger ``N``.

    With EPR pairs a computational-basis measurement of ``B^N`` leaves
    ``|y>_A|y>_B``; each tested pair then passes with probability 1/2
    independently and both parties' outputs equal ``y`` on the unsampled
    positions. Without measuring first, the test always passes and both
    outputs equal one uniform string.
    """
    _validate(params)
    N, n, k = params.N, params.n, params.k
    out = []
    if bob.measures_first:
        p_y = 2.0**-N
        for yi in range(2**N):
            y = bits(yi, N)
            full = np.zeros(2**N)
            full[yi] = 1.0
            for t, p_t in bob.choose_sample(params, y):
                rest = [i for i in range(N) if i not in t]
                x = int("".join(str(y[i]) for i in rest), 2) if rest else 0
                w = p_y * p_t
                out.append(Branch(t, y, w, {(x, x): w * 2.0**-k}, {(x, x): w * (1 - 2.0**-k)},
                                  w * full))
    else:
        for t, p_t in bob.choose_sample(params, None):
            passed = {(x, x): p_t * 2.0**-n for x in range(2**n)}
            out.append(Branch(t, None, p_t, passed, {}, p_t * np.full(2**N, 2.0**-N)))
    return out


@dataclass
class RandomnessResult:
    """Exact outcome of the randomness protocol.

    ``joint`` maps accepted ``(x_a, x_b)`` to probability; ``per_t`` maps
    each sample to ``{"p_t", "accept", "joint", "alice_full"}``.
    """

    accept_probability: float
    joint: dict
    per_t: dict
    branches: list


def accepted_tables(params: ProtocolParams, bob: SamplerStrategy, branches: list[Branch]) -> RandomnessResult:
    n = params.n
    joint: dict = {}
    per_t: dict = {}
    for br in branches:
        entry = per_t.setdefault(br.t, {"p_t": 0.0, "accept": 0.0, "joint": {}, "alice_full": None})
        entry["p_t"] += br.weight
        if br.alice_full is not None:
            entry["alice_full"] = br.alice_full if entry["alice_full"] is None else entry["alice_full"] + br.alice_full
        for passed, table in ((True, br.passed), (False, br.failed)):
            for (xa, xb), p in table.items():
                rec = OutcomeRecord(br.t, br.y, bits(xb, n), passed)
                if bob.accept_filter(rec):
                    joint[(xa, xb)] = joint.get((xa, xb), 0.0) + p
                    entry["joint"][(xa, xb)] = entry["joint"].get((xa, xb), 0.0) + p
                    entry["accept"] += p
    return RandomnessResult(sum(joint.values()), joint, per_t, branches)


def run_randomness_generation(params: ProtocolParams, alice: Optional[ProverStrategy] = None,
                              bob: Optional[SamplerStrategy] = None, mode: str = "exact",
                              seed: Optional[int] = None):
    """Run the randomness-generation protocol.

    Exact mode returns a :class:`RandomnessResult`. Trajectory mode returns
    ``(X_A, X_B, record)`` for one sampled run, with ``None`` for an abort
    (and for ``X_A`` when Alice holds no ``n``-qubit output register).
    """
    alice = alice or HonestProver(params.ref, params.N)
    bob = bob or SamplerStrategy()
    branches = randomness_branches(params, alice, bob)
    if mode == "exact":
        return accepted_tables(params, bob, branches)
    if mode != "trajectory":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    draws = sample_runs(params, bob, branches, 1, rng)
    return draws[0]


def sample_runs(params: ProtocolParams, bob: SamplerStrategy, branches: list[Branch],
                trials: int, rng: np.random.Generator) -> list:
    """Draw ``trials`` independent runs from the exact branch distribution."""
    n = params.n
    cells = []
    probs = []
    for br in branches:
        for passed, table in ((True, br.passed), (False, br.failed)):
            for (xa, xb), p in table.items():
                cells.append((br, passed, xa, xb))
                probs.append(p)
    probs = np.array(probs)
    idx = rng.choice(len(cells), size=trials, p=probs / probs.sum())
    out = []
    for i in idx:
        br, passed, xa, xb = cells[i]
        rec = OutcomeRecord(br.t, br.y, bits(xb, n), passed)
        acc = bob.accept_filter(rec)
        x_a = bits(xa, n) if acc and xa is not None else None
        x_b = bits(xb, n) if acc else None
        out.append((x_a, x_b, {"t": list(br.t), "y": None if br.y is None else list(br.y),
                               "test_passed": passed, "accepted": acc}))
    return out
