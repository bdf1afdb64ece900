"""Protocol parameters and prover/sampler strategy families.

A prover holds a pure state on ``R (x) S^N`` with ``R`` its private register
(listed first). In the purification protocol it answers a sample ``t`` with
an isometry ``R -> R' (x) P^k`` whose ``P^k`` factors follow the sorted
order of ``t``. In the EPR protocol it answers ``(t, c)`` with a
measurement on some of its ``R`` factors, one outcome bit per sampled
position.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..qcore import ReferenceState, haar_isometry, haar_state, reduce_vector
from ..symmetry import deinterleave, grouping_permutation, permutation_operator

PURIFICATION = "purification"
EPR_LOCC = "epr_locc"

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


class ParameterError(ValueError):
    """Invalid protocol parameters."""


class StrategyError(RuntimeError):
    """A strategy returned a malformed reply."""


@dataclass(frozen=True, eq=False)
class ProtocolParams:
    N: int
    k: int
    ref: ReferenceState = field(default_factory=ReferenceState.epr)
    protocol_kind: str = PURIFICATION

    def __post_init__(self):
        if not isinstance(self.N, int) or not isinstance(self.k, int):
            raise ParameterError("N and k must be integers")
        if not 0 < self.k < self.N:
            raise ParameterError(f"need 0 < k < N, got N={self.N}, k={self.k}")
        if self.protocol_kind not in (PURIFICATION, EPR_LOCC):
            raise ParameterError(f"unknown protocol kind {self.protocol_kind!r}")
        if self.protocol_kind == EPR_LOCC:
            epr = ReferenceState.epr()
            if self.ref.d != 2 or not np.allclose(self.ref.phi_PS, epr.phi_PS, atol=1e-12):
                raise ParameterError("the EPR protocol uses I/2 purified by |Phi+>")

    @property
    def n(self) -> int:
        return self.N - self.k

    @property
    def beta(self) -> float:
        return self.k / self.N

    @property
    def d(self) -> int:
        return self.ref.d

    def samples(self) -> list[tuple[int, ...]]:
        return list(itertools.combinations(range(self.N), self.k))


def basis_vectors(c: int) -> np.ndarray:
    """Columns are the basis for challenge bit ``c`` (0: computational, 1: diagonal)."""
    return np.eye(2, dtype=complex) if c == 0 else HADAMARD


def local_measurement(bases: Sequence[int]) -> np.ndarray:
    """Projectors ``(2**k, 2**k, 2**k)`` for measuring ``k`` qubits in the given bases."""
    k = len(bases)
    vecs = []
    for x in itertools.product((0, 1), repeat=k):
        v = np.ones(1, dtype=complex)
        for cj, xj in zip(bases, x):
            v = np.kron(v, basis_vectors(cj)[:, xj])
        vecs.append(v)
    return np.array([np.outer(v, v.conj()) for v in vecs])


@dataclass(frozen=True, eq=False)
class Measurement:
    """Reply in the EPR protocol: POVM on the prover factors ``factors``.

    ``elements[x]`` acts on the tensor product of those factors (in the
    listed order) and ``x`` indexes the reply bits for sorted ``t``.
    """

    factors: tuple[int, ...]
    elements: np.ndarray


class ProverStrategy(ABC):
    """A prover: prepares ``R (x) S^N`` and answers the sampler."""

    kind: str = PURIFICATION

    @abstractmethod
    def r_dims(self, params: ProtocolParams) -> tuple[int, ...]:
        """Factor dimensions of the private register ``R``."""

    @abstractmethod
    def prepare(self, params: ProtocolParams) -> np.ndarray:
        """Pure state on ``R (x) S^N`` as a flat vector."""

    def respond(self, params: ProtocolParams, t: tuple[int, ...], c: Optional[tuple[int, ...]] = None):
        """Isometry ``R -> R' P^k`` (purification) or a :class:`Measurement` (EPR)."""
        raise NotImplementedError

    def dim_r(self, params: ProtocolParams) -> int:
        return int(np.prod(self.r_dims(params)))


# ---------------------------------------------------------------------------
# purification-protocol provers


def product_state(pairs: Sequence[np.ndarray], dp: int, ds: int) -> np.ndarray:
    """``(x)_i |pair_i>_{P_i S_i}`` laid out as ``P^N S^N``."""
    v = np.ones(1, dtype=complex)
    for p in pairs:
        v = np.kron(v, p)
    return deinterleave(v, len(pairs), dp, ds)


def uhlmann_alignment(theta_ps: np.ndarray, phi_ps: np.ndarray, d: int) -> np.ndarray:
    """Unitary ``u`` on ``P`` maximizing ``|<phi|(u (x) I)|theta>|``.

    The optimum equals the fidelity of the ``S`` marginals.
    """
    mt = np.asarray(theta_ps).reshape(d, d)
    mp = np.asarray(phi_ps).reshape(d, d)
    a, _, bh = np.linalg.svd(mt @ mp.conj().T)
    return bh.conj().T @ a.conj().T


class ProductProver(ProverStrategy):
    """Independent pure pair states per position; ``R = P^N``.

    The reply applies a fixed local unitary to each sampled ``P_i`` and
    sends the sampled factors, keeping the rest in place.
    """

    def __init__(self, pairs: Sequence[np.ndarray], unitaries: Optional[Sequence[np.ndarray]] = None):
        self.pairs = [np.asarray(p, dtype=complex) / np.linalg.norm(p) for p in pairs]
        d = int(round(math.sqrt(self.pairs[0].shape[0])))
        self.d = d
        self.unitaries = None if unitaries is None else [np.asarray(u, dtype=complex) for u in unitaries]

    def _check(self, params: ProtocolParams):
        if len(self.pairs) != params.N or self.d != params.d:
            raise StrategyError("prover built for a different population size or dimension")

    def r_dims(self, params):
        return (self.d,) * params.N

    def prepare(self, params):
        self._check(params)
        return product_state(self.pairs, self.d, self.d)

    def respond(self, params, t, c=None):
        self._check(params)
        op = permutation_operator(grouping_permutation(t, params.N), self.d)
        if self.unitaries is not None:
            loc = np.ones((1, 1), dtype=complex)
            for i in range(params.N):
                loc = np.kron(loc, self.unitaries[i] if i in t else np.eye(self.d))
            op = op @ loc
        return op


class HonestProver(ProductProver):
    def __init__(self, ref: ReferenceState, N: int):
        super().__init__([ref.phi_PS] * N)


class FewErrorsProver(ProductProver):
    """Honest except on ``errors``, where a state orthogonal to ``|phi_PS>`` is used."""

    def __init__(self, ref: ReferenceState, N: int, errors: Sequence[int],
                 error_state: Optional[np.ndarray] = None):
        if error_state is None:
            error_state = default_error_state(ref)
        if abs(np.vdot(ref.phi_PS, error_state)) > 1e-12:
            raise ParameterError("error state must be orthogonal to the reference purification")
        self.errors = tuple(errors)
        super().__init__([error_state if i in self.errors else ref.phi_PS for i in range(N)])


def default_error_state(ref: ReferenceState) -> np.ndarray:
    """``|1>_P|0>_S`` made orthogonal to ``|phi_PS>``; a bit flip for ``|Phi+>``."""
    d = ref.d
    v = np.zeros(d * d, dtype=complex)
    v[1 * d + 0] = 1.0
    v = v - ref.phi_PS * np.vdot(ref.phi_PS, v)
    return v / np.linalg.norm(v)


class IIDProver(ProductProver):
    """``|theta>^N`` with the fidelity-optimal local reply."""

    def __init__(self, ref: ReferenceState, N: int, theta: np.ndarray):
        theta = np.asarray(theta, dtype=complex) / np.linalg.norm(theta)
        self.theta = theta
        u = uhlmann_alignment(theta, ref.phi_PS, ref.d)
        super().__init__([theta] * N, [u] * N)

    @classmethod
    def with_fidelity(cls, ref: ReferenceState, N: int, fidelity_sq: float) -> "IIDProver":
        return cls(ref, N, theta_with_fidelity(ref, fidelity_sq))


def theta_with_fidelity(ref: ReferenceState, fidelity_sq: float) -> np.ndarray:
    """Pure pair state whose ``S`` marginal has the given squared fidelity with ``phi``.

    Walks from ``|phi_PS>`` toward the product state ``|0>_P|d-1>_S`` and
    solves for the angle with a bracketing root finder.
    """
    from scipy.optimize import brentq

    from ..qcore import fidelity_sq as fsq

    d = ref.d
    far = np.zeros(d * d, dtype=complex)
    far[d - 1] = 1.0
    chi = far - ref.phi_PS * np.vdot(ref.phi_PS, far)
    chi /= np.linalg.norm(chi)

    def state(a):
        return math.cos(a) * ref.phi_PS + math.sin(a) * chi

    def gap(a):
        return fsq(reduce_vector(state(a), (d, d), [1]), ref.phi_S) - fidelity_sq

    if fidelity_sq >= 1.0:
        return ref.phi_PS.copy()
    if gap(math.pi / 2) > 0:
        raise ParameterError(f"squared fidelity {fidelity_sq} is below the reachable range")
    return state(brentq(gap, 0.0, math.pi / 2, xtol=1e-15, rtol=1e-15))


class JunkProver(ProverStrategy):
    """Prepares ``|phi_PS>^N`` but answers with fresh junk.

    For every sampled slot the prover prepares ``|junk>_{P'Q}``, keeps
    ``P'`` and sends ``Q`` in place of the true purifier, so each slot is
    accepted with probability ``<phi|(junk_Q (x) phi_S)|phi>``.
    """

    def __init__(self, ref: ReferenceState, N: int, junk: np.ndarray):
        self.ref = ref
        self.N = N
        self.junk = np.asarray(junk, dtype=complex) / np.linalg.norm(junk)

    def r_dims(self, params):
        return (params.d,) * params.N

    def prepare(self, params):
        return product_state([self.ref.phi_PS] * params.N, params.d, params.d)

    def respond(self, params, t, c=None):
        col = np.ones(1, dtype=complex)
        for _ in range(params.k):
            col = np.kron(col, self.junk)
        # P'_1 Q_1 P'_2 Q_2 ... -> P'^k Q^k so the sent factors come last
        col = deinterleave(col, params.k, params.d, params.d)
        return np.kron(np.eye(self.dim_r(params)), col[:, None])


class RandomIsometryProver(ProverStrategy):
    """Haar-random joint state and per-sample Haar isometries, fixed by ``seed``."""

    def __init__(self, seed: int, dim_r: int = 4, dim_r_out: int = 2):
        self.seed = int(seed)
        self.dim_r_ = dim_r
        self.dim_r_out = dim_r_out

    def r_dims(self, params):
        return (self.dim_r_,)

    def prepare(self, params):
        rng = np.random.default_rng([self.seed, 0])
        return haar_state(self.dim_r_ * params.d**params.N, rng)

    def respond(self, params, t, c=None):
        idx = params.samples().index(tuple(sorted(t)))
        rng = np.random.default_rng([self.seed, 1, idx])
        return haar_isometry(self.dim_r_out * params.d**params.k, self.dim_r_, rng)


class RejectingProver(ProductProver):
    """Every position holds a state orthogonal to ``|phi_PS>``; never accepted."""

    def __init__(self, ref: ReferenceState, N: int):
        super().__init__([default_error_state(ref)] * N)


# ---------------------------------------------------------------------------
# EPR-protocol provers


class EPRProductProver(ProverStrategy):
    """Product pair states with a per-position measurement on ``P_i``.

    ``povms[i][c]`` is the two-outcome POVM ``(E0, E1)`` used at position
    ``i`` for challenge bit ``c``. The default is the honest basis
    measurement.
    """

    kind = EPR_LOCC

    def __init__(self, pairs: Sequence[np.ndarray], povms=None):
        self.pairs = [np.asarray(p, dtype=complex) / np.linalg.norm(p) for p in pairs]
        if povms is None:
            honest = [local_measurement([0]), local_measurement([1])]
            povms = [honest] * len(self.pairs)
        self.povms = povms

    def r_dims(self, params):
        return (2,) * params.N

    def prepare(self, params):
        if len(self.pairs) != params.N:
            raise StrategyError("prover built for a different population size")
        return product_state(self.pairs, 2, 2)

    def respond(self, params, t, c=None):
        k = len(t)
        elems = []
        for x in itertools.product((0, 1), repeat=k):
            e = np.ones((1, 1), dtype=complex)
            for j, i in enumerate(t):
                e = np.kron(e, self.povms[i][c[j]][x[j]])
            elems.append(e)
        return Measurement(tuple(t), np.array(elems))


class HonestEPRProver(EPRProductProver):
    def __init__(self, N: int):
        super().__init__([ReferenceState.epr().phi_PS] * N)


class FewErrorsEPRProver(EPRProductProver):
    def __init__(self, N: int, errors: Sequence[int], error_state: Optional[np.ndarray] = None):
        ref = ReferenceState.epr()
        err = default_error_state(ref) if error_state is None else error_state
        super().__init__([err if i in errors else ref.phi_PS for i in range(N)])


def helstrom_povm(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Projective measurement guessing between weighted operators ``a`` and ``b``."""
    w, v = np.linalg.eigh(a - b)
    pos = v[:, w > 0]
    e0 = pos @ pos.conj().T
    return e0, np.eye(a.shape[0]) - e0


def epr_conditional_states(theta: np.ndarray, c: int) -> list[np.ndarray]:
    """Subnormalized ``P`` states after the sampler sees outcome ``x`` in basis ``c``."""
    m = np.asarray(theta, dtype=complex).reshape(2, 2)
    out = []
    for x in (0, 1):
        v = m @ basis_vectors(c)[:, x].conj()
        out.append(np.outer(v, v.conj()))
    return out


class IIDEPRProver(EPRProductProver):
    """``|theta>^N`` answering each position with its Helstrom measurement."""

    def __init__(self, N: int, theta: np.ndarray):
        theta = np.asarray(theta, dtype=complex) / np.linalg.norm(theta)
        self.theta = theta
        povm = [helstrom_povm(*epr_conditional_states(theta, c)) for c in (0, 1)]
        super().__init__([theta] * N, [povm] * N)


class RandomPOVMProver(ProverStrategy):
    """Haar-random joint state and random POVMs on a private register."""

    kind = EPR_LOCC

    def __init__(self, seed: int, dim_r: int = 4):
        self.seed = int(seed)
        self.dim_r_ = dim_r

    def r_dims(self, params):
        return (self.dim_r_,)

    def prepare(self, params):
        rng = np.random.default_rng([self.seed, 0])
        return haar_state(self.dim_r_ * 2**params.N, rng)

    def respond(self, params, t, c=None):
        idx = params.samples().index(tuple(sorted(t)))
        cidx = int("".join(map(str, c)), 2) if c else 0
        rng = np.random.default_rng([self.seed, 1, idx, cidx])
        m = 2**params.k
        # a random isometry split into blocks gives a random POVM (Naimark)
        iso = haar_isometry(m * self.dim_r_, self.dim_r_, rng).reshape(m, self.dim_r_, self.dim_r_)
        elems = np.array([blk.conj().T @ blk for blk in iso])
        return Measurement((0,), elems)


# ---------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class OutcomeRecord:
    """What a sampler sees before deciding to abort."""

    t: tuple[int, ...]
    y: Optional[tuple[int, ...]]
    x_b: tuple[int, ...]
    test_passed: bool


class SamplerStrategy:
    """Honest uniform sampling that accepts exactly when the test passes.

    Subclasses may measure ``B^N`` first (``measures_first``), choose ``t``
    from the outcome, and abort on arbitrary outcome records.
    """

    measures_first = False

    def choose_sample(self, params: ProtocolParams, y: Optional[tuple[int, ...]] = None):
        """Distribution over samples as ``[(t, probability), ...]``."""
        ts = params.samples()
        return [(t, 1.0 / len(ts)) for t in ts]

    def accept_filter(self, record: OutcomeRecord) -> bool:
        return record.test_passed


HonestSampler = SamplerStrategy


class FilterSampler(SamplerStrategy):
    """Honest sampling, but additionally aborts unless ``keep(record)``."""

    def __init__(self, keep: Callable[[OutcomeRecord], bool]):
        self.keep = keep

    def accept_filter(self, record):
        return record.test_passed and bool(self.keep(record))


class MeasureThenChooseSampler(SamplerStrategy):
    """Measures ``B^N`` in the computational basis, then picks ``t = choice(y)``."""

    measures_first = True

    def __init__(self, choice: Callable[[tuple[int, ...], ProtocolParams], Sequence[int]],
                 accept_filter: Optional[Callable[[OutcomeRecord], bool]] = None):
        self.choice = choice
        self._filter = accept_filter

    def choose_sample(self, params, y=None):
        t = tuple(sorted(self.choice(y, params)))
        if len(t) != params.k or len(set(t)) != params.k or not all(0 <= i < params.N for i in t):
            raise StrategyError(f"choice returned an invalid sample {t}")
        return [(t, 1.0)]

    def accept_filter(self, record):
        if self._filter is None:
            return True
        return bool(self._filter(record))


def bob_measure_then_choose(choice=None, accept_filter=None) -> MeasureThenChooseSampler:
    """Sampler measuring first; ``choice(y, params)`` defaults to a fixed first-``k`` sample."""
    if choice is None:
        def choice(y, params):
            return tuple(range(params.k))
    return MeasureThenChooseSampler(choice, accept_filter)


def first_k_ones(y, params):
    """Positions of the first ``k`` ones of ``y``, padded with the first zeros."""
    ones = [i for i, b in enumerate(y) if b == 1]
    zeros = [i for i, b in enumerate(y) if b == 0]
    return tuple((ones + zeros)[: params.k])
