"""Permutation action on tensor factors and the symmetric subspace.

A permutation is stored as ``mapping[i] = pi(i)``: the content of factor ``i``
moves to factor ``pi(i)``. Paired registers ``P_i S_i`` are stored
interleaved (``P0 S0 P1 S1 ...``), so permuting pairs is permuting factors
of local dimension ``dP * dS``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .qcore import (
    DEFAULT_LIMITS,
    TOL_EQ,
    DimensionCeilingError,
    QuantumState,
    RegisterSystem,
    StateError,
    haar_state,
    psd_sqrt,
)


@dataclass(frozen=True)
class Permutation:
    mapping: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.mapping)
        if sorted(m) != list(range(len(m))):
            raise ValueError(f"not a permutation: {m}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def compose(self, other: "Permutation") -> "Permutation":
        """``self o other``: apply ``other`` first."""
        return Permutation(tuple(self.mapping[j] for j in other.mapping))

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))


def all_permutations(n: int) -> list[Permutation]:
    return [Permutation(p) for p in itertools.permutations(range(n))]


def _axes(pi: Permutation) -> list[int]:
    # output axis pi(i) takes input axis i
    return list(pi.inverse().mapping)


def apply_permutation(vec: np.ndarray, pi: Permutation, dims: Sequence[int],
                      batch_first: bool = False) -> np.ndarray:
    """Permute the tensor factors of a vector without forming a matrix.

    ``dims`` are the factor dimensions before permuting. With
    ``batch_first`` the array carries one leading batch axis.
    """
    dims = list(dims)
    axes = _axes(pi)
    if batch_first:
        t = np.asarray(vec).reshape([-1] + dims)
        return t.transpose([0] + [a + 1 for a in axes]).reshape(t.shape[0], -1)
    return np.asarray(vec).reshape(dims).transpose(axes).reshape(-1)


def permutation_operator(pi: Permutation, local_dim: int) -> np.ndarray:
    """Unitary moving the content of factor ``i`` to factor ``pi(i)``."""
    n = pi.n
    dim = local_dim**n
    if dim > DEFAULT_LIMITS.max_mixed_dim:
        raise DimensionCeilingError(f"dimension {dim} exceeds ceiling")
    src = np.arange(dim).reshape([local_dim] * n).transpose(_axes(pi)).reshape(-1)
    op = np.zeros((dim, dim))
    op[np.arange(dim), src] = 1.0
    return op


def block_permutation_operator(pi: Permutation, pair_dims: tuple[int, int]) -> np.ndarray:
    """Permute interleaved pairs ``(P_i S_i)`` jointly."""
    dp, ds = pair_dims
    return permutation_operator(pi, dp * ds)


def grouping_permutation(t: Sequence[int], N: int) -> Permutation:
    """Permutation realizing ``V^t``: unsampled factors first, then ``t``.

    Unsampled positions keep their relative order in slots ``0..n-1`` and the
    sampled positions (sorted) go to slots ``n..N-1``.
    """
    t = sorted(t)
    rest = [i for i in range(N) if i not in t]
    mapping = [0] * N
    for j, u in enumerate(rest):
        mapping[u] = j
    for j, s in enumerate(t):
        mapping[s] = len(rest) + j
    return Permutation(tuple(mapping))


def decompose_permutation(pi: Permutation, k: int):
    """Split ``pi`` into the sample it maps onto ``[k]`` and two residual orders.

    Returns ``(t_pi, tau, tau_bar)`` with ``t_pi = pi^-1([k])`` (sorted),
    ``tau`` acting on the ``k`` sampled factors and ``tau_bar`` on the
    ``n = N - k`` others, such that
    ``V^[k] pi = (tau_bar (x) tau) V^{t_pi}`` as operators.
    """
    N = pi.n
    if not 0 < k < N:
        raise ValueError("need 0 < k < N")
    n = N - k
    inv = pi.inverse()
    t_pi = tuple(sorted(inv(i) for i in range(k)))
    rho = grouping_permutation(range(k), N).compose(pi).compose(
        grouping_permutation(t_pi, N).inverse())
    tau_bar = Permutation(rho.mapping[:n])
    tau = Permutation(tuple(rho(n + j) - n for j in range(k)))
    return t_pi, tau, tau_bar


@dataclass(frozen=True)
class SymmetrySpec:
    n: int
    d: int


def sym_dim(spec: SymmetrySpec) -> int:
    """``binom(n + d - 1, n)``, checked against ``(n + 1)**(d - 1)``."""
    c = math.comb(spec.n + spec.d - 1, spec.n)
    if c > (spec.n + 1) ** (spec.d - 1):
        raise ArithmeticError("symmetric dimension exceeds the polynomial bound")
    return c


@lru_cache(maxsize=32)
def _sym_projector_cached(n: int, d: int) -> np.ndarray:
    dim = d**n
    proj = np.zeros((dim, dim))
    for pi in all_permutations(n):
        proj += permutation_operator(pi, d)
    proj /= math.factorial(n)
    proj.setflags(write=False)
    return proj


def sym_projector(spec: SymmetrySpec) -> np.ndarray:
    """Projector onto ``Sym^n(C^d)`` by averaging permutation operators."""
    if spec.d**spec.n > DEFAULT_LIMITS.max_mixed_dim:
        raise DimensionCeilingError(f"dimension {spec.d ** spec.n} exceeds ceiling")
    return _sym_projector_cached(spec.n, spec.d)


def sym_basis(spec: SymmetrySpec) -> np.ndarray:
    """Orthonormal basis of the symmetric subspace as matrix columns."""
    w, v = np.linalg.eigh(sym_projector(spec))
    return v[:, w > 0.5]


def symmetrize_vector(vec: np.ndarray, n: int, local_dim: int) -> np.ndarray:
    """Apply the symmetric projector to a vector by averaging permutations."""
    out = np.zeros_like(np.asarray(vec, dtype=complex))
    for pi in all_permutations(n):
        out += apply_permutation(vec, pi, [local_dim] * n)
    return out / math.factorial(n)


def symmetrize_matrix(rho: np.ndarray, n: int, local_dim: int) -> np.ndarray:
    """``(1/n!) sum_pi pi rho pi^dagger`` over ``n`` factors of ``local_dim``."""
    rho = np.asarray(rho, dtype=complex)
    dims = [local_dim] * n
    out = np.zeros_like(rho)
    t = rho.reshape(dims * 2)
    for pi in all_permutations(n):
        ax = _axes(pi)
        out += t.transpose(ax + [n + a for a in ax]).reshape(rho.shape)
    return out / math.factorial(n)


def _uniform_dim(system: RegisterSystem) -> int:
    dims = set(system.dims)
    if len(dims) != 1:
        raise StateError(f"factors have different dimensions: {system.dims}")
    return dims.pop()


def symmetrize(rho: QuantumState, paired: bool = False) -> QuantumState:
    """Average over all permutations of the state's factors.

    With ``paired`` the factors are read as interleaved ``(P_i, S_i)``
    pairs and the pairs are permuted jointly.
    """
    dims = rho.system.dims
    if paired:
        if len(dims) % 2:
            raise StateError("paired layout needs an even number of factors")
        pair = set(zip(dims[::2], dims[1::2]))
        if len(pair) != 1:
            raise StateError("pairs have different dimensions")
        dp, ds = pair.pop()
        n, local = len(dims) // 2, dp * ds
    else:
        n, local = len(dims), _uniform_dim(rho.system)
    out = symmetrize_matrix(rho.dm(), n, local)
    return QuantumState(rho.system, out, rho.limits)


def interleave(vec: np.ndarray, n: int, dp: int, ds: int, s_first: bool = False) -> np.ndarray:
    """Reorder a vector on ``P^n S^n`` (blocked) into ``P0 S0 P1 S1 ...``.

    With ``s_first`` the input is blocked as ``S^n P^n``.
    """
    if s_first:
        t = np.asarray(vec).reshape([ds] * n + [dp] * n)
        axes = [x for i in range(n) for x in (n + i, i)]
    else:
        t = np.asarray(vec).reshape([dp] * n + [ds] * n)
        axes = [x for i in range(n) for x in (i, n + i)]
    return t.transpose(axes).reshape(-1)


def deinterleave(vec: np.ndarray, n: int, dp: int, ds: int) -> np.ndarray:
    """Inverse of :func:`interleave`: ``P0 S0 ...`` to blocked ``P^n S^n``."""
    t = np.asarray(vec).reshape([dp, ds] * n)
    axes = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    return t.transpose(axes).reshape(-1)


def paired_system(n: int, dp: int, ds: int) -> RegisterSystem:
    return RegisterSystem(tuple(
        f for i in range(n) for f in ((f"P{i}", dp), (f"S{i}", ds))))


def is_permutation_invariant(rho: np.ndarray, n: int, local_dim: int, tol: float = TOL_EQ) -> bool:
    return float(np.abs(symmetrize_matrix(rho, n, local_dim) - rho).max()) <= tol


def symmetric_purification(rho: QuantumState, return_residual: bool = False):
    """Purification of a permutation-invariant state inside ``Sym^N(P (x) S)``.

    Uses the square-root purification ``sum_x |x>_P^N sqrt(rho)|x>_S^N``
    laid out as interleaved pairs, then checks symmetric-subspace membership.
    If the check fails beyond tolerance the vector is projected and
    renormalized, and the residual reports the failure.
    """
    N = len(rho.system)
    d = _uniform_dim(rho.system)
    m = rho.dm()
    if not is_permutation_invariant(m, N, d):
        raise StateError("input is not permutation invariant")
    root = psd_sqrt(m)
    # root[s, x]: S^N blocked first, purifier second
    vec = interleave(root.reshape(-1), N, d, d, s_first=True)
    proj = symmetrize_vector(vec, N, d * d)
    residual = float(np.linalg.norm(vec - proj))
    if residual > TOL_EQ:
        norm = np.linalg.norm(proj)
        vec = proj * (np.linalg.norm(vec) / norm) if norm > 0 else proj
    out = QuantumState(paired_system(N, d, d), vec, rho.limits)
    return (out, residual) if return_residual else out


def haar_sym_estimate(spec: SymmetrySpec, samples: int, rng: np.random.Generator,
                      chunk: int = 20000) -> np.ndarray:
    """Monte-Carlo estimate of ``c_{n,d} * E_theta |theta><theta|^(x)n``."""
    dim = spec.d**spec.n
    acc = np.zeros((dim, dim), dtype=complex)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        th = haar_state(spec.d, rng, size=m)
        v = th
        for _ in range(spec.n - 1):
            v = (v[:, :, None] * th[:, None, :]).reshape(m, -1)
        acc += v.T @ v.conj()
        done += m
    return sym_dim(spec) * acc / samples
