"""Dense linear algebra over labeled multipartite registers.

Factor 0 of a :class:`RegisterSystem` is the leftmost tensor factor and the
most significant digit of the composite index. Every other module relies on
this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL_PSD = 1e-9
TOL_EQ = 1e-9
TOL_TR = 1e-9


@dataclass(frozen=True)
class Limits:
    """Dimension ceilings for dense representations."""

    max_mixed_dim: int = 4096
    max_pure_dim: int = 2**24


DEFAULT_LIMITS = Limits()


class DimensionCeilingError(ValueError):
    """Raised when a dense representation would exceed the configured ceiling."""


class StateError(ValueError):
    """Raised for inputs violating positivity or shape requirements."""


@dataclass(frozen=True)
class RegisterSystem:
    """Ordered list of ``(label, dim)`` factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lbl), int(d)) for lbl, d in self.factors)
        labels = [lbl for lbl, _ in factors]
        if len(set(labels)) != len(labels):
            raise StateError(f"duplicate register labels: {labels}")
        if any(d < 1 for _, d in factors):
            raise StateError("factor dimensions must be positive")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def from_dims(cls, labels: Sequence[str], dims: Sequence[int]) -> "RegisterSystem":
        if len(labels) != len(dims):
            raise StateError("labels and dims differ in length")
        return cls(tuple(zip(labels, dims)))

    @classmethod
    def uniform(cls, prefix: str, count: int, dim: int) -> "RegisterSystem":
        """``count`` factors labeled ``prefix0, prefix1, ...`` of equal dimension."""
        return cls(tuple((f"{prefix}{i}", dim) for i in range(count)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=object)) if self.factors else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"unknown register label {label!r}") from None

    def subsystem(self, labels: Iterable[str]) -> "RegisterSystem":
        """Factors with the given labels, kept in this system's order."""
        wanted = set(labels)
        for lbl in wanted:
            self.index(lbl)
        return RegisterSystem(tuple(f for f in self.factors if f[0] in wanted))

    def concat(self, other: "RegisterSystem") -> "RegisterSystem":
        return RegisterSystem(self.factors + other.factors)

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True, eq=False)
class QuantumState:
    """A pure vector or density matrix on a :class:`RegisterSystem`.

    Subnormalized states (trace below one) are allowed; they represent
    branches of a protocol such as the accepted outcome.
    """

    system: RegisterSystem
    data: np.ndarray
    limits: Limits = field(default=DEFAULT_LIMITS, repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        dim = self.system.total_dim
        if data.ndim == 1:
            if dim > self.limits.max_pure_dim:
                raise DimensionCeilingError(f"pure dimension {dim} exceeds ceiling")
            if data.shape != (dim,):
                raise StateError(f"vector of length {data.shape[0]} on system of dim {dim}")
            if np.vdot(data, data).real > 1 + TOL_TR:
                raise StateError("pure state has squared norm above one")
        elif data.ndim == 2:
            if dim > self.limits.max_mixed_dim:
                raise DimensionCeilingError(f"mixed dimension {dim} exceeds ceiling")
            if data.shape != (dim, dim):
                raise StateError(f"matrix of shape {data.shape} on system of dim {dim}")
            if not np.allclose(data, data.conj().T, atol=TOL_EQ):
                raise StateError("density matrix is not Hermitian")
            if np.trace(data).real > 1 + TOL_TR:
                raise StateError("density matrix has trace above one")
            if dim and np.linalg.eigvalsh(data).min() < -TOL_PSD:
                raise StateError("density matrix is not positive semidefinite")
        else:
            raise StateError("state data must be a vector or square matrix")
        object.__setattr__(self, "data", data)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def dm(self) -> np.ndarray:
        """Density matrix (outer product for pure states)."""
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def trace(self) -> float:
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)


def as_matrix(x) -> np.ndarray:
    """Density matrix of a state, or the array itself."""
    if isinstance(x, QuantumState):
        return x.dm()
    return np.asarray(x, dtype=complex)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def tensor(a, b, limits: Limits = DEFAULT_LIMITS):
    """Kronecker product; ``a`` occupies the lower factor indices.

    Two :class:`QuantumState` arguments give a state on the concatenated
    system. A pure and a mixed state are combined as density matrices.
    """
    if isinstance(a, QuantumState) and isinstance(b, QuantumState):
        system = a.system.concat(b.system)
        if a.is_pure and b.is_pure:
            if system.total_dim > limits.max_pure_dim:
                raise DimensionCeilingError(f"pure dimension {system.total_dim} exceeds ceiling")
            return QuantumState(system, np.kron(a.data, b.data), limits)
        if system.total_dim > limits.max_mixed_dim:
            raise DimensionCeilingError(f"mixed dimension {system.total_dim} exceeds ceiling")
        return QuantumState(system, np.kron(a.dm(), b.dm()), limits)
    a = np.asarray(a)
    b = np.asarray(b)
    out_dim = a.shape[0] * b.shape[0]
    ceiling = limits.max_pure_dim if a.ndim == 1 and b.ndim == 1 else limits.max_mixed_dim
    if out_dim > ceiling:
        raise DimensionCeilingError(f"dimension {out_dim} exceeds ceiling")
    return np.kron(a, b)


def reduce_vector(vec: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of a pure vector on the factors ``keep``."""
    keep = sorted(keep)
    rest = [i for i in range(len(dims)) if i not in keep]
    t = np.asarray(vec).reshape(dims).transpose(keep + rest)
    dk = int(np.prod([dims[i] for i in keep], dtype=int))
    m = t.reshape(dk, -1)
    return m @ m.conj().T


def reduce_matrix(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a matrix over all factors not in ``keep``."""
    keep = sorted(keep)
    n = len(dims)
    rest = [i for i in range(n) if i not in keep]
    t = np.asarray(rho).reshape(tuple(dims) * 2)
    t = t.transpose(keep + rest + [n + i for i in keep] + [n + i for i in rest])
    dk = int(np.prod([dims[i] for i in keep], dtype=int))
    dr = int(np.prod([dims[i] for i in rest], dtype=int))
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("ajbj->ab", t)


def partial_trace(state: QuantumState, keep: Iterable[str]) -> QuantumState:
    """Trace out every factor whose label is not in ``keep``."""
    keep = set(keep)
    idx = [state.system.index(lbl) for lbl in keep]
    sub = state.system.subsystem(keep)
    dims = state.system.dims
    if state.is_pure:
        red = reduce_vector(state.data, dims, idx)
    else:
        red = reduce_matrix(state.data, dims, idx)
    return QuantumState(sub, red, state.limits)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _check_psd(m: np.ndarray, name: str) -> None:
    if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -TOL_PSD:
        raise StateError(f"{name} is not positive semidefinite")


def fidelity_sq(rho, sigma) -> float:
    """Squared Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    if isinstance(rho, QuantumState) and isinstance(sigma, QuantumState):
        if rho.is_pure and sigma.is_pure:
            return float(abs(np.vdot(rho.data, sigma.data)) ** 2)
    r = as_matrix(rho)
    s = as_matrix(sigma)
    _check_psd(r, "rho")
    _check_psd(s, "sigma")
    sr = _sqrtm_psd(r)
    w = np.linalg.eigvalsh(sr @ s @ sr)
    f = np.sqrt(np.clip(w, 0.0, None)).sum()
    return float(min(f * f, 1.0 + TOL_TR))


def trace_norm(a) -> float:
    """Sum of singular values."""
    m = as_matrix(a)
    if np.allclose(m, m.conj().T, atol=1e-14):
        return float(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


def purify(rho: QuantumState, prefix: str = "P_") -> QuantumState:
    """Canonical purification ``sum_x sqrt(rho)|x> (x) |x>``.

    The purifying factors are copies of the input factors, labeled with
    ``prefix`` and appended after them.
    """
    m = as_matrix(rho)
    root = _sqrtm_psd(m)
    # column x of root is sqrt(rho)|x>, paired with |x> on the purifier
    vec = root.reshape(-1)
    copy = RegisterSystem(tuple((prefix + lbl, d) for lbl, d in rho.system.factors))
    return QuantumState(rho.system.concat(copy), vec, rho.limits)


@dataclass(frozen=True, eq=False)
class SchmidtData:
    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray


def schmidt(psi: QuantumState, cut: Iterable[str]) -> SchmidtData:
    """Schmidt decomposition across ``cut`` versus the remaining factors.

    ``coefficients`` are the squared singular values, i.e. the eigenvalues
    of either reduced state, in descending order. Basis vectors are the
    columns of ``left_basis`` (cut side) and ``right_basis``.
    """
    if not psi.is_pure:
        raise StateError("schmidt requires a pure state")
    cut = set(cut)
    left = [psi.system.index(lbl) for lbl in psi.system.labels if lbl in cut]
    right = [i for i in range(len(psi.system)) if i not in left]
    if not left or not right:
        raise StateError("cut must leave both sides nonempty")
    dims = psi.system.dims
    t = psi.data.reshape(dims).transpose(left + right)
    dl = int(np.prod([dims[i] for i in left]))
    u, s, vh = np.linalg.svd(t.reshape(dl, -1), full_matrices=False)
    return SchmidtData(s**2, u, vh.conj().T)


def min_entropy(rho) -> float:
    """``-log2`` of the largest eigenvalue."""
    if isinstance(rho, QuantumState) and rho.is_pure:
        lam = rho.trace()
    else:
        m = as_matrix(rho)
        if m.ndim == 1:
            lam = float(np.max(m.real))
        else:
            lam = float(np.linalg.eigvalsh((m + m.conj().T) / 2).max())
    if lam <= 0:
        raise StateError("min-entropy of the zero operator is undefined")
    return float(-np.log2(lam))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability outside [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def measure_povm(state: QuantumState, elements: Sequence[np.ndarray],
                 complete: bool = True) -> list[tuple[float, QuantumState]]:
    """Apply a POVM and return ``(probability, post_state)`` per outcome.

    Post-states are ``sqrt(E) rho sqrt(E)``, so each carries its branch
    probability as its trace. Set ``complete=False`` for a trace-non-increasing
    family whose elements sum to at most the identity.
    """
    dim = state.system.total_dim
    total = np.zeros((dim, dim), dtype=complex)
    for e in elements:
        e = np.asarray(e, dtype=complex)
        _check_psd(e, "POVM element")
        total += e
    if complete:
        if not np.allclose(total, np.eye(dim), atol=TOL_EQ):
            raise StateError("POVM elements do not sum to the identity")
    elif np.linalg.eigvalsh(total).max() > 1 + TOL_PSD:
        raise StateError("POVM elements sum above the identity")
    rho = state.dm()
    out = []
    for e in elements:
        root = _sqrtm_psd(np.asarray(e, dtype=complex))
        post = root @ rho @ root
        post = (post + post.conj().T) / 2
        out.append((float(np.trace(post).real), QuantumState(state.system, post, state.limits)))
    return out


def helstrom_guess(rho0, rho1) -> float:
    """Optimal probability of guessing which of two weighted states was sent.

    The priors are encoded in the traces, which must sum to one.
    """
    a = as_matrix(rho0)
    b = as_matrix(rho1)
    if a.ndim == 1:
        a = np.outer(a, a.conj())
    if b.ndim == 1:
        b = np.outer(b, b.conj())
    tot = np.trace(a).real + np.trace(b).real
    if abs(tot - 1) > TOL_TR:
        raise StateError(f"combined trace {tot} is not one")
    return 0.5 + 0.5 * trace_norm(a - b)


def haar_state(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unit vector(s) from normalized complex Gaussians."""
    shape = (dim,) if size is None else (size, dim)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random isometry ``C^cols -> C^rows`` via QR with phase fix."""
    if cols > rows:
        raise ValueError("isometry needs rows >= cols")
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random normalized density matrix, Hilbert-Schmidt-style from a Gaussian."""
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix with negative eigenvalues clamped."""
    return _sqrtm_psd(np.asarray(m, dtype=complex))


def min_eig(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())


@dataclass(frozen=True, eq=False)
class ReferenceState:
    """Reference state ``phi_S`` with the agreed purification ``|phi>_PS``.

    ``phi_PS`` is a vector on ``P (x) S`` in that order.
    """

    phi_S: np.ndarray
    phi_PS: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi_S, dtype=complex)
        vec = np.asarray(self.phi_PS, dtype=complex)
        d = phi.shape[0]
        if vec.shape != (d * d,):
            raise StateError("purification must live on P (x) S with dim d**2")
        if abs(np.trace(phi).real - 1) > TOL_TR:
            raise StateError("reference state must be normalized")
        _check_psd(phi, "reference state")
        red = reduce_vector(vec, (d, d), [1])
        if np.abs(red - phi).max() > TOL_EQ:
            raise StateError("purification does not reduce to the reference state")
        object.__setattr__(self, "phi_S", phi)
        object.__setattr__(self, "phi_PS", vec)

    @property
    def d(self) -> int:
        return self.phi_S.shape[0]

    @classmethod
    def from_state(cls, phi_S: np.ndarray) -> "ReferenceState":
        """Canonical purification ``sum_x |x>_P sqrt(phi)|x>_S``."""
        phi = np.asarray(phi_S, dtype=complex)
        root = _sqrtm_psd(phi)
        # entry (x, s) = <s|sqrt(phi)|x>
        return cls(phi, root.T.reshape(-1))

    @classmethod
    def epr(cls) -> "ReferenceState":
        """Maximally mixed qubit purified by ``|Phi+>``."""
        return cls.from_state(np.eye(2) / 2)
