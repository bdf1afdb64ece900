"""Quantum Hamming balls and ideal-state certificates, with binomial tail bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .qcore import (
    DEFAULT_LIMITS,
    TOL_EQ,
    DimensionCeilingError,
    ReferenceState,
    StateError,
    haar_state,
    reduce_vector,
    trace_norm,
)


def _complement_basis(center: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of ``center``."""
    d = center.shape[0]
    q, _ = np.linalg.qr(np.column_stack([center, np.eye(d, dtype=complex)]))
    return q[:, 1:d]


@lru_cache(maxsize=64)
def _ball_basis_cached(n: int, r: int, center_key: bytes, d: int) -> np.ndarray:
    center = np.frombuffer(center_key, dtype=complex).copy()
    comp = _complement_basis(center)
    cols = []
    for j in range(r + 1):
        for errs in itertools.combinations(range(n), j):
            for choice in itertools.product(range(d - 1), repeat=j):
                pick = dict(zip(errs, choice))
                v = np.ones(1, dtype=complex)
                for i in range(n):
                    v = np.kron(v, comp[:, pick[i]] if i in pick else center)
                cols.append(v)
    basis = np.column_stack(cols)
    basis.setflags(write=False)
    return basis


def ball_basis(n: int, r: int, center: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the radius-``r`` ball around ``center^(x)n``.

    Basis vectors are products of ``center`` on unflagged positions and a
    complement basis vector on at most ``r`` flagged positions.
    """
    center = np.asarray(center, dtype=complex)
    center = center / np.linalg.norm(center)
    d = center.shape[0]
    if not 0 <= r <= n:
        raise ValueError(f"radius {r} outside [0, {n}]")
    if d**n > DEFAULT_LIMITS.max_mixed_dim:
        raise DimensionCeilingError(f"dimension {d ** n} exceeds ceiling")
    return _ball_basis_cached(n, r, center.tobytes(), d)


def ball_rank(n: int, r: int, d: int) -> int:
    return sum(math.comb(n, j) * (d - 1) ** j for j in range(r + 1))


def hamming_projector(n: int, r: int, center: np.ndarray) -> np.ndarray:
    """Projector onto span of states differing from ``center^(x)n`` on at most ``r`` factors."""
    b = ball_basis(n, r, center)
    return b @ b.conj().T


@dataclass(frozen=True, eq=False)
class HammingBall:
    n: int
    r: int
    center: np.ndarray
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "basis", ball_basis(self.n, self.r, self.center))

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Apply ``I_R (x) projector`` to a vector whose trailing factor is the ball space."""
        b = self.basis
        w = np.asarray(vec).reshape(-1, b.shape[0])
        return ((w @ b.conj()) @ b.T).reshape(-1)


def radius_for(epsilon: float, n: int) -> int:
    """Ball radius ``floor(epsilon * n)``, robust to float round-off."""
    return int(math.floor(epsilon * n + 1e-12))


# ---------------------------------------------------------------------------
# binomial tails


def _log_pmf(n: int, q: float, j: int) -> float:
    if q == 0.0:
        return 0.0 if j == 0 else -math.inf
    if q == 1.0:
        return 0.0 if j == n else -math.inf
    return (math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
            + j * math.log(q) + (n - j) * math.log1p(-q))


def _logsumexp(vals) -> float:
    vals = [v for v in vals if v != -math.inf]
    if not vals:
        return -math.inf
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def binomial_log_tails(n: int, q: float, r: int) -> tuple[float, float]:
    """``(log P[X <= r], log P[X > r])`` for ``X ~ Binomial(n, q)``.

    The smaller tail is summed directly in log space and the other one is
    derived from it, which keeps both accurate when one is tiny.
    """
    if r < 0:
        return -math.inf, 0.0
    if r >= n:
        return 0.0, -math.inf
    mean = n * q
    if r < mean:
        lo = _logsumexp(_log_pmf(n, q, j) for j in range(r + 1))
        hi = math.log(-math.expm1(lo)) if lo < 0 else -math.inf
    else:
        hi = _logsumexp(_log_pmf(n, q, j) for j in range(r + 1, n + 1))
        lo = math.log(-math.expm1(hi)) if hi < 0 else -math.inf
    return lo, hi


def ball_weight_iid(theta: np.ndarray, nu: np.ndarray, n: int, r: int) -> float:
    """``tr(P^{r,nu} |theta><theta|^(x)n)`` as a binomial lower tail."""
    theta = np.asarray(theta, dtype=complex)
    nu = np.asarray(nu, dtype=complex)
    q = float(min(max(1.0 - abs(np.vdot(nu, theta)) ** 2, 0.0), 1.0))
    lo, _ = binomial_log_tails(n, q, r)
    return math.exp(lo)


def binomial_upper_tail_bound_exact(n: int, q: Fraction, r: int) -> tuple[int, int]:
    """Rigorous rational upper bound on ``P[Binomial(n, q) > r]``.

    Returned as ``(numerator, denominator)``. With ``q = a / b`` every term
    is an integer multiple of ``b**-n``; terms are summed exactly until the
    term ratio drops to one half, then the remainder is bounded by a
    geometric series (ratios decrease with the index). The result is the
    exact tail when every term gets summed.
    """
    q = Fraction(q)
    if r >= n or q == 0:
        return 0, 1
    if q == 1:
        return 1, 1
    a, b = q.numerator, q.denominator
    c = b - a
    den = b**n
    j = r + 1
    term = math.comb(n, j) * a**j * c ** (n - j)
    total = 0
    while True:
        if j == n:
            return total + term, den
        # ratio of consecutive terms = (n - j) a / ((j + 1) c)
        rn, rd = (n - j) * a, (j + 1) * c
        if 2 * rn <= rd:
            # total + term / (1 - rn/rd) over a common denominator
            return total * (rd - rn) + term * rd, den * (rd - rn)
        total += term
        term = term * rn // rd  # exact: consecutive terms are integers
        j += 1


def hoeffding_tail_check(n: int, epsilon, alpha) -> dict:
    """Check ``P[Bin(n, eps) <= floor((eps + alpha) n)] >= 1 - exp(-2 alpha^2 n)``.

    ``epsilon`` and ``alpha`` may be strings or fractions for exact grids.
    The worst case allowed by ``|<theta|nu>|^2 >= 1 - eps`` is ``q = eps``
    since the upper tail grows with ``q``. The comparison is done twice: in
    float log space and with an exact rational tail bound against a
    high-precision exponential.
    """
    import mpmath

    eps = Fraction(epsilon)
    a = Fraction(alpha)
    r = math.floor((eps + a) * n)
    _, log_hi = binomial_log_tails(n, float(eps), r)
    log_rhs = float(-2 * a * a * n)
    num, den = binomial_upper_tail_bound_exact(n, eps, r)
    with mpmath.workdps(60):
        rhs = -2 * mpmath.mpf(a.numerator) ** 2 / a.denominator**2 * n
        exact_ok = num == 0 or mpmath.log(num) - mpmath.log(den) <= rhs
    return {
        "n": n, "epsilon": float(eps), "alpha": float(a), "radius": r,
        "log_upper_tail": log_hi, "log_hoeffding": log_rhs,
        "float_ok": log_hi <= log_rhs, "exact_ok": bool(exact_ok),
    }


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True, eq=False)
class IdealCertificate:
    """Claimed ideal state together with a purification witness.

    ``witness`` is a vector on ``R (x) P0 S0 ... P_{n-1} S_{n-1}`` with the
    purifying register ``R`` as the leading factor.
    """

    psi_Sn: np.ndarray
    witness: np.ndarray
    epsilon: float


def _n_from(psi: np.ndarray, d: int) -> int:
    n = round(math.log(psi.shape[0], d))
    if d**n != psi.shape[0]:
        raise StateError("state dimension is not a power of the local dimension")
    return n


def witness_reduction(witness: np.ndarray, n: int, d: int) -> np.ndarray:
    """``tr_{R P^n}`` of a witness laid out as ``R P0 S0 ...``."""
    D = d * d
    dr = witness.size // D**n
    dims = [dr] + [d, d] * n
    return reduce_vector(witness, dims, [2 + 2 * i for i in range(n)])


def verify_ideal_certificate(cert: IdealCertificate, ref: ReferenceState,
                             tol: float = TOL_EQ) -> tuple[bool, dict]:
    """Check reduction and ball membership of a certificate.

    Radius is ``floor(epsilon * n)``. Failures are reported, not raised.
    """
    d = ref.d
    psi = np.asarray(cert.psi_Sn, dtype=complex)
    n = _n_from(psi, d)
    w = np.asarray(cert.witness, dtype=complex)
    if w.size % (d * d) ** n:
        return False, {"error": "witness dimension mismatch"}
    r = radius_for(cert.epsilon, n)
    ball = HammingBall(n, r, ref.phi_PS)
    red_res = float(np.abs(witness_reduction(w, n, d) - psi).max())
    ball_res = float(np.linalg.norm(w - ball.apply(w)))
    ok = red_res <= tol and ball_res <= tol
    return ok, {"reduction_residual": red_res, "ball_residual": ball_res, "radius": r, "n": n}


def project_into_ball(state: np.ndarray, radius: int, ref: ReferenceState, n: int):
    """Compress a state on ``P^n S^n`` (interleaved) into the ball.

    ``state`` is a vector or a density matrix. Returns ``(projected, leak,
    gentle)`` where ``gentle`` holds the trace distance and its bound
    ``2 sqrt(leak)``; the bound is asserted.
    """
    ball = HammingBall(n, radius, ref.phi_PS)
    b = ball.basis
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        proj = b @ (b.conj().T @ state)
        leak = float(np.vdot(state, state).real - np.vdot(proj, proj).real)
        dist = trace_norm(np.outer(state, state.conj()) - np.outer(proj, proj.conj()))
    else:
        small = b.conj().T @ state @ b
        proj = b @ small @ b.conj().T
        leak = float(np.trace(state).real - np.trace(small).real)
        dist = trace_norm(state - proj)
    leak = max(leak, 0.0)
    bound = 2 * math.sqrt(leak)
    if dist > bound + 1e-8:
        raise AssertionError(f"gentle measurement violated: {dist} > {bound}")
    return proj, leak, {"distance": dist, "bound": bound}


def random_ball_state(n: int, r: int, ref: ReferenceState, dim_r: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector in ``C^dim_r (x)`` the ball's column space."""
    b = ball_basis(n, r, ref.phi_PS)
    coeff = haar_state(dim_r * b.shape[1], rng).reshape(dim_r, b.shape[1])
    return (coeff @ b.T).reshape(-1)
