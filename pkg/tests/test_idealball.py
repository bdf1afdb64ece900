import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixcert.idealball import (
    HammingBall,
    IdealCertificate,
    ball_rank,
    ball_weight_iid,
    binomial_log_tails,
    binomial_upper_tail_bound_exact,
    hamming_projector,
    hoeffding_tail_check,
    project_into_ball,
    radius_for,
    random_ball_state,
    verify_ideal_certificate,
)
from mixcert.qcore import DimensionCeilingError, ReferenceState, haar_isometry, haar_state, reduce_vector

from strategies_ import gen, seeds


def _exact_lower_tail(n, q, r):
    q = Fraction(q)
    return sum(math.comb(n, j) * q**j * (1 - q) ** (n - j) for j in range(r + 1))


def _weight_projector(n, r):
    diag = [1.0 if bin(x).count("1") <= r else 0.0 for x in range(2**n)]
    return np.diag(diag)


@given(st.integers(1, 5), st.data(), seeds)
def test_projector_matches_conjugated_weight_projector(n, data, seed):
    r = data.draw(st.integers(0, n))
    u = haar_isometry(2, 2, gen(seed))
    big = np.ones((1, 1))
    for _ in range(n):
        big = np.kron(big, u)
    expect = big @ _weight_projector(n, r) @ big.conj().T
    np.testing.assert_allclose(hamming_projector(n, r, u[:, 0]), expect, atol=1e-10)


@pytest.mark.parametrize("n,r,d,rank", [(3, 1, 4, 10), (4, 2, 4, 1 + 12 + 54), (5, 0, 2, 1), (4, 4, 2, 16)])
def test_ball_rank_frozen(n, r, d, rank):
    assert ball_rank(n, r, d) == rank
    center = np.zeros(d)
    center[0] = 1
    assert np.trace(hamming_projector(n, r, center)).real == pytest.approx(rank)


def test_ball_ceiling_and_radius():
    with pytest.raises(DimensionCeilingError):
        hamming_projector(7, 1, np.array([1, 0, 0, 0]))
    with pytest.raises(ValueError):
        hamming_projector(2, 3, np.array([1, 0]))
    assert radius_for(0.3, 10) == 3  # 0.3 * 10 is 2.9999999999999996 in floats
    assert radius_for(1 / 6, 6) == 1


@given(seeds, st.integers(1, 4), st.data())
def test_iid_ball_weight_is_binomial(seed, n, data):
    r = data.draw(st.integers(0, n))
    rng = gen(seed)
    theta = haar_state(2, rng)
    nu = np.array([1.0, 0.0])
    v = theta
    for _ in range(n - 1):
        v = np.kron(v, theta)
    direct = np.vdot(v, hamming_projector(n, r, nu) @ v).real
    assert ball_weight_iid(theta, nu, n, r) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("n,q,r", [(100, "1/10", 20), (6, "1/6", 1), (1000, "1/4", 375), (50, "3/10", 5)])
def test_log_tails_match_fractions(n, q, r):
    exact = _exact_lower_tail(n, q, r)
    lo, hi = binomial_log_tails(n, float(Fraction(q)), r)
    assert math.exp(lo) == pytest.approx(float(exact), rel=1e-12)
    if exact < 1:
        assert math.exp(hi) == pytest.approx(float(1 - exact), rel=1e-9)


def test_frozen_tail_values():
    # frozen from the exact rational sums
    lo, _ = binomial_log_tails(100, 0.1, 20)
    assert math.exp(lo) == pytest.approx(0.9991924261256337, abs=1e-13)
    lo, _ = binomial_log_tails(6, 1 / 6, 1)
    assert math.exp(lo) == pytest.approx(0.736775548696845, abs=1e-13)


@given(st.integers(1, 120), st.fractions(0, 1, max_denominator=20), st.data())
def test_exact_upper_tail_bound_is_rigorous(n, q, data):
    r = data.draw(st.integers(0, n))
    num, den = binomial_upper_tail_bound_exact(n, q, r)
    exact = 1 - _exact_lower_tail(n, q, r)
    bound = Fraction(num, den)
    assert bound >= exact
    assert bound <= 2 * exact + Fraction(1, 10**30) or exact == 0


def test_hoeffding_tail_check_structure():
    res = hoeffding_tail_check(100, "1/10", "1/10")
    assert res["radius"] == 20
    assert res["float_ok"] and res["exact_ok"]
    assert res["log_hoeffding"] == pytest.approx(-2.0)


@given(seeds, st.integers(1, 3), st.data())
def test_random_ball_state_is_certified(seed, n, data):
    r = data.draw(st.integers(0, n))
    ref = ReferenceState.epr()
    w = random_ball_state(n, r, ref, 2, gen(seed))
    assert np.linalg.norm(w) == pytest.approx(1.0)
    psi = reduce_vector(w, [2] + [2, 2] * n, [2 + 2 * i for i in range(n)])
    eps = r / n
    ok, info = verify_ideal_certificate(IdealCertificate(psi, w, eps), ref)
    assert ok, info
    assert info["radius"] == r


def test_certificate_failure_reported_not_raised():
    ref = ReferenceState.epr()
    bad = np.zeros(2 * 4)
    bad[2 * 0 + 1] = 1.0  # |0>_R |01>_PS, orthogonal to |Phi+>
    psi = reduce_vector(bad, [2, 2, 2], [2])
    ok, info = verify_ideal_certificate(IdealCertificate(psi, bad, 0.0), ref)
    assert not ok and info["ball_residual"] == pytest.approx(1.0)
    ok, info = verify_ideal_certificate(IdealCertificate(psi, bad[:6], 0.0), ref)
    assert not ok and "error" in info


@given(seeds, st.integers(1, 3))
def test_project_into_ball_gentle(seed, n):
    ref = ReferenceState.epr()
    v = haar_state(4**n, gen(seed))
    proj, leak, gentle = project_into_ball(v, 0, ref, n)
    assert gentle["distance"] <= gentle["bound"] + 1e-9
    assert leak == pytest.approx(1 - abs(np.vdot(ball := HammingBall(n, 0, ref.phi_PS).basis[:, 0], v)) ** 2)
