import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixcert.qcore import (
    DimensionCeilingError,
    Limits,
    QuantumState,
    ReferenceState,
    RegisterSystem,
    StateError,
    binary_entropy,
    fidelity_sq,
    haar_isometry,
    haar_state,
    helstrom_guess,
    ket,
    measure_povm,
    min_entropy,
    partial_trace,
    purify,
    random_density,
    reduce_matrix,
    reduce_vector,
    schmidt,
    tensor,
    trace_norm,
)

from strategies_ import gen, seeds


def test_factor_zero_is_most_significant():
    sys_ = RegisterSystem.from_dims(["A", "B"], [2, 3])
    v = np.kron(ket(1, 2), ket(2, 3))
    assert np.argmax(np.abs(v)) == 1 * 3 + 2
    st_ = QuantumState(sys_, v)
    red = partial_trace(st_, ["A"])
    np.testing.assert_allclose(red.data, np.diag([0, 1]), atol=1e-15)


def test_register_system_validation():
    with pytest.raises(StateError):
        RegisterSystem.from_dims(["A", "A"], [2, 2])
    with pytest.raises(StateError):
        RegisterSystem.from_dims(["A"], [0])
    s = RegisterSystem.uniform("S", 3, 2)
    assert s.labels == ("S0", "S1", "S2") and s.total_dim == 8
    assert s.subsystem(["S2", "S0"]).labels == ("S0", "S2")


def test_state_validation():
    s = RegisterSystem.from_dims(["A"], [2])
    with pytest.raises(StateError):
        QuantumState(s, np.array([1.0, 1.0]))
    with pytest.raises(StateError):
        QuantumState(s, np.array([[1.0, 0.0], [0.0, -0.5]]))
    # subnormalized branches are allowed
    assert QuantumState(s, np.diag([0.25, 0.0])).trace() == pytest.approx(0.25)


def test_dimension_ceilings():
    lim = Limits(max_mixed_dim=8, max_pure_dim=16)
    s = RegisterSystem.uniform("Q", 4, 2)
    with pytest.raises(DimensionCeilingError):
        QuantumState(s, np.eye(16) / 16, lim)
    QuantumState(s, np.ones(16) / 4, lim)
    with pytest.raises(DimensionCeilingError):
        tensor(np.eye(65), np.eye(64))


def test_frozen_scalars():
    # independent closed forms
    assert fidelity_sq(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(0.5, abs=1e-12)
    assert min_entropy(np.eye(4) / 4) == pytest.approx(2.0, abs=1e-12)
    assert binary_entropy(1 / 6) == pytest.approx(0.6500224216483541, abs=1e-14)
    assert trace_norm(np.diag([0.5, -0.25])) == pytest.approx(0.75)
    # |0> versus |+> with equal priors: 1/2 + sqrt(1/2)/2
    plus = np.array([1, 1]) / math.sqrt(2)
    g = helstrom_guess(np.outer(ket(0, 2), ket(0, 2)) / 2, np.outer(plus, plus) / 2)
    assert g == pytest.approx(0.5 + math.sqrt(0.5) / 2, abs=1e-12)


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_reduce_vector_matches_matrix(seed, da, db):
    rng = gen(seed)
    v = haar_state(da * db * 2, rng)
    rho = np.outer(v, v.conj())
    dims = (da, db, 2)
    for keep in ([0], [1, 2], [0, 2]):
        np.testing.assert_allclose(reduce_vector(v, dims, keep), reduce_matrix(rho, dims, keep), atol=1e-12)


@given(seeds, st.integers(2, 4))
def test_purify_reduces_back(seed, d):
    rho = random_density(d, gen(seed))
    s = RegisterSystem.from_dims(["A"], [d])
    pur = purify(QuantumState(s, rho))
    assert pur.is_pure
    np.testing.assert_allclose(partial_trace(pur, ["A"]).data, rho, atol=1e-10)


@given(seeds)
def test_schmidt_coefficients_are_reduced_spectrum(seed):
    v = haar_state(12, gen(seed))
    s = RegisterSystem.from_dims(["A", "B"], [3, 4])
    sd = schmidt(QuantumState(s, v), ["A"])
    spec = np.sort(np.linalg.eigvalsh(reduce_vector(v, (3, 4), [0])))[::-1]
    np.testing.assert_allclose(sd.coefficients, spec, atol=1e-12)
    recon = (sd.left_basis * np.sqrt(sd.coefficients)) @ sd.right_basis.conj().T
    np.testing.assert_allclose(recon.reshape(-1), v, atol=1e-12)


@given(seeds, st.integers(2, 4))
def test_fidelity_properties(seed, d):
    rng = gen(seed)
    a, b = random_density(d, rng), random_density(d, rng)
    f = fidelity_sq(a, b)
    assert -1e-12 <= f <= 1 + 1e-9
    assert f == pytest.approx(fidelity_sq(b, a), abs=1e-8)
    assert fidelity_sq(a, a) == pytest.approx(1.0, abs=1e-8)
    # Fuchs-van de Graaf
    td = 0.5 * trace_norm(a - b)
    assert 1 - math.sqrt(f) <= td + 1e-8
    assert td <= math.sqrt(max(1 - f, 0)) + 1e-8


@given(seeds)
def test_measure_povm_branches_sum(seed):
    rng = gen(seed)
    rho = random_density(4, rng)
    iso = haar_isometry(12, 4, rng).reshape(3, 4, 4)
    elems = [b.conj().T @ b for b in iso]
    s = RegisterSystem.from_dims(["A"], [4])
    out = measure_povm(QuantumState(s, rho), elems)
    assert sum(p for p, _ in out) == pytest.approx(1.0, abs=1e-10)
    for p, post in out:
        assert post.trace() == pytest.approx(p, abs=1e-12)


def test_measure_povm_rejects_incomplete():
    s = RegisterSystem.from_dims(["A"], [2])
    rho = QuantumState(s, np.eye(2) / 2)
    with pytest.raises(StateError):
        measure_povm(rho, [np.diag([1.0, 0.0])])
    out = measure_povm(rho, [np.diag([1.0, 0.0])], complete=False)
    assert out[0][0] == pytest.approx(0.5)


def test_reference_state_canonical_purification():
    ref = ReferenceState.epr()
    np.testing.assert_allclose(ref.phi_PS, np.array([1, 0, 0, 1]) / math.sqrt(2), atol=1e-15)
    phi = np.diag([0.75, 0.25])
    r = ReferenceState.from_state(phi)
    np.testing.assert_allclose(reduce_vector(r.phi_PS, (2, 2), [1]), phi, atol=1e-14)
    with pytest.raises(StateError):
        ReferenceState(phi, np.array([1, 0, 0, 0], dtype=complex))
