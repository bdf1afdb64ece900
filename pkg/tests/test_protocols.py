import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixcert.protocols import (
    Measurement,
    ParameterError,
    ProtocolParams,
    StrategyError,
    acceptance_frequency,
    accepted_channel,
    build_params,
    build_prover,
    build_sampler,
    epr_guessing_gamma,
    iid_output_bound_residual,
    run_sampling,
    symmetrized_adversary,
    symmetrized_equality_residual,
    theta_with_fidelity,
)
from mixcert.protocols.strategies import HonestProver, JunkProver
from mixcert.qcore import ReferenceState, fidelity_sq, haar_state, reduce_vector

from strategies_ import gen, seeds


def _acc(N, k, prover, protocol="purification"):
    p = build_params(N, k, protocol)
    return run_sampling(p, build_prover(prover, p), mode="exact").accept_probability


@pytest.mark.parametrize("protocol", ["purification", "epr_locc"])
@pytest.mark.parametrize("N,k", [(2, 1), (3, 1), (3, 2), (4, 2)])
def test_honest_accepts(protocol, N, k):
    assert _acc(N, k, "honest", protocol) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("protocol", ["purification", "epr_locc"])
def test_rejecting_and_few_errors(protocol):
    if protocol == "purification":
        assert _acc(3, 1, "rejecting") == pytest.approx(0.0, abs=1e-12)
    # a bit-flipped pair fails the computational test and passes the
    # diagonal one half the time
    slot = 0.0 if protocol == "purification" else 0.25
    for N, k, errs in [(4, 2, [1]), (4, 1, [0, 3]), (3, 2, [2])]:
        expect = sum(
            math.comb(len(errs), j) * math.comb(N - len(errs), k - j) * slot**j
            for j in range(min(k, len(errs)) + 1)) / math.comb(N, k)
        got = _acc(N, k, {"name": "few_errors", "errors": errs}, protocol)
        assert got == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("f2", [0.99, 0.9, 0.75])
@pytest.mark.parametrize("N,k", [(3, 1), (4, 2), (5, 2)])
def test_iid_purification_acceptance(f2, N, k):
    assert _acc(N, k, {"name": "iid", "fidelity_sq": f2}) == pytest.approx(f2**k, abs=1e-9)


@pytest.mark.parametrize("f2", [0.95, 0.8])
def test_iid_epr_acceptance_is_gamma_power(f2):
    ref = ReferenceState.epr()
    theta = theta_with_fidelity(ref, f2)
    gamma, _ = epr_guessing_gamma(theta)
    assert _acc(4, 2, {"name": "iid", "fidelity_sq": f2}, "epr_locc") == pytest.approx(gamma**2, abs=1e-10)


@given(seeds, st.sampled_from([(3, 1), (3, 2), (4, 2)]))
@settings(max_examples=10)
def test_junk_prover_slot_formula(seed, nk):
    rng = gen(seed)
    ref = ReferenceState.from_state(np.diag([0.75, 0.25]))
    junk = haar_state(4, rng)
    p = ProtocolParams(*nk, ref=ref)
    acc = run_sampling(p, JunkProver(ref, p.N, junk)).accept_probability
    sent = reduce_vector(junk, (2, 2), [1])
    slot = np.vdot(ref.phi_PS, np.kron(sent, ref.phi_S) @ ref.phi_PS).real
    assert acc == pytest.approx(slot**p.k, abs=1e-10)


def test_junk_prover_frozen():
    # the sent P factor is |0>, while S stays maximally mixed: overlap
    # <Phi+|(|0><0| (x) I/2)|Phi+> = 1/4 per sampled slot
    assert _acc(3, 2, {"name": "junk", "state": [1, 0, 0, 0]}) == pytest.approx(1 / 16, abs=1e-12)
    assert _acc(3, 1, {"name": "junk", "state": [1, 0, 0, 0]}) == pytest.approx(1 / 4, abs=1e-12)


@given(st.floats(0.5001, 1.0))
@settings(max_examples=15)
def test_theta_with_fidelity_hits_target(f2):
    ref = ReferenceState.epr()
    th = theta_with_fidelity(ref, f2)
    assert np.linalg.norm(th) == pytest.approx(1.0)
    assert fidelity_sq(reduce_vector(th, (2, 2), [1]), ref.phi_S) == pytest.approx(f2, abs=1e-10)


def test_theta_with_fidelity_range():
    # a pure S marginal is the farthest point from I/2
    with pytest.raises(ParameterError):
        theta_with_fidelity(ReferenceState.epr(), 0.4)


def test_epr_gamma_frozen():
    g, diag = epr_guessing_gamma(np.array([1, 0, 0, 0]))
    assert g == pytest.approx(0.75)
    g, diag = epr_guessing_gamma(np.array([1, 0, 0, 1]) / math.sqrt(2))
    assert g == pytest.approx(1.0)
    assert diag["trace_distance_to_mixed"] == pytest.approx(0.0, abs=1e-12)


@given(seeds)
def test_epr_chain_property(seed):
    _, diag = epr_guessing_gamma(haar_state(4, gen(seed)))
    assert diag["overlap_chain_slack"] >= -1e-9
    assert diag["fidelity_chain_slack"] >= -1e-9


@given(seeds, st.sampled_from([(3, 1), (3, 2), (4, 2)]))
@settings(max_examples=10)
def test_random_isometry_channel_is_subnormalized(seed, nk):
    p = build_params(*nk)
    prover = build_prover({"name": "random_isometry", "seed": seed % 1000}, p)
    acc = accepted_channel(p, prover)
    assert np.linalg.eigvalsh(acc).min() >= -1e-10
    assert np.trace(acc).real <= 1 + 1e-10


def test_exact_and_trajectory_agree():
    p = build_params(4, 2)
    prover = build_prover({"name": "few_errors", "errors": [1]}, p)
    rate, se = acceptance_frequency(p, prover, 20000, seed=5)
    assert abs(rate - 0.5) < 5 * se
    tr = run_sampling(p, prover, mode="trajectory", seed=5)
    assert tr.accepted in (True, False) and tr.t is not None
    again = run_sampling(p, prover, mode="trajectory", seed=5)
    assert again.to_dict() == tr.to_dict()


def test_exact_transcript_dict():
    p = build_params(3, 1)
    tr = run_sampling(p, build_prover("honest", p), mode="exact", seed=7)
    d = tr.to_dict()
    assert d["seed"] == 7 and d["t"] is None and d["accept_probability"] == pytest.approx(1.0)
    assert set(d["branch_probabilities"]) == {"0", "1", "2"}
    assert "post_state" in d


@pytest.mark.parametrize("prover", ["honest", {"name": "iid", "fidelity_sq": 0.8},
                                    {"name": "few_errors", "errors": [0]},
                                    {"name": "random_isometry", "seed": 3}])
@pytest.mark.parametrize("N,k", [(3, 1), (3, 2), (4, 1)])
def test_symmetrized_equality(prover, N, k):
    p = build_params(N, k)
    assert symmetrized_equality_residual(p, build_prover(prover, p)) <= 1e-8


@pytest.mark.parametrize("prover", ["honest", {"name": "few_errors", "errors": [1]}])
def test_symmetrized_equality_epr(prover):
    p = build_params(3, 1, "epr_locc")
    assert symmetrized_equality_residual(p, build_prover(prover, p)) <= 1e-8


@given(seeds)
@settings(max_examples=10)
def test_iid_output_bound(seed):
    p = build_params(3, 1)
    adv = symmetrized_adversary(p, build_prover({"name": "random_isometry", "seed": 1}, p))
    assert iid_output_bound_residual(adv, haar_state(4, gen(seed))) >= -1e-9


def test_parameter_errors():
    with pytest.raises(ParameterError):
        build_params(4, 4)
    with pytest.raises(ParameterError):
        build_params(4, 0)
    with pytest.raises(ParameterError):
        build_params(3, 1, "bb84")
    p = build_params(3, 1)
    with pytest.raises(ParameterError):
        build_prover("random_povm", p)
    with pytest.raises(ParameterError):
        build_prover({"name": "iid", "fidelity": 0.9}, p)
    with pytest.raises(ParameterError):
        build_prover({"name": "few_errors", "errors": [5]}, p)
    with pytest.raises(ParameterError):
        build_sampler("greedy")


def test_kind_mismatch_rejected():
    p_epr = build_params(3, 1, "epr_locc")
    with pytest.raises(StrategyError):
        run_sampling(p_epr, HonestProver(ReferenceState.epr(), 3))


class _NonIsometry(HonestProver):
    def respond(self, params, t, c=None):
        return 2 * super().respond(params, t, c)


def test_malformed_reply_rejected():
    p = build_params(3, 1)
    with pytest.raises(StrategyError):
        run_sampling(p, _NonIsometry(p.ref, 3))
