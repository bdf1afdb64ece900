import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixcert.analysis import (
    BoundReport,
    CertificateError,
    ConfigError,
    ExperimentReport,
    alice_entropy_experiment,
    bob_entropy_experiment,
    default_suite,
    dumps,
    entropy_bound,
    flatten_reports,
    symmetrization_counterexample,
    pure_state_ball_gap,
    random_symmetrized_instance,
    reports_csv,
    run_experiment_suite,
    symmetrize_certificate,
    unpermute_ideal,
    validate_suite,
    verify_ideal_decomposition,
    verify_min_entropy_ideal,
    verify_symmetric_upper_bound,
)
from mixcert.analysis.certificates import certificate_residual
from mixcert.analysis.reports import clean
from mixcert.idealball import IdealCertificate
from mixcert.protocols import build_params, build_prover, build_sampler
from mixcert.qcore import DimensionCeilingError, ReferenceState, binary_entropy
from mixcert.symmetry import symmetrize_matrix

from strategies_ import gen, seeds

REF = ReferenceState.epr()


# ---------------------------------------------------------------------------
# reports


def test_bound_report_semantics():
    ok = BoundReport.compare("x", 1.0, 1.0 + 1e-12, 0.0)
    assert ok.satisfied and ok.slack > 0
    bad = BoundReport.compare("x", 1.0, 0.5, 1e-9, {"a": 1})
    assert not bad.satisfied and bad.context == {"a": 1, "tolerance": 1e-9}
    psd = BoundReport.psd("d", -2e-9, 1e-8)
    assert psd.satisfied and psd.lhs == pytest.approx(2e-9)


def test_clean_rounds_and_converts():
    out = clean({"a": np.float64(1 / 3), "b": np.array([1, 2]), "c": (np.True_, 1.23456789012e-5), 2: complex(1, 2)})
    assert out == {"a": 0.3333333333, "b": [1, 2], "c": [True, 1.234567890e-5], "2": [1.0, 2.0]}
    assert clean(float("inf")) == "inf"


def test_experiment_report_validation():
    with pytest.raises(ValueError):
        ExperimentReport(1, 1.5, None, {}, [0])
    with pytest.raises(ValueError):
        ExperimentReport(1, 0.5, None, {"t": {"a": 0.4}}, [0])
    assert ExperimentReport(1, 1 + 2e-16, None, {}, [0]).acceptance_rate == 1.0


def test_dumps_and_csv_deterministic():
    rows = [{"item": 0, "kind": "k", **BoundReport.compare("n", 0.1, 0.2, 0.0, {"z": 1, "a": 2}).to_dict()}]
    text = reports_csv(rows)
    assert text.splitlines()[0] == "item,kind,name,lhs,rhs,satisfied,slack,context"
    assert '{""a"": 2, ""tolerance"": 0.0, ""z"": 1}' in text
    assert dumps({"b": 1, "a": 0.1 + 0.2}) == '{\n  "a": 0.3,\n  "b": 1\n}\n'


# ---------------------------------------------------------------------------
# certificates


def test_counterexample_frozen():
    out = symmetrization_counterexample()
    assert out["gap"] == pytest.approx(0.5, abs=1e-12)
    assert out["symmetrized_ok"]


def test_unpermute_requires_permutation_register():
    # the symmetrization of |01><01| is certified, but |01><01| itself is not
    # ideal, so a witness without a permutation register cannot be unpermuted
    sigma = np.zeros((4, 4))
    sigma[1, 1] = 1.0
    pair00 = np.array([1, 0, 0, 0], dtype=complex)
    pair11 = np.array([0, 0, 0, 1], dtype=complex)
    w = (np.kron(pair00, pair11) - np.kron(pair11, pair00)) / math.sqrt(2)
    sym = IdealCertificate(symmetrize_matrix(sigma, 2, 2), w, 0.5)
    with pytest.raises(CertificateError):
        unpermute_ideal(sigma, sym, 0.5, REF)


@given(seeds, st.sampled_from([(2, 1), (3, 1), (3, 0), (2, 0)]))
@settings(max_examples=25)
def test_unpermute_round_trip(seed, nr):
    n, r = nr
    sigma, sym, eps = random_symmetrized_instance(n, r, REF, 2, gen(seed))
    cert = unpermute_ideal(sigma, sym, eps, REF)
    ok, worst, _ = certificate_residual(cert, REF)
    assert ok and worst <= 1e-8
    np.testing.assert_allclose(cert.psi_Sn, sigma, atol=1e-10)


def test_unpermute_rejects_wrong_state(rng):
    sigma, sym, eps = random_symmetrized_instance(2, 1, REF, 2, rng)
    other = np.eye(4) / 4
    with pytest.raises(CertificateError):
        unpermute_ideal(other, sym, eps, REF)


@given(seeds)
@settings(max_examples=15)
def test_symmetrize_certificate_verifies(seed):
    from mixcert.idealball import random_ball_state, witness_reduction

    w = random_ball_state(3, 1, REF, 2, gen(seed))
    cert = IdealCertificate(witness_reduction(w, 3, 2), w, 1 / 3)
    ok, worst, _ = certificate_residual(symmetrize_certificate(cert, REF), REF)
    assert ok, worst


def test_ball_gap_zero_inside():
    # radius n admits every state
    assert pure_state_ball_gap(np.ones(4) / 2, 2, 2, REF) == pytest.approx(0.0, abs=1e-12)
    # |00>_S: pair |00>_PS overlaps |Phi+>, so |00>_P |00>_S is in the radius-2 ball but
    # has weight 1/4 on the radius-0 ball; the product witness cannot do better
    assert pure_state_ball_gap(np.array([1, 0, 0, 0]), 2, 0, REF) > 0.5


# ---------------------------------------------------------------------------
# decomposition


@pytest.mark.parametrize("protocol,prover,eps", [
    ("purification", "honest", 0.25),
    ("purification", {"name": "few_errors", "errors": [1]}, 0.5),
    ("purification", {"name": "iid", "fidelity_sq": 0.95}, 0.25),
    ("epr_locc", "honest", 0.25),
])
def test_ideal_decomposition_dominance(protocol, prover, eps):
    p = build_params(3, 1, protocol)
    cert, sigma_norm, rep = verify_ideal_decomposition(p, build_prover(prover, p), eps, samples=8)
    assert rep.satisfied, rep.context
    assert rep.context["certificate_ok"]
    assert rep.context["purification_residual"] <= 1e-9
    assert sigma_norm >= 0


def test_honest_decomposition_frozen():
    # honest acceptance is phi^(x)n exactly; c = C(N + 3, N)
    p = build_params(3, 1)
    cert, sigma_norm, rep = verify_ideal_decomposition(p, build_prover("honest", p), 0.0, samples=0,
                                                       symmetrized=False)
    assert rep.context["c"] == 20
    assert sigma_norm == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(20 * cert.psi_Sn, np.eye(4) / 4, atol=1e-9)


def test_halved_constant_is_caught():
    p = build_params(3, 1)
    _, _, rep = verify_ideal_decomposition(p, build_prover("honest", p), 0.25, samples=0,
                                           c_scale=0.5, symmetrized=False)
    assert not rep.satisfied


@pytest.mark.parametrize("prover", ["honest", "rejecting", {"name": "random_isometry", "seed": 2}])
def test_symmetric_upper_bound(prover):
    p = build_params(3, 1)
    rep = verify_symmetric_upper_bound(p, build_prover(prover, p), samples=8)
    assert rep.satisfied, rep.context
    assert rep.context["c"] == 20


# ---------------------------------------------------------------------------
# entropy


def test_entropy_bound_frozen():
    # (1 - 1/6 - h(1/6)) * 6 from an independent evaluation
    assert entropy_bound(6, 1 / 6) == pytest.approx(1.0998654701098756, abs=1e-12)
    assert entropy_bound(4, 0.0) == pytest.approx(4.0)


@pytest.mark.parametrize("n,eps", [(2, 0.5), (3, 1 / 3), (4, 0.25)])
def test_min_entropy_ideal(n, eps):
    rep = verify_min_entropy_ideal(n, eps, samples=10, seed=1)
    assert rep.satisfied, rep.context


def test_min_entropy_ceiling():
    with pytest.raises(DimensionCeilingError):
        verify_min_entropy_ideal(7, 0.1)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_alice_honest_full_entropy(N):
    p = build_params(N, 1, "randomness_generation")
    ex, reps = alice_entropy_experiment(p, build_sampler("honest"), trials=200)
    assert ex.exact["H_min_X_A_given_acc"] == pytest.approx(N - 1, abs=1e-12)
    assert all(r.satisfied for r in reps), [r.to_dict() for r in reps if not r.satisfied]


def test_alice_selective_abort_frozen():
    p = build_params(4, 2, "randomness_generation")
    ex, reps = alice_entropy_experiment(p, build_sampler("selective_abort"), alpha=0.25, trials=0)
    assert ex.exact["accept_probability"] == pytest.approx(0.25)
    assert ex.exact["H_min_X_A_given_acc"] == pytest.approx(0.0, abs=1e-12)
    chain = next(r for r in reps if r.name == "alice_entropy_chain")
    assert chain.lhs == pytest.approx(0.0, abs=1e-12)  # tight: (1 - 0 - 1/2 - 1/2) * 4
    total = next(r for r in reps if r.name == "alice_total_probability")
    assert total.lhs <= 1e-12


def test_alice_measure_then_choose_summed_form():
    p = build_params(4, 2, "randomness_generation")
    _, reps = alice_entropy_experiment(p, build_sampler("measure_then_choose"), trials=0)
    total = next(r for r in reps if r.name == "alice_total_probability")
    assert total.satisfied
    # the summed min-entropy form is far from 2^-N for this adaptive sampler
    assert total.context["summed_min_entropy_form"] == pytest.approx(0.375, abs=1e-12)


def test_alice_engines_agree():
    p = build_params(4, 2, "randomness_generation")
    bob = build_sampler("measure_then_choose")
    a, ra = alice_entropy_experiment(p, bob, trials=0, engine="quantum")
    b, rb = alice_entropy_experiment(p, bob, trials=0, engine="classical")
    assert a.exact["accept_probability"] == pytest.approx(b.exact["accept_probability"], abs=1e-12)
    assert a.tables["X_A|acc"] == pytest.approx(b.tables["X_A|acc"], abs=1e-12)
    for x, y in zip(ra, rb):
        assert x.name == y.name and x.satisfied == y.satisfied
        assert (x.lhs, x.rhs) == pytest.approx((y.lhs, y.rhs), abs=1e-12)


@pytest.mark.parametrize("alice", ["honest", {"name": "few_errors", "errors": [1]},
                                   {"name": "iid", "fidelity_sq": 0.99}])
def test_bob_entropy(alice):
    p = build_params(4, 2, "randomness_generation")
    ex, reps = bob_entropy_experiment(p, build_prover(alice, p), epsilon=0.25, trials=100, samples=4)
    assert all(r.satisfied for r in reps), [r.to_dict() for r in reps if not r.satisfied]
    ctx = reps[0].context
    assert ctx["c"] == 35 and ctx["c_matches_symmetric_dimension"]
    # the bound recomputed from its parts
    recomputed = (1 - 0.25 - binary_entropy(0.25) - math.log2(35 / ctx["accept_probability"]) / 2) * 2
    assert reps[0].lhs == pytest.approx(recomputed, abs=1e-12)


# ---------------------------------------------------------------------------
# suites


def test_suite_validation_errors():
    for bad in ([], {"items": {}}, {"seed": -1}, {"seed": 2**64}, {"workers": 0}, {"extra": 1},
                {"items": [{"kind": "hoeffding", "n": 10}]},
                {"items": [{"kind": "hoeffding", "n": 10, "epsilon": "1/10", "alpha": "1/10", "z": 1}]},
                {"items": [{"kind": "ideal_decomposition", "N": 3, "k": 3}]},
                {"items": [{"kind": "alice_entropy", "N": 3, "k": 1, "sampler": "x"}]},
                {"items": [{"kind": "bob_entropy", "N": 3, "k": 1, "trials": -3}]}):
        with pytest.raises(ConfigError):
            validate_suite(bad)


def test_item_seeds_independent_of_workers():
    cfg = {"seed": 3, "items": [{"kind": "min_entropy_ideal", "n": 2, "epsilon": 0.5, "samples": 3}] * 3}
    a = run_experiment_suite({**cfg, "workers": 1})
    b = run_experiment_suite({**cfg, "workers": 3})
    assert dumps(a) == dumps(b)
    assert len({it["seed"] for it in a["items"]}) == 3


def test_empty_suite():
    res = run_experiment_suite({"items": []})
    assert res == {"seed": 0, "items": [], "all_satisfied": True}
    assert flatten_reports(res) == []


def test_default_suite_shape():
    cfg = default_suite()
    _, _, items = validate_suite(cfg)
    assert {it["kind"] for it in items} == {"symmetric_upper_bound", "ideal_decomposition",
                                           "min_entropy_ideal", "hoeffding", "alice_entropy", "bob_entropy"}
