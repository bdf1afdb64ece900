"""Min-entropy of ideal states and of both parties' outputs in randomness generation."""

from __future__ import annotations

import itertools
import math
from typing import Optional

import numpy as np

from ..idealball import ball_basis, radius_for, witness_reduction, random_ball_state
from ..qcore import DEFAULT_LIMITS, DimensionCeilingError, ReferenceState, binary_entropy, min_entropy
from ..symmetry import SymmetrySpec, sym_dim
from ..protocols.engine import accepted_channel
from ..protocols.randomness import (
    _validate,
    accepted_tables,
    bits,
    honest_alice_branches,
    randomness_branches,
    sample_runs,
)
from ..protocols.strategies import HonestProver, ProtocolParams, ProverStrategy, SamplerStrategy
from ..symmetry import interleave
from .decomposition import verify_ideal_decomposition
from .reports import BoundReport, ExperimentReport

TOL_ENTROPY = 1e-9
TOL_IDENTITY = 1e-12


def entropy_bound(n: int, epsilon: float) -> float:
    """``(1 - epsilon - h(epsilon)) n``."""
    return (1 - epsilon - binary_entropy(min(epsilon, 1.0))) * n


def _max_error_witnesses(n: int, r: int) -> list[tuple[str, np.ndarray]]:
    """Ball states with the least entropy on ``S^n``.

    ``|00>`` on ``r`` pairs and ``|Phi+>`` elsewhere leaves ``S`` pure on
    the error positions, so ``H_min = n - r``. Also included: the uniform
    superposition of all such patterns.
    """
    phi = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
    err = np.array([1, 0, 0, 0], dtype=complex)
    out = []
    patterns = list(itertools.combinations(range(n), r))
    total = np.zeros(4**n, dtype=complex)
    for e in patterns[:20]:
        v = np.ones(1, dtype=complex)
        for i in range(n):
            v = np.kron(v, err if i in e else phi)
        out.append((f"errors_at_{list(e)}", v))
        total += v
    out.append(("superposed_errors", total / np.linalg.norm(total)))
    return out


def verify_min_entropy_ideal(n: int, epsilon: float, samples: int = 50, seed: int = 0,
                             dim_r: int = 2) -> BoundReport:
    """Check ``H_min(S^n) >= (1 - epsilon - h(epsilon)) n`` on ball states around ``|Phi+>^n``.

    Haar-random states of ``C^dim_r (x)`` the ball are combined with the
    hand-made maximal-error states of :func:`_max_error_witnesses`.
    """
    if 4**n > DEFAULT_LIMITS.max_mixed_dim:
        raise DimensionCeilingError(f"4**{n} exceeds the ceiling {DEFAULT_LIMITS.max_mixed_dim}")
    ref = ReferenceState.epr()
    r = radius_for(epsilon, n)
    rng = np.random.default_rng([seed, 3])
    cases = [(f"haar_{i}", random_ball_state(n, r, ref, dim_r, rng)) for i in range(samples)]
    cases += _max_error_witnesses(n, r)
    worst_name, worst = None, math.inf
    for name, w in cases:
        h = min_entropy(witness_reduction(w, n, 2))
        if h < worst:
            worst_name, worst = name, h
    bound = entropy_bound(n, epsilon)
    return BoundReport.compare("min_entropy_ideal", bound, worst, TOL_ENTROPY, {
        "n": n, "epsilon": epsilon, "radius": r, "h_epsilon": binary_entropy(min(epsilon, 1.0)),
        "samples": samples, "seed": seed, "cases": len(cases), "worst_case": worst_name,
    })


def _key(x: Optional[int], width: int) -> str:
    return "-" if x is None else "".join(map(str, bits(x, width)))


def _empirical(params, bob, branches, trials, seed, who):
    rng = np.random.default_rng([seed, 4])
    runs = sample_runs(params, bob, branches, trials, rng)
    acc = [r for r in runs if r[2]["accepted"]]
    rate = len(acc) / trials
    values = [r[0] if who == "alice" else r[1] for r in acc]
    values = [v for v in values if v is not None]
    if not values:
        return rate, None
    _, counts = np.unique(np.array(values), axis=0, return_counts=True)
    return rate, float(-math.log2(counts.max() / len(values)))


def alice_entropy_experiment(params: ProtocolParams, bob: SamplerStrategy, alpha: float = 0.25,
                             trials: int = 2000, seed: int = 0, engine: str = "auto"):
    """Honest Alice against ``bob``: exact entropy accounting of ``X_A``.

    For every sample ``t`` with ``p_t > 0``:

    * ``alpha1 = 1 - H_min(X_A | T=t) / N`` from Alice's distribution over
      all ``N`` bits had she measured everything,
    * ``alpha2 = -log2 P(acc | t) / N``,
    * ``H_min(X_A^tbar | T=t, acc) >= (1 - alpha1 - alpha2 - beta) N``
      exactly, which implies ``(1 - 2 alpha - beta) N`` for
      ``alpha = max(alpha1, alpha2)``.

    The law of total probability is checked pointwise. For the given
    ``alpha`` the exception mass (samples with low entropy, and acceptance
    despite ``P(acc | t) < 2**(-alpha N)``) is compared with ``2 * 2**(-alpha
    N)`` and with the union bound ``(C(N, k) + 1) 2**(-alpha N)``.

    Returns ``(ExperimentReport, [BoundReport, ...])``.
    """
    _validate(params)
    N, n, k = params.N, params.n, params.k
    beta = params.beta
    if engine == "auto":
        engine = "quantum" if N <= 4 else "classical"
    if engine == "quantum":
        branches = randomness_branches(params, HonestProver(params.ref, N), bob)
    elif engine == "classical":
        branches = honest_alice_branches(params, bob)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    res = accepted_tables(params, bob, branches)
    total = np.zeros(2**N)
    rows = []
    for t in sorted(res.per_t):
        entry = res.per_t[t]
        p_t = entry["p_t"]
        if p_t <= 0:
            continue
        total += entry["alice_full"]
        h_t = min_entropy(entry["alice_full"] / p_t)
        acc_t = entry["accept"] / p_t
        row = {"t": list(t), "p_t": p_t, "accept": acc_t, "H_given_t": h_t,
               "alpha1": 1 - h_t / N}
        if acc_t > 0:
            marg: dict = {}
            for (xa, _), p in entry["joint"].items():
                marg[xa] = marg.get(xa, 0.0) + p
            h_acc = min_entropy(np.array(list(marg.values())) / entry["accept"])
            row["alpha2"] = -math.log2(acc_t) / N
            row["H_given_t_acc"] = h_acc
            row["bound_chain"] = (1 - row["alpha1"] - row["alpha2"] - beta) * N
            a = max(row["alpha1"], row["alpha2"])
            row["bound_max_alpha_form"] = (1 - 2 * a - beta) * N
        rows.append(row)
    identity_residual = float(np.abs(total - 2.0**-N).max())
    summed_form = sum(r["p_t"] * 2.0**-r["H_given_t"] for r in rows)
    scale = 2.0**(-alpha * N)
    mass = sum(r["p_t"] for r in rows if r["H_given_t"] <= (1 - alpha) * N + TOL_ENTROPY)
    mass += sum(r["p_t"] * r["accept"] for r in rows if 0 < r["accept"] < scale)
    union = (math.comb(N, k) + 1) * scale
    accepted_rows = [r for r in rows if r["accept"] > 0]
    ctx = {"N": N, "k": k, "beta": beta, "per_t": rows}
    reports = []
    if accepted_rows:
        worst = min(accepted_rows, key=lambda r: r["H_given_t_acc"] - r["bound_max_alpha_form"])
        reports.append(BoundReport.compare("alice_entropy", worst["bound_max_alpha_form"],
                                           worst["H_given_t_acc"], TOL_ENTROPY,
                                           {**ctx, "worst_t": worst["t"]}))
        worst = min(accepted_rows, key=lambda r: r["H_given_t_acc"] - r["bound_chain"])
        reports.append(BoundReport.compare("alice_entropy_chain", worst["bound_chain"],
                                           worst["H_given_t_acc"], TOL_ENTROPY,
                                           {"N": N, "k": k, "worst_t": worst["t"]}))
    reports.append(BoundReport.compare("alice_total_probability", identity_residual, 0.0, TOL_IDENTITY, {
        "N": N, "form": "max_x |sum_t p_t P(x|t) - 2^-N|",
        "summed_min_entropy_form": summed_form, "two_to_minus_N": 2.0**-N}))
    reports.append(BoundReport.compare("alice_exception_mass", mass, union, TOL_ENTROPY, {
        "N": N, "k": k, "alpha": alpha, "two_term_bound": 2 * scale,
        "two_term_bound_holds": bool(mass <= 2 * scale + TOL_ENTROPY)}))

    tables = {}
    if res.accept_probability > 0:
        marg = {}
        for (xa, _), p in res.joint.items():
            key = _key(xa, n)
            marg[key] = marg.get(key, 0.0) + p / res.accept_probability
        tables["X_A|acc"] = marg
    tables["T"] = {"".join(map(str, r["t"])): r["p_t"] for r in rows}
    rate, emp = _empirical(params, bob, branches, trials, seed, "alice") if trials else (res.accept_probability, None)
    exact = {"accept_probability": res.accept_probability,
             "H_min_X_A_given_acc": min_entropy(np.array(list(tables["X_A|acc"].values())))
             if "X_A|acc" in tables else None}
    return ExperimentReport(trials, rate, emp, tables, [seed], exact), reports


def bob_entropy_experiment(params: ProtocolParams, alice: ProverStrategy, epsilon: float = 0.25,
                           trials: int = 2000, seed: int = 0, samples: int = 16):
    """Honest Bob against ``alice``: min-entropy of ``X_B`` after acceptance.

    With ``c = C(N + 3, N)`` (recomputed independently of the symmetric
    subspace code) and ``alpha = log2(c / P_acc) / n`` the bound is
    ``(1 - epsilon - h(epsilon) - alpha) n``. The ideal part ``psi`` of the
    decomposition is also checked against ``(1 - epsilon - h(epsilon)) n``.

    Returns ``(ExperimentReport, [BoundReport, ...])``.
    """
    _validate(params)
    N, n = params.N, params.n
    accepted = accepted_channel(params, alice)
    p_acc = float(np.trace(accepted).real)
    if p_acc <= 1e-15:
        raise ValueError("Alice is never accepted; X_B is undefined")
    diag = np.clip(np.diag(accepted).real / p_acc, 0, None)
    h_xb = float(-math.log2(diag.max()))
    cert, sigma_norm, dom = verify_ideal_decomposition(params, alice, epsilon, samples=samples,
                                                       seed=seed, symmetrized=False)
    c_code = sym_dim(SymmetrySpec(N, 4))
    c = math.comb(N + 3, N)
    alpha = math.log2(c / p_acc) / n
    h_eps = binary_entropy(min(epsilon, 1.0))
    bound = (1 - epsilon - h_eps - alpha) * n
    psi = cert.psi_Sn
    psi_tr = float(np.trace(psi).real)
    ctx = {"N": N, "k": params.k, "n": n, "epsilon": epsilon, "h_epsilon": h_eps,
           "accept_probability": p_acc, "c": c, "c_matches_symmetric_dimension": c == c_code,
           "correction_log2_c_over_pacc": math.log2(c / p_acc), "alpha": alpha,
           "sigma_norm": sigma_norm, "sigma_norm_over_pacc": sigma_norm / p_acc,
           "dominance_satisfied": dom.satisfied}
    reports = [BoundReport.compare("bob_entropy", bound, h_xb, TOL_ENTROPY, ctx)]
    if psi_tr > 1e-14:
        reports.append(BoundReport.compare("bob_ideal_part_entropy", entropy_bound(n, epsilon),
                                           min_entropy(psi / psi_tr), TOL_ENTROPY,
                                           {"n": n, "epsilon": epsilon, "psi_trace": psi_tr}))
    reports.append(dom)
    table = {"".join(map(str, bits(x, n))): float(p) for x, p in enumerate(diag / diag.sum())}
    if trials:
        branches = randomness_branches(params, alice, SamplerStrategy())
        rate, emp = _empirical(params, SamplerStrategy(), branches, trials, seed, "bob")
    else:
        rate, emp = p_acc, None
    exact = {"accept_probability": p_acc, "H_min_X_B": h_xb}
    return ExperimentReport(trials, rate, emp, {"X_B|acc": table}, [seed], exact), reports
