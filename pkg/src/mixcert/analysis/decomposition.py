"""Upper bounds on the accepted state and its ideal-plus-remainder decomposition.

Two routes are computed:

* the symmetrized route bounds the symmetrized accepted state by the
  symmetrized adversary applied to the symmetric-subspace projector, then
  splits a Haar average of i.i.d. inputs into a good-fidelity part (close
  to the ball) and a bad part, estimated by Monte-Carlo;
* the direct route takes a purification of the accepted state, rotates its
  purifying register to maximize the weight inside ``R (x)`` the ball, and
  splits it into the ball component and a remainder.

The direct route gives the certificate for the unpermuted accepted state.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..idealball import HammingBall, IdealCertificate, radius_for, verify_ideal_certificate, witness_reduction
from ..opcalc import DominancePair, canonical_purification_matrix, construct_postselection_map
from ..qcore import fidelity_sq, haar_state, min_eig, reduce_matrix, reduce_vector, trace_norm
from ..symmetry import SymmetrySpec, sym_basis, sym_dim, symmetrize_matrix
from ..protocols.engine import (
    _checked_isometry,
    _checked_measurement,
    _move_factors,
    _prepared,
    accepted_channel,
    challenges,
    epr_projected,
    purification_branch,
)
from ..protocols.strategies import PURIFICATION, ProtocolParams, ProverStrategy, uhlmann_alignment
from ..protocols.symmetrized import SymmetrizedAdversary
from .certificates import certificate_residual, symmetrize_certificate, unpermute_ideal
from .reports import BoundReport

TOL_DOMINANCE = 1e-8


def _rows_interleave(m: np.ndarray, n: int, d: int) -> np.ndarray:
    """``(rows, P^n S^n)`` blocked to ``(rows, P0 S0 ...)``."""
    t = m.reshape([-1] + [d] * (2 * n))
    axes = [0] + [1 + x for i in range(n) for x in (i, n + i)]
    return t.transpose(axes).reshape(m.shape[0], -1)


def _rows_deinterleave(m: np.ndarray, n: int, d: int) -> np.ndarray:
    t = m.reshape([-1] + [d, d] * n)
    axes = [0] + [1 + 2 * i for i in range(n)] + [2 + 2 * i for i in range(n)]
    return t.transpose(axes).reshape(m.shape[0], -1)


def accepted_purification(params: ProtocolParams, prover: ProverStrategy) -> tuple[np.ndarray, bool]:
    """Matrix ``u`` of shape ``(X, d**n)`` with ``u.T @ u.conj()`` the accepted state.

    For the purification protocol the rows are indexed by ``(t, R')``; the
    flag is true when ``R'`` has the size of ``P^n`` (the prover kept one
    purifying register per unsampled position).
    """
    psi = _prepared(params, prover)
    ts = params.samples()
    weight = 1 / math.sqrt(len(ts))
    rows = []
    if params.protocol_kind == PURIFICATION:
        dim_r = prover.dim_r(params)
        for t in ts:
            u = _checked_isometry(params, prover, t, dim_r)
            rows.append(weight * purification_branch(params, psi, u, t))
        native = rows[0].shape[0] == params.d**params.n
        return np.concatenate(rows), native
    r_dims = prover.r_dims(params)
    for t in ts:
        for c in challenges(params.k):
            meas = _checked_measurement(params, prover, t, c)
            chi = _move_factors(epr_projected(params, psi, r_dims, t, c), r_dims, meas.factors)
            for x, e in enumerate(meas.elements):
                lam, vec = np.linalg.eigh((e + e.conj().T) / 2)
                g = vec * np.sqrt(np.clip(lam, 0, None))
                w = np.einsum("aj,ars->jrs", g.conj(), chi[x])
                rows.append(weight / math.sqrt(2**params.k) * w.reshape(-1, chi.shape[-1]))
    return np.concatenate(rows), False


def _seesaw(u: np.ndarray, v0: np.ndarray, dim_r: int, n: int, d: int, ball: HammingBall,
            iters: int = 200, tol: float = 1e-12):
    """Isometry ``V: X -> R (x) P^n`` locally maximizing the ball weight of ``(V (x) I) u``.

    The weight is a convex quadratic in ``V``, so each polar step of the
    linearization does not decrease it.
    """
    b = ball.basis
    v = v0
    last = -1.0
    for it in range(1, iters + 1):
        w = _rows_interleave((v @ u).reshape(dim_r * d**n, d**n).reshape(dim_r, -1), n, d)
        pw = (w.reshape(-1, b.shape[0]) @ b.conj()) @ b.T
        f = float(np.vdot(pw, pw).real)
        if f - last <= tol:
            break
        last = f
        grad = _rows_deinterleave(pw.reshape(dim_r, -1), n, d).reshape(dim_r * d**n, d**n) @ u.conj().T
        a, _, bh = np.linalg.svd(grad, full_matrices=False)
        v = a @ bh
    return v, f, it


def _witness(v: np.ndarray, u: np.ndarray, dim_r: int, n: int, d: int) -> np.ndarray:
    return _rows_interleave((v @ u).reshape(dim_r, -1), n, d).reshape(-1)


def ball_purification(params: ProtocolParams, prover: ProverStrategy, radius: int,
                      accepted: Optional[np.ndarray] = None) -> dict:
    """Purification of the accepted state with the largest ball weight found.

    Starts from the prover's own purifying register (when it has the shape
    of ``P^n``, or padded otherwise) and from the canonical square-root
    purification, improves both by see-saw and keeps the better one.
    """
    n, d = params.n, params.d
    ball = HammingBall(n, radius, params.ref.phi_PS)
    native_u, native = accepted_purification(params, prover)
    if accepted is None:
        accepted = native_u.T @ native_u.conj()
    starts = []
    x = native_u.shape[0]
    if native:
        starts.append(("native", native_u, x // d**n, np.eye(x, dtype=complex)))
    else:
        # only the row space matters: compress to rank r and pad with |0>_P^n
        _, s, bh = np.linalg.svd(native_u, full_matrices=False)
        keep = s > 1e-12 * max(float(s.max(initial=0.0)), 1e-300)
        u = s[keep, None] * bh[keep] if keep.any() else np.zeros((1, d**n), dtype=complex)
        r = u.shape[0]
        v0 = np.zeros((r * d**n, r), dtype=complex)
        v0[np.arange(r) * d**n, np.arange(r)] = 1
        starts.append(("native", u, r, v0))
    can = canonical_purification_matrix(accepted)
    starts.append(("canonical", can, 1, np.eye(d**n, dtype=complex)))
    best = None
    for label, u, dim_r, v0 in starts:
        v, f, iters = _seesaw(u, v0, dim_r, n, d, ball)
        if best is None or f > best["ball_weight"] + 1e-12:
            best = {"start": label, "u": u, "v": v, "dim_r": dim_r, "ball_weight": f, "iterations": iters}
    full = _witness(best["v"], best["u"], best["dim_r"], n, d)
    best["witness"] = full
    best["projected"] = ball.apply(full)
    best["accepted"] = accepted
    best["ball"] = ball
    return best


def _symmetrized_stage(params: ProtocolParams, prover: ProverStrategy, accepted: np.ndarray,
                       beta: float, radius: int, samples: int, rng: np.random.Generator,
                       c_scale: float = 1.0) -> dict:
    N, n, d = params.N, params.n, params.d
    spec = SymmetrySpec(N, d * d)
    c = sym_dim(spec)
    adv = SymmetrizedAdversary(params, prover)
    lhs = symmetrize_matrix(accepted, n, d)
    upper = np.zeros_like(accepted)
    for s in sym_basis(spec).T:
        upper = upper + sum(adv.apply(s).values())
    dominance = min_eig(c_scale * c * (upper / c) - lhs)
    phi = params.ref.phi_PS
    ball = HammingBall(n, radius, phi)
    dn = (d * d)**n
    tau = np.zeros((dn, dn), dtype=complex)
    bad_mass = np.zeros(samples)
    worst_iid = math.inf
    good = 0
    for i in range(samples):
        th = haar_state(d * d, rng)
        th_s = reduce_vector(th, (d, d), [1])
        vec = np.ones(1, dtype=complex)
        for _ in range(N):
            vec = np.kron(vec, th)
        out = sum(adv.apply(vec).values())
        if fidelity_sq(th_s, params.ref.phi_S) >= 1 - beta:
            good += 1
            big = np.ones((1, 1), dtype=complex)
            aligned = np.kron(uhlmann_alignment(th, phi, d), np.eye(d)) @ th
            al = np.ones(1, dtype=complex)
            for _ in range(n):
                big = np.kron(big, th_s)
                al = np.kron(al, aligned)
            worst_iid = min(worst_iid, min_eig(big - out))
            tau += np.outer(al, al.conj())
        else:
            bad_mass[i] = c * float(np.trace(out).real)
    tau /= max(samples, 1)
    b = ball.basis
    small = b.conj().T @ tau @ b
    lam, vec = np.linalg.eigh((small + small.conj().T) / 2)
    keep = lam > 1e-14
    witness = (vec[:, keep] * np.sqrt(lam[keep])).T @ b.T
    projected = b @ small @ b.conj().T
    psi = reduce_matrix(projected, [d] * (2 * n), [2 * i + 1 for i in range(n)])
    cert = IdealCertificate(psi, witness.reshape(-1), radius / n)
    cert_ok, cert_res, _ = certificate_residual(cert, params.ref)
    sigma = upper - c * psi
    return {
        "c": c,
        "symmetrized_accepted": lhs,
        "projector_bound": upper,
        "min_eig": dominance,
        "good_fraction": good / samples if samples else 0.0,
        "bad_mass_mean": float(bad_mass.mean()) if samples else 0.0,
        "bad_mass_stderr": float(bad_mass.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0,
        "iid_bound_min_eig": worst_iid if good else None,
        "psi_sym": psi,
        "psi_sym_certificate_ok": cert_ok,
        "psi_sym_certificate_residual": cert_res,
        "sigma_sym_norm": trace_norm(sigma),
    }


def verify_symmetric_upper_bound(params: ProtocolParams, prover: ProverStrategy, beta: float = 0.125,
                                 samples: int = 64, seed: int = 0, c_scale: float = 1.0) -> BoundReport:
    """Check ``(1/n!) sum_pi pi E(rho) pi^dagger <= c * E_bar(P_sym / c)``.

    The PSD check is exact; the Monte-Carlo part estimates the trace of the
    bad-fidelity region ``c * E[1_bad tr E_bar(theta^N)]`` (with standard
    error) and the worst violation of ``tr_Pi E_bar(theta^N) <= theta_S^n``
    over good samples. ``c_scale`` multiplies ``c`` (a value below one is a
    falsification control).
    """
    rng = np.random.default_rng([seed, 1])
    accepted = accepted_channel(params, prover)
    stage = _symmetrized_stage(params, prover, accepted, beta, radius_for(2 * beta, params.n),
                               samples, rng, c_scale)
    ctx = {
        "N": params.N, "k": params.k, "protocol": params.protocol_kind, "c": stage["c"],
        "c_scale": c_scale, "beta": beta, "samples": samples, "seed": seed,
        "accept_probability": float(np.trace(accepted).real),
        "good_fraction": stage["good_fraction"],
        "bad_region_trace": stage["bad_mass_mean"],
        "bad_region_stderr": stage["bad_mass_stderr"],
        "iid_bound_min_eig": stage["iid_bound_min_eig"],
        "sigma_sym_norm": stage["sigma_sym_norm"],
    }
    return BoundReport.psd("symmetric_upper_bound", stage["min_eig"], TOL_DOMINANCE, ctx)


def verify_ideal_decomposition(params: ProtocolParams, prover: ProverStrategy, epsilon: float,
                               samples: int = 32, seed: int = 0, c_scale: float = 1.0,
                               symmetrized: bool = True):
    """Decompose the accepted state as ``c * psi + sigma`` with ``psi`` ideal.

    ``psi = tr_{R P^n}(P u u^dagger P) / c`` for the ball projector ``P``
    (radius ``floor(epsilon * n)``) and the best purification ``u`` found;
    ``sigma = tr_{R P^n}(u u^dagger - P u u^dagger P)`` is computed from the
    witness, so the dominance check also tests that ``u`` purifies the
    accepted state. The certificate carries ``P u / sqrt(c)``.

    Returns ``(certificate, ||sigma||_1, report)``. The report's context
    holds the certificate check, a round trip through the constructed
    post-selection map, a round trip through symmetrize/unpermute and, with
    ``symmetrized``, a summary of the symmetrized route.
    """
    n, d, N = params.n, params.d, params.N
    radius = radius_for(epsilon, n)
    accepted = accepted_channel(params, prover)
    p_acc = float(np.trace(accepted).real)
    c = sym_dim(SymmetrySpec(N, d * d))
    best = ball_purification(params, prover, radius, accepted)
    wit, proj = best["witness"], best["projected"]
    full_red = witness_reduction(wit, n, d)
    ball_red = witness_reduction(proj, n, d)
    psi = ball_red / c
    sigma = full_red - ball_red
    cert = IdealCertificate(psi, proj / math.sqrt(c), epsilon)
    cert_ok, cert_res, cert_info = certificate_residual(cert, params.ref)
    lam = min_eig(c_scale * c * psi + sigma - accepted)
    sigma_norm = trace_norm(sigma)
    sig_eigs = np.linalg.eigvalsh((sigma + sigma.conj().T) / 2)

    ctx = {
        "N": N, "k": params.k, "n": n, "protocol": params.protocol_kind, "epsilon": epsilon,
        "radius": radius, "c": c, "c_scale": c_scale, "accept_probability": p_acc,
        "ball_weight": best["ball_weight"], "start": best["start"],
        "seesaw_iterations": best["iterations"], "sigma_norm": sigma_norm,
        "sigma_eig_range": [float(sig_eigs.min()), float(sig_eigs.max())],
        "psi_trace": float(np.trace(psi).real),
        "certificate_ok": cert_ok, "certificate_residual": cert_res,
        "purification_residual": float(np.abs(full_red - accepted).max()),
    }
    ctx["postselection_round_trip"] = _round_trip(accepted, best, c, psi, sigma, n, d)
    try:
        sym = symmetrize_certificate(cert, params.ref)
        back = unpermute_ideal(psi, sym, epsilon, params.ref)
        ctx["unpermute_round_trip_ok"] = bool(certificate_residual(back, params.ref)[0])
    except ValueError as exc:
        ctx["unpermute_round_trip_ok"] = False
        ctx["unpermute_error"] = str(exc)
    if symmetrized:
        rng = np.random.default_rng([seed, 2])
        stage = _symmetrized_stage(params, prover, accepted, epsilon / 2, radius, samples, rng)
        ctx["symmetrized"] = {
            "min_eig": stage["min_eig"], "sigma_sym_norm": stage["sigma_sym_norm"],
            "good_fraction": stage["good_fraction"], "bad_region_trace": stage["bad_mass_mean"],
            "bad_region_stderr": stage["bad_mass_stderr"],
            "psi_sym_certificate_ok": stage["psi_sym_certificate_ok"],
            "samples": samples, "seed": seed,
        }
    report = BoundReport.psd("ideal_decomposition", lam, TOL_DOMINANCE, ctx)
    return cert, sigma_norm, report


def _round_trip(accepted, best, c, psi, sigma, n, d) -> dict:
    """Rebuild the accepted purification from the ideal witness with the post-selection map."""
    plus_w, plus_v = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    sigma_plus = (plus_v * np.clip(plus_w, 0, None)) @ plus_v.conj().T
    target = c * psi + sigma_plus
    z = float(np.trace(target).real)
    if z <= 1e-14:
        return {"residual": 0.0, "state_residual": float(np.abs(accepted).max())}
    dim_s = d**n
    rho_purif = (best["v"] @ best["u"]).reshape(-1, dim_s)
    pw = best["projected"].reshape(best["dim_r"], -1)
    m_ball = _rows_deinterleave(pw, n, d).reshape(-1, dim_s)
    m_plus = canonical_purification_matrix(sigma_plus)
    stacked = np.concatenate([m_ball, m_plus]) / math.sqrt(z)
    try:
        a, info = construct_postselection_map(DominancePair(accepted, target / z, z), rho_purif, stacked)
    except ValueError as exc:
        return {"error": str(exc)}
    rebuilt = math.sqrt(z) * a @ stacked
    return {"residual": info["residual"],
            "state_residual": float(np.abs(rebuilt.T @ rebuilt.conj() - accepted).max()),
            "max_eig_AdagA": info["max_eig_AdagA"]}
