"""Name-based construction of parameters and strategies from plain dictionaries."""

from __future__ import annotations

from typing import Any, Mapping, Optional

import numpy as np

from ..qcore import ReferenceState
from .strategies import (
    EPR_LOCC,
    PURIFICATION,
    FewErrorsEPRProver,
    FewErrorsProver,
    FilterSampler,
    HonestEPRProver,
    HonestProver,
    IIDEPRProver,
    IIDProver,
    JunkProver,
    ParameterError,
    ProtocolParams,
    RandomIsometryProver,
    RandomPOVMProver,
    RejectingProver,
    SamplerStrategy,
    bob_measure_then_choose,
    first_k_ones,
    theta_with_fidelity,
)

PROTOCOLS = (PURIFICATION, EPR_LOCC, "randomness_generation")


def _spec(spec) -> tuple[str, dict]:
    if spec is None:
        return "honest", {}
    if isinstance(spec, str):
        return spec, {}
    if isinstance(spec, Mapping) and "name" in spec:
        rest = {k: v for k, v in spec.items() if k != "name"}
        return str(spec["name"]), rest
    raise ParameterError(f"strategy must be a name or a mapping with 'name': {spec!r}")


def build_params(N: int, k: int, protocol: str = PURIFICATION) -> ProtocolParams:
    if protocol not in PROTOCOLS:
        raise ParameterError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    kind = EPR_LOCC if protocol == EPR_LOCC else PURIFICATION
    if isinstance(N, bool) or isinstance(k, bool) or int(N) != N or int(k) != k:
        raise ParameterError("N and k must be integers")
    return ProtocolParams(int(N), int(k), ReferenceState.epr(), kind)


def _unknown(name, kw, allowed):
    extra = set(kw) - set(allowed)
    if extra:
        raise ParameterError(f"strategy {name!r} got unknown options {sorted(extra)}")


PROVERS = {
    PURIFICATION: ("honest", "few_errors", "iid", "junk", "random_isometry", "rejecting"),
    EPR_LOCC: ("honest", "few_errors", "iid", "random_povm"),
}


def build_prover(spec: Any, params: ProtocolParams):
    """Prover from ``"name"`` or ``{"name": ..., options}``.

    Options: ``few_errors(errors=[0])``, ``iid(fidelity_sq=0.9)``,
    ``junk(state=[1, 0, 0, 0])``, ``random_isometry(seed, dim_r, dim_r_out)``,
    ``random_povm(seed, dim_r)``.
    """
    name, kw = _spec(spec)
    ref, N = params.ref, params.N
    if name not in PROVERS[params.protocol_kind]:
        raise ParameterError(
            f"unknown prover {name!r} for {params.protocol_kind}; "
            f"expected one of {PROVERS[params.protocol_kind]}")
    epr = params.protocol_kind == EPR_LOCC
    if name == "honest":
        _unknown(name, kw, ())
        return HonestEPRProver(N) if epr else HonestProver(ref, N)
    if name == "few_errors":
        _unknown(name, kw, ("errors",))
        errors = [int(i) for i in kw.get("errors", [0])]
        if any(not 0 <= i < N for i in errors):
            raise ParameterError(f"error positions {errors} outside [0, {N})")
        return FewErrorsEPRProver(N, errors) if epr else FewErrorsProver(ref, N, errors)
    if name == "iid":
        _unknown(name, kw, ("fidelity_sq",))
        f2 = float(kw.get("fidelity_sq", 0.9))
        if not 0.0 < f2 <= 1.0:
            raise ParameterError("fidelity_sq must lie in (0, 1]")
        theta = theta_with_fidelity(ref, f2)
        return IIDEPRProver(N, theta) if epr else IIDProver(ref, N, theta)
    if name == "junk":
        _unknown(name, kw, ("state",))
        state = np.asarray(kw.get("state", [1, 0, 0, 0]), dtype=complex)
        if state.shape != (params.d**2,) or not np.linalg.norm(state):
            raise ParameterError("junk state must be a nonzero pair vector")
        return JunkProver(ref, N, state)
    if name == "random_isometry":
        _unknown(name, kw, ("seed", "dim_r", "dim_r_out"))
        return RandomIsometryProver(int(kw.get("seed", 0)), int(kw.get("dim_r", 4)),
                                    int(kw.get("dim_r_out", 2)))
    if name == "random_povm":
        _unknown(name, kw, ("seed", "dim_r"))
        return RandomPOVMProver(int(kw.get("seed", 0)), int(kw.get("dim_r", 4)))
    _unknown(name, kw, ())
    return RejectingProver(ref, N)


SAMPLERS = ("honest", "measure_then_choose", "selective_abort")


def _all_zero(record) -> bool:
    return not any(record.x_b)


def build_sampler(spec: Optional[Any] = None) -> SamplerStrategy:
    """Sampler from a name.

    ``measure_then_choose`` measures ``B^N`` first and samples the first
    ``k`` ones of the outcome; ``selective_abort`` samples honestly but
    aborts unless ``X_B`` is all zeros.
    """
    name, kw = _spec(spec)
    _unknown(name, kw, ())
    if name == "honest":
        return SamplerStrategy()
    if name == "measure_then_choose":
        return bob_measure_then_choose(first_k_ones)
    if name == "selective_abort":
        return FilterSampler(_all_zero)
    raise ParameterError(f"unknown sampler {name!r}; expected one of {SAMPLERS}")
