"""Declarative verification suites.

A suite config is a mapping::

    {"seed": 7, "workers": 4, "items": [{"kind": "ideal_decomposition", "N": 3, ...}, ...]}

Each item runs independently with its own seed (given, or derived from the
suite seed and the item's position), so results do not depend on
scheduling. Items run on a thread pool and come back in config order.
"""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Mapping

import numpy as np

from ..idealball import hoeffding_tail_check
from ..protocols.registry import build_params, build_prover, build_sampler
from .certificates import certificate_residual
from .decomposition import verify_ideal_decomposition, verify_symmetric_upper_bound
from .entropy import alice_entropy_experiment, bob_entropy_experiment, verify_min_entropy_ideal
from .reports import BoundReport


class ConfigError(ValueError):
    """Invalid suite or run configuration."""


_PROTOCOL = {"N": None, "k": None, "protocol": "purification"}

KINDS: dict[str, dict[str, Any]] = {
    "symmetric_upper_bound": {**_PROTOCOL, "prover": "honest", "beta": 0.125, "samples": 64,
                              "c_scale": 1.0},
    "ideal_decomposition": {**_PROTOCOL, "prover": "honest", "epsilon": 0.25, "samples": 32,
                            "c_scale": 1.0},
    "min_entropy_ideal": {"n": None, "epsilon": None, "samples": 50, "dim_r": 2},
    "alice_entropy": {"N": None, "k": None, "sampler": "honest", "alpha": 0.25, "trials": 2000,
                      "engine": "auto"},
    "bob_entropy": {"N": None, "k": None, "prover": "honest", "epsilon": 0.25, "trials": 2000,
                    "samples": 16},
    "hoeffding": {"n": None, "epsilon": None, "alpha": None},
}


def _normalize(item: Any, index: int) -> dict:
    if not isinstance(item, Mapping):
        raise ConfigError(f"item {index} is not a mapping")
    kind = item.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"item {index}: unknown kind {kind!r}; expected one of {sorted(KINDS)}")
    allowed = KINDS[kind]
    extra = set(item) - set(allowed) - {"kind", "seed"}
    if extra:
        raise ConfigError(f"item {index} ({kind}): unknown keys {sorted(extra)}")
    out = {"kind": kind}
    for key, default in allowed.items():
        if key in item:
            out[key] = copy.deepcopy(item[key])
        elif default is None:
            raise ConfigError(f"item {index} ({kind}): missing required key {key!r}")
        else:
            out[key] = default
    if "seed" in item:
        out["seed"] = item["seed"]
    for key in ("samples", "trials", "dim_r"):
        if key in out and (not isinstance(out[key], int) or isinstance(out[key], bool) or out[key] < 0):
            raise ConfigError(f"item {index} ({kind}): {key} must be a nonnegative integer")
    return out


def _item_seed(suite_seed: int, index: int, item: dict) -> int:
    if "seed" in item:
        seed = item["seed"]
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"item {index}: seed must be a nonnegative integer")
        return seed
    return int(np.random.SeedSequence([suite_seed, index]).generate_state(1, np.uint64)[0])


def _params(item):
    return build_params(item["N"], item["k"], item["protocol"] if "protocol" in item else "purification")


def _certificate_report(cert, params) -> BoundReport:
    ok, worst, info = certificate_residual(cert, params.ref)
    return BoundReport.compare("ideal_certificate", worst, 0.0, 1e-9, info)


def _run_symmetric(item, seed):
    p = _params(item)
    rep = verify_symmetric_upper_bound(p, build_prover(item["prover"], p), item["beta"],
                                       item["samples"], seed, float(item["c_scale"]))
    return [rep], None


def _run_decomposition(item, seed):
    p = _params(item)
    cert, _, rep = verify_ideal_decomposition(p, build_prover(item["prover"], p), float(item["epsilon"]),
                                              item["samples"], seed, float(item["c_scale"]))
    return [rep, _certificate_report(cert, p)], None


def _run_min_entropy(item, seed):
    return [verify_min_entropy_ideal(int(item["n"]), float(item["epsilon"]), item["samples"], seed,
                                     item["dim_r"])], None


def _run_alice(item, seed):
    p = build_params(item["N"], item["k"])
    ex, reps = alice_entropy_experiment(p, build_sampler(item["sampler"]), float(item["alpha"]),
                                        item["trials"], seed, item["engine"])
    return reps, ex


def _run_bob(item, seed):
    p = build_params(item["N"], item["k"])
    ex, reps = bob_entropy_experiment(p, build_prover(item["prover"], p), float(item["epsilon"]),
                                      item["trials"], seed, item["samples"])
    return reps, ex


def _run_hoeffding(item, seed):
    res = hoeffding_tail_check(int(item["n"]), str(item["epsilon"]), str(item["alpha"]))
    # lhs <= rhs reads: log upper tail <= -2 alpha^2 n
    rep = BoundReport.compare("hoeffding_tail", res["log_upper_tail"], res["log_hoeffding"], 0.0, res)
    return [rep], None


RUNNERS: dict[str, Callable] = {
    "symmetric_upper_bound": _run_symmetric,
    "ideal_decomposition": _run_decomposition,
    "min_entropy_ideal": _run_min_entropy,
    "alice_entropy": _run_alice,
    "bob_entropy": _run_bob,
    "hoeffding": _run_hoeffding,
}


def _prevalidate(item: dict, index: int) -> None:
    """Build parameters and strategies once so config errors surface before any run."""
    try:
        if "N" in item:
            p = _params(item) if item["kind"] in ("symmetric_upper_bound", "ideal_decomposition") \
                else build_params(item["N"], item["k"])
            if "prover" in item:
                build_prover(item["prover"], p)
        if "sampler" in item:
            build_sampler(item["sampler"])
    except ValueError as exc:
        raise ConfigError(f"item {index} ({item['kind']}): {exc}") from exc


def validate_suite(config: Any) -> tuple[int, int, list[dict]]:
    if not isinstance(config, Mapping):
        raise ConfigError("suite config must be a mapping")
    extra = set(config) - {"seed", "workers", "items"}
    if extra:
        raise ConfigError(f"unknown suite keys {sorted(extra)}")
    seed = config.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("suite seed must be a 64-bit nonnegative integer")
    workers = config.get("workers", 4)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be a positive integer")
    items = config.get("items", [])
    if not isinstance(items, list):
        raise ConfigError("items must be a list")
    norm = [_normalize(it, i) for i, it in enumerate(items)]
    for i, it in enumerate(norm):
        _prevalidate(it, i)
        it["seed"] = _item_seed(seed, i, it)
    return seed, workers, norm


def run_experiment_suite(config: Mapping) -> dict:
    """Run every item; returns ``{"seed", "items": [...], "all_satisfied"}``.

    Each entry of ``items`` holds the normalized item config, its seed, the
    serialized reports and, for entropy experiments, the experiment report.
    """
    seed, workers, items = validate_suite(config)

    def run(item):
        reports, ex = RUNNERS[item["kind"]](item, item["seed"])
        return {"kind": item["kind"], "config": item, "seed": item["seed"],
                "reports": [r.to_dict() for r in reports],
                "experiment": None if ex is None else ex.to_dict()}

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, items))
    for i, res in enumerate(results):
        res["index"] = i
    ok = all(r["satisfied"] for res in results for r in res["reports"])
    return {"seed": seed, "items": results, "all_satisfied": ok}


def flatten_reports(result: dict) -> list[dict]:
    rows = []
    for res in result["items"]:
        for r in res["reports"]:
            rows.append({"item": res["index"], "kind": res["kind"], **r})
    return rows


def default_suite(seed: int = 20240601, workers: int = 4) -> dict:
    """Desk-scale suite over the default grids (epsilon in {1/6, 1/4}, alpha in {1/8, 1/4}, beta in {1/4, 1/2})."""
    items: list[dict] = [
        {"kind": "symmetric_upper_bound", "N": 2, "k": 1, "prover": "honest"},
        {"kind": "symmetric_upper_bound", "N": 3, "k": 1, "prover": {"name": "iid", "fidelity_sq": 0.9}},
        {"kind": "symmetric_upper_bound", "N": 3, "k": 1, "prover": "rejecting"},
        {"kind": "symmetric_upper_bound", "N": 3, "k": 1, "protocol": "epr_locc", "prover": "honest"},
        {"kind": "ideal_decomposition", "N": 3, "k": 1, "prover": "honest", "epsilon": 0.25},
        {"kind": "ideal_decomposition", "N": 3, "k": 1, "prover": {"name": "few_errors", "errors": [1]},
         "epsilon": 0.5},
        {"kind": "ideal_decomposition", "N": 4, "k": 2, "prover": {"name": "iid", "fidelity_sq": 1 - 0.25 / 4},
         "epsilon": 0.25},
        {"kind": "ideal_decomposition", "N": 4, "k": 1, "protocol": "epr_locc",
         "prover": {"name": "iid", "fidelity_sq": 1 - 1 / 24}, "epsilon": 1 / 6},
        {"kind": "min_entropy_ideal", "n": 4, "epsilon": 0.25},
        {"kind": "min_entropy_ideal", "n": 6, "epsilon": 1 / 6},
        {"kind": "hoeffding", "n": 100, "epsilon": "1/10", "alpha": "1/10"},
        {"kind": "hoeffding", "n": 1000, "epsilon": "1/4", "alpha": "1/8"},
    ]
    for k in (1, 2):
        for sampler in ("honest", "measure_then_choose", "selective_abort"):
            for alpha in (0.125, 0.25):
                items.append({"kind": "alice_entropy", "N": 4, "k": k, "sampler": sampler, "alpha": alpha,
                              "trials": 1000})
    for prover in ("honest", {"name": "few_errors", "errors": [1]}, {"name": "iid", "fidelity_sq": 0.99}):
        for eps in (1 / 6, 0.25):
            items.append({"kind": "bob_entropy", "N": 4, "k": 2, "prover": prover, "epsilon": eps,
                          "trials": 1000})
    return {"seed": seed, "workers": workers, "items": items}
