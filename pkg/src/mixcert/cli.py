"""Command-line front end: ``mixcert simulate | verify | bounds``.

Exit codes: 0 success, 1 a verified bound is violated, 2 configuration
error, 3 a state would exceed the dimension ceiling.

Randomness comes from numpy's ``default_rng`` (PCG64) seeded with the
configured 64-bit seed, which is recorded in every output file. Floats in
output files are rounded to 10 significant digits, so repeated runs with
the same config and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Optional, Sequence

import numpy as np

from .analysis import ConfigError, default_suite, dumps, flatten_reports, reports_csv, run_experiment_suite
from .analysis.reports import clean
from .idealball import binomial_log_tails
from .qcore import DimensionCeilingError, binary_entropy, min_entropy
from .protocols.engine import acceptance_frequency, run_sampling
from .protocols.randomness import accepted_tables, bits, randomness_branches, sample_runs
from .protocols.registry import PROTOCOLS, build_params, build_prover, build_sampler

EXIT_OK, EXIT_VIOLATED, EXIT_CONFIG, EXIT_CEILING = 0, 1, 2, 3

RUN_KEYS = {"protocol", "N", "k", "mode", "trials", "prover", "sampler", "seed",
            "epsilon", "alpha", "beta", "output", "dump_matrices"}


def _load_json(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _write(path: Optional[str], text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _print_table(rows: Sequence[tuple[str, Any]]) -> None:
    width = max((len(k) for k, _ in rows), default=0)
    for key, value in rows:
        print(f"{key.ljust(width)}  {clean(value)}")


def _int(value, name, lo=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if lo is not None and value < lo:
        raise ConfigError(f"{name} must be at least {lo}")
    return value


# ---------------------------------------------------------------------------
# simulate


def run_config(args: argparse.Namespace) -> dict:
    """Merge a JSON config with command-line overrides into a validated run config."""
    cfg = _load_json(args.config)
    extra = set(cfg) - RUN_KEYS
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    cfg.setdefault("output", {})
    for key in ("protocol", "N", "k", "mode", "trials", "seed", "sampler"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.prover is not None:
        cfg["prover"] = {"name": args.prover, **(json.loads(args.prover_options) if args.prover_options else {})}
    if args.out_json:
        cfg["output"]["json"] = args.out_json
    if args.out_csv:
        cfg["output"]["csv"] = args.out_csv
    if args.no_matrices:
        cfg["dump_matrices"] = False
    cfg.setdefault("protocol", "purification")
    cfg.setdefault("mode", "exact")
    cfg.setdefault("trials", 1)
    cfg.setdefault("seed", 0)
    cfg.setdefault("prover", "honest")
    cfg.setdefault("sampler", "honest")
    cfg.setdefault("dump_matrices", True)
    if cfg["protocol"] not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}")
    if cfg["mode"] not in ("exact", "trajectory"):
        raise ConfigError("mode must be 'exact' or 'trajectory'")
    for key in ("N", "k"):
        if key not in cfg:
            raise ConfigError(f"missing required setting {key!r}")
        _int(cfg[key], key)
    _int(cfg["trials"], "trials", 1)
    seed = _int(cfg["seed"], "seed", 0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits")
    return cfg


def _simulate_sampling(cfg, params) -> tuple[list, dict, str]:
    prover = build_prover(cfg["prover"], params)
    seed = cfg["seed"]
    if cfg["mode"] == "exact":
        tr = run_sampling(params, prover, mode="exact", seed=seed)
        summary = [("protocol", cfg["protocol"]), ("N", params.N), ("k", params.k),
                   ("mode", "exact"), ("acceptance", tr.accept_probability)]
        body = {"transcript": tr.to_dict(cfg["dump_matrices"])}
        rows = [{"t": t, "accept_probability": p}
                for t, p in body["transcript"]["branch_probabilities"].items()]
    else:
        rate, se = acceptance_frequency(params, prover, cfg["trials"], seed)
        first = run_sampling(params, prover, mode="trajectory", seed=seed)
        summary = [("protocol", cfg["protocol"]), ("N", params.N), ("k", params.k),
                   ("mode", "trajectory"), ("trials", cfg["trials"]), ("acceptance", rate),
                   ("stderr", se)]
        body = {"acceptance_rate": rate, "stderr": se,
                "first_transcript": first.to_dict(cfg["dump_matrices"])}
        rows = [{"trials": cfg["trials"], "acceptance_rate": rate, "stderr": se}]
    return summary, body, _csv(rows)


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = list(rows[0]) if rows else []
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(clean(v)) if isinstance(v, (list, dict)) else clean(v) for k, v in r.items()})
    return buf.getvalue()


def _simulate_randomness(cfg, params) -> tuple[list, dict, str]:
    alice = build_prover(cfg["prover"], params)
    bob = build_sampler(cfg["sampler"])
    n = params.n
    branches = randomness_branches(params, alice, bob)
    if cfg["mode"] == "exact":
        res = accepted_tables(params, bob, branches)
        acc = res.accept_probability
        summary = [("protocol", "randomness_generation"), ("N", params.N), ("k", params.k),
                   ("mode", "exact"), ("acceptance", acc)]
        joint = {f"{'-' if xa is None else ''.join(map(str, bits(xa, n)))},"
                 f"{''.join(map(str, bits(xb, n)))}": p for (xa, xb), p in sorted(
                     res.joint.items(), key=lambda kv: (-1 if kv[0][0] is None else kv[0][0], kv[0][1]))}
        body = {"accept_probability": acc, "joint_accepted": joint}
        if acc > 0:
            agree = sum(p for (xa, xb), p in res.joint.items() if xa == xb) / acc
            pa, pb = {}, {}
            for (xa, xb), p in res.joint.items():
                pa[xa] = pa.get(xa, 0.0) + p / acc
                pb[xb] = pb.get(xb, 0.0) + p / acc
            hb = min_entropy(np.array(list(pb.values())))
            ha = None if None in pa else min_entropy(np.array(list(pa.values())))
            summary += [("P(X_A = X_B | acc)", agree), ("H_min(X_A | acc)", ha), ("H_min(X_B | acc)", hb)]
            body.update({"agreement": agree, "H_min_X_A": ha, "H_min_X_B": hb})
        rows = [{"x_a,x_b": k, "probability": v} for k, v in joint.items()]
    else:
        rng = np.random.default_rng(cfg["seed"])
        runs = sample_runs(params, bob, branches, cfg["trials"], rng)
        acc = [r for r in runs if r[2]["accepted"]]
        agree = sum(1 for r in acc if r[0] == r[1])
        summary = [("protocol", "randomness_generation"), ("N", params.N), ("k", params.k),
                   ("mode", "trajectory"), ("trials", cfg["trials"]),
                   ("acceptance", len(acc) / len(runs)),
                   ("X_A = X_B (accepted runs)", f"{agree}/{len(acc)}")]
        rows = [{"trial": i, "accepted": r[2]["accepted"], "t": r[2]["t"], "y": r[2]["y"],
                 "test_passed": r[2]["test_passed"],
                 "x_a": None if r[0] is None else "".join(map(str, r[0])),
                 "x_b": None if r[1] is None else "".join(map(str, r[1]))} for i, r in enumerate(runs)]
        body = {"acceptance_rate": len(acc) / len(runs), "agreements": agree, "accepted": len(acc),
                "runs": rows}
    return summary, body, _csv(rows)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    params = build_params(cfg["N"], cfg["k"], cfg["protocol"])
    if cfg["protocol"] == "randomness_generation":
        summary, body, csv_text = _simulate_randomness(cfg, params)
    else:
        summary, body, csv_text = _simulate_sampling(cfg, params)
    _print_table(summary + [("seed", cfg["seed"])])
    _write(cfg["output"].get("json"), dumps({"config": cfg, "seed": cfg["seed"], **body}))
    _write(cfg["output"].get("csv"), csv_text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    config = _load_json(args.config) if args.config else default_suite()
    if args.seed is not None:
        config["seed"] = args.seed
    if args.workers is not None:
        config["workers"] = args.workers
    if args.c_scale is not None:
        for item in config.get("items", []):
            if isinstance(item, dict) and item.get("kind") in ("symmetric_upper_bound", "ideal_decomposition"):
                item["c_scale"] = args.c_scale
    result = run_experiment_suite(config)
    rows = flatten_reports(result)
    for row in rows:
        mark = "ok  " if row["satisfied"] else "FAIL"
        print(f"{mark} item {row['item']:>3} {row['name']:<28} lhs={clean(row['lhs'])} rhs={clean(row['rhs'])}")
    failed = [r for r in rows if not r["satisfied"]]
    for r in failed:
        print("violated:", json.dumps(clean(r), sort_keys=True))
    print(f"{len(rows) - len(failed)}/{len(rows)} bounds satisfied (seed {result['seed']})")
    _write(args.out_json, dumps(result))
    _write(args.out_csv, reports_csv(rows))
    return EXIT_OK if not failed else EXIT_VIOLATED


# ---------------------------------------------------------------------------
# bounds


def bounds_table(ns: Sequence[int], Ns: Sequence[int], ks: Sequence[int], eps: Sequence[float],
                 alphas: Sequence[float], d: int = 2) -> list[dict]:
    """Closed-form bound values over the requested grid."""
    rows = []
    for n in ns:
        for e in eps:
            for a in alphas:
                r = math.floor((e + a) * n + 1e-12)
                lo, _ = binomial_log_tails(n, e, r)
                rows.append({"quantity": "hoeffding_tail", "n": n, "epsilon": e, "alpha": a,
                             "value": 1 - math.exp(-2 * a * a * n), "reference": math.exp(lo)})
    for N in Ns:
        rows.append({"quantity": "sym_dim_c", "N": N, "d": d, "value": math.comb(N + d * d - 1, N)})
    for k in ks:
        for e in eps:
            rows.append({"quantity": "iid_soundness", "k": k, "epsilon": e, "value": (1 - e)**k})
    for n in ns:
        for e in eps:
            rows.append({"quantity": "ideal_entropy", "n": n, "epsilon": e,
                         "value": (1 - e - binary_entropy(min(e, 1.0))) * n})
    return rows


BOUND_FIELDS = ("quantity", "N", "n", "k", "d", "epsilon", "alpha", "value", "reference")


def cmd_bounds(args: argparse.Namespace) -> int:
    rows = bounds_table(args.n, args.N, args.k, args.epsilon, args.alpha, args.d)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BOUND_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: clean(v) for k, v in r.items()})
    text = buf.getvalue()
    print(text, end="")
    _write(args.out_csv, text)
    _write(args.out_json, dumps({"rows": rows}))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixcert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a sampling or randomness-generation protocol")
    sim.add_argument("--config", help="JSON run config; flags below override it")
    sim.add_argument("--protocol", choices=PROTOCOLS)
    sim.add_argument("--N", type=int)
    sim.add_argument("--k", type=int)
    sim.add_argument("--mode", choices=("exact", "trajectory"))
    sim.add_argument("--trials", type=int)
    sim.add_argument("--prover", help="prover (or Alice) strategy name")
    sim.add_argument("--prover-options", help="JSON object of prover options")
    sim.add_argument("--sampler", help="sampler (Bob) strategy name for randomness generation")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out-json")
    sim.add_argument("--out-csv")
    sim.add_argument("--no-matrices", action="store_true", help="omit accepted-state dumps")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run a verification suite (default: the desk-scale suite)")
    ver.add_argument("--config", help="JSON suite config")
    ver.add_argument("--seed", type=int)
    ver.add_argument("--workers", type=int)
    ver.add_argument("--c-scale", type=float, help="multiply the symmetric-subspace constant (falsification)")
    ver.add_argument("--out-json")
    ver.add_argument("--out-csv")
    ver.set_defaults(func=cmd_verify)

    bnd = sub.add_parser("bounds", help="tabulate closed-form bound values")
    bnd.add_argument("--n", type=int, nargs="+", default=[100])
    bnd.add_argument("--N", type=int, nargs="+", default=[4])
    bnd.add_argument("--k", type=int, nargs="+", default=[2])
    bnd.add_argument("--epsilon", type=float, nargs="+", default=[0.1])
    bnd.add_argument("--alpha", type=float, nargs="+", default=[0.1])
    bnd.add_argument("--d", type=int, default=2)
    bnd.add_argument("--out-json")
    bnd.add_argument("--out-csv")
    bnd.set_defaults(func=cmd_bounds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DimensionCeilingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CEILING
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
