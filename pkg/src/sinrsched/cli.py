"""Command-line front end.

Exit codes: 0 success, 2 parameter or input error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import harness
from .conflict import ConflictParams, GraphTooLarge, build_graph, exact_chromatic, exact_mwis
from .formats import dumps, instance_to_dict, load_instance
from .model import Instance, InstanceError
from .schedulers import (
    ProbSequence,
    TooLarge,
    VerificationError,
    calibrate_gamma,
    exact_capacity,
    exact_min_schedule,
    first_fit,
    length_class_schedule,
    randomized_schedule,
    reverify,
    schedule_conflict,
    wcapacity_conflict,
)
from .sinr import PowerScheme, check_feasible, exists_power, spectral_feasible

EXIT_PARAM = 2
EXIT_VERIFY = 3


def default_cache() -> Path:
    root = os.environ.get("XDG_CACHE_HOME") or str(Path.home() / ".cache")
    return Path(root) / "sinrsched" / "gamma.json"


def cache_key(alpha, m, delta, tau, beta) -> str:
    return f"alpha={alpha:g},m={m:g},delta={delta:g},tau={tau:g},beta={beta:g}"


def cached_gamma(alpha, m, delta, tau, beta, trials=200, seed=0, cache: Path | None = None,
                 refresh: bool = False) -> float:
    """Calibrated gamma, read from or written to a JSON cache file."""
    cache = cache or default_cache()
    key = cache_key(alpha, m, delta, tau, beta)
    table = {}
    if cache.exists():
        try:
            table = json.loads(cache.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            table = {}
    if not refresh and key in table:
        return float(table[key]["gamma"])
    gamma = calibrate_gamma(alpha, m, delta, tau, trials, seed, beta)
    table[key] = {"gamma": gamma, "trials": trials, "seed": seed}
    cache.parent.mkdir(parents=True, exist_ok=True)
    cache.write_text(json.dumps(table, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return gamma


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(args) -> Instance:
    inst = load_instance(args.file)
    return inst.with_params(alpha=args.alpha, beta=args.beta, noise=args.noise)


def _link_list(text: str | None, n: int) -> list[int]:
    if not text:
        return list(range(n))
    return [int(x) for x in text.split(",") if x.strip()]


def _probs(text: str, cap: int) -> ProbSequence:
    kind, _, val = text.partition(":")
    if kind == "custom":
        return ProbSequence("custom", tuple(float(v) for v in val.split(",")), cap)
    return ProbSequence(kind, float(val) if val else (0.5 if kind == "constant" else 1.0), cap)


def _tau(args) -> float:
    """Power exponent for the conflict-graph algorithms (default 0.8)."""
    return 0.8 if args.tau is None else args.tau


def _gamma(args, inst: Instance) -> float:
    if args.gamma not in (None, "auto"):
        return float(args.gamma)
    m = args.m if args.m is not None else inst.dim
    if m is None:
        raise InstanceError("--m is required for explicit metrics")
    cache = Path(args.cache) if args.cache else None
    return cached_gamma(inst.params.alpha, m, args.delta, _tau(args), inst.params.beta, cache=cache)


# --- subcommands ----------------------------------------------------------------------


def cmd_generate(args) -> int:
    params = {k: v for k, v in vars(args).items() if k in GEN_KEYS and v is not None}
    if args.family == "random":
        params.setdefault("n", 10)
        params["seed"] = args.seed
        if args.weights and args.weights != "unit":
            kind, a, b = args.weights.split(":")
            params["weights"] = (kind, float(a), float(b))
        params.pop("delta", None)
    for key in ("alpha", "beta", "noise"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    inst = harness.generate(args.family, params)
    _emit(dumps(instance_to_dict(inst)), args.out)
    return 0


GEN_KEYS = {"n", "dim", "side", "lmin", "lmax", "k", "delta", "x", "levels", "b", "M", "fanout",
            "t", "q", "K", "gamma_m", "input", "p_max", "tau"}


def cmd_schedule(args) -> int:
    inst = _load(args)
    alg = args.algorithm
    if alg == "exact":
        k = exact_min_schedule(inst, args.power_mode, args.tau or 0.0)
        print(f"slots={k} verified=true flags=[]")
        return 0
    if alg == "conflict":
        sched = schedule_conflict(inst, _gamma(args, inst), args.delta, _tau(args), args.m)
    elif alg == "first-fit":
        sched = first_fit(inst, args.tau or 0.0)
    elif alg == "length-class":
        sched = length_class_schedule(inst, args.tau or 0.0)
    else:
        sched = randomized_schedule(inst, args.tau or 0.0, _probs(args.probs, args.cap), args.seed)
    ok = reverify(inst, sched)
    if args.out:
        Path(args.out).write_text(dumps(sched.to_dict()), encoding="utf-8")
    count = sched.rounds if alg == "randomized" else sched.size
    print(f"slots={count} verified={'true' if ok else 'false'} flags=[{','.join(sched.flags)}]")
    return 0 if ok else EXIT_VERIFY


def cmd_capacity(args) -> int:
    inst = _load(args)
    if args.exact:
        links, weight = exact_capacity(inst, args.power_mode, args.tau or 0.0)
        doc = {"algorithm": "exact-capacity", "links": links, "weight": weight, "verified": True, "flags": []}
    else:
        res = wcapacity_conflict(inst, _gamma(args, inst), args.delta, _tau(args), args.m)
        doc = res.to_dict()
    if args.out:
        Path(args.out).write_text(dumps(doc), encoding="utf-8")
    print(f"links={len(doc['links'])} weight={doc['weight']:.6g} verified=true flags=[{','.join(doc['flags'])}]")
    return 0


def cmd_feasible(args) -> int:
    inst = _load(args)
    ids = _link_list(args.links, inst.n)
    if args.powers:
        P = np.asarray(json.loads(Path(args.powers).read_text(encoding="utf-8")), dtype=np.float64)
    else:
        P = PowerScheme(args.tau or 0.0)
    rep = check_feasible(inst, ids, P, args.p, args.mode)
    _emit(dumps(rep.to_dict()), args.out)
    return 0


def cmd_oracle(args) -> int:
    inst = _load(args)
    kind = args.kind
    if kind == "min-schedule":
        doc = {"min_slots": exact_min_schedule(inst, args.power_mode, args.tau or 0.0)}
    elif kind == "exists-power":
        ids = _link_list(args.links, inst.n)
        res = exists_power(inst, ids, args.mode)
        doc = {"feasible": res.feasible, "method": res.method, "iterations": res.iterations,
               "powers": None if res.powers is None else res.powers.tolist()}
        if inst.params.noise == 0:
            doc["spectral"] = spectral_feasible(inst, ids)
    elif kind in ("chromatic", "mwis"):
        graph = build_graph(inst, ConflictParams(_gamma(args, inst), args.delta))
        if kind == "chromatic":
            doc = {"chromatic": exact_chromatic(graph)}
        else:
            res = exact_mwis(graph, inst.weights)
            doc = {"links": res.vertices, "weight": res.weight}
    else:
        raise ValueError(f"unknown oracle {kind!r}")
    _emit(dumps(doc), args.out)
    return 0


def cmd_calibrate(args) -> int:
    m = args.m if args.m is not None else 2
    alpha = args.alpha if args.alpha is not None else 3.0
    beta = args.beta if args.beta is not None else 1.0
    cache = Path(args.cache) if args.cache else None
    gamma = cached_gamma(alpha, m, args.delta, args.tau, beta, args.trials, args.seed, cache, args.recalibrate)
    print(f"gamma={gamma:g}")
    return 0


def cmd_experiment(args) -> int:
    target = harness.cmd_experiment(args.config, args.out, args.parallelism)
    print(f"wrote {target}")
    return 0


# --- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=float, help="path-loss exponent")
    common.add_argument("--beta", type=float, help="SINR threshold")
    common.add_argument("--noise", type=float, help="ambient noise N")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (stdout when omitted)")

    conflict = argparse.ArgumentParser(add_help=False)
    conflict.add_argument("--gamma", default="auto", help="separation constant, or 'auto' to calibrate")
    conflict.add_argument("--delta", type=float, default=0.9)
    conflict.add_argument("--tau", type=float, help="power exponent (conflict default 0.8, baselines 0)")
    conflict.add_argument("--m", type=float, help="doubling dimension (defaults to the euclidean dimension)")
    conflict.add_argument("--cache", help="calibration cache file")
    conflict.add_argument("--power-mode", choices=["fixed", "optimal"], default="optimal")

    parser = argparse.ArgumentParser(prog="sinrsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a generated instance")
    g.add_argument("family", choices=["random", "firstfit-tree", "randomized-tree", "weighted-plane",
                                      "general-metric", "weak"])
    for name, typ in [("n", int), ("dim", int), ("side", float), ("lmin", float), ("lmax", float),
                      ("k", int), ("delta", float), ("x", float), ("levels", int), ("b", float),
                      ("M", int), ("fanout", int), ("t", int), ("q", int), ("K", int),
                      ("gamma-m", float), ("p-max", float), ("tau", float)]:
        g.add_argument(f"--{name}", type=typ, dest=name.replace("-", "_"))
    g.add_argument("--weights", default="unit", help="unit or uniform:a:b")
    g.add_argument("--input", help="source instance for the weak-link transform")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("schedule", parents=[common, conflict], help="schedule an instance file")
    s.add_argument("file")
    s.add_argument("--algorithm", choices=["conflict", "first-fit", "length-class", "randomized", "exact"],
                   default="conflict")
    s.add_argument("--probs", default="constant:0.5", help="constant:p, harmonic:c or custom:p1,p2,...")
    s.add_argument("--cap", type=int, default=1000)
    s.set_defaults(func=cmd_schedule)

    c = sub.add_parser("capacity", parents=[common, conflict], help="maximum-weight feasible subset")
    c.add_argument("file")
    c.add_argument("--exact", action="store_true", help="exhaustive search (small instances)")
    c.set_defaults(func=cmd_capacity)

    f = sub.add_parser("feasible", parents=[common], help="feasibility report for a link set")
    f.add_argument("file")
    f.add_argument("--links", help="comma-separated link ids (default: all)")
    f.add_argument("--tau", type=float, help="oblivious power exponent (default 0)")
    f.add_argument("--powers", help="JSON list of per-link powers")
    f.add_argument("--p", type=float, help="threshold p (default beta)")
    f.add_argument("--mode", choices=["normalized", "exact"], default="normalized")
    f.set_defaults(func=cmd_feasible)

    o = sub.add_parser("oracle", parents=[common, conflict], help="exact oracles for small instances")
    o.add_argument("file")
    o.add_argument("--kind", choices=["min-schedule", "exists-power", "chromatic", "mwis"], required=True)
    o.add_argument("--links")
    o.add_argument("--mode", choices=["normalized", "exact"], default="normalized")
    o.set_defaults(func=cmd_oracle)

    k = sub.add_parser("calibrate", parents=[common], help="calibrate gamma for (alpha, m, delta, tau)")
    k.add_argument("--m", type=float)
    k.add_argument("--delta", type=float, required=True)
    k.add_argument("--tau", type=float, required=True)
    k.add_argument("--trials", type=int, default=200)
    k.add_argument("--cache")
    k.add_argument("--recalibrate", action="store_true")
    k.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment config")
    e.add_argument("config")
    e.add_argument("--parallelism", type=int)
    e.set_defaults(func=cmd_experiment)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    warnings.showwarning = _show_warning
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARAM if exc.code else 0
    try:
        return args.func(args)
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, TypeError, KeyError, InstanceError, TooLarge, GraphTooLarge, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
