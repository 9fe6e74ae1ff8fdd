"""Experiment orchestration: instances x algorithms x parameter grids x seeds -> CSV rows.

A config is a JSON object::

    {"instances": [{"id": "lk6", "generator": "firstfit-tree", "params": {"k": 6}},
                   {"id": "mine", "file": "inst.json"}],
     "algorithms": [{"name": "first-fit", "grid": {"tau": [0.0]}},
                    {"name": "conflict", "grid": {"gamma": ["auto"], "delta": [0.9], "tau": [0.8]}}],
     "seeds": [0],
     "parallelism": 1,
     "output": "results.csv",
     "timing": false}

Rows are sorted before they are written, so the file does not depend on the
parallelism degree.  Wall times are only recorded when ``timing`` is on, since
they would otherwise break byte-for-byte reproducibility.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .formats import load_instance
from .generators import (
    RandomConfig,
    WeakLinkConfig,
    gen_firstfit_tree,
    gen_general_metric,
    gen_random,
    gen_randomized_tree,
    gen_weighted_plane,
    weaken,
)
from .model import Instance, SinrParams, delta
from .schedulers import (
    ProbSequence,
    VerificationError,
    calibrate_gamma,
    exact_min_schedule,
    first_fit,
    length_class_schedule,
    randomized_schedule,
    reverify,
    schedule_conflict,
    wcapacity_conflict,
)

HEADER = ["instance", "n", "delta", "algorithm", "params", "slots", "weight", "verified", "flags", "ms", "seed"]
ALGORITHMS = ("conflict", "wcapacity", "first-fit", "length-class", "randomized", "exact")


def fmt(x: float) -> str:
    return f"{x:.6g}"


def generate(family: str, params: dict) -> Instance:
    """Build an instance from a generator name and keyword parameters."""
    p = dict(params)
    sinr = {k: p.pop(k) for k in ("alpha", "beta", "noise") if k in p}
    if family == "random":
        if "weights" in p:
            p["weights"] = tuple(p["weights"]) if isinstance(p["weights"], (list, tuple)) else (p["weights"],)
        return gen_random(RandomConfig(**p, **sinr))
    if family == "firstfit-tree":
        return gen_firstfit_tree(p.pop("k"), p.pop("delta", 0.0), p.pop("x", None),
                                 SinrParams(**{"alpha": 3.0, "beta": 1.0, **sinr}), **p)
    if family == "randomized-tree":
        return gen_randomized_tree(p.pop("levels"), p.pop("b"), p.pop("M"), p.pop("delta"),
                                   alpha=sinr.get("alpha", 3.0), beta=sinr.get("beta", 1.0), **p)
    if family == "weighted-plane":
        return gen_weighted_plane(p.pop("t"), p.pop("q"), alpha=sinr.get("alpha", 3.0),
                                  beta=sinr.get("beta", 1.0), **p)
    if family == "general-metric":
        return gen_general_metric(p.pop("K"), p.pop("gamma_m", 6.0), alpha=sinr.get("alpha", 3.0), **p)
    if family == "weak":
        src = load_instance(p.pop("input"))
        if sinr:
            src = src.with_params(**sinr)
        return weaken(src, WeakLinkConfig(p.pop("p_max"), p.pop("tau", 0.0)))
    raise ValueError(f"unknown generator family {family!r}")


@dataclass
class ExperimentConfig:
    instances: list[dict]
    algorithms: list[dict]
    seeds: list[int] = field(default_factory=lambda: [0])
    parallelism: int = 1
    output: str = "results.csv"
    timing: bool = False

    def __post_init__(self):
        if not self.instances:
            raise ValueError("an experiment needs at least one instance")
        if not self.algorithms:
            raise ValueError("an experiment needs at least one algorithm")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        for a in self.algorithms:
            if a.get("name") not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a.get('name')!r}")
        ids = [entry.get("id") for entry in self.instances]
        if None in ids or len(set(ids)) != len(ids):
            raise ValueError("every instance needs a unique id")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"instances", "algorithms", "seeds", "parallelism", "output", "timing"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_source(entry: dict, base: Path | None = None) -> Instance:
    if "file" in entry:
        path = Path(entry["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        return load_instance(path)
    return generate(entry["generator"], entry.get("params", {}))


def expand_grid(grid: dict) -> list[dict]:
    keys = sorted(grid)
    values = [v if isinstance(v, list) else [v] for v in (grid[k] for k in keys)]
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def run_algorithm(inst: Instance, name: str, params: dict, seed: int) -> dict:
    """Run one algorithm; returns slots/weight/flags after re-verifying the schedule."""
    p = dict(params)
    m = p.pop("m", None)
    if name in ("conflict", "wcapacity") and p.get("gamma", "auto") == "auto":
        mm = m if m is not None else inst.dim
        p["gamma"] = calibrate_gamma(inst.params.alpha, mm, p["delta"], p["tau"], beta=inst.params.beta)
    if name == "conflict":
        sched = schedule_conflict(inst, p["gamma"], p["delta"], p["tau"], m)
    elif name == "wcapacity":
        res = wcapacity_conflict(inst, p["gamma"], p["delta"], p["tau"], m)
        return {"slots": None, "weight": res.weight, "flags": res.flags}
    elif name == "first-fit":
        sched = first_fit(inst, p.get("tau", 0.0))
    elif name == "length-class":
        sched = length_class_schedule(inst, p.get("tau", 0.0))
    elif name == "randomized":
        probs = ProbSequence(p.get("kind", "constant"), p.get("value", 0.5), p.get("cap", 1000))
        sched = randomized_schedule(inst, p.get("tau", 0.0), probs, seed)
        if not reverify(inst, sched):
            raise VerificationError("randomized schedule failed re-verification")
        return {"slots": sched.rounds, "weight": None, "flags": sched.flags}
    elif name == "exact":
        return {"slots": exact_min_schedule(inst, p.get("power_mode", "optimal"), p.get("tau", 0.0)),
                "weight": None, "flags": []}
    else:
        raise ValueError(f"unknown algorithm {name!r}")
    if not reverify(inst, sched):
        raise VerificationError(f"{name} schedule failed re-verification")
    return {"slots": sched.size, "weight": None, "flags": sched.flags}


def _task(args) -> list[str]:
    inst_id, inst, name, params, seed, timing = args
    t0 = time.perf_counter()
    try:
        out = run_algorithm(inst, name, params, seed)
    except Exception as exc:
        raise RuntimeError(f"instance {inst_id}, algorithm {name}, params {params}, seed {seed}: {exc}") from exc
    ms = (time.perf_counter() - t0) * 1000
    return [
        inst_id,
        str(inst.n),
        fmt(delta(inst)) if inst.n else "",
        name,
        json.dumps(params, sort_keys=True, separators=(",", ":")),
        "" if out["slots"] is None else str(out["slots"]),
        "" if out["weight"] is None else fmt(out["weight"]),
        "true",
        ";".join(out["flags"]),
        fmt(ms) if timing else "",
        str(seed),
    ]


def _sort_key(row: list[str]):
    return (row[0], row[3], row[4], int(row[10]))


def run_experiment(cfg: ExperimentConfig, base: Path | None = None, parallelism: int | None = None) -> list[list[str]]:
    insts = {entry["id"]: load_source(entry, base) for entry in cfg.instances}
    tasks = []
    for entry in cfg.instances:
        for alg in cfg.algorithms:
            for params in expand_grid(alg.get("grid", {})):
                for seed in cfg.seeds:
                    tasks.append((entry["id"], insts[entry["id"]], alg["name"], params, seed, cfg.timing))
    workers = parallelism or cfg.parallelism
    if workers == 1:
        rows = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_task, tasks))
    return sorted(rows, key=_sort_key)


def rows_to_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    w.writerows(rows)
    return buf.getvalue()


def summarize(rows: list[list[str]]) -> list[dict]:
    """Per instance and seed: first-fit slots over conflict slots (first parameter set of each)."""
    table: dict[tuple, dict] = {}
    for row in rows:
        key = (row[0], row[10])
        entry = table.setdefault(key, {"instance": row[0], "n": int(row[1]), "seed": int(row[10])})
        if row[3] in ("first-fit", "conflict") and row[5] and row[3] not in entry:
            entry[row[3]] = int(row[5])
    out = []
    for entry in table.values():
        if "first-fit" in entry and "conflict" in entry:
            entry["ratio"] = entry["first-fit"] / entry["conflict"]
            out.append(entry)
    return sorted(out, key=lambda e: (e["n"], e["instance"], e["seed"]))


def summary_csv(summary: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "n", "seed", "first_fit", "conflict", "ratio"])
    for e in summary:
        w.writerow([e["instance"], e["n"], e["seed"], e["first-fit"], e["conflict"], fmt(e["ratio"])])
    return buf.getvalue()


def cmd_experiment(config_path: str | Path, out: str | Path | None = None,
                   parallelism: int | None = None) -> Path:
    path = Path(config_path)
    cfg = ExperimentConfig.load(path)
    rows = run_experiment(cfg, path.parent, parallelism)
    target = Path(out) if out else path.parent / cfg.output
    target.write_text(rows_to_csv(rows), encoding="utf-8")
    summary = summarize(rows)
    if summary:
        target.with_suffix(".summary.csv").write_text(summary_csv(summary), encoding="utf-8")
    return target
