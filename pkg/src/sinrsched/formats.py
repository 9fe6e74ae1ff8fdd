"""JSON serialization of instances, schedules and feasibility reports.

Instance files::

    {"version": 1,
     "metric": {"type": "euclidean", "dim": m} | {"type": "matrix", "n": k, "d": [...]},
     "points": [[x, y], ...],            # euclidean only
     "params": {"alpha": a, "beta": b, "noise": N},
     "links": [{"s": 0, "r": 1, "w": 1.0}, ...]}

For a matrix metric ``d`` lists the strict upper triangle row by row; the zero
diagonal is implied.  Floats are written with ``repr`` precision, so loading a
saved instance reproduces every distance bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import EuclideanSpace, Instance, InstanceError, Link, MatrixSpace, SinrParams

VERSION = 1


def instance_to_dict(inst: Instance) -> dict:
    space = inst.space
    out: dict = {"version": VERSION}
    if isinstance(space, EuclideanSpace):
        out["metric"] = {"type": "euclidean", "dim": space.dim}
        out["points"] = space.points.tolist()
    else:
        k = space.npoints
        iu = np.triu_indices(k, 1)
        out["metric"] = {"type": "matrix", "n": k, "d": space.matrix[iu].tolist()}
    p = inst.params
    out["params"] = {"alpha": p.alpha, "beta": p.beta, "noise": p.noise}
    out["links"] = [{"s": lk.sender, "r": lk.receiver, "w": lk.weight} for lk in inst.links]
    return out


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InstanceError("instance document must be an object")
    if data.get("version") != VERSION:
        raise InstanceError(f"unsupported instance version {data.get('version')!r}")
    try:
        metric = data["metric"]
        kind = metric["type"]
        if kind == "euclidean":
            dim = int(metric["dim"])
            pts = np.asarray(data["points"], dtype=np.float64).reshape(-1, dim)
            space = EuclideanSpace(pts, dim=dim)
        elif kind == "matrix":
            k = int(metric["n"])
            tri = np.asarray(metric["d"], dtype=np.float64)
            if tri.shape != (k * (k - 1) // 2,):
                raise InstanceError("matrix metric needs n(n-1)/2 upper-triangle entries")
            d = np.zeros((k, k))
            iu = np.triu_indices(k, 1)
            d[iu] = tri
            d.T[iu] = tri
            space = MatrixSpace(d)
        else:
            raise InstanceError(f"unknown metric type {kind!r}")
        prm = data.get("params", {})
        params = SinrParams(float(prm.get("alpha", 3.0)), float(prm.get("beta", 1.0)), float(prm.get("noise", 0.0)))
        links = tuple(
            Link(int(lk["s"]), int(lk["r"]), float(lk.get("w", 1.0)), pos) for pos, lk in enumerate(data["links"])
        )
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed instance document: {exc}") from exc
    return Instance(space, links, params)


def dumps(obj: dict) -> str:
    return json.dumps(obj) + "\n"


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)), encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(data)


def save_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")
