"""Metric spaces, links and instances.

An :class:`Instance` bundles a metric space, an ordered tuple of links whose
endpoints are point indices in that space, and the SINR parameters.  Instances
are immutable; distances are always computed on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

TRIANGLE_TOL = 1e-9


class InstanceError(ValueError):
    """Raised for malformed instances or invalid link references."""


class EuclideanSpace:
    """Points in R^m with the Euclidean distance."""

    kind = "euclidean"

    def __init__(self, points: np.ndarray | Sequence[Sequence[float]], dim: int | None = None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if dim in (None, 1) else pts.reshape(-1, dim)
        if pts.size == 0:
            pts = pts.reshape(0, dim or 1)
        if dim is not None and pts.shape[1] != dim:
            raise InstanceError(f"points have dimension {pts.shape[1]}, expected {dim}")
        if pts.shape[1] < 1:
            raise InstanceError("euclidean dimension must be >= 1")
        if not np.all(np.isfinite(pts)):
            raise InstanceError("non-finite coordinates")
        pts.setflags(write=False)
        self.points = pts

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def npoints(self) -> int:
        return int(self.points.shape[0])

    def pair_distances(self, a, b) -> np.ndarray:
        """Elementwise d(a[k], b[k]) for broadcastable index arrays."""
        pa = self.points[np.asarray(a)]
        pb = self.points[np.asarray(b)]
        if self.dim == 1:
            return np.abs(pa[..., 0] - pb[..., 0])
        return np.sqrt(np.sum((pa - pb) ** 2, axis=-1))

    def distance_matrix(self, a, b) -> np.ndarray:
        """Matrix D[x, y] = d(a[x], b[y])."""
        pa = self.points[np.asarray(a, dtype=np.intp)]
        pb = self.points[np.asarray(b, dtype=np.intp)]
        if self.dim == 1:
            return np.abs(pa[:, 0][:, None] - pb[:, 0][None, :])
        return cdist(pa, pb)

    def scaled(self, factor: float) -> "EuclideanSpace":
        return EuclideanSpace(self.points * factor)


class MatrixSpace:
    """A finite metric given by an explicit symmetric distance matrix."""

    kind = "matrix"
    dim = None

    def __init__(self, matrix: np.ndarray | Sequence[Sequence[float]], validate: bool = True):
        d = np.array(matrix, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InstanceError("distance matrix must be square")
        if validate:
            _validate_metric(d)
        d.setflags(write=False)
        self.matrix = d

    @property
    def npoints(self) -> int:
        return int(self.matrix.shape[0])

    def pair_distances(self, a, b) -> np.ndarray:
        return self.matrix[np.asarray(a), np.asarray(b)]

    def distance_matrix(self, a, b) -> np.ndarray:
        return self.matrix[np.ix_(np.asarray(a, dtype=np.intp), np.asarray(b, dtype=np.intp))]

    def scaled(self, factor: float) -> "MatrixSpace":
        return MatrixSpace(self.matrix * factor, validate=False)


def _validate_metric(d: np.ndarray) -> None:
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InstanceError("distances must be finite and nonnegative")
    if np.any(np.diag(d) != 0):
        raise InstanceError("distance matrix must have a zero diagonal")
    if not np.array_equal(d, d.T):
        raise InstanceError("distance matrix must be symmetric")
    for k in range(d.shape[0]):
        # d[i, j] <= d[i, k] + d[k, j] for all i, j
        slack = d[:, k][:, None] + d[k, :][None, :] - d
        if slack.min(initial=0.0) < -TRIANGLE_TOL:
            raise InstanceError("distance matrix violates the triangle inequality")


MetricSpace = EuclideanSpace | MatrixSpace


@dataclass(frozen=True)
class Link:
    sender: int
    receiver: int
    weight: float = 1.0
    id: int = 0


@dataclass(frozen=True)
class SinrParams:
    alpha: float = 3.0
    beta: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InstanceError("alpha must be positive")
        if not self.beta > 0:
            raise InstanceError("beta must be positive")
        if self.noise < 0:
            raise InstanceError("noise must be nonnegative")


@dataclass(frozen=True)
class Instance:
    space: MetricSpace
    links: tuple[Link, ...]
    params: SinrParams = field(default_factory=SinrParams)

    def __post_init__(self):
        links = tuple(self.links)
        object.__setattr__(self, "links", links)
        npts = self.space.npoints
        for pos, link in enumerate(links):
            if link.id != pos:
                raise InstanceError("link ids must be unique and contiguous from 0")
            for end in (link.sender, link.receiver):
                if not 0 <= end < npts:
                    raise InstanceError(f"link {pos} references unknown point {end}")
            if not link.weight > 0:
                raise InstanceError(f"link {pos} has nonpositive weight")
        s = np.array([lk.sender for lk in links], dtype=np.intp)
        r = np.array([lk.receiver for lk in links], dtype=np.intp)
        w = np.array([lk.weight for lk in links], dtype=np.float64)
        for arr in (s, r, w):
            arr.setflags(write=False)
        object.__setattr__(self, "senders", s)
        object.__setattr__(self, "receivers", r)
        object.__setattr__(self, "weights", w)
        if links and np.any(self.space.pair_distances(s, r) <= 0):
            bad = int(np.flatnonzero(self.space.pair_distances(s, r) <= 0)[0])
            raise InstanceError(f"zero-length link {bad}")

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def dim(self) -> int | None:
        return self.space.dim

    def with_params(self, **changes) -> "Instance":
        fields = {"alpha": self.params.alpha, "beta": self.params.beta, "noise": self.params.noise}
        fields.update({k: v for k, v in changes.items() if v is not None})
        return Instance(self.space, self.links, SinrParams(**fields))

    def subset(self, ids: Iterable[int]) -> "Instance":
        """Sub-instance on the given links, renumbered from 0 in the given order."""
        links = tuple(
            Link(self.links[i].sender, self.links[i].receiver, self.links[i].weight, pos)
            for pos, i in enumerate(ids)
        )
        return Instance(self.space, links, self.params)

    def scaled(self, factor: float) -> "Instance":
        return Instance(self.space.scaled(factor), self.links, self.params)


def build_instance(
    senders: Sequence[Sequence[float]] | np.ndarray,
    receivers: Sequence[Sequence[float]] | np.ndarray,
    weights: Sequence[float] | None = None,
    params: SinrParams | None = None,
) -> Instance:
    """Euclidean instance with sender i at point 2i and receiver i at point 2i+1."""
    s = np.asarray(senders, dtype=np.float64)
    r = np.asarray(receivers, dtype=np.float64)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
        r = r.reshape(-1, 1)
    n, m = s.shape if s.size else (0, r.shape[1] if r.ndim == 2 else 1)
    pts = np.empty((2 * n, m))
    pts[0::2] = s
    pts[1::2] = r
    w = [1.0] * n if weights is None else list(weights)
    links = tuple(Link(2 * i, 2 * i + 1, float(w[i]), i) for i in range(n))
    return Instance(EuclideanSpace(pts, dim=m), links, params or SinrParams())


def _check_id(inst: Instance, i: int) -> int:
    if not 0 <= int(i) < inst.n:
        raise InstanceError(f"unknown link id {i}")
    return int(i)


def lengths(inst: Instance) -> np.ndarray:
    """Array of all link lengths, indexed by link id."""
    if inst.n == 0:
        return np.zeros(0)
    return inst.space.pair_distances(inst.senders, inst.receivers)


def link_length(inst: Instance, i: int) -> float:
    i = _check_id(inst, i)
    return float(inst.space.pair_distances(inst.senders[i], inst.receivers[i]))


def sr_distance(inst: Instance, i: int, j: int) -> float:
    """d(s_i, r_j)."""
    i, j = _check_id(inst, i), _check_id(inst, j)
    return float(inst.space.pair_distances(inst.senders[i], inst.receivers[j]))


def link_gap(inst: Instance, i: int, j: int) -> float:
    """Minimum distance between an endpoint of link i and an endpoint of link j."""
    i, j = _check_id(inst, i), _check_id(inst, j)
    if i == j:
        raise InstanceError("link_gap needs two distinct links")
    return float(gap_matrix(inst, [i], [j])[0, 0])


def sr_matrix(inst: Instance, rows=None, cols=None) -> np.ndarray:
    """D[a, b] = d(s_rows[a], r_cols[b])."""
    rows = np.arange(inst.n) if rows is None else np.asarray(rows, dtype=np.intp)
    cols = np.arange(inst.n) if cols is None else np.asarray(cols, dtype=np.intp)
    return inst.space.distance_matrix(inst.senders[rows], inst.receivers[cols])


def gap_matrix(inst: Instance, rows=None, cols=None) -> np.ndarray:
    """G[a, b] = min distance between endpoints of links rows[a] and cols[b]."""
    rows = np.arange(inst.n) if rows is None else np.asarray(rows, dtype=np.intp)
    cols = np.arange(inst.n) if cols is None else np.asarray(cols, dtype=np.intp)
    dm = inst.space.distance_matrix
    g = dm(inst.senders[rows], inst.senders[cols])
    np.minimum(g, dm(inst.senders[rows], inst.receivers[cols]), out=g)
    np.minimum(g, dm(inst.receivers[rows], inst.senders[cols]), out=g)
    np.minimum(g, dm(inst.receivers[rows], inst.receivers[cols]), out=g)
    return g


def delta(inst: Instance) -> float:
    """Ratio between the longest and the shortest link length."""
    if inst.n == 0:
        raise InstanceError("delta of an empty instance")
    ls = lengths(inst)
    return float(ls.max() / ls.min())


def length_classes(inst: Instance) -> list[list[int]]:
    """Dyadic length classes: class t holds links with length in [lmin 2^t, lmin 2^(t+1)).

    Only nonempty classes are returned, shortest first.
    """
    if inst.n == 0:
        raise InstanceError("length classes of an empty instance")
    ls = lengths(inst)
    t = np.floor(np.log2(ls / ls.min())).astype(int)
    # guard against log2 rounding at exact powers of two
    lo = ls.min() * np.exp2(t)
    t = np.where(ls < lo, t - 1, t)
    t = np.where(ls >= lo * 2, t + 1, t)
    return [np.flatnonzero(t == c).tolist() for c in np.unique(t)]


def diameter(inst: Instance) -> float:
    ids = np.concatenate([inst.senders, inst.receivers])
    return float(inst.space.distance_matrix(ids, ids).max(initial=0.0))
