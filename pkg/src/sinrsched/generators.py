"""Instance families: random fading-metric instances, the adversarial constructions
for first-fit and the randomized algorithm, the weighted planar and general-metric
lower-bound instances, and the weak-link transform.

All generators are deterministic functions of their arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Instance, InstanceError, Link, MatrixSpace, SinrParams, build_instance, lengths
from .sinr import PowerScheme, affectance_matrix, check_feasible


class ConstructionError(ValueError):
    """A construction's geometric requirements cannot be met at the requested size."""


# --- random instances -------------------------------------------------------------------


@dataclass(frozen=True)
class RandomConfig:
    n: int
    dim: int = 2
    side: float = 100.0
    lmin: float = 1.0
    lmax: float = 10.0
    weights: tuple = ("unit",)
    seed: int = 0
    alpha: float = 3.0
    beta: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")
        if not self.side > 0:
            raise ValueError("side must be positive")
        if not 0 < self.lmin <= self.lmax:
            raise ValueError("need 0 < lmin <= lmax")
        kind = self.weights[0]
        if kind == "uniform":
            a, b = self.weights[1], self.weights[2]
            if not 0 < a <= b:
                raise ValueError("uniform weights need 0 < a <= b")
        elif kind != "unit":
            raise ValueError(f"unknown weight distribution {kind!r}")


def gen_random(cfg: RandomConfig) -> Instance:
    """Senders uniform in [0, side]^m, lengths uniform in [lmin, lmax], uniform random directions."""
    rng = np.random.default_rng(cfg.seed)
    n, m = cfg.n, cfg.dim
    s = rng.uniform(0.0, cfg.side, size=(n, m))
    ls = rng.uniform(cfg.lmin, cfg.lmax, size=n)
    u = rng.standard_normal(size=(n, m))
    norms = np.linalg.norm(u, axis=1)
    u[norms == 0, 0] = 1.0  # measure zero, but keeps every direction a unit vector
    u /= np.linalg.norm(u, axis=1)[:, None]
    r = s + ls[:, None] * u
    if cfg.weights[0] == "uniform":
        w = rng.uniform(cfg.weights[1], cfg.weights[2], size=n)
    else:
        w = np.ones(n)
    return build_instance(s.reshape(n, m), r.reshape(n, m), w, SinrParams(cfg.alpha, cfg.beta, cfg.noise))


# --- first-fit adversarial tree ---------------------------------------------------------


def default_tree_base(delta: float) -> int:
    """Smallest integer strictly above 16**(1/(1-delta))."""
    return math.floor(16 ** (1 / (1 - delta))) + 1


def gen_firstfit_tree(k: int, delta: float = 0.0, x: float | None = None,
                      params: SinrParams | None = None) -> Instance:
    """Links on a line shaped like the tree T_k; layer-t links have length x^(k-t).

    T_k's root has one child subtree T_j for each j < k.  A child j of link i
    starts at gap l_i^(1-delta) l_j^delta to the right of r_i; children go left
    to right in decreasing length, and a child whose preferred start lies
    inside the span of its left sibling's subtree is pushed to the right of
    that span.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    bound = 16 ** (1 / (1 - delta))
    x = default_tree_base(delta) if x is None else x
    if not x > bound:
        raise ConstructionError(f"x={x} must exceed 16^(1/(1-delta)) = {bound:.6g}")
    senders: list[float] = []
    receivers: list[float] = []

    def place(depth: int, s: float) -> float:
        # link with subtree T_depth and sender s; returns the right end of its subtree
        li = float(x) ** depth
        r = s + li
        senders.append(s)
        receivers.append(r)
        end = r
        for j in range(depth - 1, -1, -1):
            lj = float(x) ** j
            start = r + li ** (1 - delta) * lj ** delta
            if start <= end:
                start = end + lj
            end = place(j, start)
        if end - s >= 4 * li:
            raise ConstructionError("subtree span exceeds 4 x^t")
        return end

    place(k, 0.0)
    return build_instance(senders, receivers, params=params or SinrParams(3.0, 1.0, 0.0))


def firstfit_tree_parents(k: int) -> list[int]:
    """Parent link id of every link of gen_firstfit_tree(k) (-1 for the root), in link order."""
    parents: list[int] = []

    def walk(depth: int, parent: int) -> None:
        me = len(parents)
        parents.append(parent)
        for j in range(depth - 1, -1, -1):
            walk(j, me)

    walk(k, -1)
    return parents


# --- randomized-algorithm adversarial tree ---------------------------------------------


def tree_fanout(levels: int, b: float, M: int) -> int:
    """Fanout f = ceil(log2(n)^b) where n = M (1 + f + ... + f^levels), by fixed-point iteration."""
    def step(f: int) -> int:
        n = M * sum(f ** t for t in range(levels + 1))
        return max(2, math.ceil(math.log2(n) ** b))

    trail = [2]
    while step(trail[-1]) not in trail:
        trail.append(step(trail[-1]))
    cycle = trail[trail.index(step(trail[-1])):]
    return max(cycle)  # a cycle longer than one is broken towards the larger fanout


@dataclass
class TreeLayout:
    lengths: list[float]
    fanout: int
    copies: int
    parents: list[int]


def gen_randomized_tree(levels: int, b: float, M: int, delta: float, alpha: float = 3.0,
                        fanout: int | None = None, beta: float = 1.0) -> Instance:
    """Complete f-ary tree of links on a line, each link repeated M times.

    Level-t links have length l_t = c l_(t+1) log2(n)^(d (t+1)) with c = 2^(1/delta),
    d = ceil(2b/(alpha delta)) and unit leaves.  The f children of a link sit inside
    its span near its receiver, at distance between w/2 and w from it
    (w = l_parent^(1-delta) l_child^delta), at least l_parent/2 from its sender and
    at least 2 l_child apart.  Copies of a link get consecutive ids.
    """
    inst, _ = randomized_tree_layout(levels, b, M, delta, alpha, fanout, beta)
    return inst


def randomized_tree_layout(levels: int, b: float, M: int, delta: float, alpha: float = 3.0,
                           fanout: int | None = None, beta: float = 1.0) -> tuple[Instance, TreeLayout]:
    if levels < 1 or b < 1 or M < 1:
        raise ValueError("need levels >= 1, b >= 1 and M >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    f = tree_fanout(levels, b, M) if fanout is None else int(fanout)
    if f < 1:
        raise ValueError("fanout must be positive")
    n = M * sum(f ** t for t in range(levels + 1))
    logn = math.log2(n)
    c = 2 ** (1 / delta)
    d = math.ceil(2 * b / (alpha * delta))
    ls = [1.0] * (levels + 1)
    for t in range(levels - 1, -1, -1):
        ls[t] = c * ls[t + 1] * logn ** (d * (t + 1))

    s_pos: list[float] = [0.0]
    level: list[int] = [0]
    parents: list[int] = [-1]
    frontier = [0]
    for t in range(levels):
        l0, l1 = ls[t], ls[t + 1]
        w = l0 ** (1 - delta) * l1 ** delta
        # senders of children at distances evenly spread over [w/2 + l1, w - l1] from r_parent
        near, far = w / 2 + l1, w - l1
        step = (far - near) / (f - 1) if f > 1 else 0.0
        if f > 1 and step < 3 * l1:
            raise ConstructionError(
                f"level {t}: window of width {far - near:.6g} cannot hold {f} children 2*l1 apart")
        if far > l0 / 2:
            raise ConstructionError(f"level {t}: children would come closer than l0/2 to the parent's sender")
        nxt = []
        for p in frontier:
            rp = s_pos[p] + l0
            for q in range(f):
                s_pos.append(rp - (near + q * step))
                level.append(t + 1)
                parents.append(p)
                nxt.append(len(s_pos) - 1)
        frontier = nxt
    node_len = np.array([ls[t] for t in level])
    s = np.array(s_pos)
    _check_randomized_tree(s, node_len, parents, ls, delta)
    senders = np.repeat(s, M)
    receivers = np.repeat(s + node_len, M)
    inst = build_instance(senders, receivers, params=SinrParams(alpha, beta, 0.0))
    return inst, TreeLayout(ls, f, M, parents)


def _check_randomized_tree(s, node_len, parents, ls, delta) -> None:
    """Verify the four placement constraints for every parent and its children."""
    children: dict[int, list[int]] = {}
    for v, p in enumerate(parents):
        if p >= 0:
            children.setdefault(p, []).append(v)
    eps = 1e-9
    for p, kids in children.items():
        l0 = node_len[p]
        l1 = node_len[kids[0]]
        w = l0 ** (1 - delta) * l1 ** delta
        sp, rp = s[p], s[p] + l0
        ks = np.sort(s[kids])
        if len(ks) > 1 and np.min(np.diff(ks) - l1) < 2 * l1 * (1 - eps):
            raise ConstructionError(f"children of {p} are closer than 2*l1")
        near = rp - (ks + l1)  # distance from child receiver (its nearest point) to r_parent
        if near.min() < w / 2 * (1 - eps):
            raise ConstructionError(f"a child of {p} is closer than w/2 to the parent's receiver")
        if (rp - ks).max() > w * (1 + eps):
            raise ConstructionError(f"a child of {p} is farther than w from the parent's receiver")
        if (ks - sp).min() < l0 / 2 * (1 - eps):
            raise ConstructionError(f"a child of {p} is closer than l0/2 to the parent's sender")


# --- weighted planar instance ----------------------------------------------------------


def plane_heights(t: int, q: int) -> list[float]:
    """h_0 = 0, h_s = l_s + q (l_(s-1) + h_(s-1)) with l_s = (3q)^s."""
    h = [0.0]
    for s in range(1, t + 1):
        h.append((3 * q) ** s + q * ((3 * q) ** (s - 1) + h[-1]))
    return h


def gen_weighted_plane(t: int, q: int, alpha: float = 3.0, beta: float = 1.0) -> Instance:
    """Recursive planar instance S_t(q): a main link of length (3q)^t and weight q^(2t)
    above a q x q grid of translated copies of S_(t-1)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if q < 2:
        raise ValueError("q must be at least 2")
    h = plane_heights(t, q)
    for s in range(t + 1):
        if h[s] > 2 * (3 * q) ** s:
            raise ConstructionError(f"height h_{s} exceeds 2 l_{s}")
    senders, receivers, weights = [], [], []

    def build(level: int, ox: float, oy: float) -> None:
        ll = float((3 * q) ** level)
        senders.append((ox, oy))
        receivers.append((ox + ll, oy))
        weights.append(float(q) ** (2 * level))
        if level == 0:
            return
        lp = float((3 * q) ** (level - 1))
        for i in range(q):
            for j in range(q):
                build(level - 1, ox + 2 * i * lp, oy + ll + j * (lp + h[level - 1]))

    build(t, 0.0, 0.0)
    inst = build_instance(senders, receivers, weights, SinrParams(alpha, beta, 0.0))
    expected = 1
    for _ in range(t):
        expected = 1 + q * q * expected
    assert inst.n == expected
    return inst


def plane_levels(inst: Instance, q: int) -> dict[int, list[int]]:
    """Link ids grouped by level (level k has length (3q)^k)."""
    ls = lengths(inst)
    lv = np.rint(np.log(ls) / math.log(3 * q)).astype(int)
    return {int(k): np.flatnonzero(lv == k).tolist() for k in np.unique(lv)}


# --- general metric instance -----------------------------------------------------------


def gen_general_metric(K: int, gamma_m: float = 6.0, alpha: float = 3.0) -> Instance:
    """Unit-length links in an explicit metric: set L_k holds 4^(k-1) links of weight 1/|L_k|;
    every node of a link in L_k is at distance t_k + t_k' from every node of another link
    in L_k', with t_k = (gamma_m |L_k|)^(1/alpha)."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if gamma_m < 6:
        raise ValueError("gamma_m must be at least 6")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    sizes = [4 ** (k - 1) for k in range(1, K + 1)]
    group = np.repeat(np.arange(K), sizes)
    n = len(group)
    t = np.array([(gamma_m * s) ** (1 / alpha) for s in sizes])
    tl = t[group]
    link_dist = tl[:, None] + tl[None, :]
    node_link = np.repeat(np.arange(n), 2)  # point 2i is s_i, point 2i+1 is r_i
    d = link_dist[np.ix_(node_link, node_link)]
    same = node_link[:, None] == node_link[None, :]
    d[same] = 1.0
    np.fill_diagonal(d, 0.0)
    space = MatrixSpace(d)  # validates the triangle inequality
    links = tuple(Link(2 * i, 2 * i + 1, 1.0 / sizes[group[i]], i) for i in range(n))
    return Instance(space, links, SinrParams(alpha, 1.0, 0.0))


def general_metric_powers(inst: Instance, K: int) -> np.ndarray:
    """The assignment P(i) = 2^-k for links of L_k."""
    sizes = [4 ** (k - 1) for k in range(1, K + 1)]
    group = np.repeat(np.arange(1, K + 1), sizes)
    if len(group) != inst.n:
        raise InstanceError("instance does not match K")
    return 2.0 ** (-group.astype(np.float64))


def general_metric_margin(inst: Instance, K: int) -> float:
    """Largest affectance sum under P(i) = 2^-k; below 1 when the claim holds."""
    a = affectance_matrix(inst, general_metric_powers(inst, K))
    return float(a.sum(axis=0).max())


# --- weak-link transform ----------------------------------------------------------------


@dataclass(frozen=True)
class WeakLinkConfig:
    p_max: float
    tau: float = 0.0

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValueError("P_max must be positive")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")


def weak_lengths(inst: Instance, p_max: float) -> tuple[float, float]:
    """(l_max, hat-l): the longest length beating noise at P_max, and the weak-link border."""
    prm = inst.params
    if prm.noise <= 0:
        raise ValueError("weak links are undefined without noise")
    lmax = (p_max / (prm.beta * prm.noise)) ** (1 / prm.alpha)
    return lmax, lmax / 2 ** (1 / prm.alpha)


def effective_length(y, lmax: float, alpha: float):
    """e(y) = y / (1 - (y/lmax)^alpha)^(1/alpha), defined for 0 < y < lmax."""
    y = np.asarray(y, dtype=np.float64)
    return y / (1 - (y / lmax) ** alpha) ** (1 / alpha)


def effective_inverse(y, lmax: float, alpha: float):
    """f(y) = y / (1 + (y/lmax)^alpha)^(1/alpha), the inverse of effective_length."""
    y = np.asarray(y, dtype=np.float64)
    return y / (1 + (y / lmax) ** alpha) ** (1 / alpha)


def weaken(inst: Instance, cfg: WeakLinkConfig) -> Instance:
    """Map every link to a weak link: senders scaled by X = 2^(1/alpha) hat-l / l_min and
    lengths f(X l_i), receivers offset along the first axis."""
    if inst.dim is None:
        raise InstanceError("weaken needs a euclidean instance")
    if inst.n == 0:
        return inst
    prm = inst.params
    lmax, lhat = weak_lengths(inst, cfg.p_max)
    ls = lengths(inst)
    if not cfg.p_max > prm.beta * prm.noise * ls.min() ** prm.alpha:
        raise ValueError("P_max must exceed beta N l_min^alpha")
    X = 2 ** (1 / prm.alpha) * lhat / ls.min()
    new_len = effective_inverse(X * ls, lmax, prm.alpha)
    s = inst.space.points[inst.senders] * X
    r = s.copy()
    r[:, 0] += new_len
    out = build_instance(s, r, inst.weights, prm)
    out_len = lengths(out)
    if np.any(out_len >= lmax) or np.any(out_len < lhat * (1 - 1e-12)):
        raise ConstructionError("a transformed link is not weak")
    return out


def weak_power(inst: Instance, cfg: WeakLinkConfig) -> PowerScheme:
    """P_tau scaled so that a link of length l_max would use P_max."""
    lmax, _ = weak_lengths(inst, cfg.p_max)
    return PowerScheme(cfg.tau, cfg.p_max / lmax ** (cfg.tau * inst.params.alpha))


def is_weak(inst: Instance, p_max: float) -> np.ndarray:
    """P_max <= 2 beta N l^alpha per link, with a relative tolerance of 1e-12 at the border."""
    prm = inst.params
    need = 2 * prm.beta * prm.noise * lengths(inst) ** prm.alpha
    return p_max <= need * (1 + 1e-12)


def weak_ratio_band(inst: Instance, cfg: WeakLinkConfig) -> float:
    """c_b = max over ordered pairs of max(a_U/a_P, a_P/a_U) in exact mode."""
    if inst.n < 2:
        return 1.0
    u = affectance_matrix(inst, PowerScheme(0.0, cfg.p_max), mode="exact")
    p = affectance_matrix(inst, weak_power(inst, cfg), mode="exact")
    mask = ~np.eye(inst.n, dtype=bool) & (u > 0) & np.isfinite(u) & np.isfinite(p)
    ratio = u[mask] / p[mask]
    return float(max(ratio.max(), (1 / ratio).max()))


def verify_general_metric(inst: Instance, K: int) -> bool:
    return check_feasible(inst, range(inst.n), general_metric_powers(inst, K)).feasible
