"""Power schemes, affectance and feasibility under the SINR model.

Affectance of link ``j`` on link ``i`` under power assignment ``P``::

    a_P(j, i) = c_i * P(j) / P(i) * (l_i / d(s_j, r_i)) ** alpha

with ``c_i = 1`` in normalized mode and ``c_i = 1 / (1 - beta*N*l_i**alpha / P(i))``
in exact mode.  A set is p-P-feasible when every member's incoming affectance
sum is at most ``1/p``.  Exact mode with ``p = beta`` is the plain SINR test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import Instance, InstanceError, _check_id, gap_matrix, lengths, sr_matrix

NORMALIZED = "normalized"
EXACT = "exact"
MODES = (NORMALIZED, EXACT)

#: stand-in for infinite affectance (co-located sender and receiver) in matrix products
BIG = 1e200


class WeakLinkError(ValueError):
    """Exact mode needs P(i) > beta*N*l_i^alpha for every link."""


class NotFeasibleError(ValueError):
    """An input set is not feasible at the required threshold."""


class PartitionBoundError(RuntimeError):
    """Greedy strengthening needed more parts than the guaranteed bound."""

    def __init__(self, parts, bound):
        super().__init__(f"strengthening produced {len(parts)} parts, bound is {bound}")
        self.parts = parts
        self.bound = bound


@dataclass(frozen=True)
class PowerScheme:
    """Oblivious power P_tau(i) = scale * l_i**(tau*alpha)."""

    tau: float
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if not self.scale > 0:
            raise ValueError("power scale must be positive")

    def powers(self, inst: Instance) -> np.ndarray:
        return self.scale * lengths(inst) ** (self.tau * inst.params.alpha)


def oblivious_power(scheme: PowerScheme, inst: Instance, i: int) -> float:
    i = _check_id(inst, i)
    return float(scheme.scale * lengths(inst)[i] ** (scheme.tau * inst.params.alpha))


def as_powers(inst: Instance, P) -> np.ndarray:
    """Normalize a PowerScheme, mapping or array into a per-link power array."""
    if isinstance(P, PowerScheme):
        return P.powers(inst)
    if isinstance(P, dict):
        arr = np.array([P[i] for i in range(inst.n)], dtype=np.float64)
    else:
        arr = np.asarray(P, dtype=np.float64)
    if arr.shape != (inst.n,):
        raise ValueError("power assignment must cover every link")
    if np.any(~(arr > 0)):
        raise ValueError("powers must be positive")
    return arr


def noise_factors(inst: Instance, P, mode: str = NORMALIZED, ids=None) -> np.ndarray:
    """The c_i factors for the selected links."""
    ids = np.arange(inst.n) if ids is None else np.asarray(ids, dtype=np.intp)
    if mode == NORMALIZED:
        return np.ones(len(ids))
    if mode != EXACT:
        raise ValueError(f"unknown affectance mode {mode!r}")
    powers = as_powers(inst, P)[ids]
    a = inst.params
    need = a.beta * a.noise * lengths(inst)[ids] ** a.alpha
    if np.any(powers <= need):
        bad = int(ids[np.flatnonzero(powers <= need)[0]])
        raise WeakLinkError(f"weak link under assignment: link {bad}")
    return 1.0 / (1.0 - need / powers)


def affectance_matrix(inst: Instance, P, ids=None, mode: str = NORMALIZED) -> np.ndarray:
    """A[x, y] = a_P(ids[x] -> ids[y]); zero diagonal, inf when d(s_j, r_i) = 0."""
    ids = np.arange(inst.n) if ids is None else np.asarray(ids, dtype=np.intp)
    powers = as_powers(inst, P)
    ls = lengths(inst)[ids]
    c = noise_factors(inst, powers, mode, ids)
    d = sr_matrix(inst, ids, ids)
    with np.errstate(divide="ignore"):
        ratio = ls[None, :] / d
    a = (ratio ** inst.params.alpha) * (powers[ids][:, None] / powers[ids][None, :]) * c[None, :]
    np.fill_diagonal(a, 0.0)
    return a


def _affectance_from(inst, ls, powers, c_all, src: int, dst: np.ndarray) -> np.ndarray:
    """Vector a(src -> dst[k]); ls, powers and c_all cover every link."""
    d = inst.space.pair_distances(inst.senders[src], inst.receivers[dst])
    with np.errstate(divide="ignore"):
        a = (ls[dst] / d) ** inst.params.alpha * (powers[src] / powers[dst]) * c_all[dst]
    a[dst == src] = 0.0
    return a


def _affectance_onto(inst, ls, powers, c_all, src: np.ndarray, dst: int) -> np.ndarray:
    """Vector a(src[k] -> dst)."""
    d = inst.space.pair_distances(inst.senders[src], inst.receivers[dst])
    with np.errstate(divide="ignore"):
        a = (ls[dst] / d) ** inst.params.alpha * (powers[src] / powers[dst]) * c_all[dst]
    a[src == dst] = 0.0
    return a


def affectance(inst: Instance, P, j: int, i: int, mode: str = NORMALIZED) -> float:
    """a_P(j, i): the affectance of link i caused by link j."""
    j, i = _check_id(inst, j), _check_id(inst, i)
    if i == j:
        return 0.0
    return float(affectance_matrix(inst, P, [j, i], mode)[0, 1])


def set_affectance(inst: Instance, P, S: Iterable[int], i: int, mode: str = NORMALIZED) -> float:
    """a_P(S, i), summed over S minus i in ascending link id order."""
    i = _check_id(inst, i)
    others = sorted({_check_id(inst, j) for j in S} - {i})
    if not others:
        return 0.0
    a = affectance_matrix(inst, P, others + [i], mode)
    return float(a[:-1, -1].sum())


def f_tau(inst: Instance, tau: float, i: int, j: int) -> float:
    """l_i^(tau alpha) l_j^((1-tau) alpha) / d(i,j)^alpha; dominates a_{P_tau}(i -> j)."""
    i, j = _check_id(inst, i), _check_id(inst, j)
    if i == j:
        raise InstanceError("f_tau needs two distinct links")
    gap = float(gap_matrix(inst, [i], [j])[0, 0])
    if gap == 0.0:
        raise ZeroDivisionError(f"links {i} and {j} share a point; f_tau is infinite")
    ls = lengths(inst)
    al = inst.params.alpha
    return float((ls[i] / gap) ** (tau * al) * (ls[j] / gap) ** ((1 - tau) * al))


def f_tau_matrix(inst: Instance, tau: float, ids=None) -> np.ndarray:
    """F[x, y] = f_tau(ids[x], ids[y]) with a zero diagonal (inf for touching links)."""
    ids = np.arange(inst.n) if ids is None else np.asarray(ids, dtype=np.intp)
    ls = lengths(inst)[ids]
    g = gap_matrix(inst, ids, ids)
    al = inst.params.alpha
    with np.errstate(divide="ignore"):
        f = (ls[:, None] / g) ** (tau * al) * (ls[None, :] / g) ** ((1 - tau) * al)
    np.fill_diagonal(f, 0.0)
    return f


@dataclass
class FeasibilityReport:
    ids: list[int]
    per_link: list[float]
    p: float
    feasible: bool
    worst_link: int | None
    margin: float
    mode: str = NORMALIZED

    @property
    def threshold(self) -> float:
        return 1.0 / self.p

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "p": self.p,
            "worst_link": self.worst_link,
            "margin": float(f"{self.margin:.12g}"),
            "per_link": [{"id": i, "affectance": float(f"{a:.12g}")} for i, a in zip(self.ids, self.per_link)],
        }


def check_feasible(inst: Instance, S: Iterable[int], P, p: float | None = None,
                   mode: str = NORMALIZED) -> FeasibilityReport:
    """Is S p-P-feasible?  ``p`` defaults to beta."""
    ids = sorted({_check_id(inst, i) for i in S})
    if not ids:
        raise ValueError("feasibility of an empty set is undefined")
    p = inst.params.beta if p is None else float(p)
    if not p > 0:
        raise ValueError("p must be positive")
    a = affectance_matrix(inst, P, ids, mode)
    sums = a.sum(axis=0)
    worst = int(np.argmax(sums))
    margin = 1.0 / p - float(sums[worst])
    return FeasibilityReport(ids, sums.tolist(), p, bool(margin >= 0), ids[worst], margin, mode)


def is_feasible(inst: Instance, S: Iterable[int], P, p: float | None = None,
                mode: str = NORMALIZED) -> bool:
    return check_feasible(inst, S, P, p, mode).feasible


def sinr_holds(inst: Instance, S: Iterable[int], P) -> bool:
    """Direct evaluation of S_i >= beta (sum of interference + N) for every i in S."""
    ids = sorted(set(S))
    powers = as_powers(inst, P)
    ls = lengths(inst)
    al, beta, noise = inst.params.alpha, inst.params.beta, inst.params.noise
    for i in ids:
        signal = powers[i] / ls[i] ** al
        interference = 0.0
        for j in ids:
            if j != i:
                d = float(inst.space.pair_distances(inst.senders[j], inst.receivers[i]))
                interference += math.inf if d == 0 else powers[j] / d ** al
        if not signal >= beta * (interference + noise):
            return False
    return True


# --- signal strengthening ---------------------------------------------------------


def greedy_split(inst: Instance, S: Iterable[int], P, p: float, mode: str = NORMALIZED) -> list[list[int]]:
    """First-fit S into p-P-feasible parts, links taken in non-increasing length."""
    ids = sorted(set(S))
    if not ids:
        return []
    powers = as_powers(inst, P)
    c_all = np.ones(inst.n) if mode == NORMALIZED else _full_noise_factors(inst, powers, mode, ids)
    ls = lengths(inst)
    order = sorted(ids, key=lambda i: (-ls[i], i))
    thr = 1.0 / p
    parts: list[list[int]] = []
    sums: list[np.ndarray] = []
    for i in order:
        placed = False
        for k, members in enumerate(parts):
            arr = np.asarray(members)
            to_members = _affectance_from(inst, ls, powers, c_all, i, arr)
            onto_i = _affectance_onto(inst, ls, powers, c_all, arr, i)
            if onto_i.sum() <= thr and np.all(sums[k] + to_members <= thr):
                members.append(i)
                sums[k] = np.append(sums[k] + to_members, onto_i.sum())
                placed = True
                break
        if not placed:
            parts.append([i])
            sums.append(np.zeros(1))
    return [sorted(part) for part in parts]


def _full_noise_factors(inst, powers, mode, ids) -> np.ndarray:
    c = np.ones(inst.n)
    c[np.asarray(ids)] = noise_factors(inst, powers, mode, ids)
    return c


def strengthen_partition(inst: Instance, S: Iterable[int], P, p: float, p_target: float,
                         mode: str = NORMALIZED) -> list[list[int]]:
    """Split a p-P-feasible set into at most ceil(2 p_target / p) p_target-feasible parts."""
    ids = sorted(set(S))
    if not ids:
        return []
    if not check_feasible(inst, ids, P, p, mode).feasible:
        raise NotFeasibleError(f"input set is not {p}-feasible")
    parts = greedy_split(inst, ids, P, p_target, mode)
    for part in parts:
        if not check_feasible(inst, part, P, p_target, mode).feasible:
            raise PartitionBoundError(parts, -1)
    bound = math.ceil(2 * p_target / p)
    if len(parts) > bound:
        raise PartitionBoundError(parts, bound)
    return parts


# --- oblivious power parameter range ----------------------------------------------


def delta_threshold(alpha: float, m: float) -> float:
    """Smallest separation exponent admitting a valid tau: (a-m+1)/(2(a-m)+1)."""
    return (alpha - m + 1) / (2 * (alpha - m) + 1)


def valid_tau_interval(alpha: float, m: float, delta: float) -> tuple[float, float] | None:
    """Open interval of tau for which (gamma, delta)-independent sets are P_tau-feasible.

    Returns None when the interval is empty (delta <= delta threshold).
    """
    if not alpha > m:
        raise ValueError(f"alpha={alpha} must exceed the dimension m={m}")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    lo = 1 - delta * (alpha - m) / alpha
    hi = 1 - (1 - delta) * (alpha - m + 1) / alpha
    if not lo < hi:
        return None
    return lo, hi


# --- optimal power existence -------------------------------------------------------


@dataclass
class PowerSearch:
    feasible: bool
    powers: np.ndarray | None = None
    iterations: int = 0
    radius_estimate: float = math.nan
    method: str = ""
    notes: list[str] = field(default_factory=list)


def gain_matrix(inst: Instance, ids: Sequence[int]) -> np.ndarray:
    """G[x, y] = l_x^alpha / d(s_y, r_x)^alpha for x != y (interference gain on x from y)."""
    ids = np.asarray(ids, dtype=np.intp)
    ls = lengths(inst)[ids]
    d = sr_matrix(inst, ids, ids)  # d[y, x] = d(s_y, r_x)
    with np.errstate(divide="ignore"):
        g = (ls[None, :] / d) ** inst.params.alpha
    g = g.T.copy()
    np.fill_diagonal(g, 0.0)
    return g


def spectral_radius(inst: Instance, ids: Sequence[int]) -> float:
    g = gain_matrix(inst, ids)
    if not np.all(np.isfinite(g)):
        return math.inf
    if len(ids) == 1:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(g))))


def spectral_feasible(inst: Instance, S: Iterable[int]) -> bool:
    """Noise-free feasibility test: spectral radius of beta*G at most 1."""
    ids = sorted(set(S))
    return inst.params.beta * spectral_radius(inst, ids) <= 1.0


def exists_power(inst: Instance, S: Iterable[int], mode: str = NORMALIZED,
                 max_iter: int = 10_000, rtol: float = 1e-10, blowup: float = 1e12) -> PowerSearch:
    """Decide whether some power assignment makes S feasible.

    Runs the monotone fixed-point iteration P <- beta (N l^alpha + G P).  In
    normalized mode (and whenever N = 0) the noise term vanishes and the
    iteration is run in normalized form, bracketing the spectral radius of
    beta*G between Collatz-Wielandt bounds until one side decides.  A returned
    assignment covers every link of the instance (links outside S get power 1)
    and has been checked with :func:`check_feasible`.
    """
    ids = sorted({_check_id(inst, i) for i in S})
    if not ids:
        raise ValueError("power existence for an empty set is undefined")
    prm = inst.params
    g = prm.beta * gain_matrix(inst, ids)
    if not np.all(np.isfinite(g)):
        return PowerSearch(False, method="infinite-gain", notes=["a sender sits on another link's receiver"])
    ls = lengths(inst)[ids]
    b = prm.beta * prm.noise * ls ** prm.alpha if mode == EXACT else np.zeros(len(ids))

    def embed(vec):
        full = np.ones(inst.n)
        full[ids] = vec
        return full

    def verified(vec) -> bool:
        return check_feasible(inst, ids, embed(vec), prm.beta, mode).feasible

    if len(ids) == 1:
        vec = np.array([1.0]) if b[0] == 0 else 2 * b
        return PowerSearch(True, embed(vec), 0, 0.0, "singleton")

    if np.all(b == 0):
        return _normalized_search(g, embed, verified, max_iter, rtol)

    p0 = b + 1e-9 * b.max()
    cur = p0
    for it in range(1, max_iter + 1):
        nxt = b + g @ cur
        if nxt.max() > blowup * p0.max():
            return PowerSearch(False, None, it, method="fixed-point-divergence")
        change = np.max(np.abs(nxt - cur) / nxt)
        cur = nxt
        if change < rtol:
            # the fixed point meets SINR with equality; any upscaling adds slack s*b - b
            for scale in (1 + 1e-9, 1 + 1e-6, 1 + 1e-3):
                if verified(cur * scale):
                    return PowerSearch(True, embed(cur * scale), it, method="fixed-point")
            break
    return PowerSearch(False, None, max_iter, method="fixed-point-cap",
                       notes=["iteration did not settle to a verifiable assignment"])


def _normalized_search(g, embed, verified, max_iter, rtol) -> PowerSearch:
    # Perron vector of the shifted matrix I + g has the eigenvalue 1 + rho(g)
    v = np.ones(g.shape[0])
    prev = math.inf
    for it in range(1, max_iter + 1):
        gv = g @ v
        ratios = gv / v
        upper, lower = ratios.max(), ratios.min()
        if upper <= 1.0 and verified(v):
            return PowerSearch(True, embed(v.copy()), it, upper, "collatz-wielandt")
        if lower > 1.0:
            return PowerSearch(False, None, it, lower, "collatz-wielandt")
        w = v + gv
        v = w / w.max()
        est = 0.5 * (upper + lower)
        if abs(est - prev) <= rtol * max(1.0, abs(est)) and upper - lower <= rtol * max(1.0, upper):
            # converged at the boundary rho(beta G) ~ 1; trust the exact check on the Perron vector
            ok = verified(v)
            return PowerSearch(ok, embed(v.copy()) if ok else None, it, est, "collatz-wielandt-boundary")
        prev = est
    return PowerSearch(False, None, max_iter, prev, "collatz-wielandt-cap")
