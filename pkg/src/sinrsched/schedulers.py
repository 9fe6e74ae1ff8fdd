"""Scheduling and weighted-capacity algorithms, baselines and exact oracles.

Every :class:`Schedule` is built from slots that have been re-checked with
:func:`check_feasible`; constructing one from an infeasible slot raises
:class:`VerificationError`.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .conflict import ConflictParams, build_graph, color_classes, greedy_color, mwis
from .model import Instance, InstanceError, lengths, length_classes, sr_matrix
from .sinr import (
    BIG,
    EXACT,
    NORMALIZED,
    FeasibilityReport,
    PowerScheme,
    _affectance_from,
    _affectance_onto,
    affectance_matrix,
    as_powers,
    check_feasible,
    exists_power,
    greedy_split,
    valid_tau_interval,
)

GAMMA_TOO_SMALL = "gamma-too-small"
CAP_REACHED = "cap-reached"
GAMMA_LIMIT = 512.0
EXACT_LIMIT = 15


class VerificationError(RuntimeError):
    """A slot failed the feasibility re-check."""


class TooLarge(ValueError):
    pass


class LowerBoundWarning(UserWarning):
    """beta <= 1: feasible sets need not be gamma-independent, so lower-bound diagnostics do not apply."""


@dataclass
class Schedule:
    algorithm: str
    slots: list[list[int]]
    powers: np.ndarray
    reports: list[FeasibilityReport]
    params: dict = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    unscheduled: list[int] = field(default_factory=list)
    rounds: int | None = None

    @property
    def size(self) -> int:
        return len(self.slots)

    def slot_powers(self, k: int) -> dict[int, float]:
        return {i: float(self.powers[i]) for i in self.slots[k]}

    def to_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "params": self.params,
            "slots": [list(map(int, s)) for s in self.slots],
            "verified": True,
            "flags": list(self.flags),
        }
        if self.unscheduled:
            out["unscheduled"] = list(map(int, self.unscheduled))
        if self.rounds is not None:
            out["rounds"] = self.rounds
        return out


def make_schedule(inst: Instance, slots: Sequence[Sequence[int]], P, algorithm: str,
                  params: dict | None = None, flags: Iterable[str] = (), partial: bool = False,
                  mode: str = NORMALIZED) -> Schedule:
    """Verify every slot and the partition property, then wrap them in a Schedule."""
    slots = [sorted(int(i) for i in s) for s in slots if len(s)]
    powers = as_powers(inst, P) if inst.n else np.zeros(0)
    seen = [i for s in slots for i in s]
    if len(seen) != len(set(seen)):
        raise VerificationError("a link appears in more than one slot")
    missing = sorted(set(range(inst.n)) - set(seen))
    if missing and not partial:
        raise VerificationError(f"links {missing[:5]} are not scheduled")
    reports = []
    for k, s in enumerate(slots):
        rep = check_feasible(inst, s, powers, inst.params.beta, mode)
        if not rep.feasible:
            raise VerificationError(f"slot {k} is infeasible (worst link {rep.worst_link}, margin {rep.margin:.3g})")
        reports.append(rep)
    return Schedule(algorithm, slots, powers, reports, dict(params or {}), list(flags), missing)


def reverify(inst: Instance, sched: Schedule, mode: str = NORMALIZED) -> bool:
    """Independent pass: recompute every slot's feasibility from scratch."""
    seen = [i for s in sched.slots for i in s]
    if len(seen) != len(set(seen)):
        return False
    if sorted(set(seen) | set(sched.unscheduled)) != list(range(inst.n)):
        return False
    return all(check_feasible(inst, s, sched.powers, inst.params.beta, mode).feasible for s in sched.slots)


# --- conflict graph algorithms ------------------------------------------------------


def _conflict_setup(inst: Instance, gamma: float, delta: float, tau: float, m: float | None):
    if m is None:
        m = inst.dim
        if m is None:
            raise InstanceError("the doubling dimension m must be given for explicit metrics")
    alpha = inst.params.alpha
    interval = valid_tau_interval(alpha, m, delta)
    if interval is None:
        raise ValueError(f"empty tau-interval for alpha={alpha}, m={m}, delta={delta}")
    lo, hi = interval
    if not lo < tau < hi:
        raise ValueError(f"tau={tau} outside the valid interval ({lo:.6g}, {hi:.6g})")
    return ConflictParams(gamma, delta), PowerScheme(tau)


def schedule_conflict(inst: Instance, gamma: float, delta: float, tau: float,
                      m: float | None = None) -> Schedule:
    """Greedy coloring of the (gamma, delta) conflict graph, one slot per color, under P_tau."""
    cp, scheme = _conflict_setup(inst, gamma, delta, tau, m)
    if inst.params.beta <= 1:
        warnings.warn("beta <= 1: the gamma-independence lower bound does not apply", LowerBoundWarning,
                      stacklevel=2)
    params = {"gamma": gamma, "delta": delta, "tau": tau}
    if inst.n == 0:
        return Schedule("conflict", [], np.zeros(0), [], params)
    graph = build_graph(inst, cp)
    powers = scheme.powers(inst)
    slots, flags = [], []
    for cls in color_classes(greedy_color(graph)):
        if check_feasible(inst, cls, powers).feasible:
            slots.append(cls)
        else:
            slots.extend(greedy_split(inst, cls, powers, inst.params.beta))
            if GAMMA_TOO_SMALL not in flags:
                flags.append(GAMMA_TOO_SMALL)
    return make_schedule(inst, slots, powers, "conflict", params, flags)


@dataclass
class CapacityResult:
    links: list[int]
    weight: float
    powers: np.ndarray
    report: FeasibilityReport | None
    flags: list[str] = field(default_factory=list)
    k_emp: int = 0

    def to_dict(self) -> dict:
        return {
            "algorithm": "wcapacity-conflict",
            "links": self.links,
            "weight": self.weight,
            "verified": True,
            "flags": self.flags,
            "k_emp": self.k_emp,
        }


def wcapacity_conflict(inst: Instance, gamma: float, delta: float, tau: float,
                       m: float | None = None) -> CapacityResult:
    """Approximate maximum-weight P_tau-feasible subset via local-ratio MWIS."""
    cp, scheme = _conflict_setup(inst, gamma, delta, tau, m)
    if inst.n == 0:
        return CapacityResult([], 0.0, np.zeros(0), None)
    powers = scheme.powers(inst)
    res = mwis(build_graph(inst, cp), inst.weights)
    chosen, flags = res.vertices, []
    if not check_feasible(inst, chosen, powers).feasible:
        parts = greedy_split(inst, chosen, powers, inst.params.beta)
        chosen = max(parts, key=lambda s: (float(inst.weights[s].sum()), [-i for i in s]))
        flags.append(GAMMA_TOO_SMALL)
    report = check_feasible(inst, chosen, powers)
    if not report.feasible:
        raise VerificationError("capacity set failed verification")
    return CapacityResult(sorted(chosen), float(inst.weights[chosen].sum()), powers, report, flags, res.k_emp)


# --- baselines ------------------------------------------------------------------------


def first_fit(inst: Instance, tau_power: float = 0.0, order: Sequence[int] | None = None) -> Schedule:
    """Each link joins the first slot that stays feasible with it; default order is increasing length."""
    ls = lengths(inst)
    if order is None:
        order = sorted(range(inst.n), key=lambda i: (ls[i], i))
    elif sorted(order) != list(range(inst.n)):
        raise ValueError("custom order must be a permutation of the link ids")
    powers = PowerScheme(tau_power).powers(inst) if inst.n else np.zeros(0)
    slots = _first_fit_slots(inst, list(order), powers, ls)
    return make_schedule(inst, slots, powers, "first-fit", {"tau": tau_power})


def _first_fit_slots(inst: Instance, order: list[int], powers: np.ndarray, ls: np.ndarray) -> list[list[int]]:
    thr = 1.0 / inst.params.beta
    ones = np.ones(inst.n)
    slots: list[list[int]] = []
    sums: list[np.ndarray] = []
    for i in order:
        for k, members in enumerate(slots):
            arr = np.asarray(members)
            onto = _affectance_onto(inst, ls, powers, ones, arr, i).sum()
            if onto > thr:
                continue
            new = sums[k] + _affectance_from(inst, ls, powers, ones, i, arr)
            if np.all(new <= thr):
                # the whole slot is re-checked from scratch near the threshold
                if max(onto, new.max()) > thr * (1 - 1e-9):
                    if not check_feasible(inst, members + [i], powers).feasible:
                        continue
                members.append(i)
                sums[k] = np.append(new, onto)
                break
        else:
            slots.append([i])
            sums.append(np.zeros(1))
    return slots


def length_class_schedule(inst: Instance, tau_power: float = 0.0) -> Schedule:
    """First-fit inside each dyadic length class; slots concatenated shortest class first."""
    if inst.n == 0:
        return Schedule("length-class", [], np.zeros(0), [], {"tau": tau_power})
    ls = lengths(inst)
    powers = PowerScheme(tau_power).powers(inst)
    slots = []
    for cls in length_classes(inst):
        order = sorted(cls, key=lambda i: (ls[i], i))
        slots.extend(_first_fit_slots(inst, order, powers, ls))
    return make_schedule(inst, slots, powers, "length-class", {"tau": tau_power})


@dataclass(frozen=True)
class ProbSequence:
    """Per-round transmission probability: constant p, harmonic min(1, c/r), or an explicit list."""

    kind: str
    value: float | tuple[float, ...] = 0.5
    cap: int = 1000

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("round cap must be at least 1")
        if self.kind == "constant":
            if not 0 < float(self.value) <= 1:
                raise ValueError("probability must lie in (0, 1]")
        elif self.kind == "harmonic":
            if not float(self.value) > 0:
                raise ValueError("harmonic constant must be positive")
        elif self.kind == "custom":
            vals = tuple(float(v) for v in self.value)
            if not vals or not all(0 < v <= 1 for v in vals):
                raise ValueError("custom probabilities must be a nonempty list in (0, 1]")
            object.__setattr__(self, "value", vals)
        else:
            raise ValueError(f"unknown probability sequence {self.kind!r}")

    def prob(self, r: int) -> float:
        """Probability for round r (1-based); custom lists repeat their last entry."""
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "harmonic":
            return min(1.0, float(self.value) / r)
        vals = self.value
        return vals[min(r, len(vals)) - 1]

    def to_dict(self) -> dict:
        v = list(self.value) if self.kind == "custom" else self.value
        return {"kind": self.kind, "value": v, "cap": self.cap}


def interference_matrix(inst: Instance, powers: np.ndarray) -> np.ndarray:
    """I[j, i] = P(j) / d(s_j, r_i)^alpha, zero diagonal; BIG replaces infinite entries."""
    d = sr_matrix(inst)
    with np.errstate(divide="ignore"):
        m = powers[:, None] / d ** inst.params.alpha
    m[~np.isfinite(m)] = BIG
    np.fill_diagonal(m, 0.0)
    return m


def randomized_schedule(inst: Instance, tau_power: float, probs: ProbSequence, seed: int,
                        max_batch: int = 256, sparse_limit: float = 256.0) -> Schedule:
    """Every pending link transmits with the round's probability; it succeeds if SINR holds
    against that round's other transmitters, and then stays silent.

    One row of n uniforms is drawn per round whatever the state, so the outcome
    depends only on the seed.  Interference sums for a batch of upcoming rounds
    are computed by one matrix product assuming no successes; the batch is
    discarded from the first round with a success onwards.  Rounds with few
    expected transmitters are evaluated one at a time instead.
    """
    n = inst.n
    params = {"tau": tau_power, "probs": probs.to_dict(), "seed": seed}
    if n == 0:
        sched = Schedule("randomized", [], np.zeros(0), [], params)
        sched.rounds = 0
        return sched
    prm = inst.params
    powers = PowerScheme(tau_power).powers(inst)
    ls = lengths(inst)
    budget = powers / (prm.beta * ls ** prm.alpha) - prm.noise
    imat = interference_matrix(inst, powers)
    rng = np.random.default_rng(seed)
    draws = np.empty((0, n))
    pending = np.ones(n, dtype=bool)
    slots: list[list[int]] = []
    last_success = 0
    r = 1
    batch = 1
    while r <= probs.cap and pending.any():
        if draws.shape[0] < max_batch:
            draws = np.vstack([draws, rng.random((max_batch, n))])
        idx = np.flatnonzero(pending)
        if probs.prob(r) * len(idx) <= sparse_limit:
            # few transmitters: evaluate this round directly on their submatrix
            tx = idx[draws[0, idx] < probs.prob(r)]
            sums = imat[np.ix_(tx, tx)].sum(axis=0)
            won = tx[sums <= budget[tx]]
            used = 1
        else:
            b = min(batch, probs.cap - r + 1)
            p = np.array([probs.prob(r + t) for t in range(b)])
            tx = (draws[:b] < p[:, None]) & pending[None, :]
            sums = tx.astype(np.float64) @ imat
            won, used = np.zeros(0, dtype=np.intp), b
            for t in range(b):
                hit = np.flatnonzero(tx[t] & (sums[t] <= budget))
                if hit.size:
                    won, used = hit, t + 1
                    break
            batch = min(max_batch, batch * 2) if used == b else max(1, used)
        if won.size:
            slots.append(sorted(won.tolist()))
            pending[won] = False
            last_success = r + used - 1
        draws = draws[used:]
        r += used
    flags = [CAP_REACHED] if pending.any() else []
    sched = make_schedule(inst, slots, powers, "randomized", params, flags, partial=True, mode=EXACT
                          if prm.noise > 0 else NORMALIZED)
    sched.rounds = probs.cap if pending.any() else last_success
    return sched


# --- exact oracle ---------------------------------------------------------------------


def feasible_family(inst: Instance, power_mode: str = "fixed", tau: float = 0.0) -> np.ndarray:
    """Boolean table over bitmasks: is the subset feasible?  The empty set counts as feasible."""
    n = inst.n
    size = 1 << n
    ok = np.zeros(size, dtype=bool)
    ok[0] = True
    if power_mode == "fixed":
        a = affectance_matrix(inst, PowerScheme(tau))
        thr = 1.0 / inst.params.beta
        test = lambda ids: a[np.ix_(ids, ids)].sum(axis=0).max() <= thr  # noqa: E731
    elif power_mode == "optimal":
        mode = EXACT if inst.params.noise > 0 else NORMALIZED
        test = lambda ids: exists_power(inst, ids, mode).feasible  # noqa: E731
    else:
        raise ValueError(f"unknown power mode {power_mode!r}")
    bits = [1 << i for i in range(n)]
    for mask in sorted(range(1, size), key=lambda x: bin(x).count("1")):
        ids = [i for i in range(n) if mask & bits[i]]
        # feasibility is inherited by subsets, so every one-smaller subset must pass first
        if all(ok[mask ^ bits[i]] for i in ids):
            ok[mask] = len(ids) == 1 and power_mode == "fixed" or test(ids)
    return ok


def min_cover_size(ok: np.ndarray, n: int) -> int:
    """Fewest sets from a down-closed family covering all n elements.

    With f(X) the number of family members inside X, the number of k-tuples
    covering the ground set is sum_X (-1)^(n-|X|) f(X)^k; the answer is the
    first k where it is positive.
    """
    if n == 0:
        return 0
    f = ok.astype(np.int64)
    for i in range(n):
        step = 1 << i
        f = f.reshape(-1, 2, step)
        f[:, 1, :] += f[:, 0, :]
        f = f.reshape(-1)
    sizes = np.array([bin(x).count("1") for x in range(1 << n)])
    sign = np.where((n - sizes) % 2 == 0, 1, -1)
    coeff: dict[int, int] = {}
    for v, s in zip(f.tolist(), sign.tolist()):
        coeff[v] = coeff.get(v, 0) + s
    coeff = {v: c for v, c in coeff.items() if c}
    for k in range(1, n + 1):
        if sum(c * v ** k for v, c in coeff.items()) > 0:
            return k
    raise AssertionError("singletons must be feasible")


def exact_min_schedule(inst: Instance, power_mode: str = "optimal", tau: float = 0.0,
                       limit: int = EXACT_LIMIT) -> int:
    """Minimum number of feasible slots (fixed P_tau or per-slot optimal power)."""
    if inst.n > limit:
        raise TooLarge(f"exact scheduling limited to {limit} links, got {inst.n}")
    return min_cover_size(feasible_family(inst, power_mode, tau), inst.n)


def exact_capacity(inst: Instance, power_mode: str = "fixed", tau: float = 0.0,
                   limit: int = 20) -> tuple[list[int], float]:
    """Maximum-weight feasible subset by exhaustive enumeration."""
    if inst.n > limit:
        raise TooLarge(f"exact capacity limited to {limit} links, got {inst.n}")
    ok = feasible_family(inst, power_mode, tau)
    w = inst.weights
    best, best_w = 0, 0.0
    for mask in np.flatnonzero(ok).tolist():
        ids = [i for i in range(inst.n) if mask >> i & 1]
        tot = float(w[ids].sum()) if ids else 0.0
        if tot > best_w:
            best, best_w = mask, tot
    return [i for i in range(inst.n) if best >> i & 1], best_w


# --- gamma calibration ----------------------------------------------------------------


def gamma_grid(limit: float = GAMMA_LIMIT) -> list[float]:
    grid = [1.0, 1.5, 2.0, 3.0, 4.5]
    while grid[-1] * 1.5 <= limit:
        grid.append(grid[-1] * 1.5)
    return grid


def calibration_instance(rng: np.random.Generator, m: int, alpha: float, beta: float) -> Instance:
    """Random instance with varied size, density and length spread (n <= 64)."""
    from .generators import RandomConfig, gen_random

    n = int(rng.integers(2, 65))
    lmax = 10 ** rng.uniform(0, 3)
    side = lmax * n ** (1 / m) * 10 ** rng.uniform(-1, 1)
    cfg = RandomConfig(n=n, dim=m, side=side, lmin=1.0, lmax=lmax, seed=int(rng.integers(2**63)),
                       alpha=alpha, beta=beta)
    return gen_random(cfg)


def _classes_feasible(inst: Instance, cp: ConflictParams, powers: np.ndarray) -> bool:
    graph = build_graph(inst, cp)
    return all(check_feasible(inst, c, powers).feasible for c in color_classes(greedy_color(graph)))


@functools.lru_cache(maxsize=None)
def calibrate_gamma(alpha: float, m: int, delta: float, tau: float, trials: int = 200,
                    seed: int = 0, beta: float = 1.0) -> float:
    """Smallest grid gamma for which greedy color classes on random instances are P_tau-feasible."""
    if int(m) != m or m < 1:
        raise ValueError("calibration draws euclidean instances and needs an integer dimension m >= 1")
    interval = valid_tau_interval(alpha, m, delta)
    if interval is None or not interval[0] < tau < interval[1]:
        raise ValueError(f"tau={tau} is not inside the valid interval {interval}")
    rng = np.random.default_rng(seed)
    insts = [calibration_instance(rng, int(m), alpha, beta) for _ in range(trials)]
    scheme = PowerScheme(tau)
    pw = [scheme.powers(x) for x in insts]
    for gamma in gamma_grid():
        cp = ConflictParams(gamma, delta)
        if all(_classes_feasible(x, cp, p) for x, p in zip(insts, pw)):
            return gamma
    raise ValueError(f"no gamma up to {GAMMA_LIMIT} makes every color class feasible")
