import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinrsched.conflict import ConflictParams, build_graph, exact_chromatic
from sinrsched.generators import gen_firstfit_tree
from sinrsched.model import SinrParams, build_instance, length_classes
from sinrsched.schedulers import (
    CAP_REACHED,
    GAMMA_TOO_SMALL,
    LowerBoundWarning,
    ProbSequence,
    TooLarge,
    VerificationError,
    calibrate_gamma,
    exact_capacity,
    exact_min_schedule,
    feasible_family,
    first_fit,
    gamma_grid,
    length_class_schedule,
    make_schedule,
    min_cover_size,
    randomized_schedule,
    reverify,
    schedule_conflict,
    wcapacity_conflict,
)
from sinrsched.sinr import PowerScheme, check_feasible, exists_power

from conftest import random_instance

EMPTY = build_instance(np.zeros((0, 1)), np.zeros((0, 1)))
SINGLE = build_instance([[0.0]], [[1.0]])
TWINS = build_instance([[0.0], [0.0]], [[1.0], [1.0]], weights=[5.0, 3.0])


def spread(n, gap=1000.0):
    return build_instance([[gap * i] for i in range(n)], [[gap * i + 1] for i in range(n)])


def stacked(n, beta=2.0):
    # co-located copies are feasible at equality when beta = 1, so use beta > 1
    return build_instance([[0.0]] * n, [[1.0]] * n, params=SinrParams(beta=beta))


def test_colocated_pair_feasible_at_equality_when_beta_is_one():
    inst = stacked(2, beta=1.0)
    rep = check_feasible(inst, [0, 1], PowerScheme(0.0))
    assert rep.feasible and rep.margin == 0.0


def test_make_schedule_rejects_infeasible_slot():
    with pytest.raises(VerificationError):
        make_schedule(stacked(2), [[0, 1]], PowerScheme(0.0), "x")
    with pytest.raises(VerificationError):
        make_schedule(spread(2), [[0]], PowerScheme(0.0), "x")


def test_conflict_examples():
    assert schedule_conflict(EMPTY, 1.5, 0.9, 0.8).size == 0
    assert schedule_conflict(SINGLE, 1.5, 0.9, 0.8).slots == [[0]]


def test_conflict_tau_outside_interval_names_it():
    inst = random_instance(5, 0)
    with pytest.raises(ValueError, match=r"interval \(0\.7, 0\.933333\)"):
        schedule_conflict(inst, 1.5, 0.9, 0.5)
    with pytest.raises(ValueError, match="empty"):
        schedule_conflict(inst, 1.5, 0.5, 0.8)


def test_conflict_warns_when_beta_at_most_one():
    with pytest.warns(LowerBoundWarning):
        schedule_conflict(SINGLE, 1.5, 0.9, 0.8)


def test_conflict_flags_small_gamma():
    # tiny gamma leaves almost everything in one colour class, which cannot be feasible
    inst = random_instance(30, 3, side=5.0)
    sched = schedule_conflict(inst, 1e-3, 0.9, 0.8)
    assert GAMMA_TOO_SMALL in sched.flags
    assert reverify(inst, sched)


@given(st.integers(0, 10_000))
def test_conflict_slots_feasible_and_near_chromatic(seed):
    inst = random_instance(14, seed, side=14.0, lmax=6.0)
    sched = schedule_conflict(inst, 1.5, 0.9, 0.8)
    assert reverify(inst, sched)
    chi = exact_chromatic(build_graph(inst, ConflictParams(1.5, 0.9)))
    assert sched.size <= 4 * chi


def test_first_fit_examples():
    assert first_fit(spread(6)).size == 1
    assert first_fit(stacked(4)).size == 4
    assert first_fit(EMPTY).size == 0
    with pytest.raises(ValueError):
        first_fit(spread(3), order=[0, 0, 1])


def test_first_fit_custom_order():
    inst = random_instance(20, 4, side=10.0)
    order = list(range(19, -1, -1))
    assert reverify(inst, first_fit(inst, 0.5, order))


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_baselines_always_verified(seed, tau):
    inst = random_instance(25, seed, side=15.0, lmin=0.5, lmax=12.0)
    for sched in (first_fit(inst, tau), length_class_schedule(inst, tau)):
        assert reverify(inst, sched)
        assert not sched.unscheduled


def test_first_fit_on_tree_grows():
    slots = [first_fit(gen_firstfit_tree(k, 0.0)).size for k in (2, 4, 6)]
    assert slots == sorted(slots) and slots[-1] >= 6 / 2


def test_length_class_examples():
    inst = random_instance(15, 2, lmin=1.0, lmax=1.9)
    assert length_class_schedule(inst).slots == first_fit(inst).slots
    xs = [0.0]
    for k in range(11):
        xs.append(xs[-1] + 2 ** k + 10 ** 6)
    ls = [2.0 ** k for k in range(11)]
    wide = build_instance([[x] for x in xs[:11]], [[x + l] for x, l in zip(xs, ls)])
    sched = length_class_schedule(wide)
    assert len(length_classes(wide)) == 11
    assert sched.size == 11


def test_prob_sequence():
    assert ProbSequence("constant", 0.25).prob(7) == 0.25
    h = ProbSequence("harmonic", 2.0)
    assert [h.prob(r) for r in (1, 2, 4)] == [1.0, 1.0, 0.5]
    c = ProbSequence("custom", [0.5, 0.25])
    assert [c.prob(r) for r in (1, 2, 3)] == [0.5, 0.25, 0.25]
    for bad in (("constant", 0.0), ("constant", 1.5), ("harmonic", -1.0), ("custom", []), ("other", 1)):
        with pytest.raises(ValueError):
            ProbSequence(*bad)
    with pytest.raises(ValueError):
        ProbSequence("constant", 0.5, cap=0)


def test_randomized_examples():
    sched = randomized_schedule(SINGLE, 0.0, ProbSequence("constant", 1.0, 10), 0)
    assert sched.slots == [[0]] and sched.rounds == 1
    sched = randomized_schedule(stacked(2), 0.0, ProbSequence("constant", 1.0, 50), 0)
    assert sched.slots == [] and sched.rounds == 50 and CAP_REACHED in sched.flags
    assert randomized_schedule(EMPTY, 0.0, ProbSequence("constant", 0.5), 0).rounds == 0


def test_randomized_single_link_geometric():
    rounds = [randomized_schedule(SINGLE, 0.0, ProbSequence("constant", 0.25, 500), s).rounds
              for s in range(400)]
    assert np.mean(rounds) == pytest.approx(4.0, rel=0.2)


@given(st.integers(0, 10_000), st.integers(0, 50))
def test_randomized_reproducible_and_verified(inst_seed, seed):
    inst = random_instance(30, inst_seed, side=12.0, noise=0.001)
    probs = ProbSequence("harmonic", 2.0, 300)
    a = randomized_schedule(inst, 0.5, probs, seed)
    b = randomized_schedule(inst, 0.5, probs, seed)
    assert a.slots == b.slots and a.rounds == b.rounds
    assert reverify(inst, a, mode="exact")
    assert sorted(i for s in a.slots for i in s) + a.unscheduled == sorted(range(30)) or \
        sorted([i for s in a.slots for i in s] + a.unscheduled) == list(range(30))


def test_randomized_dense_and_sparse_paths_agree():
    inst = random_instance(300, 9, side=60.0)
    probs = ProbSequence("constant", 0.9, 400)
    dense = randomized_schedule(inst, 0.0, probs, 5, sparse_limit=0.0)
    sparse = randomized_schedule(inst, 0.0, probs, 5, sparse_limit=1e9)
    assert dense.slots == sparse.slots and dense.rounds == sparse.rounds


def naive_randomized(inst, tau, probs, seed):
    rng = np.random.default_rng(seed)
    P = PowerScheme(tau)
    pending = set(range(inst.n))
    slots, last = [], 0
    r = 1
    draws = np.empty((0, inst.n))
    while r <= probs.cap and pending:
        if draws.shape[0] == 0:
            draws = rng.random((256, inst.n))
        row, draws = draws[0], draws[1:]
        tx = [i for i in sorted(pending) if row[i] < probs.prob(r)]
        won = [i for i in tx if check_feasible(inst, tx, P).per_link[tx.index(i)] <= 1.0]
        if won:
            slots.append(won)
            pending -= set(won)
            last = r
        r += 1
    return slots, (probs.cap if pending else last)


@pytest.mark.parametrize("seed", range(4))
def test_randomized_matches_naive_simulation(seed):
    inst = random_instance(40, seed, side=15.0)
    probs = ProbSequence("constant", 0.3, 600)
    sched = randomized_schedule(inst, 0.0, probs, seed)
    slots, rounds = naive_randomized(inst, 0.0, probs, seed)
    assert sched.slots == slots and sched.rounds == rounds


def test_exact_examples():
    assert exact_min_schedule(spread(5)) == 1
    assert exact_min_schedule(stacked(4)) == 4
    assert exact_min_schedule(EMPTY) == 0
    with pytest.raises(TooLarge):
        exact_min_schedule(spread(16))


def brute_min_cover(ok, n):
    fam = [m for m in range(1, 1 << n) if ok[m]]
    full = (1 << n) - 1
    for k in range(1, n + 1):
        for combo in itertools.combinations(fam, k):
            acc = 0
            for m in combo:
                acc |= m
            if acc == full:
                return k
    return n


@pytest.mark.parametrize("seed", range(8))
def test_min_cover_against_brute_force(seed):
    inst = random_instance(7, seed, side=5.0)
    ok = feasible_family(inst, "fixed", 0.0)
    assert min_cover_size(ok, 7) == brute_min_cover(ok, 7)


@pytest.mark.parametrize("seed", range(6))
def test_feasible_family_matches_direct_checks(seed):
    inst = random_instance(6, seed, side=5.0)
    fixed = feasible_family(inst, "fixed", 0.5)
    opt = feasible_family(inst, "optimal")
    for mask in range(1, 64):
        ids = [i for i in range(6) if mask >> i & 1]
        assert fixed[mask] == check_feasible(inst, ids, PowerScheme(0.5)).feasible
        assert opt[mask] == exists_power(inst, ids).feasible


@pytest.mark.parametrize("seed", range(6))
def test_exact_dominated_by_heuristics(seed):
    inst = random_instance(8, seed, side=8.0)
    opt = exact_min_schedule(inst, "optimal")
    assert opt <= exact_min_schedule(inst, "fixed", 0.8)
    assert opt <= schedule_conflict(inst, 1.5, 0.9, 0.8).size
    assert opt <= first_fit(inst).size


def test_wcapacity_examples():
    res = wcapacity_conflict(build_instance([[0.0]], [[1.0]], weights=[7.0]), 1.5, 0.9, 0.8)
    assert res.links == [0] and res.weight == 7.0
    assert wcapacity_conflict(TWINS, 1.5, 0.9, 0.8).links == [0]
    assert wcapacity_conflict(EMPTY, 1.5, 0.9, 0.8).links == []


@pytest.mark.parametrize("seed", range(6))
def test_wcapacity_feasible_and_compared_with_exact(seed):
    inst = random_instance(10, seed, side=10.0, weights=("uniform", 1.0, 4.0))
    res = wcapacity_conflict(inst, 1.5, 0.9, 0.8)
    assert check_feasible(inst, res.links, PowerScheme(0.8)).feasible
    _, best = exact_capacity(inst, "fixed", 0.8)
    assert res.weight <= best + 1e-9
    assert res.weight * max(1, res.k_emp) * 4 >= best


def test_schedule_serialization():
    d = first_fit(spread(3)).to_dict()
    assert d == {"algorithm": "first-fit", "params": {"tau": 0.0}, "slots": [[0, 1, 2]],
                 "verified": True, "flags": []}


def test_gamma_grid():
    grid = gamma_grid()
    assert grid[:5] == [1.0, 1.5, 2.0, 3.0, 4.5]
    assert grid[-1] <= 512 < grid[-1] * 1.5


def test_calibration_small_run():
    g = calibrate_gamma(3.0, 1, 0.9, 0.8, trials=20, seed=3)
    assert g >= 1 and g in gamma_grid()
    assert calibrate_gamma(3.0, 1, 0.9, 0.8, trials=20, seed=3) == g
    assert calibrate_gamma(3.0, 1, 0.9, 0.8, trials=20, seed=3, beta=2.0) >= g
    with pytest.raises(ValueError):
        calibrate_gamma(3.0, 1.5, 0.9, 0.8, trials=5)
    with pytest.raises(ValueError):
        calibrate_gamma(3.0, 1, 0.9, 0.2, trials=5)


def test_beta_affects_first_fit():
    inst = random_instance(30, 1, side=12.0)
    hard = inst.with_params(beta=4.0)
    assert first_fit(hard).size >= first_fit(inst).size
    assert hard.params == SinrParams(3.0, 4.0, 0.0)
