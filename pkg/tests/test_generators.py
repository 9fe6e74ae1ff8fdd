import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinrsched.conflict import ConflictParams, independent
from sinrsched.formats import dumps, instance_to_dict
from sinrsched.generators import (
    ConstructionError,
    RandomConfig,
    WeakLinkConfig,
    default_tree_base,
    effective_inverse,
    effective_length,
    firstfit_tree_parents,
    gen_firstfit_tree,
    gen_general_metric,
    gen_random,
    gen_randomized_tree,
    gen_weighted_plane,
    general_metric_margin,
    is_weak,
    plane_heights,
    plane_levels,
    randomized_tree_layout,
    tree_fanout,
    verify_general_metric,
    weak_lengths,
    weak_ratio_band,
    weaken,
)
from sinrsched.model import SinrParams, delta, lengths, link_gap, sr_distance
from sinrsched.sinr import PowerScheme, affectance_matrix, check_feasible

from conftest import random_instance


def test_random_examples():
    assert gen_random(RandomConfig(n=0)).n == 0
    inst = gen_random(RandomConfig(n=200, lmin=2.0, lmax=3.0, seed=4))
    ls = lengths(inst)
    assert ls.min() >= 2.0 - 1e-12 and ls.max() <= 3.0 + 1e-12
    pts = inst.space.points[inst.senders]
    assert pts.min() >= 0 and pts.max() <= 100.0


def test_random_weights():
    inst = gen_random(RandomConfig(n=50, weights=("uniform", 2.0, 5.0), seed=1))
    assert inst.weights.min() >= 2.0 and inst.weights.max() <= 5.0
    assert np.all(gen_random(RandomConfig(n=5)).weights == 1.0)


def test_random_config_validation():
    for bad in (dict(n=-1), dict(n=1, side=0.0), dict(n=1, lmin=0.0), dict(n=1, lmin=3.0, lmax=2.0),
                dict(n=1, weights=("pareto",)), dict(n=1, weights=("uniform", 0.0, 1.0))):
        with pytest.raises(ValueError):
            RandomConfig(**bad)


@given(st.integers(0, 2**32), st.integers(1, 3))
def test_random_bit_identical_per_seed(seed, dim):
    cfg = RandomConfig(n=20, dim=dim, seed=seed)
    assert dumps(instance_to_dict(gen_random(cfg))) == dumps(instance_to_dict(gen_random(cfg)))


def test_firstfit_tree_examples():
    assert default_tree_base(0.0) == 17
    base = gen_firstfit_tree(0)
    assert base.n == 1 and lengths(base).tolist() == [1.0]
    assert gen_firstfit_tree(5).n == 32
    one = gen_firstfit_tree(1)
    # root length 17, leaf child placed at gap l_root^1 * l_child^0 = 17
    assert lengths(one).tolist() == [17.0, 1.0]
    assert sr_distance(one, 1, 0) == 17.0


@pytest.mark.parametrize("k,d", [(3, 0.0), (6, 0.0), (9, 0.0), (4, 0.3), (3, 0.5)])
def test_firstfit_tree_structure(k, d):
    inst = gen_firstfit_tree(k, d)
    x = default_tree_base(d)
    assert inst.n == 2 ** k
    assert delta(inst) == pytest.approx(float(x) ** k, rel=1e-12)
    parents = firstfit_tree_parents(k)
    assert len(parents) == inst.n and parents[0] == -1
    ls = lengths(inst)
    s = inst.space.points[inst.senders, 0]
    for v, p in enumerate(parents):
        if p >= 0:
            assert ls[v] < ls[p]
            assert s[v] > s[p] + ls[p]  # children sit to the right of the parent's receiver


def test_firstfit_tree_first_child_hits_parent_exactly():
    inst = gen_firstfit_tree(6, 0.0)
    a = affectance_matrix(inst, PowerScheme(0.0))
    parents = firstfit_tree_parents(6)
    seen = set()
    for v, p in enumerate(parents):
        if p >= 0 and p not in seen:
            seen.add(p)
            assert a[v, p] == pytest.approx(1.0, rel=1e-12)


def test_firstfit_tree_rejects_small_base():
    with pytest.raises(ConstructionError):
        gen_firstfit_tree(3, 0.0, x=16)
    with pytest.raises(ValueError):
        gen_firstfit_tree(-1)


def test_tree_fanout_fixed_point():
    f = tree_fanout(1, 5 / 3, 64)
    n = 64 * (1 + f)
    assert abs(f - math.ceil(math.log2(n) ** (5 / 3))) <= 1


def test_randomized_tree_sizes():
    inst, lay = randomized_tree_layout(1, 1.0, 16, 0.5, fanout=2)
    assert inst.n == 16 * (1 + 2)
    assert lay.lengths[-1] == 1.0
    assert lay.lengths[0] == pytest.approx(2 ** 2 * math.log2(48) ** 2)
    # copies are co-located
    assert lengths(inst)[0] == lengths(inst)[15] and link_gap(inst, 0, 1) == 0.0


def test_randomized_tree_single_copy_size():
    inst = gen_randomized_tree(1, 1.0, 1, 0.3, fanout=3)
    assert inst.n == 1 + 3


@pytest.mark.parametrize("M,f", [(16, 2), (64, 3)])
def test_randomized_tree_parent_child_conflict_predicate(M, f):
    d = 0.5
    inst, lay = randomized_tree_layout(1, 1.0, M, d, fanout=f)
    for v, p in enumerate(lay.parents):
        if p >= 0:
            assert not independent(inst, ConflictParams(1.0, d), v * M, p * M)


@pytest.mark.parametrize("levels,b,M,d,fan", [(1, 5 / 3, 64, 0.3, None), (1, 1.0, 16, 0.5, 2),
                                               (2, 1.0, 1, 0.3, 3)])
def test_randomized_tree_children_block_parent(levels, b, M, d, fan):
    inst, lay = randomized_tree_layout(levels, b, M, d, fanout=fan)
    a = affectance_matrix(inst, PowerScheme(d))
    for v, p in enumerate(lay.parents):
        if p >= 0:
            assert not check_feasible(inst, [v * M, p * M], PowerScheme(d)).feasible
            assert a[v * M, p * M] > 1.0


def test_randomized_tree_unsatisfiable_size():
    with pytest.raises(ConstructionError):
        gen_randomized_tree(1, 1.0, 1, 0.5)


def test_weighted_plane_examples():
    base = gen_weighted_plane(0, 2)
    assert base.n == 1 and base.weights.tolist() == [1.0]
    assert base.space.points.tolist() == [[0.0, 0.0], [1.0, 0.0]]
    one = gen_weighted_plane(1, 2)
    assert one.n == 5
    assert lengths(one)[0] == 6.0 and one.weights[0] == 4.0
    with pytest.raises(ValueError):
        gen_weighted_plane(1, 1)


@pytest.mark.parametrize("t,q", [(1, 2), (2, 2), (2, 3), (3, 2)])
def test_weighted_plane_recursion(t, q):
    inst = gen_weighted_plane(t, q)
    n = 1
    for _ in range(t):
        n = 1 + q * q * n
    assert inst.n == n
    h = plane_heights(t, q)
    assert all(h[s] <= 2 * (3 * q) ** s for s in range(t + 1))
    for k, ids in plane_levels(inst, q).items():
        assert len(ids) == q ** (2 * (t - k))
        assert inst.weights[ids].sum() == pytest.approx(float(q) ** (2 * t))


def test_weighted_plane_separation_is_nonstrict():
    # neighbouring grid copies sit exactly at distance l_max, so strict separation fails on equality
    inst = gen_weighted_plane(1, 2)
    gaps = [link_gap(inst, i, j) / max(lengths(inst)[[i, j]])
            for i in range(inst.n) for j in range(i + 1, inst.n)]
    assert min(gaps) == pytest.approx(1.0, rel=1e-12)


def test_general_metric_examples():
    one = gen_general_metric(1)
    assert one.n == 1 and one.weights.tolist() == [1.0]
    three = gen_general_metric(3)
    assert three.n == 21 and three.weights.sum() == pytest.approx(3.0)
    t1 = 6 ** (1 / 3)
    assert t1 == pytest.approx(1.8171, abs=1e-4)
    assert sr_distance(three, 0, 1) == pytest.approx(t1 + (6 * 4) ** (1 / 3))
    assert sr_distance(three, 1, 2) == pytest.approx(2 * (6 * 4) ** (1 / 3))
    assert np.all(lengths(three) == 1.0)
    with pytest.raises(ValueError):
        gen_general_metric(2, gamma_m=5.0)


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_general_metric_witness(K):
    inst = gen_general_metric(K)
    assert inst.n == (4 ** K - 1) // 3
    assert verify_general_metric(inst, K)
    assert general_metric_margin(inst, K) < 1.0


def weak_source(seed):
    return random_instance(20, seed, lmin=0.5, lmax=5.0, noise=0.2)


def test_effective_length_inverse():
    rng = np.random.default_rng(0)
    lmax, alpha = 7.0, 3.0
    # the transform feeds y in [l_max, delta * l_max]; past about 10 l_max float64
    # cancellation in 1 - (f/l_max)^alpha alone exceeds 1e-12
    y = rng.uniform(0.01, 10 * lmax, 1000)
    back = effective_length(effective_inverse(y, lmax, alpha), lmax, alpha)
    assert np.max(np.abs(back - y) / y) <= 1e-12
    assert np.all(effective_inverse(y, lmax, alpha) < lmax)
    x = rng.uniform(0.01, lmax * 0.999, 1000)
    assert np.max(np.abs(effective_inverse(effective_length(x, lmax, alpha), lmax, alpha) - x) / x) <= 1e-12


@given(st.integers(0, 10_000), st.floats(0.0, 0.9))
def test_weaken_outputs_weak_links(seed, tau):
    src = weak_source(seed)
    cfg = WeakLinkConfig(50.0, tau)
    out = weaken(src, cfg)
    lmax, lhat = weak_lengths(src, 50.0)
    ls = lengths(out)
    assert np.all(ls < lmax) and np.all(ls >= lhat * (1 - 1e-12))
    assert np.all(is_weak(out, 50.0))
    shortest = int(np.argmin(lengths(src)))
    assert ls[shortest] == pytest.approx(lhat, rel=1e-12)


def test_weaken_band_is_bounded():
    out = weaken(weak_source(1), WeakLinkConfig(50.0, 0.5))
    assert 1.0 <= weak_ratio_band(out, WeakLinkConfig(50.0, 0.5)) <= 8.0


def test_weaken_needs_noise():
    with pytest.raises(ValueError):
        weaken(random_instance(5, 0), WeakLinkConfig(10.0))
    with pytest.raises(ValueError):
        WeakLinkConfig(0.0)


@pytest.mark.parametrize("make", [
    lambda: gen_firstfit_tree(5, 0.0),
    lambda: gen_randomized_tree(1, 1.0, 16, 0.5, fanout=2),
    lambda: gen_weighted_plane(2, 2),
    lambda: gen_general_metric(3),
    lambda: weaken(weak_source(3), WeakLinkConfig(50.0, 0.5)),
    lambda: gen_random(RandomConfig(n=30, seed=9)),
])
def test_generators_bit_identical(make):
    assert dumps(instance_to_dict(make())) == dumps(instance_to_dict(make()))


def test_sinr_params_passthrough():
    inst = gen_firstfit_tree(2, params=SinrParams(4.0, 2.0, 0.0))
    assert inst.params.alpha == 4.0
