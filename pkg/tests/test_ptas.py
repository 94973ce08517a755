import math
import random
from itertools import permutations, product
from fractions import Fraction as F

import pytest

from pandora.committing import best_committing
from pandora.exact import NEG, solve
from pandora.model import BudgetExceeded, random_instance
from pandora.ptas import (
    INF,
    build_ST,
    build_scheme,
    bucket_partition,
    enumerate_supports,
    eval_DTP,
    eval_ST,
    eval_TP,
    identity_scheme,
    round_kappa,
    round_threshold,
    round_value,
    run_ptas,
    solve_ST_exhaustive,
    threshold_grid,
)
from pandora.twophase import IndexThresholdSequence, best_two_phase, eval_two_phase, ordered_subsets
from pandora.weitzman import sigmas, weitz_value

from conftest import A, B, suite

Q, E = F(1, 4), F(31, 20)


def test_example_scheme(example):
    sch = build_scheme(example, B, (A,), Q, E)
    assert sch.threshold_grid == (0, F(31, 80), F(31, 40), F(93, 80), F(31, 20))
    assert sch.unit == F(31, 320)
    assert sch.v_upper == F(38, 5)  # E[max v] = 19/10
    assert set(sch.threshold_grid) <= set(sch.value_support)
    for w in sch.value_support:
        assert w <= sch.v_upper
        if w not in sch.threshold_grid:
            assert (w / sch.unit).denominator == 1
    assert len(sch.buckets) <= math.floor(1 / Q**2) + 1


def test_single_position_order_is_one_bucket(example):
    assert bucket_partition(example, (), Q, E) == [(1, 1)]


def test_round_kappa(example):
    sch = build_scheme(example, B, (A,), Q, E)
    assert round_kappa(F(9, 5), sch) == F(279, 160)
    assert F(279, 160) <= F(9, 5) < F(279, 160) + sch.unit
    assert round_kappa(7 * sch.unit, sch) == 7 * sch.unit


def test_round_value(example):
    sch = build_scheme(example, B, (A,), Q, E)
    assert round_value(sch.v_upper + 1, sch) == INF
    assert round_value(F(0), sch) == 0
    for w in sch.value_support:
        assert round_value(w, sch) == w


def test_round_threshold(example):
    sch = build_scheme(example, B, (A,), Q, E)
    assert round_threshold(F(5, 9), sch) == F(31, 80)
    assert round_threshold(NEG, sch) is NEG
    assert round_threshold(F(100), sch) == E


def test_epsilon_range(example):
    with pytest.raises(ValueError):
        build_scheme(example, B, (A,), F(1, 3), E)
    with pytest.raises(ValueError):
        build_scheme(example, B, (A,), F(0), E)


def test_example_tp_dtp(example):
    ord_ = IndexThresholdSequence(B, (A,), (F(5, 9),))
    assert eval_TP(example, ord_) == F(31, 20)
    assert eval_TP(example, IndexThresholdSequence(B)) == 1
    grid_ord = IndexThresholdSequence(B, (A,), (F(31, 80),))
    sch = build_scheme(example, B, (A,), Q, E)
    d = eval_DTP(example, grid_ord, sch)
    assert eval_TP(example, grid_ord) - 2 * Q * E <= d <= eval_TP(example, grid_ord)
    assert eval_DTP(example, IndexThresholdSequence(B), sch) == 1
    with pytest.raises(ValueError, match="grid"):
        eval_DTP(example, ord_, sch)
    with pytest.raises(ValueError, match="sigma"):
        eval_TP(example, IndexThresholdSequence(B, (A,), (F(2),)))


def test_identity_scheme_is_exact(example):
    sch = identity_scheme(example, Q, E)
    for t in sch.threshold_grid:
        if t > F(9, 5):
            continue
        ord_ = IndexThresholdSequence(B, (A,), (t,))
        assert eval_DTP(example, ord_, sch) == eval_TP(example, ord_)


def test_st_primitives(example):
    sch = build_scheme(example, B, (A,), Q, E)
    prog = build_ST(example, B, sch)
    tau = F(31, 80)
    assert prog.f(0, A, tau, F(0)) == 0 and prog.g(0, A, tau, F(0)) == 0
    assert prog.f(0, A, tau, F(2)) == round_value(F(2), sch)
    V = F(31, 40)
    assert prog.f(V, A, tau, F(2)) == max(V, round_kappa(F(9, 5), sch))
    assert prog.g(V, A, tau, F(2)) == round_kappa(F(9, 5), sch) - V
    assert prog.h(0) == 1 and prog.h(V) == 0
    assert prog.actions[B] == ()
    assert all(t <= F(9, 5) for t in prog.actions[A])


def test_st_solution_matches_dtp(example):
    sch = build_scheme(example, B, (A,), Q, E)
    ord_, u = solve_ST_exhaustive(build_ST(example, B, sch))
    assert u == eval_DTP(example, ord_, sch) == eval_ST(build_ST(example, B, sch), ord_)


def test_st_one_box_plus_backup(example):
    # only two kinds of sequence exist: claim B at once, or try A first
    sch = build_scheme(example, B, (A,), Q, E)
    prog = build_ST(example, B, sch)
    cands = [IndexThresholdSequence(B)] + [
        IndexThresholdSequence(B, (A,), (t,)) for t in prog.actions[A]
    ]
    best = max(eval_DTP(example, c, sch) for c in cands)
    assert solve_ST_exhaustive(prog)[1] == best


def test_enumerate_supports_pruned(example):
    got = enumerate_supports(example, Q, E)
    want = []
    for order in ordered_subsets(2):
        w = build_scheme(example, order[-1], order[:-1], Q, E).value_support
        if w not in want:
            want.append(w)
    assert got == want


def test_enumerate_supports_budget():
    inst = random_instance(10, 3, 1)
    with pytest.raises(BudgetExceeded, match=r"\d+ support candidates"):
        enumerate_supports(inst, F(1, 10), best_committing(inst)[1], prune=False)


def test_enumerate_supports_tiny_grid(example):
    # opt_ref so large that the unit exceeds V_U
    assert enumerate_supports(example, Q, F(1000), prune=False) == [(F(0),)]


def test_pipeline_example(example):
    r = run_ptas(example, Q)
    assert r.utility >= E - 3 * Q * E
    assert r.utility == eval_two_phase(example, r.policy)
    rep = r.report()
    assert set(rep) == {"opt_ref", "epsilon", "candidates_tried", "best_policy", "utility"}
    assert run_ptas(example, Q, fine=True).utility == E


def test_pipeline_without_oracle(example):
    r = run_ptas(example, Q, use_oracle=False)
    assert r.opt_ref == F(7, 5)
    assert r.utility >= E - 3 * Q * E


def test_pipeline_free_inspection():
    inst = random_instance(3, 3, 5)
    free = type(inst)(tuple(type(b)(b.dist, F(0)) for b in inst.boxes))
    pol, u = run_ptas(free, Q).policy, run_ptas(free, Q).utility
    assert pol.pure_weitzman and u == solve(free).opt


# ---------------------------------------------------------------------------
# randomized identities


def _random_grid_ord(inst, eps, opt, rng):
    sg = sigmas(inst)
    b = rng.randrange(inst.n)
    pool = [i for i in range(inst.n) if i != b and sg[i] >= 0]
    rng.shuffle(pool)
    order = tuple(pool[: rng.randint(0, len(pool))])
    grid = threshold_grid(eps, opt)
    th = tuple(rng.choice([w for w in grid if w <= sg[i]]) for i in order)
    return IndexThresholdSequence(b, order, th)


@pytest.mark.parametrize("k", range(40))
def test_chain_identities(k):
    inst = random_instance(2 + k % 3, 3, 2000 + k)
    opt = solve(inst).opt
    if opt == 0:
        return
    eps = (F(1, 4), F(1, 5))[k % 2]
    rng = random.Random(k)
    ord_ = _random_grid_ord(inst, eps, opt, rng)
    sch = build_scheme(inst, ord_.backup, ord_, eps, opt)
    tp = eval_TP(inst, ord_)
    dtp = eval_DTP(inst, ord_, sch)
    assert tp == eval_two_phase(inst, ord_.to_policy())
    assert eval_ST(build_ST(inst, ord_.backup, sch), ord_) == dtp
    assert tp - 2 * eps * opt <= dtp <= tp


@pytest.mark.parametrize("k", range(20))
def test_support_gaps_within_buckets(k):
    inst = random_instance(2 + k % 3, 3, 2100 + k)
    opt = solve(inst).opt
    if opt == 0:
        return
    eps = (F(1, 4), F(1, 5))[k % 2]
    order = tuple(range(inst.n - 1))
    sch = build_scheme(inst, inst.n - 1, order, eps, opt)
    masks = [inst.full_mask & ~sum(1 << i for i in order[:r]) for r in range(len(order) + 1)]

    def d(mask, w):
        return weitz_value(inst, mask, w) - w

    for bk in sch.buckets:
        for r in range(bk.first, bk.last + 1):
            for lo, hi in zip(bk.support, bk.support[1:]):
                assert d(masks[r - 1], lo) - d(masks[r - 1], hi) <= eps * (1 - 2 * eps) * opt


@pytest.mark.parametrize("inst", suite(12, 2, 4, base=2200))
def test_solver_is_best_over_grid_sequences(inst):
    opt = solve(inst).opt
    if opt == 0:
        return
    sch = build_scheme(inst, 0, tuple(range(1, inst.n)), Q, opt)
    prog = build_ST(inst, 0, sch)
    ord_, u = solve_ST_exhaustive(prog)
    assert u == eval_DTP(inst, ord_, sch)
    # brute force over every sequence in the action space
    best = prog.h(F(0))
    for k in range(1, inst.n):
        for order in permutations(range(1, inst.n), k):
            for th in product(*(prog.actions[i] for i in order)):
                best = max(best, eval_ST(prog, IndexThresholdSequence(0, order, th)))
    assert u == best


@pytest.mark.parametrize("inst", suite(12, 2, 4, base=2300))
def test_threshold_rounding_loss(inst):
    t = solve(inst)
    pol, u = best_two_phase(inst, t)
    if pol.pure_weitzman or t.opt == 0:
        return
    for eps in (F(1, 4), F(1, 5)):
        sch = build_scheme(inst, pol.order[-1], pol.order[:-1], eps, t.opt)
        rounded = type(pol)(pol.order, tuple(round_threshold(x, sch) for x in pol.thresholds))
        assert eval_two_phase(inst, rounded) >= u - eps * t.opt


@pytest.mark.parametrize("k", range(20))
def test_identity_scheme_exact_on_random_sequences(k):
    inst = random_instance(2 + k % 3, 3, 2400 + k)
    opt = solve(inst).opt
    if opt == 0:
        return
    sch = identity_scheme(inst, Q, opt)
    rng = random.Random(k)
    sg = sigmas(inst)
    b = rng.randrange(inst.n)
    order = tuple(i for i in range(inst.n) if i != b and sg[i] >= 0)
    th = tuple(rng.choice([w for w in sch.threshold_grid if w <= sg[i]]) for i in order)
    ord_ = IndexThresholdSequence(b, order, th)
    assert eval_DTP(inst, ord_, sch) == eval_TP(inst, ord_)
