from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pandora.exact import NEG, exceeds, solve, threshold_of_set
from pandora.model import Close, Instance, Open, State, random_instance
from pandora.twophase import (
    IndexThresholdSequence,
    TwoPhasePolicy,
    best_two_phase,
    compute_thresholds,
    eval_two_phase,
    eval_two_phase_running_max,
    stage_non_exposed_utility,
    two_phase_action,
)
from pandora.weitzman import sigmas, weitz_value

from conftest import A, B, instances, suite


def test_thresholds_example(example):
    t = solve(example)
    pol = compute_thresholds(example, t, [A, B])
    assert pol.thresholds == (F(5, 9),)
    rev = compute_thresholds(example, t, [B, A])
    assert rev.thresholds == (threshold_of_set(example, t, 1 << A),)
    assert compute_thresholds(example, t, [B]).thresholds == ()
    with pytest.raises(ValueError, match="duplicate"):
        compute_thresholds(example, t, [A, A])


def test_eval_example(example):
    pol = TwoPhasePolicy((A, B), (F(5, 9),))
    assert eval_two_phase(example, pol) == F(31, 20)
    assert eval_two_phase(example, TwoPhasePolicy.weitzman()) == F(131, 100)
    assert eval_two_phase(example, TwoPhasePolicy((B,), ())) == 1


def test_actions_example(example):
    pol = TwoPhasePolicy((A, B), (F(5, 9),))
    start = State(0b11, F(0))
    assert two_phase_action(example, pol, start, False) == Open(A)
    assert pol.crossed([(A, F(2))])
    assert two_phase_action(example, pol, State(0b10, F(2)), True) == Open(B)
    assert not pol.crossed([(A, F(0))])
    assert two_phase_action(example, pol, State(0b10, F(0)), False) == Close(B)


def test_stage_non_exposed_example(example):
    assert stage_non_exposed_utility(example, IndexThresholdSequence(B, (A,), (F(5, 9),))) == F(31, 20)
    assert stage_non_exposed_utility(example, IndexThresholdSequence(B)) == 1
    at_sigma = IndexThresholdSequence(B, (A,), (F(9, 5),))
    assert stage_non_exposed_utility(example, at_sigma) == eval_two_phase(example, at_sigma.to_policy())
    with pytest.raises(ValueError, match="step 1"):
        stage_non_exposed_utility(example, IndexThresholdSequence(B, (A,), (F(2),)))


def test_best_example(example, point):
    pol, u = best_two_phase(example)
    assert pol.order == (A, B) and u == F(31, 20)
    pol, u = best_two_phase(point)
    assert pol.order == (0,) and u == 10


def test_free_inspection_gives_weitzman():
    inst = random_instance(3, 3, 11)
    free = Instance(tuple(type(b)(b.dist, F(0)) for b in inst.boxes))
    # canonical policy keeps nothing in reserve; a point mass could be
    # claimed at no loss, so some other optimal policy might
    assert not solve(free).uses_backup(free.full_mask, F(0))
    pol, u = best_two_phase(free)
    assert pol.pure_weitzman and u == solve(free).opt


def test_policy_json_round_trip():
    pol = TwoPhasePolicy((0, 2, 1), (F(5, 9), NEG))
    assert pol.to_dict() == {"pure_weitzman": False, "order": [0, 2, 1], "thresholds": ["5/9", "NEG"]}
    assert TwoPhasePolicy.from_json(pol.to_json()) == pol
    assert TwoPhasePolicy.from_json(TwoPhasePolicy.weitzman().to_json()).pure_weitzman


def test_policy_validation():
    with pytest.raises(ValueError):
        TwoPhasePolicy((0, 1), ())
    with pytest.raises(ValueError):
        TwoPhasePolicy((0, 0), (F(1),))
    with pytest.raises(ValueError):
        IndexThresholdSequence(0, (0,), (F(1),))


@st.composite
def stage_non_exposed(draw, inst):
    sg = sigmas(inst)
    b = draw(st.integers(0, inst.n - 1))
    pool = [i for i in range(inst.n) if i != b]
    order = draw(st.permutations(pool))
    order = order[: draw(st.integers(0, len(order)))]
    th = []
    for i in order:
        if sg[i] < 0:
            th.append(NEG)
        else:
            frac = st.builds(lambda q, s=sg[i]: s * q, st.fractions(0, 1))
            th.append(draw(st.one_of(st.just(NEG), st.just(sg[i]), frac)))
    return IndexThresholdSequence(b, tuple(order), tuple(th))


@settings(max_examples=80, deadline=None)
@given(instances(max_n=4), st.data())
def test_cost_free_form_equals_recurrence(inst, data):
    ord_ = data.draw(stage_non_exposed(inst))
    assert stage_non_exposed_utility(inst, ord_) == eval_two_phase(inst, ord_.to_policy())


@pytest.mark.parametrize("inst", suite(25, 2, 4, base=300))
def test_continuation_equals_weitz_at_threshold(inst):
    t = solve(inst)
    pol, _ = best_two_phase(inst, t)
    if pol.pure_weitzman:
        return
    order = pol.order
    for j, tau in enumerate(pol.thresholds, start=1):
        if tau is NEG:
            continue
        rest = inst.full_mask & ~sum(1 << i for i in order[:j])
        # value of continuing phase one after step j, with boxes order[:j] gone
        cont = _suffix_value(inst, order, pol.thresholds, j)
        assert cont == weitz_value(inst, rest, tau)


def _suffix_value(inst, order, taus, j):
    u = inst.mean(order[-1])
    for jj in range(len(order) - 1, j, -1):
        box = inst.boxes[order[jj - 1]]
        rest = inst.full_mask & ~sum(1 << i for i in order[:jj])
        nxt = -box.cost
        for v, p in box.dist.atoms:
            nxt += p * (weitz_value(inst, rest, v) if exceeds(v, taus[jj - 1]) else u)
        u = nxt
    return u


@pytest.mark.parametrize("inst", suite(40, 2, 5, base=400))
def test_capped_thresholds_keep_value(inst):
    t = solve(inst)
    pol, u = best_two_phase(inst, t)
    if pol.pure_weitzman:
        return
    sg = sigmas(inst)
    capped = tuple(
        tau if tau is NEG else min(tau, sg[i], t.opt) for i, tau in zip(pol.order, pol.thresholds)
    )
    assert eval_two_phase(inst, TwoPhasePolicy(pol.order, capped)) == u


@pytest.mark.parametrize("inst", suite(40, 2, 5, base=450))
def test_running_max_execution_matches_for_optimal(inst):
    pol, u = best_two_phase(inst)
    assert eval_two_phase_running_max(inst, pol) == u
