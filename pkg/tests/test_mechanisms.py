import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nonbossy.core import Environment, downward_closure, enumerate_feasible_outcomes, zeros
from nonbossy.distributions import JointDistribution
from nonbossy.errors import IncompleteListError, IndependenceRequiredError, StructuralError, ValidationError
from nonbossy.evalsearch import expected_metrics, make_partition_instance
from nonbossy.fixtures import (
    correlated_prior,
    correlated_reference_list,
    correlated_reference_plan,
    example4,
    example4_reference_list,
)
from nonbossy.mechanisms import (
    DecisionList,
    Entry,
    Leaf,
    Offer,
    PlanCase,
    SequentialPostedPrice,
    build_full_extraction_list,
    build_log_r_mechanism,
    build_plan,
    ceil_log2,
    eval_decision_list,
    eval_posted_price,
    posted_price_path,
    tabulate,
    tabulate_canonical,
)
from nonbossy.verify import check_ic, check_ir, check_nb

from conftest import random_adaptive_plan, random_decision_list, seeds

F = Fraction


def prof(*xs):
    return tuple(F(x) for x in xs)


# -- decision lists ------------------------------------------------------------------------------


def test_list_picks_first_clockwise_winner():
    assert eval_decision_list(example4_reference_list(), prof(1, 1, 0)) == ((1, 0, 0), prof(1, 0, 0))


def test_list_empty_profile():
    assert eval_decision_list(example4_reference_list(), prof(0, 0, 0)) == ((0, 0, 0), prof(0, 0, 0))


def test_correlated_list_sells_both_items():
    assert eval_decision_list(correlated_reference_list(), prof(1, 1)) == ((1, 1), prof(1, 1))


def test_exception_blocks_an_entry():
    dl = example4_reference_list()
    # (1,0,0) and (0,0,1) are both satisfied; the exception hands the item to agent 2
    assert eval_decision_list(dl, prof(1, 0, 1))[0] == (0, 0, 1)


def test_incomplete_list_names_profile():
    dl = DecisionList.from_triples([((1,), (2,), [])])
    with pytest.raises(IncompleteListError, match=r"\(1\)"):
        eval_decision_list(dl, prof(1))


@pytest.mark.parametrize("triples,err", [
    ([((1, 0), (1, 1), [])], ValidationError),          # pays without an item
    ([((1, 0), (1, 0), []), ((1, 0), (2, 0), [])], ValidationError),
    ([((1, 0), (-1, 0), [])], ValidationError),
    ([((1, 0), (1, 0), [(0, 1)])], ValidationError),    # exception not listed
    ([((1, 0), (1, 0), []), ((1, 0, 0), (1, 0, 0), [])], StructuralError),
    ([((2, 0), (1, 0), [])], ValidationError),
])
def test_malformed_lists(triples, err):
    with pytest.raises(err):
        DecisionList.from_triples(triples)


def test_tabulated_reference_list_covers_eight_regions():
    tab = tabulate(example4_reference_list(), example4().environment)
    assert len(tab.table) == 27
    assert tab == example4()


def test_constant_list_tabulates_to_constant_table():
    dl = DecisionList((Entry(zeros(2), zeros(2)),))
    tab = tabulate_canonical(dl)
    assert {row[1:] for row in tab.rows()} == {((0, 0), prof(0, 0))}


def test_correlated_list_full_revenue_on_support():
    tab = tabulate_canonical(correlated_reference_list())
    assert tab.environment.value_atoms == (prof(0, 1, 2, 3),) * 2
    assert len(tab.table) == 16
    for v, _ in correlated_prior().support():
        assert sum(tab[v][1]) == 2


# -- posted prices ---------------------------------------------------------------------------------


def test_path_stops_at_first_acceptance():
    plan = posted_price_path(2, [(0, 3), (1, 5)])
    assert eval_posted_price(plan, prof(3, 9)) == ((1, 0), prof(3, 0))
    assert eval_posted_price(plan, prof(2, 5)) == ((0, 1), prof(0, 5))


def test_adaptive_plan_undercharges_high_first_agent():
    assert eval_posted_price(correlated_reference_plan(), prof(2, 0)) == ((1, 0), prof(1, 0))


def test_plan_rejects_revisits():
    with pytest.raises(StructuralError):
        build_plan(2, {"agent": 0, "price": 1, "reject": {"agent": 0, "price": 2}})


def test_plan_rejects_infeasible_accept_sets():
    with pytest.raises(StructuralError):
        build_plan(2, {"agent": 0, "price": 1, "accept": {"agent": 1, "price": 1}},
                   feasible={(0, 0), (1, 0), (0, 1)})


def test_plan_rejects_inconsistent_leaf():
    with pytest.raises(StructuralError):
        SequentialPostedPrice(1, Offer(0, F(1), Leaf((0,), prof(0)), Leaf((0,), prof(0))))


def test_visit_order_follows_rejections():
    assert posted_price_path(3, [(2, 1), (0, 1)]).visit_order() == [2, 0, 1]


@given(seeds)
def test_posted_prices_are_ic_ir_nb(seed):
    plan = random_adaptive_plan(random.Random(seed))
    tab = tabulate_canonical(plan)
    assert check_ic(tab).holds and check_ir(tab).holds and check_nb(tab).holds


@given(seeds)
def test_ic_lists_are_ir(seed):
    dl = random_decision_list(random.Random(seed))
    try:
        tab = tabulate_canonical(dl)
    except IncompleteListError:
        return
    if check_ic(tab).holds:
        assert check_ir(tab).holds


def test_an_ic_list_with_exceptions_can_be_bossy():
    # Agent 0 never wins below 5, but raising its report to 5 satisfies (1,0,0),
    # which blocks (0,1,0) and hands the item from agent 1 to agent 2.
    dl = DecisionList.from_triples([
        ((0, 1, 0), (0, 1, 0), [(1, 0, 0)]),
        ((0, 0, 1), (0, 0, 1), []),
        ((1, 0, 0), (5, 0, 0), []),
        ((0, 0, 0), (0, 0, 0), []),
    ])
    tab = tabulate_canonical(dl)
    assert check_ic(tab).holds
    nb = check_nb(tab)
    assert not nb.holds
    assert nb.witnesses[0]["profile"] == prof(0, 1, 1)
    assert nb.witnesses[0]["deviation"] == 5


@given(seeds)
def test_exception_free_ic_lists_are_nonbossy(seed):
    dl = random_decision_list(random.Random(seed), exception_rate=0.0)
    try:
        tab = tabulate_canonical(dl)
    except IncompleteListError:
        return
    if check_ic(tab).holds:
        assert check_nb(tab).holds


# -- full extraction -------------------------------------------------------------------------------


def test_full_extraction_order_and_prices():
    dl = build_full_extraction_list([1, 1], downward_closure([(1, 1)]))
    assert [(e.outcome, e.prices) for e in dl.entries] == [
        ((1, 1), prof(1, 1)), ((1, 0), prof(1, 0)), ((0, 1), prof(0, 1)), ((0, 0), prof(0, 0))]
    assert all(not e.exceptions for e in dl.entries)


def test_full_extraction_single_agent():
    dl = build_full_extraction_list([1], [(0,), (1,)])
    assert eval_decision_list(dl, prof(1)) == ((1,), prof(1))


def test_full_extraction_rejects_open_family():
    with pytest.raises(ValidationError):
        build_full_extraction_list([1, 1], [(0, 0), (1, 1)])


def _pointwise_opt(v, outcomes):
    return max(sum(x for x, o in zip(v, out) if o) for out in outcomes)


def test_full_extraction_on_partition_instance_pointwise():
    inst = make_partition_instance(2, 2, F(1, 2))
    dl = build_full_extraction_list([1] * 4, inst.constraint)
    for bits in itertools.product((0, 1), repeat=4):
        v = prof(*bits)
        assert sum(eval_decision_list(dl, v)[1]) == _pointwise_opt(v, inst.constraint.outcomes)


families = st.lists(st.lists(st.integers(0, 1), min_size=3, max_size=3),
                    min_size=1, max_size=3).map(downward_closure)
hit_values = st.lists(st.integers(1, 4), min_size=3, max_size=3)


@given(families, hit_values, st.lists(st.booleans(), min_size=3, max_size=3))
def test_full_extraction_binary_profiles(family, a, hits):
    family = family | {zeros(3)}
    dl = build_full_extraction_list(a, family)
    v = tuple(F(x) if h else F(0) for x, h in zip(a, hits))
    assert sum(eval_decision_list(dl, v)[1]) == _pointwise_opt(v, family)


@given(families, hit_values, st.lists(st.integers(0, 5), min_size=3, max_size=3),
       st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_full_extraction_revenue_monotone(family, a, low, bump):
    family = family | {zeros(3)}
    dl = build_full_extraction_list(a, family)
    v = prof(*low)
    w = tuple(x + b for x, b in zip(v, bump))
    assert sum(eval_decision_list(dl, v)[1]) <= sum(eval_decision_list(dl, w)[1])


# -- log r mechanism ----------------------------------------------------------------------------------


def test_ceil_log2():
    assert [ceil_log2(x) for x in (1, 2, 3, 4, 5, 8, 9)] == [0, 1, 2, 2, 3, 3, 4]


def test_high_value_case():
    # one agent is worth 10 with probability 1/10; the rest is noise
    prior = JointDistribution.product([[(0, F(9, 10)), (10, F(1, 10))], [(0, 1)]])
    plan = build_log_r_mechanism(prior, {"generator": "k-uniform", "n": 2, "k": 1})
    assert plan.opt == 1 and plan.opt1 == 1
    assert plan.chosen_case is PlanCase.HIGH_VALUE
    assert plan.alpha == (F(1, 10), F(0))
    m = expected_metrics(plan.mechanism, prior)
    assert m.expected_welfare >= plan.opt1 / 2


@pytest.mark.parametrize("groups", [2, 3])
def test_binned_case_on_partition_instances(groups):
    inst = make_partition_instance(groups, 2, F(1, 2))
    plan = build_log_r_mechanism(inst.prior, inst.constraint)
    assert plan.chosen_case is PlanCase.BINNED
    assert plan.opt == plan.opt1 + plan.opt2 + plan.opt3
    assert plan.opt3 < plan.opt / 2
    assert plan.n_bins == 3
    m = expected_metrics(plan.mechanism, inst.prior)
    assert m.expected_welfare >= plan.opt / (8 * 3)
    assert m.expected_welfare >= plan.case_bound


def test_point_mass_prior():
    prior = JointDistribution.point_mass([3, 1, 2])
    fs = enumerate_feasible_outcomes({"generator": "k-uniform", "n": 3, "k": 2})
    plan = build_log_r_mechanism(prior, fs)
    assert plan.opt == 5
    m = expected_metrics(plan.mechanism, prior)
    assert m.expected_welfare >= plan.guaranteed == F(5, 8 * 3)


def test_zero_prior_gives_trivial_plan():
    plan = build_log_r_mechanism(JointDistribution.point_mass([0, 0]),
                                 {"generator": "all", "n": 2})
    assert plan.chosen_case is PlanCase.TRIVIAL
    assert expected_metrics(plan.mechanism, JointDistribution.point_mass([0, 0])).expected_welfare == 0


def test_correlated_prior_rejected():
    with pytest.raises(IndependenceRequiredError):
        build_log_r_mechanism(correlated_prior(), {"generator": "all", "n": 2})


@given(st.lists(st.lists(st.tuples(st.integers(0, 6), st.integers(1, 3)), min_size=1, max_size=2),
                min_size=1, max_size=3), families)
def test_log_r_guarantee_and_decomposition(raw, family):
    n = len(raw)
    margs = []
    for agent in raw:
        total = sum(w for _, w in agent)
        margs.append([(x, F(w, total)) for x, w in agent])
    prior = JointDistribution.product(margs)
    fam = {o[:n] for o in family} | {zeros(n)}
    plan = build_log_r_mechanism(prior, fam)
    assert plan.opt == plan.opt1 + plan.opt2 + plan.opt3
    if plan.opt == 0:
        return
    assert (plan.chosen_case is PlanCase.HIGH_VALUE) == (plan.opt1 >= plan.opt / 4)
    assert sum(plan.bins) <= plan.opt
    m = expected_metrics(plan.mechanism, prior)
    assert m.expected_welfare >= plan.guaranteed
    tab = tabulate_canonical(plan.mechanism, Environment.single_parameter(
        [prior.atoms(i) for i in range(n)], fam))
    assert check_ic(tab).holds and check_ir(tab).holds
