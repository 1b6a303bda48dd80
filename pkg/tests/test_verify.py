import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given

from nonbossy.core import Environment, TabularMechanism
from nonbossy.errors import (ApplicabilityError, ICRequiredError, IncompleteListError,
                             PrerequisiteError, StructuralError)
from nonbossy.fixtures import EPSILON, example4, fpa, prop2, prop2_environment, spa
from nonbossy.mechanisms import posted_price_path, tabulate_canonical
from nonbossy.verify import (
    ExternalPreference,
    GsVerdict,
    Property,
    build_rwsg_witness,
    certificate_is_valid,
    check_consistency,
    check_ic,
    check_ir,
    check_monotonicity,
    check_nb,
    check_osp_sequential,
    check_payment_characterization,
    check_upper_semilattice,
    classify_gs,
    run_checks,
)

from conftest import random_decision_list, random_single_item_path, seeds

F = Fraction


def prof(*xs):
    return tuple(F(x) for x in xs)


# -- auctions ----------------------------------------------------------------------------


def test_spa_is_ic_and_ir_but_bossy():
    tab = spa()
    assert check_ic(tab).holds and check_ir(tab).holds
    nb = check_nb(tab)
    assert not nb.holds
    w = nb.witnesses[0]
    assert (w["agent"], w["profile"], w["deviation"]) == (0, prof(0, 2), 1)
    assert w["before"] == ((0, 1), prof(0, 0)) and w["after"] == ((0, 1), prof(0, 1))


def test_spa_certificate():
    tab = spa()
    cert = build_rwsg_witness(tab)
    assert cert.manipulator == 0 and cert.target == 1
    assert cert.external_preference is ExternalPreference.CARES_POSITIVELY
    assert cert.profile() == prof(1, 2) and cert.deviation == 0
    assert cert.before == ((0, 1), prof(0, 1)) and cert.after == ((0, 1), prof(0, 0))
    assert certificate_is_valid(tab, cert)


def test_spa_negative_certificate():
    tab = spa()
    cert = build_rwsg_witness(tab, ExternalPreference.CARES_NEGATIVELY)
    assert cert.external_preference is ExternalPreference.CARES_NEGATIVELY
    assert certificate_is_valid(tab, cert)
    flipped = ExternalPreference.CARES_POSITIVELY
    assert not certificate_is_valid(tab, type(cert)(**{**cert.__dict__, "external_preference": flipped}))


def test_fpa_fails_ic():
    ic = check_ic(fpa())
    assert not ic.holds
    w = ic.witnesses[0]
    assert (w["agent"], w["profile"], w["deviation"], w["gain"]) == (0, prof(1, 0), 0, 1)


def test_certificate_requires_ic():
    with pytest.raises(ICRequiredError):
        build_rwsg_witness(fpa())


def test_posted_price_has_no_certificate():
    tab = tabulate_canonical(posted_price_path(2, [(0, 1), (1, 1)]))
    assert build_rwsg_witness(tab) is None


def test_spa_sells_one_allocation_at_several_prices():
    pc = check_payment_characterization(spa())
    assert not pc.holds
    assert pc.witnesses[0]["outcome"] == (1, 0)
    assert pc.witnesses[0]["payments"] == (prof(0, 0), prof(1, 0), prof(2, 0))


def test_monotone_allocation():
    assert check_monotonicity(spa()).holds


def test_non_monotone_allocation_caught():
    env = Environment.single_parameter([[0, 1]])
    tab = TabularMechanism(env, {prof(0): ((1,), prof(0)), prof(1): ((0,), prof(0))})
    assert not check_monotonicity(tab).holds
    assert not check_ic(tab).holds


# -- Prop 2 table ------------------------------------------------------------------------------------


def test_prop2_is_ic_ir_nb():
    tab = prop2()
    assert check_ic(tab).holds and check_ir(tab).holds and check_nb(tab).holds


def test_prop2_payment_witness():
    pc = check_payment_characterization(prop2())
    assert not pc.holds and len(pc.witnesses) == 1
    w = pc.witnesses[0]
    assert w["outcome"] == ("o1", "o1")
    assert set(w["payments"]) == {prof(1, 0), prof(0, 1)}


def test_prop2_not_semilattice():
    assert not check_upper_semilattice(prop2_environment()).holds


def test_prop2_not_osp_under_either_order():
    for order in ([0, 1], [1, 0]):
        assert not check_osp_sequential(prop2(), order).holds
    w = check_osp_sequential(prop2(), [1, 0]).witnesses[0]
    assert w["worst_truthful"] == EPSILON and w["best_deviation"] == 1 + EPSILON


def test_prop2_gs_classification():
    gs = classify_gs(prop2())
    assert gs.verdict is GsVerdict.NEITHER and gs.image_size == 4


def test_consistency_needs_single_parameter():
    with pytest.raises(ApplicabilityError):
        check_consistency(prop2())


# -- GS cases ------------------------------------------------------------------------------------------


def _common(choice):
    env = Environment.common_outcome(["a", "b", "c"], [[(1, 0, 0), (0, 0, 1)], [(0, 1, 0), (0, 0, 1)]])
    return TabularMechanism.from_function(env, lambda v: ((choice(env, v),) * 2, (F(0), F(0))))


def test_dictatorship_detected():
    def fav(env, v):
        return ["a", "b", "c"][max(range(3), key=lambda k: v[0][k])]
    gs = classify_gs(_common(fav))
    assert gs.verdict is GsVerdict.DICTATORSHIP and gs.dictator == 0
    assert str(gs) == "Dictatorship(agent 0)"


def test_constant_is_two_outcome():
    gs = classify_gs(_common(lambda env, v: "a"))
    assert gs.verdict is GsVerdict.TWO_OUTCOMES and gs.image_size == 1


def test_gs_needs_common_outcome():
    with pytest.raises(ApplicabilityError):
        classify_gs(spa())


def test_single_parameter_semilattice():
    assert check_upper_semilattice(spa().environment).holds


# -- consistency ---------------------------------------------------------------------------------------


def test_hand_built_inconsistency():
    # (1,0) at price 1 and (0,1) at price 1; (1,1) picks agent 0 but (2,1) picks agent 1
    env = Environment.single_parameter([[0, 1, 2], [0, 1]],
                                       feasible=[(0, 0), (1, 0), (0, 1)])

    def rule(v):
        if v == prof(2, 1):
            return (0, 1), prof(0, 1)
        if v[0] >= 1:
            return (1, 0), prof(1, 0)
        if v[1] >= 1:
            return (0, 1), prof(0, 1)
        return (0, 0), prof(0, 0)
    cons = check_consistency(TabularMechanism.from_function(env, rule))
    assert not cons.holds
    w = cons.witnesses[0]
    assert set(w["outcomes"]) == {(1, 0), (0, 1)}
    assert set(w["profiles"]) == {prof(1, 1), prof(2, 1)}


def test_consistency_requires_payment_characterization():
    with pytest.raises(PrerequisiteError):
        check_consistency(spa())


# -- OSP ------------------------------------------------------------------------------------------------


def test_spa_is_not_osp():
    for order in ([0, 1], [1, 0]):
        assert not check_osp_sequential(spa(), order).holds


@given(seeds)
def test_single_item_path_is_osp_in_its_order(seed):
    plan = random_single_item_path(random.Random(seed))
    assert check_osp_sequential(tabulate_canonical(plan), plan.visit_order()).holds


def test_osp_order_must_be_permutation():
    with pytest.raises(StructuralError):
        check_osp_sequential(spa(), [0, 0])


# -- robustness to secondary goals ----------------------------------------------------------------------


@given(seeds)
def test_certificate_exists_iff_ic_and_bossy(seed):
    dl = random_decision_list(random.Random(seed))
    try:
        tab = tabulate_canonical(dl)
    except IncompleteListError:
        return
    if not check_ic(tab).holds:
        with pytest.raises(ICRequiredError):
            build_rwsg_witness(tab)
        return
    cert = build_rwsg_witness(tab)
    assert (cert is None) == check_nb(tab).holds
    if cert is not None:
        assert certificate_is_valid(tab, cert)


def test_run_checks_by_name():
    reports = run_checks(spa(), ["ic", "ir", "nb", "mono"])
    assert [r.property for r in reports] == [Property.IC, Property.IR, Property.NB,
                                             Property.MONOTONICITY]
    assert [bool(r) for r in reports] == [True, True, False, True]


# -- exploratory: GS classification on a tiny complete enumeration ----------------------------------


def test_gs_micro_search_report():
    """Every table on a 2x2 grid with 3 outcomes and payments in {0, 1}.

    The grid is finite, so IC and NB tables that are neither dictatorial nor
    two-outcome may exist; the counts are frozen as a regression check only.
    """
    env = Environment.common_outcome(["a", "b", "c"], [[(0, 0, 0), (1, 1, 0)],
                                                       [(0, 0, 0), (0, 1, 1)]])
    assert check_upper_semilattice(env).holds
    grid = list(env.grid())
    choices = [((o, o), (p, q)) for o in "abc" for p in (F(0), F(1)) for q in (F(0), F(1))]
    tally = {v: 0 for v in GsVerdict}
    total = 0
    for combo in itertools.product(choices, repeat=len(grid)):
        total += 1
        tab = TabularMechanism(env, dict(zip(grid, combo)))
        if check_ic(tab).holds and check_nb(tab).holds:
            tally[classify_gs(tab).verdict] += 1
    print(f"{total} tables, IC and NB: {sum(tally.values())}, by verdict: "
          + ", ".join(f"{v.value}={k}" for v, k in tally.items()))
    assert total == 12 ** 4
    assert sum(tally.values()) == 48 and tally[GsVerdict.NEITHER] == 8


@pytest.mark.parametrize("make", [example4, prop2])
def test_nonbossy_fixtures_have_no_certificate(make):
    tab = make()
    assert check_ic(tab).holds and check_ir(tab).holds and check_nb(tab).holds
    assert build_rwsg_witness(tab) is None
