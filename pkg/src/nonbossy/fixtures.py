"""Named reference instances: counterexamples, separations and textbook auctions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .core import Environment, TabularMechanism, zeros
from .distributions import JointDistribution
from .mechanisms import DecisionList, Entry, build_plan

EPSILON = Fraction(1, 100)
PROP2_OUTCOMES = ("o1", "o2", "o3")


# -- common-outcome counterexample to the payment characterization ------------------


def prop2_valuations(eps: Fraction = EPSILON) -> dict:
    """Valuations over ``(o1, o2, o3)``; agent 0 is ``x``, agent 1 is ``y``."""
    return {
        "x1": (1 + eps, Fraction(0), 1 + 2 * eps),
        "x2": (1 + eps, Fraction(1), 2 * eps),
        "y1": (1 + eps, Fraction(1), 2 * eps),
        "y2": (1 + eps, Fraction(0), 1 + 2 * eps),
    }


def prop2_environment(eps: Fraction = EPSILON) -> Environment:
    val = prop2_valuations(eps)
    return Environment.common_outcome(PROP2_OUTCOMES, [[val["x1"], val["x2"]],
                                                       [val["y1"], val["y2"]]])


def prop2(eps: Fraction = EPSILON) -> TabularMechanism:
    """IC, IR and NB, yet outcome ``(o1, o1)`` is sold at two payment vectors."""
    val = prop2_valuations(eps)
    x1, x2, y1, y2 = val["x1"], val["x2"], val["y1"], val["y2"]
    z = (Fraction(0), Fraction(0))
    table = {
        (x1, y1): (("o1", "o1"), (Fraction(1), Fraction(0))),
        (x2, y2): (("o1", "o1"), (Fraction(0), Fraction(1))),
        (x2, y1): (("o2", "o2"), z),
        (x1, y2): (("o3", "o3"), z),
    }
    return TabularMechanism(prop2_environment(eps), table)


# -- clockwise-first allocation -----------------------------------------------------------


def _clockwise_first(v) -> tuple:
    hi = [x >= 1 for x in v]
    if all(hi):
        return (1, 1, 1), (Fraction(1),) * 3
    # among agents with value >= 1, pick the one whose clockwise predecessor is low
    for i in range(3):
        if hi[i] and not hi[(i - 1) % 3]:
            o = tuple(1 if k == i else 0 for k in range(3))
            return o, tuple(Fraction(x) for x in o)
    return zeros(3), (Fraction(0),) * 3


def example4_environment() -> Environment:
    return Environment.single_parameter([[0, 1, 2]] * 3)


def example4() -> TabularMechanism:
    """All three win when all value at least 1; otherwise one agent wins the item.

    Among the agents valued at least 1, the winner is the one whose
    predecessor in the cycle 0 -> 1 -> 2 -> 0 is valued below 1.
    """
    return TabularMechanism.from_function(example4_environment(), _clockwise_first)


def example4_reference_list() -> DecisionList:
    """Order-specific list with one exception per single-winner outcome."""
    return DecisionList.from_triples([
        ((1, 1, 1), (1, 1, 1), []),
        ((1, 0, 0), (1, 0, 0), [(0, 0, 1)]),
        ((0, 0, 1), (0, 0, 1), [(0, 1, 0)]),
        ((0, 1, 0), (0, 1, 0), [(1, 0, 0)]),
        ((0, 0, 0), (0, 0, 0), []),
    ])


# -- correlated two-agent prior ------------------------------------------------------------


def correlated_prior() -> JointDistribution:
    return JointDistribution.explicit([((1, 1), Fraction(1, 5)),
                                       ((2, 0), Fraction(2, 5)),
                                       ((0, 2), Fraction(2, 5))])


def correlated_reference_list() -> DecisionList:
    """Exception-free list extracting the full welfare; the final zero entry closes it."""
    return DecisionList.from_triples([
        ((1, 1), (1, 1), []),
        ((1, 0), (2, 0), []),
        ((0, 1), (0, 2), []),
        ((0, 0), (0, 0), []),
    ])


def correlated_reference_plan():
    """Price 1 to agent 0; then 1 to agent 1 after a sale, else 2."""
    return build_plan(2, {"agent": 0, "price": 1,
                          "accept": {"agent": 1, "price": 1},
                          "reject": {"agent": 1, "price": 2}})


# -- auctions -----------------------------------------------------------------------------------


def auction_environment(n: int = 2, atoms=(0, 1, 2)) -> Environment:
    """Single-item environment where only the lowest-index agent prefers the item on ties.

    With ties awarded to the lowest index, this tiebreak makes the
    second-price auction IC on grids that contain tied bids.
    """
    feasible = {zeros(n)} | {tuple(1 if k == i else 0 for k in range(n)) for i in range(n)}
    tiebreak = [(1, 0)] + [(0, 1)] * (n - 1)
    return Environment.single_parameter([list(atoms)] * n, feasible, tiebreak)


def _winner(v) -> int:
    best = max(v)
    return next(i for i, x in enumerate(v) if x == best)


def spa(n: int = 2, atoms=(0, 1, 2)) -> TabularMechanism:
    """Second-price auction; ties go to the lowest index."""
    def rule(v):
        w = _winner(v)
        second = max((x for i, x in enumerate(v) if i != w), default=Fraction(0))
        o = tuple(1 if i == w else 0 for i in range(len(v)))
        return o, tuple(second if i == w else Fraction(0) for i in range(len(v)))
    return TabularMechanism.from_function(auction_environment(n, atoms), rule)


def fpa(n: int = 2, atoms=(0, 1, 2)) -> TabularMechanism:
    """First-price auction; ties go to the lowest index."""
    def rule(v):
        w = _winner(v)
        o = tuple(1 if i == w else 0 for i in range(len(v)))
        return o, tuple(v[w] if i == w else Fraction(0) for i in range(len(v)))
    return TabularMechanism.from_function(auction_environment(n, atoms), rule)


# -- golden tables ------------------------------------------------------------------------------


def golden_table(name: str) -> str:
    """Checked-in serialization of a fixture table (``prop2`` or ``example4``)."""
    return resources.files("nonbossy").joinpath("data", f"{name}.json").read_text()


GOLDEN = {"prop2": prop2, "example4": example4}


@dataclass(frozen=True)
class FixtureInfo:
    name: str
    summary: str


CATALOG = (
    FixtureInfo("prop2", "common-outcome table where payments are not a function of the outcome"),
    FixtureInfo("example4", "clockwise-first allocation and its decision list with exceptions"),
    FixtureInfo("correlated", "two correlated agents: posted prices earn 8/5, a list earns 2"),
    FixtureInfo("partition", "groups of r agents with Bernoulli values; the log r mechanism"),
    FixtureInfo("spa", "second-price auction: IC but bossy"),
    FixtureInfo("fpa", "first-price auction: not IC"),
)


def single_winner_orderings():
    """Every exception-free list ranking the three single-winner outcomes of ``example4``."""
    units = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    for perm in itertools.permutations(units):
        yield DecisionList(
            (Entry((1, 1, 1), (Fraction(1),) * 3),)
            + tuple(Entry(o, tuple(Fraction(x) for x in o)) for o in perm)
            + (Entry(zeros(3), (Fraction(0),) * 3),))
