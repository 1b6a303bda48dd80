"""Decision lists, sequential posted-price plans, and two constructive mechanisms.

The constructive mechanisms are

* :func:`build_full_extraction_list`: post welfare-sorted outcomes at
  "value-if-hit" prices, which extracts the optimal welfare as revenue when
  every agent's value is either 0 or its hit value;
* :func:`build_log_r_mechanism`: split expected optimal welfare into a
  high-value part and logarithmically many value bins, then either run a
  single high posted price or the full-extraction list at the best bin's
  level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Optional, Sequence, Union

from .core import (
    Environment,
    FeasibleSet,
    Outcome,
    PaymentVector,
    Profile,
    TabularMechanism,
    as_fraction,
    best_outcome,
    canonical_environment,
    downward_closure,
    enumerate_feasible_outcomes,
    satisfies,
    welfare_sorted,
    zeros,
)
from .distributions import JointDistribution
from .errors import IncompleteListError, IndependenceRequiredError, StructuralError, ValidationError

# -- decision lists ---------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    outcome: Outcome
    prices: PaymentVector
    exceptions: frozenset = frozenset()


@dataclass(frozen=True)
class DecisionList:
    """Ordered ``(outcome, prices, exceptions)`` entries.

    The first entry whose outcome the profile satisfies, while satisfying
    none of the entry's exception outcomes, fires.  ``order_oblivious`` is
    only a claim; :func:`nonbossy.synth.certify_order_oblivious` checks it.
    """

    entries: tuple
    order_oblivious: bool = False

    def __post_init__(self):
        entries = tuple(
            Entry(tuple(int(x) for x in e.outcome),
                  tuple(as_fraction(p) for p in e.prices),
                  frozenset(tuple(int(x) for x in o) for o in e.exceptions))
            for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if not entries:
            raise ValidationError("decision list has no entries", "$.entries")
        n = len(entries[0].outcome)
        outcomes = [e.outcome for e in entries]
        if len(set(outcomes)) != len(outcomes):
            raise ValidationError("outcomes across entries must be distinct", "$.entries")
        listed = set(outcomes)
        for k, e in enumerate(entries):
            if len(e.outcome) != n or len(e.prices) != n:
                raise StructuralError(f"entry {k} has the wrong dimension")
            for i, (o, p) in enumerate(zip(e.outcome, e.prices)):
                if o not in (0, 1):
                    raise ValidationError("outcomes are 0/1 vectors", f"$.entries[{k}].outcome")
                if p < 0:
                    raise ValidationError("prices must be nonnegative",
                                          f"$.entries[{k}].prices[{i}]")
                if o == 0 and p != 0:
                    raise ValidationError(
                        f"agent {i} pays {p} without receiving an item",
                        f"$.entries[{k}].prices[{i}]")
            missing = e.exceptions - listed
            if missing:
                raise ValidationError(f"exception {sorted(missing)[0]} is not a listed outcome",
                                      f"$.entries[{k}].exceptions")

    @classmethod
    def from_triples(cls, triples: Iterable, order_oblivious: bool = False) -> "DecisionList":
        return cls(tuple(Entry(o, p, frozenset(e)) for o, p, e in triples), order_oblivious)

    @property
    def n_agents(self) -> int:
        return len(self.entries[0].outcome)

    def outcomes(self) -> list:
        return [e.outcome for e in self.entries]

    def price_of(self, outcome: Outcome) -> PaymentVector:
        for e in self.entries:
            if e.outcome == outcome:
                return e.prices
        raise KeyError(outcome)

    def price_atoms(self) -> list:
        return [sorted({e.prices[i] for e in self.entries}) for i in range(self.n_agents)]

    def firing(self, v: Profile) -> list:
        """Indices of all entries that fire at ``v``, in list order."""
        sat = {e.outcome for e in self.entries if satisfies(v, e.outcome, e.prices)}
        return [k for k, e in enumerate(self.entries)
                if e.outcome in sat and not (e.exceptions & sat)]


def eval_decision_list(dl: DecisionList, v: Profile) -> tuple:
    """``(outcome, payments)`` of the first entry that fires at ``v``."""
    if len(v) != dl.n_agents:
        raise StructuralError(f"profile has {len(v)} coordinates, list has {dl.n_agents} agents")
    sat = {e.outcome for e in dl.entries if satisfies(v, e.outcome, e.prices)}
    for e in dl.entries:
        if e.outcome in sat and not (e.exceptions & sat):
            return e.outcome, e.prices
    raise IncompleteListError(v)


# -- sequential posted prices ------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    outcome: Outcome
    payments: PaymentVector


@dataclass(frozen=True)
class Offer:
    agent: int
    price: Fraction
    accept: Union["Offer", Leaf]
    reject: Union["Offer", Leaf]


PlanNode = Union[Offer, Leaf]


@dataclass(frozen=True)
class SequentialPostedPrice:
    """Adaptive take-it-or-leave-it plan over accept/reject histories.

    Agents accept iff their value is at least the offered price.  If
    ``feasible`` is given, every accept set along every path must be in it.
    """

    n_agents: int
    root: PlanNode
    feasible: Optional[frozenset] = field(default=None, compare=False)

    def __post_init__(self):
        self._validate(self.root, frozenset(), {})

    def _validate(self, node, visited, accepted):
        n = self.n_agents
        if isinstance(node, Leaf):
            want = tuple(1 if i in accepted else 0 for i in range(n))
            pay = tuple(accepted.get(i, Fraction(0)) for i in range(n))
            if tuple(node.outcome) != want or tuple(node.payments) != pay:
                raise StructuralError(
                    f"leaf {node.outcome}/{node.payments} does not match accept set {want} "
                    f"with payments {pay}")
            return
        if not 0 <= node.agent < n:
            raise StructuralError(f"unknown agent {node.agent}")
        if node.agent in visited:
            raise StructuralError(f"agent {node.agent} is visited twice on one path")
        if node.price < 0:
            raise StructuralError("offered prices must be nonnegative")
        taken = dict(accepted)
        taken[node.agent] = node.price
        if self.feasible is not None:
            accept_set = tuple(1 if i in taken else 0 for i in range(n))
            if accept_set not in self.feasible:
                raise StructuralError(f"accept set {accept_set} is infeasible")
        self._validate(node.accept, visited | {node.agent}, taken)
        self._validate(node.reject, visited | {node.agent}, accepted)

    def price_atoms(self) -> list:
        atoms: list = [set() for _ in range(self.n_agents)]
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Offer):
                atoms[node.agent].add(node.price)
                stack.extend((node.accept, node.reject))
        return [sorted(a) for a in atoms]

    def visit_order(self) -> list:
        """Agents along the all-reject path, then any agent never visited there."""
        order = []
        node = self.root
        while isinstance(node, Offer):
            order.append(node.agent)
            node = node.reject
        return order + [i for i in range(self.n_agents) if i not in order]


def make_leaf(n: int, accepted: dict) -> Leaf:
    return Leaf(tuple(1 if i in accepted else 0 for i in range(n)),
                tuple(Fraction(accepted.get(i, 0)) for i in range(n)))


def build_plan(n: int, layout: Any, feasible: Optional[Iterable] = None) -> SequentialPostedPrice:
    """Build a plan from nested ``{"agent", "price", "accept", "reject"}`` dicts.

    ``None`` (or a missing branch) stops the walk; leaves are filled in from
    the history.
    """
    def rec(node, accepted):
        if node is None or "agent" not in node:
            return make_leaf(n, accepted)
        agent = int(node["agent"])
        price = as_fraction(node["price"])
        acc = dict(accepted)
        acc[agent] = price
        return Offer(agent, price, rec(node.get("accept"), acc), rec(node.get("reject"), accepted))

    fs = frozenset(tuple(o) for o in feasible) if feasible is not None else None
    return SequentialPostedPrice(n, rec(layout, {}), fs)


def posted_price_path(n: int, offers: Sequence[tuple], feasible=None) -> SequentialPostedPrice:
    """Single-item plan: offer ``(agent, price)`` pairs in order until one accepts."""
    layout = None
    for agent, price in reversed(list(offers)):
        layout = {"agent": agent, "price": price, "accept": None, "reject": layout}
    return build_plan(n, layout, feasible)


def eval_posted_price(spp: SequentialPostedPrice, v: Profile) -> tuple:
    if len(v) != spp.n_agents:
        raise StructuralError(f"profile has {len(v)} coordinates, plan has {spp.n_agents} agents")
    node = spp.root
    while isinstance(node, Offer):
        node = node.accept if v[node.agent] >= node.price else node.reject
    return tuple(node.outcome), tuple(node.payments)


# -- tabulation --------------------------------------------------------------

Mechanism = Union[DecisionList, SequentialPostedPrice, TabularMechanism]


def evaluate(mech: Mechanism, v: Profile) -> tuple:
    if isinstance(mech, DecisionList):
        return eval_decision_list(mech, v)
    if isinstance(mech, SequentialPostedPrice):
        return eval_posted_price(mech, v)
    if isinstance(mech, TabularMechanism):
        return mech[v]
    raise TypeError(f"not a mechanism: {type(mech).__name__}")


def tabulate(mech: Mechanism, env: Environment) -> TabularMechanism:
    """Evaluate ``mech`` at every profile of ``env``'s grid."""
    if isinstance(mech, TabularMechanism):
        return mech
    return TabularMechanism.from_function(env, lambda v: evaluate(mech, v))


def canonical_env_for(mech: Union[DecisionList, SequentialPostedPrice],
                      env: Optional[Environment] = None,
                      feasible: Optional[Iterable] = None) -> Environment:
    """``env`` (default: value atoms ``{0}``) extended by the mechanism's price atoms.

    Without an explicit ``feasible`` the environment allows the downward
    closure of the outcomes the mechanism can produce.
    """
    n = mech.n_agents
    if env is None:
        if feasible is None:
            feasible = downward_closure(mech_outcomes(mech))
        env = Environment.single_parameter([[0]] * n, feasible=set(map(tuple, feasible)) | {zeros(n)})
    return canonical_environment(env, mech.price_atoms())


def mech_outcomes(mech) -> set:
    """Every outcome the mechanism can output, plus the all-zeros outcome."""
    if isinstance(mech, DecisionList):
        return set(mech.outcomes()) | {zeros(mech.n_agents)}
    out = set()
    stack = [mech.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.add(tuple(node.outcome))
        else:
            stack.extend((node.accept, node.reject))
    return out | {zeros(mech.n_agents)}


def tabulate_canonical(mech, env: Optional[Environment] = None) -> TabularMechanism:
    return tabulate(mech, canonical_env_for(mech, env))


# -- full welfare extraction ------------------------------------------------


def _as_feasible_set(constraint) -> FeasibleSet:
    if isinstance(constraint, FeasibleSet):
        return constraint
    return enumerate_feasible_outcomes(constraint)


def build_full_extraction_list(values_on_hit: Sequence, constraint) -> DecisionList:
    """All feasible outcomes sorted by hit-value welfare, priced at hit values.

    No exceptions, so the first satisfied outcome in welfare order wins.
    """
    fs = _as_feasible_set(constraint)
    a = [as_fraction(x) for x in values_on_hit]
    if len(a) != fs.n_agents:
        raise StructuralError(f"{len(a)} hit values for {fs.n_agents} agents")
    if any(x < 0 for x in a):
        raise ValidationError("hit values must be nonnegative", "$.values_on_hit")
    entries = []
    for o in welfare_sorted(a, fs.outcomes):
        entries.append(Entry(o, tuple(ai if oi else Fraction(0) for ai, oi in zip(a, o))))
    return DecisionList(tuple(entries))


# -- the log(r) mechanism ------------------------------------------------------


class PlanCase(str, enum.Enum):
    HIGH_VALUE = "HighValue"
    BINNED = "Binned"
    TRIVIAL = "Trivial"


@dataclass(frozen=True)
class LogRPlan:
    """Decomposition of expected optimal welfare and the mechanism it selects.

    ``alpha`` (per-agent probability of a value at least ``2 * opt``) is
    diagnostic only.  ``case_bound`` is the welfare guarantee of the chosen
    case; ``guaranteed`` is the combined ``opt / (8 * n_bins)``.
    """

    opt: Fraction
    opt1: Fraction
    opt2: Fraction
    opt3: Fraction
    rank: int
    chosen_case: PlanCase
    bins: tuple
    j_star: Optional[int]
    level: Optional[Fraction]
    alpha: tuple
    case_bound: Fraction
    guaranteed: Fraction
    mechanism: Union[DecisionList, SequentialPostedPrice]

    @property
    def n_bins(self) -> int:
        return len(self.bins)


def ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


def build_log_r_mechanism(prior: JointDistribution, constraint) -> LogRPlan:
    fs = _as_feasible_set(constraint)
    if not prior.is_product:
        raise IndependenceRequiredError()
    n = fs.n_agents
    if prior.n_agents != n:
        raise StructuralError(f"prior has {prior.n_agents} agents, constraint has {n}")
    r = fs.rank
    n_bins = ceil_log2(4 * r) if r else 0
    outcomes = sorted(fs.outcomes)

    realized = []  # (prob, contributing values)
    opt = Fraction(0)
    for v, p in prior.support():
        o = best_outcome(v, outcomes)
        contrib = [v[i] for i in range(n) if o[i]]
        realized.append((p, contrib))
        opt += p * sum(contrib, Fraction(0))

    zero_list = DecisionList((Entry(zeros(n), zeros(n)),))
    if opt == 0:
        return LogRPlan(opt, opt, opt, opt, r, PlanCase.TRIVIAL, (Fraction(0),) * n_bins, None,
                        None, (Fraction(0),) * n, Fraction(0), Fraction(0), zero_list)

    high, low = 2 * opt, opt / (2 * r)
    opt1 = opt2 = opt3 = Fraction(0)
    bins = [Fraction(0)] * n_bins
    for p, contrib in realized:
        for x in contrib:
            if x >= high:
                opt1 += p * x
            elif x >= low:
                opt2 += p * x
            else:
                opt3 += p * x
            for j in range(1, n_bins + 1):
                if high / 2 ** j <= x < high / 2 ** (j - 1):
                    bins[j - 1] += p * x
    alpha = tuple(sum((p for a, p in prior.marginal(i) if a >= high), Fraction(0))
                  for i in range(n))
    guaranteed = opt / (8 * n_bins)

    if opt1 >= opt / 4:
        singles = [i for i in range(n)
                   if tuple(1 if k == i else 0 for k in range(n)) in fs.outcomes]
        plan = posted_price_path(n, [(i, high) for i in singles], fs.outcomes)
        return LogRPlan(opt, opt1, opt2, opt3, r, PlanCase.HIGH_VALUE, tuple(bins), None, None,
                        alpha, opt1 / 2, guaranteed, plan)

    best = max(bins)
    j_star = bins.index(best) + 1
    level = high / 2 ** j_star
    dl = build_full_extraction_list([level] * n, fs)
    return LogRPlan(opt, opt1, opt2, opt3, r, PlanCase.BINNED, tuple(bins), j_star, level,
                    alpha, best / 2, guaranteed, dl)


# -- partition instances ------------------------------------------------------


@dataclass(frozen=True)
class PartitionInstance:
    """Agents split into groups of size ``r``; winners must share a group.

    Each agent's value is ``value_on_hit`` with probability
    ``hit_probability`` and 0 otherwise, independently.
    """

    r: int
    groups: tuple
    hit_probability: Fraction
    value_on_hit: Fraction
    prior: JointDistribution
    constraint: FeasibleSet

    @property
    def n_agents(self) -> int:
        return sum(len(g) for g in self.groups)
