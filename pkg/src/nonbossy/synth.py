"""Turn verified tabular mechanisms into decision lists and posted-price plans.

:func:`synthesize_decision_list` builds the decision tree of a nonbossy
single-parameter mechanism.  Each node holds a domain ``S`` of outcomes, the
probe profile ``v^S`` (coordinate-wise maximum of the prices in ``S``) and
the table's outcome at the probe.  Its children are the maximal subsets of
``S`` whose probe fails the node's outcome.  Merging domains per outcome
gives an order-oblivious list whose exceptions are the outcomes outside the
merged domain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .core import Environment, TabularMechanism, k_uniform
from .errors import (
    ApplicabilityError,
    DominationError,
    NonbossyError,
    PrerequisiteError,
    SizeError,
)
from .mechanisms import (
    DecisionList,
    Entry,
    canonical_env_for,
    posted_price_path,
    tabulate,
)
from .verify import (
    Property,
    PropertyReport,
    check_ic,
    check_ir,
    check_nb,
    check_payment_characterization,
    make_report,
    outcome_prices,
)

DEFAULT_MAX_IMAGE = 16


class SynthesisError(NonbossyError):
    """The constructed list failed to reproduce the table."""


@dataclass(frozen=True)
class TreeNode:
    domain: tuple
    probe: tuple
    outcome: tuple
    children: tuple  # indices into SynthesisTrace.tree


@dataclass(frozen=True)
class SynthesisTrace:
    """Decision tree (nodes with equal domains are shared), merged domains, exceptions."""

    tree: tuple
    merged_domains: dict
    exceptions: dict


def _sort_outcomes(outs) -> tuple:
    return tuple(sorted(outs, reverse=True))


def maximal_failing_subsets(domain, outcome, price) -> list:
    """Maximal subsets ``D'`` of ``domain`` whose probe does not satisfy ``outcome``.

    The probe fails ``outcome`` iff some agent ``i`` with ``outcome[i] = 1``
    has every price in ``D'`` strictly below ``price[outcome][i]``, so each
    maximal subset is one of the per-agent sets
    ``{o in domain : price[o][i] < price[outcome][i]}``.
    """
    candidates = set()
    target = price[outcome]
    for i, hit in enumerate(outcome):
        if hit and target[i] > 0:
            sub = frozenset(o for o in domain if price[o][i] < target[i])
            if sub:
                candidates.add(sub)
    maximal = [c for c in candidates if not any(c < d for d in candidates)]
    return sorted(maximal, key=lambda s: (-len(s), _sort_outcomes(s)), reverse=False)


def synthesize_decision_list(
    tab: TabularMechanism,
    max_image: int = DEFAULT_MAX_IMAGE,
    check_prerequisites: bool = True,
) -> tuple:
    """Return ``(DecisionList, SynthesisTrace)`` reproducing ``tab`` exactly.

    ``tab`` must be a single-parameter IC, IR, NB mechanism with
    outcome-determined payments, tabulated on a grid that contains its price
    atoms (a canonical grid).  The list is order-oblivious; entries are
    sorted by decreasing total price, ties by larger outcome vector first.
    """
    env = tab.environment
    if not env.is_single_parameter:
        raise ApplicabilityError("synthesis needs a single-parameter environment")
    if check_prerequisites:
        for name, checker in (("IC", check_ic), ("IR", check_ir), ("NB", check_nb),
                              ("PaymentChar", check_payment_characterization)):
            if not checker(tab).holds:
                raise PrerequisiteError(f"cannot synthesize: {name} fails", failed=name)
    prices = outcome_prices(tab)
    if any(len(p) > 1 for p in prices.values()):
        raise PrerequisiteError("cannot synthesize: PaymentChar fails", failed="PaymentChar")
    price = {o: p[0] for o, p in prices.items()}
    image = tab.outcome_image()
    if len(image) > max_image:
        raise SizeError("outcome image too large for synthesis", len(image), max_image)

    def probe(domain) -> tuple:
        v = tuple(max(price[o][i] for o in domain) for i in range(env.n_agents))
        for i, x in enumerate(v):
            if x not in env.value_atoms[i]:
                raise PrerequisiteError(
                    f"grid is not canonical: price {x} of agent {i} is not a grid atom",
                    failed="CanonicalGrid")
        return v

    index: dict = {}
    nodes: list = []
    pending = [frozenset(image)]
    while pending:
        domain = pending.pop(0)
        if domain in index:
            continue
        v = probe(domain)
        index[domain] = len(nodes)
        nodes.append([domain, v, tab[v][0], []])
        for child in maximal_failing_subsets(domain, tab[v][0], price):
            nodes[index[domain]][3].append(child)
            pending.append(child)
    tree = tuple(
        TreeNode(_sort_outcomes(d), v, o, tuple(index[c] for c in kids))
        for d, v, o, kids in nodes)

    merged: dict = {}
    for node in tree:
        merged.setdefault(node.outcome, set()).update(node.domain)
    exceptions = {o: frozenset(image) - frozenset(d) for o, d in merged.items()}
    missing = set(image) - set(merged)
    if missing:
        raise SynthesisError(f"outcomes {sorted(missing)} never label a tree node")

    entries = [Entry(o, price[o], exceptions[o]) for o in merged]
    entries.sort(key=lambda e: (sum(e.prices, Fraction(0)), e.outcome), reverse=True)
    dl = DecisionList(tuple(entries), order_oblivious=True)
    if tabulate(dl, env) != tab:
        raise SynthesisError("synthesized list does not reproduce the table")
    trace = SynthesisTrace(tree, {o: _sort_outcomes(d) for o, d in merged.items()},
                           {o: _sort_outcomes(e) for o, e in exceptions.items()})
    return dl, trace


def certify_order_oblivious(dl: DecisionList, grid) -> PropertyReport:
    """Exactly one entry fires at every profile of ``grid``.

    ``grid`` is an :class:`Environment` or a per-agent tuple of atoms.
    """
    atoms = grid.value_atoms if isinstance(grid, Environment) else tuple(map(tuple, grid))
    witnesses = []
    for v in itertools.product(*atoms):
        fired = dl.firing(v)
        if len(fired) != 1:
            witnesses.append({"profile": v,
                              "firing": tuple(dl.entries[k].outcome for k in fired)})
    desc = " x ".join("{" + ", ".join(map(str, a)) + "}" for a in atoms)
    return make_report(Property.ORDER_OBLIVIOUS, witnesses, desc)


# -- single-item extraction ------------------------------------------------------


@dataclass(frozen=True)
class DominationOrder:
    """Domination among the agents that can win, and the resulting visit order.

    ``relation[a][b]`` is true iff ``agents[a]`` dominates ``agents[b]``.
    """

    agents: tuple
    relation: tuple
    order: tuple


def _unit(n: int, i: int) -> tuple:
    return tuple(1 if k == i else 0 for k in range(n))


def extract_posted_price(dl: DecisionList) -> tuple:
    """Single-item decision list -> ``(SequentialPostedPrice, DominationOrder)``.

    Agents that never win are dropped first.  Agent ``i`` dominates ``i'``
    when ``i``'s outcome is an exception of ``i'``'s, or ``i`` comes first in
    the list and ``i'``'s outcome is not an exception of ``i``'s.  Agents are
    offered their price in domination order.
    """
    n = dl.n_agents
    if any(sum(o) > 1 for o in dl.outcomes()):
        raise ApplicabilityError("posted-price extraction needs a single-item list")
    env = canonical_env_for(dl, feasible=k_uniform(n, 1))
    winners = set()
    for v in env.grid():
        fired = dl.firing(v)
        if fired:
            outcome = dl.entries[fired[0]].outcome
            if any(outcome):
                winners.add(outcome.index(1))
    agents = sorted(winners)
    pos = {i: dl.outcomes().index(_unit(n, i)) for i in agents}
    exc = {i: dl.entries[pos[i]].exceptions for i in agents}

    def dominates(i, j):
        return _unit(n, i) in exc[j] or (pos[i] < pos[j] and _unit(n, j) not in exc[i])

    relation = tuple(tuple(i != j and dominates(i, j) for j in agents) for i in agents)
    for a, b in itertools.combinations(range(len(agents)), 2):
        if relation[a][b] and relation[b][a]:
            i, j = agents[a], agents[b]
            raise DominationError(
                f"agents {i} and {j} dominate each other: each one's outcome is in the "
                f"other's exception list, so either can change the other's outcome "
                f"without changing its own (NB violation)",
                {"agents": (i, j), "outcomes": (_unit(n, i), _unit(n, j))})
    wins = {i: sum(relation[a]) for a, i in enumerate(agents)}
    order = sorted(agents, key=lambda i: -wins[i])
    for x, y in itertools.combinations(order, 2):
        if not relation[agents.index(x)][agents.index(y)]:
            # y dominates x although x wins at least as often, so some z closes a cycle
            cycle = next((y, x, z) for z in agents
                         if relation[agents.index(x)][agents.index(z)]
                         and relation[agents.index(z)][agents.index(y)])
            raise DominationError(
                f"domination cycle {cycle}: the last agent can change the first agent's "
                f"outcome without changing its own (NB violation)", {"cycle": cycle})
    plan = posted_price_path(n, [(i, dl.entries[pos[i]].prices[i]) for i in order],
                             k_uniform(n, 1))
    check_env = canonical_env_for(dl, feasible=k_uniform(n, 1))
    if tabulate(plan, check_env) != tabulate(dl, check_env):
        raise SynthesisError("extracted plan does not reproduce the decision list")
    return plan, DominationOrder(tuple(agents), relation, tuple(order))

