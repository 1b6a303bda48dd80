"""Exact expectations under finite priors and exhaustive optimal-mechanism search."""

from __future__ import annotations

import enum
import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    Environment,
    FeasibleSet,
    TabularMechanism,
    as_fraction,
    best_outcome,
    canonical_environment,
    enumerate_feasible_outcomes,
    partition_family,
    satisfies,
    welfare,
    zeros,
)
from .distributions import JointDistribution
from .errors import GridExtensionError, SizeError, ValidationError
from .mechanisms import (
    DecisionList,
    Entry,
    Offer,
    PartitionInstance,
    SequentialPostedPrice,
    evaluate,
    make_leaf,
)
from .verify import check_ic

DEFAULT_MAX_AGENTS = 4
DEFAULT_MAX_ATOMS = 3
DEFAULT_MAX_OUTCOMES = 8
DEFAULT_MAX_PRICE_ASSIGNMENTS = 20_000
PARALLEL_CHUNK = 64  # fewer assignments per worker than this is not worth a process


class Objective(str, enum.Enum):
    REVENUE = "revenue"
    WELFARE = "welfare"


@dataclass(frozen=True)
class MechanismMetrics:
    expected_welfare: Fraction
    expected_revenue: Fraction
    per_profile: Optional[tuple] = field(default=None, compare=False)

    def objective(self, objective: Objective) -> Fraction:
        if Objective(objective) is Objective.REVENUE:
            return self.expected_revenue
        return self.expected_welfare


def _feasible(constraint, n: int) -> FeasibleSet:
    if constraint is None:
        return enumerate_feasible_outcomes({"generator": "all", "n": n})
    if isinstance(constraint, FeasibleSet):
        return constraint
    return enumerate_feasible_outcomes(constraint)


def expected_metrics(mech, dist: JointDistribution, per_profile: bool = False) -> MechanismMetrics:
    """Exact expected welfare and revenue by enumerating the prior's support."""
    total_w = total_r = Fraction(0)
    rows = []
    for v, p in dist.support():
        if isinstance(mech, TabularMechanism) and v not in mech.table:
            raise GridExtensionError(v)
        outcome, payments = evaluate(mech, v)
        w = welfare(v, outcome)
        rev = sum(payments, Fraction(0))
        total_w += p * w
        total_r += p * rev
        if per_profile:
            rows.append((v, p, outcome, payments, w, rev))
    return MechanismMetrics(total_w, total_r, tuple(rows) if per_profile else None)


def expected_optimal_welfare(dist: JointDistribution, constraint=None) -> Fraction:
    fs = _feasible(constraint, dist.n_agents)
    outcomes = sorted(fs.outcomes)
    return sum((p * welfare(v, best_outcome(v, outcomes)) for v, p in dist.support()),
               Fraction(0))


def make_partition_instance(num_groups: int, r: int, p, value_on_hit=1) -> PartitionInstance:
    """``num_groups`` groups of ``r`` agents, each valued ``value_on_hit`` w.p. ``p``."""
    p = as_fraction(p)
    value_on_hit = as_fraction(value_on_hit)
    if num_groups < 1 or r < 1:
        raise ValidationError("need at least one group of at least one agent")
    if not 0 < p <= 1:
        raise ValidationError("hit probability must lie in (0, 1]")
    n = num_groups * r
    groups = tuple(tuple(range(g * r, (g + 1) * r)) for g in range(num_groups))
    prior = JointDistribution.product([[(0, 1 - p), (value_on_hit, p)]] * n)
    constraint = enumerate_feasible_outcomes(partition_family(groups, n))
    return PartitionInstance(r, groups, p, value_on_hit, prior, constraint)


# -- price atoms ----------------------------------------------------------------


def _price_atoms(dist: JointDistribution, price_atoms) -> list:
    n = dist.n_agents
    if price_atoms is None:
        pooled = sorted({a for i in range(n) for a in dist.atoms(i)})
        return [pooled] * n
    price_atoms = list(price_atoms)
    if price_atoms and not isinstance(price_atoms[0], (list, tuple, set, frozenset)):
        pooled = sorted({as_fraction(a) for a in price_atoms})
        return [pooled] * n
    if len(price_atoms) != n:
        raise ValidationError(f"need price atoms for {n} agents", "$.price_atoms")
    return [sorted({as_fraction(a) for a in atoms}) for atoms in price_atoms]


# -- optimal sequential posted prices -------------------------------------------


@dataclass(frozen=True)
class SearchResult:
    mechanism: Union[SequentialPostedPrice, DecisionList]
    metrics: MechanismMetrics
    objective: Objective
    optimum: Fraction
    candidates: int
    evaluated: int
    seconds: float


def count_posted_price_plans(constraint: FeasibleSet, atoms: Sequence[Sequence]) -> int:
    """Number of distinct adaptive plans (stopping is allowed at every node)."""
    n = constraint.n_agents
    memo: dict = {}

    def count(visited: frozenset, accepted: frozenset) -> int:
        key = (visited, accepted)
        if key not in memo:
            total = 1
            for i in range(n):
                if i in visited or not _can_add(constraint, accepted, i, n):
                    continue
                total += len(atoms[i]) * count(visited | {i}, accepted | {i}) * \
                    count(visited | {i}, accepted)
            memo[key] = total
        return memo[key]

    return count(frozenset(), frozenset())


def _can_add(constraint: FeasibleSet, accepted, i: int, n: int) -> bool:
    return tuple(1 if k in accepted or k == i else 0 for k in range(n)) in constraint.outcomes


def search_optimal_posted_price(
    dist: JointDistribution,
    constraint=None,
    price_atoms=None,
    objective: Objective = Objective.REVENUE,
    max_agents: int = DEFAULT_MAX_AGENTS,
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> SearchResult:
    """Best adaptive sequential posted-price plan for ``objective``.

    Every plan is a tree over accept/reject histories, and the expected
    objective of a plan is the sum, over its nodes, of the mass-weighted
    gain collected there.  The best subtree below a history therefore
    depends only on that history, so maximizing history by history
    (memoized on the per-agent outcomes seen so far) returns an optimum of
    the full plan space.  Ties go to stopping, then lower agent index, then
    lower price.
    """
    start = time.perf_counter()
    objective = Objective(objective)
    n = dist.n_agents
    fs = _feasible(constraint, n)
    atoms = _price_atoms(dist, price_atoms)
    cardinality = count_posted_price_plans(fs, atoms)
    if n > max_agents:
        raise SizeError("too many agents for exhaustive posted-price search", n, max_agents)
    widest = max(len(a) for a in atoms)
    if widest > max_atoms:
        raise SizeError("too many price atoms per agent", widest, max_atoms)

    support = list(dist.support())
    memo: dict = {}

    def solve(state: tuple, points: tuple) -> tuple:
        # state[i]: None if unvisited, else (price, accepted)
        if not points:
            return Fraction(0), None
        if state in memo:
            return memo[state]
        accepted = frozenset(i for i, s in enumerate(state) if s and s[1])
        best_val, best_node = Fraction(0), None
        for i in range(n):
            if state[i] is not None or not _can_add(fs, accepted, i, n):
                continue
            for q in atoms[i]:
                yes = tuple(k for k in points if support[k][0][i] >= q)
                no = tuple(k for k in points if support[k][0][i] < q)
                gain = sum((support[k][1] * (q if objective is Objective.REVENUE
                                             else support[k][0][i]) for k in yes), Fraction(0))
                acc_val, acc_node = solve(state[:i] + ((q, True),) + state[i + 1:], yes)
                rej_val, rej_node = solve(state[:i] + ((q, False),) + state[i + 1:], no)
                val = gain + acc_val + rej_val
                if val > best_val:
                    best_val, best_node = val, (i, q, acc_node, rej_node)
        memo[state] = (best_val, best_node)
        return memo[state]

    optimum, root = solve((None,) * n, tuple(range(len(support))))

    def build(node, accepted: dict):
        if node is None:
            return make_leaf(n, accepted)
        i, q, acc, rej = node
        return Offer(i, q, build(acc, {**accepted, i: q}), build(rej, accepted))

    plan = SequentialPostedPrice(n, build(root, {}), fs.outcomes)
    metrics = expected_metrics(plan, dist)
    assert metrics.objective(objective) == optimum
    return SearchResult(plan, metrics, objective, optimum, cardinality, len(memo),
                        time.perf_counter() - start)


# -- optimal order-oblivious decision lists ----------------------------------------


def _price_assignments(outcomes: list, atoms: list):
    per_outcome = []
    for o in outcomes:
        choices = [atoms[i] if o[i] else [Fraction(0)] for i in range(len(o))]
        per_outcome.append(list(itertools.product(*choices)))
    return per_outcome


def count_price_assignments(outcomes: list, atoms: list) -> int:
    total = 1
    for o in outcomes:
        for i, x in enumerate(o):
            if x:
                total *= len(atoms[i])
    return total


def _best_for_prices(prices: tuple, outcomes: list, grid: list, support_idx: list,
                     support: list, objective: Objective, env: Environment, floor):
    """Best IC order-oblivious behavior for one price assignment, or None.

    Behaviors are assignments of a firing outcome to each satisfaction
    pattern ``S`` (set of satisfied outcomes).  Such an assignment comes
    from an order-oblivious list iff, with ``E(o)`` = outcomes outside every
    pattern where ``o`` fires, each non-chosen ``o in S`` has ``E(o)``
    meeting ``S``.  ``E`` only shrinks as assignments are added, so a
    violation prunes the branch.
    """
    k = len(outcomes)
    price = dict(zip(outcomes, prices))
    pattern_of = []
    for v in grid:
        pattern_of.append(frozenset(j for j in range(k) if satisfies(v, outcomes[j], prices[j])))
    patterns = sorted(set(pattern_of), key=lambda s: (-len(s), sorted(s)))
    # support mass per pattern, keyed by outcome choice
    sup_patterns = {}
    for idx in support_idx:
        sup_patterns.setdefault(pattern_of[idx[0]], []).append(idx)

    def pattern_gain(s, j):
        total = Fraction(0)
        for grid_idx, sup_k in sup_patterns.get(s, ()):
            v, p = support[sup_k]
            if objective is Objective.REVENUE:
                total += p * sum(prices[j], Fraction(0))
            else:
                total += p * welfare(v, outcomes[j])
        return total

    gains = {s: {j: pattern_gain(s, j) for j in s} for s in patterns}
    upper_rest = [Fraction(0)] * (len(patterns) + 1)
    for t in range(len(patterns) - 1, -1, -1):
        upper_rest[t] = upper_rest[t + 1] + max(gains[patterns[t]].values())

    fires = [set() for _ in range(k)]  # union of patterns where outcome j fires
    choice: dict = {}
    best = [floor, None]

    def realizable(s, j) -> bool:
        for s2, j2 in list(choice.items()) + [(s, j)]:
            for o in s2:
                if o != j2 and s2 <= fires[o]:
                    return False
        return True

    def rec(t: int, acc: Fraction):
        if best[0] is not None and acc + upper_rest[t] <= best[0]:
            return
        if t == len(patterns):
            table = {v: (outcomes[choice[pattern_of[g]]], prices[choice[pattern_of[g]]])
                     for g, v in enumerate(grid)}
            tab = TabularMechanism(env, table)
            if check_ic(tab).holds:
                best[0], best[1] = acc, (dict(choice), [frozenset(f) for f in fires])
            return
        s = patterns[t]
        for j in sorted(s, key=lambda j: outcomes[j], reverse=True):
            added = s - fires[j]
            fires[j] |= s
            if realizable(s, j):
                choice[s] = j
                rec(t + 1, acc + gains[s][j])
                del choice[s]
            fires[j] -= added

    rec(0, Fraction(0))
    if best[1] is None:
        return None
    _, fire_sets = best[1]
    entries = []
    # outcomes that never fire stay listed: other entries may rely on them as exceptions
    for j, o in enumerate(outcomes):
        exc = frozenset(outcomes[m] for m in range(k) if m != j and m not in fire_sets[j])
        entries.append(Entry(o, price[o], exc))
    entries.sort(key=lambda e: (sum(e.prices, Fraction(0)), e.outcome), reverse=True)
    return best[0], DecisionList(tuple(entries), order_oblivious=True)


def _search_chunk(args):
    (chunk, outcomes, grid, support_idx, support, objective, env) = args
    best_val, best_dl, best_idx = None, None, None
    evaluated = 0
    for idx, prices in chunk:
        evaluated += 1
        floor = best_val
        found = _best_for_prices(prices, outcomes, grid, support_idx, support,
                                 objective, env, floor)
        if found is not None and (best_val is None or found[0] > best_val):
            best_val, best_dl, best_idx = found[0], found[1], idx
    return best_val, best_idx, best_dl, evaluated


def search_optimal_decision_list(
    dist: JointDistribution,
    constraint=None,
    price_atoms=None,
    objective: Objective = Objective.REVENUE,
    max_outcomes: int = DEFAULT_MAX_OUTCOMES,
    max_atoms: int = DEFAULT_MAX_ATOMS,
    max_price_assignments: int = DEFAULT_MAX_PRICE_ASSIGNMENTS,
    threads: int = 1,
) -> SearchResult:
    """Best IC order-oblivious decision list with prices from ``price_atoms``.

    Every feasible outcome is listed.  For each price assignment the search
    walks all order-oblivious behaviors on the canonical grid (branch and
    bound on the objective), keeping only those that pass ``check_ic``.
    Ties go to the first price assignment in enumeration order.
    """
    start = time.perf_counter()
    objective = Objective(objective)
    n = dist.n_agents
    fs = _feasible(constraint, n)
    outcomes = sorted(fs.outcomes, reverse=True)
    if len(outcomes) > max_outcomes:
        raise SizeError("too many outcomes for decision-list search", len(outcomes), max_outcomes)
    atoms = _price_atoms(dist, price_atoms)
    widest = max(len(a) for a in atoms)
    if widest > max_atoms:
        raise SizeError("too many price atoms per agent", widest, max_atoms)
    cardinality = count_price_assignments(outcomes, atoms)
    if cardinality > max_price_assignments:
        raise SizeError("too many price assignments", cardinality, max_price_assignments)

    base = Environment.single_parameter([list(dist.atoms(i)) for i in range(n)], fs.outcomes)
    env = canonical_environment(base, atoms)
    grid = list(env.grid())
    position = {v: g for g, v in enumerate(grid)}
    support = list(dist.support())
    support_idx = [(position[v], k) for k, (v, _) in enumerate(support)]

    assignments = list(enumerate(itertools.product(*_price_assignments(outcomes, atoms))))
    threads = max(1, min(int(threads), len(assignments) // PARALLEL_CHUNK))
    chunks = [assignments[t::threads] for t in range(threads)]
    jobs = [(c, outcomes, grid, support_idx, support, objective, env) for c in chunks]
    if threads == 1:
        results = [_search_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_search_chunk, jobs))
    evaluated = sum(r[3] for r in results)
    found = [r for r in results if r[0] is not None]
    if not found:
        raise ValidationError("no IC order-oblivious decision list exists on these atoms")
    best_val = max(r[0] for r in found)
    _, _, dl, _ = min((r for r in found if r[0] == best_val), key=lambda r: r[1])
    metrics = expected_metrics(dl, dist)
    assert metrics.objective(objective) == best_val
    return SearchResult(dl, metrics, objective, best_val, cardinality, evaluated,
                        time.perf_counter() - start)


# -- Monte Carlo ----------------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    samples: int
    seed: int
    welfare_mean: float
    welfare_se: float
    revenue_mean: float
    revenue_se: float


def monte_carlo_metrics(mech, dist: JointDistribution, samples: int, seed: int) -> MonteCarloEstimate:
    """Seeded sample means with standard errors, for priors beyond exhaustive reach."""
    rng = np.random.default_rng(seed)
    n = dist.n_agents
    if dist.is_product:
        cols = []
        for i in range(n):
            marg = dist.marginal(i)
            probs = np.array([float(p) for _, p in marg])
            picks = rng.choice(len(marg), size=samples, p=probs / probs.sum())
            cols.append(picks)
        keys = np.stack(cols, axis=1)
        lookup = [[a for a, _ in dist.marginal(i)] for i in range(n)]
        to_profile = lambda row: tuple(lookup[i][row[i]] for i in range(n))  # noqa: E731
    else:
        pts = list(dist.support())
        probs = np.array([float(p) for _, p in pts])
        keys = rng.choice(len(pts), size=samples, p=probs / probs.sum()).reshape(-1, 1)
        to_profile = lambda row: pts[row[0]][0]  # noqa: E731
    cache: dict = {}
    w = np.empty(samples)
    r = np.empty(samples)
    for s, row in enumerate(map(tuple, keys)):
        if row not in cache:
            v = to_profile(row)
            outcome, payments = evaluate(mech, v)
            cache[row] = (float(welfare(v, outcome)), float(sum(payments, Fraction(0))))
        w[s], r[s] = cache[row]
    se = lambda x: float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0  # noqa: E731
    return MonteCarloEstimate(samples, seed, float(w.mean()), se(w), float(r.mean()), se(r))


def zero_mechanism(n: int) -> DecisionList:
    return DecisionList((Entry(zeros(n), zeros(n)),), order_oblivious=True)
