"""Independent brute-force oracles used to freeze expected values.

Nothing here calls the package's evaluators or searches; the helpers
enumerate explicitly and evaluate with their own arithmetic.
"""

from __future__ import annotations

import itertools
from fractions import Fraction


def bernoulli_profiles(n, p, hi=1):
    p = Fraction(p)
    for bits in itertools.product((0, 1), repeat=n):
        prob = Fraction(1)
        for b in bits:
            prob *= p if b else 1 - p
        yield tuple(Fraction(hi) if b else Fraction(0) for b in bits), prob


def partition_feasible(groups, n):
    out = set()
    for g in groups:
        for k in range(len(g) + 1):
            for sub in itertools.combinations(g, k):
                out.add(tuple(1 if i in sub else 0 for i in range(n)))
    return out


def optimal_welfare(profiles, feasible):
    return sum(prob * max(sum(v[i] for i in range(len(v)) if o[i]) for o in feasible)
               for v, prob in profiles)


def all_plans(n, feasible, atoms, visited=frozenset(), accepted=frozenset()):
    """Every adaptive plan as nested tuples ``None | (agent, price, accept, reject)``."""
    yield None
    for i in range(n):
        if i in visited:
            continue
        grown = tuple(1 if k in accepted or k == i else 0 for k in range(n))
        if grown not in feasible:
            continue
        for q in atoms:
            for acc in list(all_plans(n, feasible, atoms, visited | {i}, accepted | {i})):
                for rej in list(all_plans(n, feasible, atoms, visited | {i}, accepted)):
                    yield (i, q, acc, rej)


def run_plan(plan, v):
    welfare = revenue = Fraction(0)
    while plan is not None:
        i, q, acc, rej = plan
        if v[i] >= q:
            welfare += v[i]
            revenue += q
            plan = acc
        else:
            plan = rej
    return welfare, revenue


def best_plan_value(profiles, feasible, atoms, n, objective):
    profiles = list(profiles)
    best = None
    count = 0
    for plan in all_plans(n, feasible, atoms):
        count += 1
        val = sum(prob * run_plan(plan, v)[0 if objective == "welfare" else 1]
                  for v, prob in profiles)
        if best is None or val > best:
            best = val
    return best, count
