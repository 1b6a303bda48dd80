import random
import sys
from fractions import Fraction
from pathlib import Path

from hypothesis import settings, strategies as st

from nonbossy.core import downward_closure, zeros
from nonbossy.mechanisms import DecisionList, Entry, posted_price_path, build_plan

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

PRICE_ATOMS = (Fraction(1), Fraction(2), Fraction(3))


def unit(n, i):
    return tuple(1 if k == i else 0 for k in range(n))


def random_decision_list(rng: random.Random, n_max=3, exception_rate=0.3) -> DecisionList:
    """Random list over a random downward-closed family; exceptions drawn independently."""
    n = rng.randint(1, n_max)
    tops = [tuple(rng.randint(0, 1) for _ in range(n)) for _ in range(rng.randint(1, 3))]
    outcomes = sorted(downward_closure(tops))
    rng.shuffle(outcomes)
    entries = []
    for o in outcomes:
        prices = tuple(rng.choice(PRICE_ATOMS) if x else Fraction(0) for x in o)
        exc = frozenset(p for p in outcomes if p != o and rng.random() < exception_rate)
        entries.append(Entry(o, prices, exc))
    return DecisionList(tuple(entries))


def random_single_item_path(rng: random.Random, n_max=4):
    n = rng.randint(1, n_max)
    agents = rng.sample(range(n), rng.randint(1, n))
    offers = [(i, rng.choice(PRICE_ATOMS)) for i in agents]
    feasible = {zeros(n)} | {unit(n, i) for i in range(n)}
    return posted_price_path(n, offers, feasible)


def _random_plan_layout(rng, n, visited, accepted, feasible, depth_bias):
    if rng.random() < depth_bias * len(visited) / max(n, 1):
        return None
    options = [i for i in range(n) if i not in visited
               and tuple(1 if k in accepted or k == i else 0 for k in range(n)) in feasible]
    if not options:
        return None
    i = rng.choice(options)
    return {"agent": i, "price": rng.choice(PRICE_ATOMS),
            "accept": _random_plan_layout(rng, n, visited | {i}, accepted | {i}, feasible, depth_bias),
            "reject": _random_plan_layout(rng, n, visited | {i}, accepted, feasible, depth_bias)}


def random_adaptive_plan(rng: random.Random, n_max=3, feasible=None):
    n = rng.randint(1, n_max)
    if feasible is None:
        tops = [tuple(rng.randint(0, 1) for _ in range(n)) for _ in range(2)]
        feasible = downward_closure(tops) | {zeros(n)}
    layout = _random_plan_layout(rng, n, frozenset(), frozenset(), feasible, 0.5)
    return build_plan(n, layout, feasible)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
rationals = st.fractions(min_value=0, max_value=5, max_denominator=4)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
