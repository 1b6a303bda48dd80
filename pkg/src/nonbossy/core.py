"""Environments, valuation grids, tabular mechanisms and the satisfaction predicate.

Everything here is exact: values, prices and payments are
:class:`fractions.Fraction` instances and every comparison is exact.

Conventions used throughout the package:

* agents are indexed from 0;
* an *outcome* is a tuple with one personal outcome per agent (``0``/``1`` in
  single-parameter environments, arbitrary hashable labels in common-outcome
  environments);
* a *profile* is a tuple with one valuation per agent.  In a single-parameter
  environment a valuation is the single number ``v_i(1)``; in a
  common-outcome environment it is a tuple of numbers aligned with that
  agent's ``personal_outcomes``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Any, Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .errors import StructuralError, ValidationError

Outcome = tuple
PaymentVector = tuple
Profile = tuple
Grid = tuple  # per-agent tuple of atoms


def as_fraction(x: Any, path: str = "$") -> Fraction:
    """Parse an exact rational from an int, a Fraction or a ``"p/q"`` string.

    Floats are rejected: they would silently import rounding error into
    checks that hinge on exact ties.
    """
    if isinstance(x, bool):
        raise ValidationError(f"expected a rational, got boolean {x!r}", path)
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"cannot parse {x!r} as a rational", path) from None
    raise ValidationError(f"expected a rational (int or 'p/q' string), got {x!r}", path)


def zeros(n: int) -> tuple:
    return (0,) * n


class Kind(str, enum.Enum):
    SINGLE_PARAMETER = "single-parameter"
    COMMON_OUTCOME = "common-outcome"


@dataclass(frozen=True)
class Environment:
    """A finite environment: agents, feasible outcomes, valuation atoms, tiebreaks.

    ``tiebreak[i]`` lists agent ``i``'s personal outcomes from most to least
    preferred; it only matters when two options give equal utility.
    """

    n_agents: int
    kind: Kind
    personal_outcomes: tuple
    feasible: frozenset
    value_atoms: tuple
    tiebreak: tuple

    def __post_init__(self):
        n = self.n_agents
        if n < 1:
            raise ValidationError("n_agents must be positive", "$.agents")
        for name in ("personal_outcomes", "value_atoms", "tiebreak"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"expected {n} per-agent entries", f"$.{name}")
        for i, (outs, order) in enumerate(zip(self.personal_outcomes, self.tiebreak)):
            if len(set(order)) != len(order) or set(order) != set(outs):
                raise ValidationError(
                    "tiebreak must be a strict total order over the personal outcomes",
                    f"$.tiebreak[{i}]",
                )
        for k, o in enumerate(sorted(self.feasible, key=repr)):
            if len(o) != n or any(o[i] not in self.personal_outcomes[i] for i in range(n)):
                raise ValidationError(f"outcome {o!r} is not a vector of personal outcomes",
                                      "$.feasible")
        if not self.feasible:
            raise ValidationError("feasible outcome set is empty", "$.feasible")
        for i, atoms in enumerate(self.value_atoms):
            if not atoms:
                raise ValidationError("agent has no valuations", f"$.atoms[{i}]")
            if self.kind is Kind.SINGLE_PARAMETER:
                if any(a < 0 for a in atoms):
                    raise ValidationError("value atoms must be nonnegative", f"$.atoms[{i}]")
                if any(a >= b for a, b in zip(atoms, atoms[1:])):
                    raise ValidationError("value atoms must be strictly increasing",
                                          f"$.atoms[{i}]")
            else:
                width = len(self.personal_outcomes[i])
                for j, val in enumerate(atoms):
                    if len(val) != width:
                        raise ValidationError(
                            f"valuation needs {width} entries", f"$.atoms[{i}][{j}]")
                    if any(x < 0 for x in val):
                        raise ValidationError("valuations must be nonnegative",
                                              f"$.atoms[{i}][{j}]")
                if len(set(atoms)) != len(atoms):
                    raise ValidationError("duplicate valuation", f"$.atoms[{i}]")
        if self.kind is Kind.SINGLE_PARAMETER:
            if any(outs != (0, 1) for outs in self.personal_outcomes):
                raise ValidationError("single-parameter personal outcomes are (0, 1)",
                                      "$.personal_outcomes")
            if zeros(n) not in self.feasible:
                raise ValidationError("the all-zeros outcome must be feasible", "$.feasible")

    # -- constructors -----------------------------------------------------

    @classmethod
    def single_parameter(
        cls,
        atoms: Sequence[Iterable],
        feasible: Optional[Iterable] = None,
        tiebreak: Optional[Sequence[Sequence[int]]] = None,
    ) -> "Environment":
        """Single-parameter environment; ``feasible`` defaults to ``{0,1}^n``.

        Each agent's atoms are deduplicated and sorted.  By default every
        agent prefers receiving the item when indifferent.
        """
        n = len(atoms)
        value_atoms = tuple(
            tuple(sorted({as_fraction(a, f"$.atoms[{i}]") for a in agent_atoms}))
            for i, agent_atoms in enumerate(atoms)
        )
        if feasible is None:
            feasible = itertools.product((0, 1), repeat=n)
        outs = frozenset(tuple(int(x) for x in o) for o in feasible)
        if tiebreak is None:
            tiebreak = [(1, 0)] * n
        return cls(n, Kind.SINGLE_PARAMETER, ((0, 1),) * n, outs, value_atoms,
                   tuple(tuple(t) for t in tiebreak))

    @classmethod
    def common_outcome(
        cls,
        outcomes: Sequence,
        valuations: Sequence[Sequence[Sequence]],
        tiebreak: Optional[Sequence[Sequence]] = None,
    ) -> "Environment":
        """Common-outcome environment: all agents share one public decision.

        ``valuations[i]`` lists agent ``i``'s possible valuations, each a
        sequence of values aligned with ``outcomes``.  The default tiebreak
        prefers outcomes listed earlier.
        """
        n = len(valuations)
        labels = tuple(outcomes)
        value_atoms = tuple(
            tuple(tuple(as_fraction(x, f"$.atoms[{i}][{j}]") for x in val)
                  for j, val in enumerate(agent_vals))
            for i, agent_vals in enumerate(valuations)
        )
        feasible = frozenset((o,) * n for o in labels)
        if tiebreak is None:
            tiebreak = [labels] * n
        return cls(n, Kind.COMMON_OUTCOME, (labels,) * n, feasible, value_atoms,
                   tuple(tuple(t) for t in tiebreak))

    def with_atoms(self, atoms: Grid) -> "Environment":
        return Environment(self.n_agents, self.kind, self.personal_outcomes, self.feasible,
                           tuple(tuple(a) for a in atoms), self.tiebreak)

    # -- queries ------------------------------------------------------------

    @property
    def is_single_parameter(self) -> bool:
        return self.kind is Kind.SINGLE_PARAMETER

    def value(self, i: int, valuation, personal_outcome) -> Fraction:
        """``v_i(o_i)`` for one agent."""
        if self.kind is Kind.SINGLE_PARAMETER:
            return valuation if personal_outcome == 1 else Fraction(0)
        return valuation[self.personal_outcomes[i].index(personal_outcome)]

    def tiebreak_rank(self, i: int, personal_outcome) -> int:
        """Position in agent ``i``'s tiebreak order (0 = most preferred)."""
        return self.tiebreak[i].index(personal_outcome)

    def grid(self) -> Iterator[Profile]:
        return itertools.product(*self.value_atoms)

    @property
    def grid_size(self) -> int:
        size = 1
        for atoms in self.value_atoms:
            size *= len(atoms)
        return size

    @property
    def rank(self) -> int:
        return feasible_rank(self.feasible)

    def describe_grid(self) -> str:
        parts = []
        for atoms in self.value_atoms:
            parts.append("{" + ", ".join(_fmt_valuation(a) for a in atoms) + "}")
        return " x ".join(parts) + f" ({self.grid_size} profiles)"


def _fmt_valuation(a) -> str:
    if isinstance(a, tuple):
        return "(" + ", ".join(str(x) for x in a) + ")"
    return str(a)


# -- satisfaction ---------------------------------------------------------


def satisfies(profile: Profile, outcome: Outcome, prices: PaymentVector) -> bool:
    """True iff every agent values its personal outcome at least at its price.

    Single-parameter only: ``v_i(1) = profile[i]`` and ``v_i(0) = 0``.
    """
    if not len(profile) == len(outcome) == len(prices):
        raise StructuralError(
            f"dimension mismatch: profile {len(profile)}, outcome {len(outcome)}, "
            f"prices {len(prices)}")
    for v, o, p in zip(profile, outcome, prices):
        if (v if o else 0) < p:
            return False
    return True


# -- canonical grids ------------------------------------------------------


def build_canonical_grid(env: Environment, price_atoms: Sequence[Iterable]) -> Grid:
    """Per-agent atoms: env atoms, price atoms, 0 and a sentinel above the max.

    Satisfaction only depends on how each coordinate compares to the price
    coordinates, so this grid hits every behaviorally distinct profile of
    the mechanisms whose prices were supplied.
    """
    if not env.is_single_parameter:
        return env.value_atoms
    if len(price_atoms) != env.n_agents:
        raise StructuralError(f"need price atoms for {env.n_agents} agents, got {len(price_atoms)}")
    grid = []
    for i in range(env.n_agents):
        prices = {as_fraction(p) for p in price_atoms[i]}
        if any(p < 0 for p in prices):
            raise ValidationError("price atoms must be nonnegative", f"$.prices[{i}]")
        atoms = set(env.value_atoms[i]) | prices | {Fraction(0)}
        atoms.add(max(atoms) + 1)
        grid.append(tuple(sorted(atoms)))
    return tuple(grid)


def canonical_environment(env: Environment, price_atoms: Sequence[Iterable]) -> Environment:
    return env.with_atoms(build_canonical_grid(env, price_atoms))


# -- feasible outcome families ---------------------------------------------


@dataclass(frozen=True)
class FeasibleSet:
    n_agents: int
    outcomes: frozenset
    rank: int

    def __iter__(self):
        return iter(sorted(self.outcomes, reverse=True))

    def __len__(self):
        return len(self.outcomes)

    def __contains__(self, o):
        return o in self.outcomes


def feasible_rank(outcomes: Iterable[Outcome]) -> int:
    return max((sum(1 for x in o if x) for o in outcomes), default=0)


def k_uniform(n: int, k: int) -> frozenset:
    out = set()
    for size in range(min(k, n) + 1):
        for idx in itertools.combinations(range(n), size):
            out.add(tuple(1 if i in idx else 0 for i in range(n)))
    return frozenset(out)


def partition_family(groups: Sequence[Sequence[int]], n: Optional[int] = None) -> frozenset:
    """Allocations confined to a single group."""
    if n is None:
        n = sum(len(g) for g in groups)
    out = {zeros(n)}
    for g in groups:
        for size in range(1, len(g) + 1):
            for idx in itertools.combinations(g, size):
                out.add(tuple(1 if i in idx else 0 for i in range(n)))
    return frozenset(out)


def downward_closure(vectors: Iterable[Sequence[int]]) -> frozenset:
    out = set()
    for v in vectors:
        ones = [i for i, x in enumerate(v) if x]
        for size in range(len(ones) + 1):
            for idx in itertools.combinations(ones, size):
                out.add(tuple(1 if i in idx else 0 for i in range(len(v))))
    return frozenset(out)


def enumerate_feasible_outcomes(constraint: Any) -> FeasibleSet:
    """Materialize a downward-closed 0/1 family and report its rank.

    ``constraint`` is an explicit iterable of 0/1 vectors or a generator
    dict: ``{"generator": "k-uniform", "n": n, "k": k}``,
    ``{"generator": "partition", "groups": [[0, 1], [2, 3]]}`` or
    ``{"generator": "all", "n": n}``.
    """
    if isinstance(constraint, Mapping):
        try:
            family = _generate(constraint)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad generator parameters ({exc!r})", "$.feasible") from None
    else:
        family = frozenset(tuple(int(x) for x in o) for o in constraint)
    return _validate_family(family)


def _generate(constraint: Mapping) -> frozenset:
    gen = constraint.get("generator")
    if gen == "k-uniform":
        return k_uniform(int(constraint["n"]), int(constraint["k"]))
    if gen == "partition":
        groups = [list(map(int, g)) for g in constraint["groups"]]
        return partition_family(groups, constraint.get("n"))
    if gen == "all":
        return frozenset(itertools.product((0, 1), repeat=int(constraint["n"])))
    raise ValidationError(f"unknown generator {gen!r}", "$.feasible.generator")


def _validate_family(family: frozenset) -> FeasibleSet:
    if not family:
        raise ValidationError("empty feasibility family", "$.feasible")
    widths = {len(o) for o in family}
    if len(widths) != 1:
        raise ValidationError("outcome vectors have different lengths", "$.feasible")
    for o in sorted(family):
        if any(x not in (0, 1) for x in o):
            raise ValidationError(f"{o} is not a 0/1 vector", "$.feasible")
        for i in reversed(range(len(o))):
            if o[i]:
                below = o[:i] + (0,) + o[i + 1:]
                if below not in family:
                    raise ValidationError(
                        f"family is not downward-closed: {o} is a member but {below} is not",
                        "$.feasible", context={"member": o, "missing": below})
    n = widths.pop()
    return FeasibleSet(n, family, feasible_rank(family))


def k_uniform_size(n: int, k: int) -> int:
    return sum(comb(n, j) for j in range(min(k, n) + 1))


# -- welfare helpers --------------------------------------------------------


def welfare(values: Sequence[Fraction], outcome: Outcome) -> Fraction:
    return sum((v for v, o in zip(values, outcome) if o), Fraction(0))


def welfare_sorted(weights: Sequence[Fraction], outcomes: Iterable[Outcome]) -> list:
    """Outcomes by decreasing ``sum(weights[i] * o[i])``; ties: larger vector first."""
    return sorted(outcomes, key=lambda o: (welfare(weights, o), o), reverse=True)


def best_outcome(values: Sequence[Fraction], outcomes: Iterable[Outcome]) -> Outcome:
    """A welfare-maximizing outcome, chosen canonically (see :func:`welfare_sorted`)."""
    return max(outcomes, key=lambda o: (welfare(values, o), o))


# -- tabular mechanisms ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TabularMechanism:
    """Extensional mechanism: every grid profile maps to (outcome, payments)."""

    environment: Environment
    table: Mapping = field(repr=False)

    def __post_init__(self):
        env = self.environment
        table = {}
        for v in env.grid():
            if v not in self.table:
                raise ValidationError(f"table is not total: missing profile {v}", "$.rows")
            outcome, payments = self.table[v]
            outcome = tuple(outcome)
            payments = tuple(as_fraction(p) for p in payments)
            if outcome not in env.feasible:
                raise ValidationError(f"infeasible outcome {outcome} at {v}", "$.rows")
            if len(payments) != env.n_agents:
                raise StructuralError(f"payment vector of length {len(payments)} at {v}")
            if any(p < 0 for p in payments):
                raise ValidationError(f"negative payment at {v}", "$.rows")
            table[v] = (outcome, payments)
        if len(self.table) != len(table):
            raise ValidationError("table has profiles outside the grid", "$.rows")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, env: Environment, fn: Callable[[Profile], tuple]) -> "TabularMechanism":
        return cls(env, {v: fn(v) for v in env.grid()})

    @property
    def n_agents(self) -> int:
        return self.environment.n_agents

    def grid(self) -> list:
        return list(self.environment.grid())

    def __getitem__(self, v: Profile) -> tuple:
        return self.table[v]

    def __eq__(self, other):
        if not isinstance(other, TabularMechanism):
            return NotImplemented
        return (self.environment.value_atoms == other.environment.value_atoms
                and self.table == other.table)

    def rows(self) -> list:
        """``(profile, outcome, payments)`` in grid order."""
        return [(v, *self.table[v]) for v in self.environment.grid()]

    def image(self) -> list:
        """Distinct ``(outcome, payments)`` pairs in first-appearance order."""
        return list(dict.fromkeys(self.table[v] for v in self.environment.grid()))

    def outcome_image(self) -> list:
        return list(dict.fromkeys(self.table[v][0] for v in self.environment.grid()))

    def utility(self, i: int, valuation, v: Profile) -> Fraction:
        """Agent ``i``'s utility, evaluated with ``valuation``, at reported profile ``v``."""
        outcome, payments = self.table[v]
        return self.environment.value(i, valuation, outcome[i]) - payments[i]
