"""Exact finite priors over valuation profiles."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .core import as_fraction
from .errors import ValidationError


class DistKind(str, enum.Enum):
    PRODUCT = "product"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class JointDistribution:
    """Finite joint prior with exact rational probabilities.

    ``marginals`` is set for product priors (per agent, ``(atom, prob)``
    pairs); ``points`` holds ``(profile, prob)`` pairs for explicit ones.
    """

    kind: DistKind
    n_agents: int
    marginals: Optional[tuple] = None
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind is DistKind.PRODUCT:
            for i, marg in enumerate(self.marginals):
                _check_probs([p for _, p in marg], f"$.agents[{i}]")
                if any(a < 0 for a, _ in marg):
                    raise ValidationError("values must be nonnegative", f"$.agents[{i}]")
        else:
            _check_probs([p for _, p in self.points], "$.support")
            for k, (v, _) in enumerate(self.points):
                if len(v) != self.n_agents:
                    raise ValidationError(f"profile needs {self.n_agents} values",
                                          f"$.support[{k}]")
                if any(x < 0 for x in v):
                    raise ValidationError("values must be nonnegative", f"$.support[{k}]")

    @classmethod
    def product(cls, marginals: Sequence[Iterable[tuple]]) -> "JointDistribution":
        merged = []
        for i, marg in enumerate(marginals):
            acc: dict = {}
            for a, p in marg:
                a = as_fraction(a, f"$.agents[{i}]")
                acc[a] = acc.get(a, Fraction(0)) + as_fraction(p, f"$.agents[{i}]")
            merged.append(tuple(sorted(acc.items())))
        return cls(DistKind.PRODUCT, len(merged), marginals=tuple(merged))

    @classmethod
    def explicit(cls, points: Iterable[tuple]) -> "JointDistribution":
        acc: dict = {}
        for k, (v, p) in enumerate(points):
            v = tuple(as_fraction(x, f"$.support[{k}]") for x in v)
            acc[v] = acc.get(v, Fraction(0)) + as_fraction(p, f"$.support[{k}]")
        if not acc:
            raise ValidationError("empty support", "$.support")
        n = len(next(iter(acc)))
        return cls(DistKind.EXPLICIT, n, points=tuple(sorted(acc.items())))

    @classmethod
    def point_mass(cls, profile: Sequence) -> "JointDistribution":
        return cls.product([[(x, 1)] for x in profile])

    @classmethod
    def bernoulli(cls, n: int, p, value=1) -> "JointDistribution":
        p = as_fraction(p)
        return cls.product([[(0, 1 - p), (value, p)]] * n)

    @property
    def is_product(self) -> bool:
        return self.kind is DistKind.PRODUCT

    def support(self) -> Iterator[tuple]:
        """``(profile, probability)`` pairs with positive probability."""
        if self.kind is DistKind.EXPLICIT:
            for v, p in self.points:
                if p > 0:
                    yield v, p
            return
        live = [[(a, p) for a, p in marg if p > 0] for marg in self.marginals]
        for combo in itertools.product(*live):
            prob = Fraction(1)
            for _, p in combo:
                prob *= p
            yield tuple(a for a, _ in combo), prob

    def support_size(self) -> int:
        if self.kind is DistKind.EXPLICIT:
            return sum(1 for _, p in self.points if p > 0)
        size = 1
        for marg in self.marginals:
            size *= sum(1 for _, p in marg if p > 0)
        return size

    def atoms(self, i: int) -> tuple:
        """Agent ``i``'s support atoms (values with positive probability)."""
        if self.kind is DistKind.PRODUCT:
            return tuple(a for a, p in self.marginals[i] if p > 0)
        return tuple(sorted({v[i] for v, p in self.points if p > 0}))

    def all_atoms(self) -> list:
        return [self.atoms(i) for i in range(self.n_agents)]

    def marginal(self, i: int) -> tuple:
        if self.kind is DistKind.PRODUCT:
            return tuple((a, p) for a, p in self.marginals[i] if p > 0)
        acc: dict = {}
        for v, p in self.support():
            acc[v[i]] = acc.get(v[i], Fraction(0)) + p
        return tuple(sorted(acc.items()))


def _check_probs(probs, path):
    if any(p < 0 for p in probs):
        raise ValidationError("probabilities must be nonnegative", path)
    if sum(probs, Fraction(0)) != 1:
        raise ValidationError(f"probabilities sum to {sum(probs, Fraction(0))}, not 1", path)
