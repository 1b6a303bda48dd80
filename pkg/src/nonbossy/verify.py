"""Brute-force property checkers over tabulated mechanisms.

Every checker quantifies over the mechanism's grid and nothing else; the
report says which grid it covered.  Witnesses come out in a fixed order
(agent index, then truthful profile in grid order, then deviation in atom
order), so ``witnesses[0]`` is the lexicographically first counterexample.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Environment, Kind, TabularMechanism, satisfies
from .errors import ApplicabilityError, ICRequiredError, PrerequisiteError, StructuralError


class Property(str, enum.Enum):
    IC = "IC"
    IR = "IR"
    NB = "NB"
    PAYMENT_CHAR = "PaymentChar"
    CONSISTENCY = "Consistency"
    SEMILATTICE = "Semilattice"
    MONOTONICITY = "Monotonicity"
    OSP = "OSP"
    ORDER_OBLIVIOUS = "OrderOblivious"


@dataclass(frozen=True)
class PropertyReport:
    property: Property
    holds: bool
    witnesses: tuple
    grid_description: str
    sub_reports: tuple = ()

    def __post_init__(self):
        if self.holds != (not self.witnesses):
            raise ValueError("holds must be true exactly when there are no witnesses")

    def __bool__(self):
        return self.holds


def make_report(prop: Property, witnesses, grid: str, sub_reports=()) -> PropertyReport:
    witnesses = tuple(witnesses)
    return PropertyReport(prop, not witnesses, witnesses, grid, tuple(sub_reports))


def _replace(v: tuple, i: int, x) -> tuple:
    return v[:i] + (x,) + v[i + 1:]


def _deviation_pairs(tab: TabularMechanism, i: int):
    """``(truthful profile, deviation profile)`` for agent ``i``, in witness order."""
    atoms = tab.environment.value_atoms[i]
    for v in tab.environment.grid():
        for x in atoms:
            if x != v[i]:
                yield v, _replace(v, i, x)


def _int_prefers(env: Environment, i: int, valuation, a: tuple, b: tuple) -> bool:
    """Agent ``i`` weakly prefers personal pair ``a`` to ``b`` (utility, then tiebreak)."""
    ua = env.value(i, valuation, a[0]) - a[1]
    ub = env.value(i, valuation, b[0]) - b[1]
    if ua != ub:
        return ua > ub
    return env.tiebreak_rank(i, a[0]) <= env.tiebreak_rank(i, b[0])


def _personal(tab: TabularMechanism, i: int, v: tuple) -> tuple:
    outcome, payments = tab[v]
    return outcome[i], payments[i]


# -- IR / IC / NB ---------------------------------------------------------------


def check_ir(tab: TabularMechanism) -> PropertyReport:
    env = tab.environment
    witnesses = []
    for i in range(env.n_agents):
        for v in env.grid():
            u = tab.utility(i, v[i], v)
            if u < 0:
                outcome, payments = tab[v]
                witnesses.append({"agent": i, "profile": v, "outcome": outcome,
                                  "payments": payments, "utility": u})
    return make_report(Property.IR, witnesses, env.describe_grid())


def check_monotonicity(tab: TabularMechanism) -> PropertyReport:
    """Single-parameter allocation monotonicity: ``f_i`` nondecreasing in ``v_i``."""
    env = tab.environment
    if env.kind is not Kind.SINGLE_PARAMETER:
        raise ApplicabilityError("monotonicity is defined for single-parameter environments")
    witnesses = []
    for i in range(env.n_agents):
        atoms = env.value_atoms[i]
        for v in env.grid():
            if v[i] == atoms[-1]:
                continue
            up = _replace(v, i, atoms[atoms.index(v[i]) + 1])
            if tab[v][0][i] > tab[up][0][i]:
                witnesses.append({"agent": i, "profile": v, "raised_to": up[i],
                                  "outcome": tab[v][0], "raised_outcome": tab[up][0]})
    return make_report(Property.MONOTONICITY, witnesses, env.describe_grid())


def check_ic(tab: TabularMechanism) -> PropertyReport:
    """Dominant-strategy IC with the environment's tiebreak.

    For single-parameter environments the report carries an allocation
    monotonicity sub-report.
    """
    env = tab.environment
    witnesses = []
    for i in range(env.n_agents):
        for v, w in _deviation_pairs(tab, i):
            truthful, deviated = _personal(tab, i, v), _personal(tab, i, w)
            if not _int_prefers(env, i, v[i], truthful, deviated):
                witnesses.append({
                    "agent": i, "profile": v, "deviation": w[i],
                    "truthful": tab[v], "deviated": tab[w],
                    "gain": tab.utility(i, v[i], w) - tab.utility(i, v[i], v),
                })
    subs = [check_monotonicity(tab)] if env.is_single_parameter else []
    return make_report(Property.IC, witnesses, env.describe_grid(), subs)


def check_nb(tab: TabularMechanism) -> PropertyReport:
    env = tab.environment
    witnesses = []
    for i in range(env.n_agents):
        atoms = env.value_atoms[i]
        for v, w in _deviation_pairs(tab, i):
            if atoms.index(w[i]) < atoms.index(v[i]):
                continue
            if _personal(tab, i, v) == _personal(tab, i, w) and tab[v] != tab[w]:
                witnesses.append({"agent": i, "profile": v, "deviation": w[i],
                                  "before": tab[v], "after": tab[w]})
    return make_report(Property.NB, witnesses, env.describe_grid())


# -- manipulation certificates -------------------------------------------------


class ExternalPreference(str, enum.Enum):
    CARES_POSITIVELY = "CaresPositively"
    CARES_NEGATIVELY = "CaresNegatively"


@dataclass(frozen=True)
class ManipulationCertificate:
    """A profitable manipulation for an agent with a secondary goal.

    The manipulator's own outcome and payment are unchanged, the target's
    change, and the manipulator's external preference (lexicographically
    after its own utility) ranks the target's pair by the target's own
    preference (positive) or its reverse (negative).
    """

    manipulator: int
    target: int
    fixed_others: tuple
    truthful: object
    deviation: object
    external_preference: ExternalPreference
    before: tuple
    after: tuple

    def profile(self) -> tuple:
        i = self.manipulator
        return self.fixed_others[:i] + (self.truthful,) + self.fixed_others[i:]


def build_rwsg_witness(tab: TabularMechanism,
                       flavor: Optional[ExternalPreference] = None
                       ) -> Optional[ManipulationCertificate]:
    """Certificate that an IC mechanism is not robust to secondary goals, or None.

    Takes the first NB violation and the first agent whose pair it changes.
    By default the certificate is oriented so the target is better off after
    the deviation and the manipulator cares positively about it; passing
    ``flavor=CARES_NEGATIVELY`` orients it the other way.
    """
    if not check_ic(tab).holds:
        raise ICRequiredError()
    nb = check_nb(tab)
    if nb.holds:
        return None
    env = tab.environment
    w = nb.witnesses[0]
    i = w["agent"]
    v = w["profile"]
    dev = _replace(v, i, w["deviation"])
    j = next(k for k in range(env.n_agents)
             if k != i and _personal(tab, k, v) != _personal(tab, k, dev))
    target_better_after = _int_prefers(env, j, v[j], _personal(tab, j, dev), _personal(tab, j, v))
    want = flavor or ExternalPreference.CARES_POSITIVELY
    positive = want is ExternalPreference.CARES_POSITIVELY
    if target_better_after != positive:
        v, dev = dev, v
    return ManipulationCertificate(
        manipulator=i, target=j, fixed_others=v[:i] + v[i + 1:],
        truthful=v[i], deviation=dev[i], external_preference=want,
        before=tab[v], after=tab[dev])


def certificate_is_valid(tab: TabularMechanism, cert: ManipulationCertificate) -> bool:
    """Re-check a certificate against the table."""
    env = tab.environment
    i, j = cert.manipulator, cert.target
    v = cert.profile()
    dev = _replace(v, i, cert.deviation)
    if tab[v] != cert.before or tab[dev] != cert.after:
        return False
    if _personal(tab, i, v) != _personal(tab, i, dev):
        return False
    b, a = _personal(tab, j, v), _personal(tab, j, dev)
    if a == b:
        return False
    j_prefers_after = _int_prefers(env, j, v[j], a, b)
    if cert.external_preference is ExternalPreference.CARES_POSITIVELY:
        return j_prefers_after
    return not j_prefers_after


# -- payment characterization and consistency ------------------------------------


def outcome_prices(tab: TabularMechanism) -> dict:
    """Outcome -> list of distinct payment vectors, first-appearance order."""
    prices: dict = {}
    for v in tab.environment.grid():
        outcome, payments = tab[v]
        seen = prices.setdefault(outcome, [])
        if payments not in seen:
            seen.append(payments)
    return prices


def check_payment_characterization(tab: TabularMechanism) -> PropertyReport:
    """Holds iff payments are a function of the outcome alone."""
    witnesses = []
    first_at: dict = {}
    for v in tab.environment.grid():
        first_at.setdefault(tab[v], v)
    for outcome, pays in outcome_prices(tab).items():
        if len(pays) > 1:
            witnesses.append({"outcome": outcome, "payments": tuple(pays),
                              "profiles": tuple(first_at[(outcome, p)] for p in pays)})
    return make_report(Property.PAYMENT_CHAR, witnesses, tab.environment.describe_grid())


def check_consistency(tab: TabularMechanism) -> PropertyReport:
    """No two profiles both satisfying o and o' pick o at one and o' at the other."""
    env = tab.environment
    if not env.is_single_parameter:
        raise ApplicabilityError("consistency is defined for single-parameter environments")
    pc = check_payment_characterization(tab)
    if not pc.holds:
        raise PrerequisiteError("payment characterization violated; prices per outcome are "
                                "not well defined", failed="PaymentChar")
    price = {o: pays[0] for o, pays in outcome_prices(tab).items()}
    image = list(price)
    # first[(o, o2)]: first profile choosing o while satisfying both o and o2
    first: dict = {}
    for v in env.grid():
        chosen = tab[v][0]
        if not satisfies(v, chosen, price[chosen]):
            continue
        for o2 in image:
            if o2 != chosen and satisfies(v, o2, price[o2]):
                first.setdefault((chosen, o2), v)
    witnesses = []
    for a, b in itertools.combinations(image, 2):
        if (a, b) in first and (b, a) in first:
            witnesses.append({"outcomes": (a, b), "profiles": (first[(a, b)], first[(b, a)]),
                              "prices": (price[a], price[b])})
    return make_report(Property.CONSISTENCY, witnesses, env.describe_grid())


# -- upper semilattice -------------------------------------------------------------


def _as_vector(env: Environment, i: int, valuation) -> tuple:
    return tuple(env.value(i, valuation, o) for o in env.personal_outcomes[i])


def check_upper_semilattice(env: Environment) -> PropertyReport:
    """Every pair of valuations has a common upper bound pinning each personal outcome."""
    witnesses = []
    for i in range(env.n_agents):
        outs = env.personal_outcomes[i]
        vecs = [_as_vector(env, i, a) for a in env.value_atoms[i]]
        for k, o in enumerate(outs):
            def margins(vec):
                return [vec[k] - vec[m] for m in range(len(outs))]
            for a, b in itertools.combinations_with_replacement(range(len(vecs)), 2):
                need = [max(x, y) for x, y in zip(margins(vecs[a]), margins(vecs[b]))]
                if not any(all(m >= t for m, t in zip(margins(c), need)) for c in vecs):
                    witnesses.append({"agent": i, "outcome": o,
                                      "valuations": (env.value_atoms[i][a],
                                                     env.value_atoms[i][b])})
    return make_report(Property.SEMILATTICE, witnesses, env.describe_grid())


# -- Gibbard-Satterthwaite classification --------------------------------------------


class GsVerdict(str, enum.Enum):
    DICTATORSHIP = "Dictatorship"
    TWO_OUTCOMES = "TwoOutcomes"
    NEITHER = "Neither"


@dataclass(frozen=True)
class GsClassification:
    verdict: GsVerdict
    image_size: int
    dictator: Optional[int] = None

    def __str__(self):
        if self.verdict is GsVerdict.DICTATORSHIP:
            return f"Dictatorship(agent {self.dictator})"
        return f"{self.verdict.value} (image size {self.image_size})"


def depends_only_on(tab: TabularMechanism, i: int) -> bool:
    seen: dict = {}
    for v in tab.environment.grid():
        if seen.setdefault(v[i], tab[v]) != tab[v]:
            return False
    return True


def classify_gs(tab: TabularMechanism) -> GsClassification:
    """Dictatorship, two-outcome, or neither.

    A constant mechanism depends on nobody's report, so it is reported as
    two-outcome rather than as a dictatorship of agent 0.
    """
    if tab.environment.kind is not Kind.COMMON_OUTCOME:
        raise ApplicabilityError("GS classification applies to common-outcome environments")
    size = len(tab.image())
    if size > 1:
        for i in range(tab.n_agents):
            if depends_only_on(tab, i):
                return GsClassification(GsVerdict.DICTATORSHIP, size, i)
    if size <= 2:
        return GsClassification(GsVerdict.TWO_OUTCOMES, size)
    return GsClassification(GsVerdict.NEITHER, size)


# -- obvious strategyproofness (sequential direct revelation) -------------------------


def check_osp_sequential(tab: TabularMechanism, visit_order: Sequence[int]) -> PropertyReport:
    """OSP of the game that asks agents for their full type one at a time.

    At each agent's turn, the worst truthful continuation must be at least
    as good as the best continuation after any misreport.
    """
    env = tab.environment
    n = env.n_agents
    order = list(visit_order)
    if sorted(order) != list(range(n)):
        raise StructuralError(f"visit order {order} is not a permutation of the agents")
    atoms = env.value_atoms
    witnesses = []
    for k, i in enumerate(order):
        earlier, later = order[:k], order[k + 1:]
        for prefix in itertools.product(*(atoms[a] for a in earlier)):
            def profiles(report):
                for rest in itertools.product(*(atoms[a] for a in later)):
                    v = [None] * n
                    for a, x in zip(earlier, prefix):
                        v[a] = x
                    v[i] = report
                    for a, x in zip(later, rest):
                        v[a] = x
                    yield tuple(v)
            for truth in atoms[i]:
                worst = min(tab.utility(i, truth, v) for v in profiles(truth))
                for lie in atoms[i]:
                    if lie == truth:
                        continue
                    best = max(tab.utility(i, truth, v) for v in profiles(lie))
                    if worst < best:
                        witnesses.append({"agent": i, "prefix": dict(zip(earlier, prefix)),
                                          "truthful": truth, "deviation": lie,
                                          "worst_truthful": worst, "best_deviation": best})
    grid = env.describe_grid() + f", visit order {order}"
    return make_report(Property.OSP, witnesses, grid)


def run_checks(tab: TabularMechanism, properties: Sequence[str]) -> list:
    """Run checkers by short name: ic, ir, nb, pc, cons, osp, mono, semi."""
    out = []
    for name in properties:
        if name == "ic":
            out.append(check_ic(tab))
        elif name == "ir":
            out.append(check_ir(tab))
        elif name == "nb":
            out.append(check_nb(tab))
        elif name == "pc":
            out.append(check_payment_characterization(tab))
        elif name == "cons":
            out.append(check_consistency(tab))
        elif name == "mono":
            out.append(check_monotonicity(tab))
        elif name == "semi":
            out.append(check_upper_semilattice(tab.environment))
        elif name == "osp":
            out.append(check_osp_sequential(tab, list(range(tab.n_agents))))
        else:
            raise ValueError(f"unknown property {name!r}")
    return out
