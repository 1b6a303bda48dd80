"""JSON formats for environments, mechanisms, priors and results.

Rationals are written as strings (``"8/5"``); integers may also be given as
JSON numbers on input.  JSON floats are rejected.  Every loader reports
problems as :class:`ValidationError` carrying the JSON path of the offending
node.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from .core import (
    Environment,
    FeasibleSet,
    Kind,
    TabularMechanism,
    as_fraction,
    enumerate_feasible_outcomes,
)
from .distributions import JointDistribution
from .errors import NonbossyError, ValidationError
from .mechanisms import DecisionList, Entry, Leaf, SequentialPostedPrice, build_plan


# -- generic encoding ------------------------------------------------------------


def to_jsonable(x: Any, decimal: bool = False) -> Any:
    """Recursively convert toolkit objects into JSON-ready values."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, Fraction):
        return f"{float(x):.6f}" if decimal else str(x)
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, dict):
        return {_key(k): to_jsonable(v, decimal) for k, v in x.items()}
    if isinstance(x, (frozenset, set)):
        return [to_jsonable(v, decimal) for v in sorted(x, key=_sort_key, reverse=True)]
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v, decimal) for v in x]
    if isinstance(x, Environment):
        return environment_to_json(x)
    if isinstance(x, (DecisionList, SequentialPostedPrice, TabularMechanism)):
        return mechanism_to_json(x)
    if dataclasses.is_dataclass(x):
        return {f.name: to_jsonable(getattr(x, f.name), decimal) for f in dataclasses.fields(x)}
    raise TypeError(f"cannot encode {type(x).__name__}")


def _key(k) -> str:
    if isinstance(k, str):
        return k
    return json.dumps(to_jsonable(k), separators=(",", ":"))


def _sort_key(x):
    return repr(to_jsonable(x))


def dumps(obj: Any, decimal: bool = False) -> str:
    return json.dumps(to_jsonable(obj, decimal), indent=2) + "\n"


def _reject_floats(s: str):
    raise ValidationError(f"floating-point literal {s} is not allowed; write a rational string")


def load_json(source) -> Any:
    """Parse a path or an already-decoded object."""
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read {source}: {exc.strerror}") from None
        try:
            return json.loads(text, parse_float=_reject_floats)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from None
    return source


# -- small validators -----------------------------------------------------------------


def _obj(x, path) -> dict:
    if not isinstance(x, dict):
        raise ValidationError("expected an object", path)
    return x


def _list(x, path, nonempty: bool = False) -> list:
    if not isinstance(x, list):
        raise ValidationError("expected an array", path)
    if nonempty and not x:
        raise ValidationError("must not be empty", path)
    return x


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ValidationError(f"missing field '{key}'", path)
    return d[key]


def _bits(x, path) -> tuple:
    _list(x, path)
    if any(b not in (0, 1) or isinstance(b, bool) for b in x):
        raise ValidationError("expected a 0/1 vector", path)
    return tuple(x)


def _rationals(x, path) -> tuple:
    _list(x, path)
    return tuple(as_fraction(v, f"{path}[{k}]") for k, v in enumerate(x))


def _label(x, path):
    if isinstance(x, (str, int)) and not isinstance(x, bool):
        return x
    raise ValidationError("outcome labels must be strings or integers", path)


def _wrap(fn, *args):
    try:
        return fn(*args)
    except ValidationError:
        raise
    except NonbossyError as exc:
        raise ValidationError(exc.message) from None


# -- environments -------------------------------------------------------------------


def environment_to_json(env: Environment) -> dict:
    if env.is_single_parameter:
        return {"type": "environment", "agents": env.n_agents, "kind": env.kind.value,
                "atoms": to_jsonable(env.value_atoms),
                "feasible": to_jsonable(sorted(env.feasible, reverse=True)),
                "tiebreak": to_jsonable(env.tiebreak)}
    return {"type": "environment", "agents": env.n_agents, "kind": env.kind.value,
            "outcomes": list(env.personal_outcomes[0]),
            "atoms": to_jsonable(env.value_atoms),
            "tiebreak": to_jsonable(env.tiebreak)}


def constraint_from_json(x, path="$.feasible") -> FeasibleSet:
    if isinstance(x, list):
        x = [_bits(o, f"{path}[{k}]") for k, o in enumerate(x)]
    elif not isinstance(x, dict):
        raise ValidationError("expected an outcome list or a generator object", path)
    try:
        return enumerate_feasible_outcomes(x)
    except ValidationError as exc:
        raise ValidationError(exc.message.split(": ", 1)[-1], path) from None
    except NonbossyError as exc:
        raise ValidationError(exc.message, path) from None


def environment_from_json(x, path="$") -> Environment:
    d = _obj(load_json(x), path)
    kind = d.get("kind", "single-parameter")
    atoms = _list(_req(d, "atoms", path), f"{path}.atoms", nonempty=True)
    agents = d.get("agents", len(atoms))
    if not isinstance(agents, int) or isinstance(agents, bool) or agents != len(atoms):
        raise ValidationError(f"agents must equal the number of atom lists ({len(atoms)})",
                              f"{path}.agents")
    if kind == Kind.SINGLE_PARAMETER.value:
        per_agent = [_rationals(_list(a, f"{path}.atoms[{i}]", True), f"{path}.atoms[{i}]")
                     for i, a in enumerate(atoms)]
        feasible = None
        if d.get("feasible") is not None:
            feasible = constraint_from_json(d["feasible"], f"{path}.feasible").outcomes
        tiebreak = d.get("tiebreak")
        if tiebreak is not None:
            tiebreak = [_bits(t, f"{path}.tiebreak[{i}]")
                        for i, t in enumerate(_list(tiebreak, f"{path}.tiebreak"))]
        return Environment.single_parameter(per_agent, feasible, tiebreak)
    if kind == Kind.COMMON_OUTCOME.value:
        outcomes = [_label(o, f"{path}.outcomes[{k}]") for k, o in
                    enumerate(_list(_req(d, "outcomes", path), f"{path}.outcomes", True))]
        vals = []
        for i, agent in enumerate(atoms):
            _list(agent, f"{path}.atoms[{i}]", True)
            vals.append([_rationals(v, f"{path}.atoms[{i}][{j}]") for j, v in enumerate(agent)])
        tiebreak = d.get("tiebreak")
        if tiebreak is not None:
            tiebreak = [[_label(o, f"{path}.tiebreak[{i}][{k}]") for k, o in enumerate(t)]
                        for i, t in enumerate(_list(tiebreak, f"{path}.tiebreak"))]
        return Environment.common_outcome(outcomes, vals, tiebreak)
    raise ValidationError(f"unknown environment kind {kind!r}", f"{path}.kind")


# -- mechanisms -------------------------------------------------------------------------


def _plan_to_json(node) -> Optional[dict]:
    if isinstance(node, Leaf):
        return None
    return {"agent": node.agent, "price": str(node.price),
            "accept": _plan_to_json(node.accept), "reject": _plan_to_json(node.reject)}


def mechanism_to_json(mech) -> dict:
    if isinstance(mech, DecisionList):
        index = {e.outcome: k for k, e in enumerate(mech.entries)}
        return {"type": "decision-list", "order_oblivious": mech.order_oblivious,
                "entries": [{"outcome": list(e.outcome), "prices": to_jsonable(e.prices),
                             "exceptions": sorted(index[o] for o in e.exceptions)}
                            for e in mech.entries]}
    if isinstance(mech, SequentialPostedPrice):
        out = {"type": "posted-price", "n_agents": mech.n_agents,
               "plan": _plan_to_json(mech.root)}
        if mech.feasible is not None:
            out["feasible"] = to_jsonable(sorted(mech.feasible, reverse=True))
        return out
    if isinstance(mech, TabularMechanism):
        return {"type": "table", "environment": environment_to_json(mech.environment),
                "rows": [{"profile": to_jsonable(v), "outcome": to_jsonable(o),
                          "payments": to_jsonable(p)} for v, o, p in mech.rows()]}
    raise TypeError(f"not a mechanism: {type(mech).__name__}")


def _plan_from_json(x, path):
    if x is None:
        return None
    d = _obj(x, path)
    agent = _req(d, "agent", path)
    if not isinstance(agent, int) or isinstance(agent, bool) or agent < 0:
        raise ValidationError("agent must be a nonnegative integer", f"{path}.agent")
    return {"agent": agent, "price": as_fraction(_req(d, "price", path), f"{path}.price"),
            "accept": _plan_from_json(d.get("accept"), f"{path}.accept"),
            "reject": _plan_from_json(d.get("reject"), f"{path}.reject")}


def _profile(x, env: Environment, path) -> tuple:
    _list(x, path)
    if len(x) != env.n_agents:
        raise ValidationError(f"expected {env.n_agents} valuations", path)
    if env.is_single_parameter:
        return _rationals(x, path)
    return tuple(_rationals(v, f"{path}[{i}]") for i, v in enumerate(x))


def mechanism_from_json(x, path="$", env: Optional[Environment] = None):
    d = _obj(load_json(x), path)
    kind = _req(d, "type", path)
    if kind == "decision-list":
        raw = _list(_req(d, "entries", path), f"{path}.entries", True)
        outcomes = [_bits(_req(_obj(e, f"{path}.entries[{k}]"), "outcome", f"{path}.entries[{k}]"),
                          f"{path}.entries[{k}].outcome") for k, e in enumerate(raw)]
        entries = []
        for k, e in enumerate(raw):
            p = f"{path}.entries[{k}]"
            exc = set()
            for m, ref in enumerate(_list(e.get("exceptions", []), f"{p}.exceptions")):
                if isinstance(ref, int) and not isinstance(ref, bool):
                    if not 0 <= ref < len(raw):
                        raise ValidationError(f"no entry with index {ref}", f"{p}.exceptions[{m}]")
                    exc.add(outcomes[ref])
                else:
                    exc.add(_bits(ref, f"{p}.exceptions[{m}]"))
            entries.append(Entry(outcomes[k], _rationals(_req(e, "prices", p), f"{p}.prices"),
                                 frozenset(exc)))
        return _wrap(DecisionList, tuple(entries), bool(d.get("order_oblivious", False)))
    if kind == "posted-price":
        n = _req(d, "n_agents", path)
        if not isinstance(n, int) or n < 1:
            raise ValidationError("n_agents must be a positive integer", f"{path}.n_agents")
        plan = _plan_from_json(d.get("plan"), f"{path}.plan")
        feasible = None
        if d.get("feasible") is not None:
            feasible = constraint_from_json(d["feasible"], f"{path}.feasible").outcomes
        return _wrap(build_plan, n, plan, feasible)
    if kind == "table":
        if "environment" in d:
            env = environment_from_json(d["environment"], f"{path}.environment")
        elif env is None:
            raise ValidationError("missing field 'environment'", path)
        rows = _list(_req(d, "rows", path), f"{path}.rows", True)
        table = {}
        for k, r in enumerate(rows):
            p = f"{path}.rows[{k}]"
            _obj(r, p)
            v = _profile(_req(r, "profile", p), env, f"{p}.profile")
            o = _req(r, "outcome", p)
            _list(o, f"{p}.outcome")
            if env.is_single_parameter:
                o = _bits(o, f"{p}.outcome")
            else:
                o = tuple(_label(x, f"{p}.outcome[{m}]") for m, x in enumerate(o))
            if v in table:
                raise ValidationError("duplicate profile", f"{p}.profile")
            table[v] = (o, _rationals(_req(r, "payments", p), f"{p}.payments"))
        return _wrap(TabularMechanism, env, table)
    raise ValidationError(f"unknown mechanism type {kind!r}", f"{path}.type")


# -- priors ---------------------------------------------------------------------------------


def prior_to_json(dist: JointDistribution) -> dict:
    if dist.is_product:
        return {"type": "prior", "kind": "product",
                "agents": [[[str(a), str(p)] for a, p in m] for m in dist.marginals]}
    return {"type": "prior", "kind": "explicit",
            "support": [{"profile": to_jsonable(v), "probability": str(p)}
                        for v, p in dist.points]}


def prior_from_json(x, path="$") -> tuple:
    """Return ``(JointDistribution, FeasibleSet or None)``; the constraint is optional."""
    d = _obj(load_json(x), path)
    kind = _req(d, "kind", path)
    if kind == "product":
        marginals = []
        for i, m in enumerate(_list(_req(d, "agents", path), f"{path}.agents", True)):
            pairs = []
            for k, pair in enumerate(_list(m, f"{path}.agents[{i}]", True)):
                pp = f"{path}.agents[{i}][{k}]"
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ValidationError("expected [atom, probability]", pp)
                pairs.append((as_fraction(pair[0], pp), as_fraction(pair[1], pp)))
            marginals.append(pairs)
        try:
            dist = JointDistribution.product(marginals)
        except ValidationError as exc:
            raise ValidationError(exc.message.split(": ", 1)[-1],
                                  path + exc.path[1:]) from None
    elif kind == "explicit":
        points = []
        for k, pt in enumerate(_list(_req(d, "support", path), f"{path}.support", True)):
            pp = f"{path}.support[{k}]"
            _obj(pt, pp)
            points.append((_rationals(_req(pt, "profile", pp), f"{pp}.profile"),
                           as_fraction(_req(pt, "probability", pp), f"{pp}.probability")))
        widths = {len(v) for v, _ in points}
        if len(widths) != 1:
            raise ValidationError("profiles have different lengths", f"{path}.support")
        try:
            dist = JointDistribution.explicit(points)
        except ValidationError as exc:
            raise ValidationError(exc.message.split(": ", 1)[-1],
                                  path + exc.path[1:]) from None
    else:
        raise ValidationError(f"unknown prior kind {kind!r}", f"{path}.kind")
    constraint = None
    if d.get("constraint") is not None:
        constraint = constraint_from_json(d["constraint"], f"{path}.constraint")
        if constraint.n_agents != dist.n_agents:
            raise ValidationError(f"constraint is over {constraint.n_agents} agents, "
                                  f"prior over {dist.n_agents}", f"{path}.constraint")
    return dist, constraint


# -- reports and results -----------------------------------------------------------------------


def report_to_json(report, decimal: bool = False) -> dict:
    out = {"property": report.property.value, "holds": report.holds,
           "witnesses": to_jsonable(list(report.witnesses), decimal),
           "grid": report.grid_description}
    if report.sub_reports:
        out["sub_reports"] = [report_to_json(r, decimal) for r in report.sub_reports]
    return out


def trace_to_json(trace) -> dict:
    return {"tree": [{"domain": to_jsonable(n.domain), "probe": to_jsonable(n.probe),
                      "outcome": list(n.outcome), "children": list(n.children)}
                     for n in trace.tree],
            "merged_domains": [{"outcome": list(o), "domain": to_jsonable(d)}
                               for o, d in trace.merged_domains.items()],
            "exceptions": [{"outcome": list(o), "exceptions": to_jsonable(e)}
                           for o, e in trace.exceptions.items()]}


def metrics_to_json(metrics, decimal: bool = False) -> dict:
    return {"expected_welfare": to_jsonable(metrics.expected_welfare, decimal),
            "expected_revenue": to_jsonable(metrics.expected_revenue, decimal)}


def search_result_to_json(result, decimal: bool = False) -> dict:
    return {"objective": result.objective.value,
            "optimum": to_jsonable(result.optimum, decimal),
            "candidates": result.candidates,
            "evaluated": result.evaluated,
            "seconds": round(result.seconds, 6),
            "metrics": metrics_to_json(result.metrics, decimal),
            "mechanism": mechanism_to_json(result.mechanism)}
