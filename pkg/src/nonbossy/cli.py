"""Command-line front end.

Exit status: 0 when every requested property holds and the command
succeeded, 1 when a property fails, 2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import fixtures as fx
from . import io
from .core import TabularMechanism, as_fraction
from .errors import NonbossyError, SizeError
from .evalsearch import (
    Objective,
    expected_metrics,
    expected_optimal_welfare,
    make_partition_instance,
    monte_carlo_metrics,
    search_optimal_decision_list,
    search_optimal_posted_price,
)
from .mechanisms import (
    DecisionList,
    SequentialPostedPrice,
    build_log_r_mechanism,
    canonical_env_for,
    tabulate,
)
from .synth import certify_order_oblivious, extract_posted_price, synthesize_decision_list
from .verify import (
    build_rwsg_witness,
    check_ic,
    check_ir,
    check_nb,
    check_osp_sequential,
    check_payment_characterization,
    check_upper_semilattice,
    classify_gs,
    run_checks,
)

PROPERTY_NAMES = ("ic", "ir", "nb", "pc", "cons", "osp", "mono", "semi")
DEFAULT_PROPERTIES = "ic,ir,nb,pc"


class UsageError(Exception):
    pass


class Printer:
    def __init__(self, decimal: bool):
        self.decimal = decimal

    def q(self, x) -> str:
        if isinstance(x, Fraction):
            return f"{float(x):.6f}" if self.decimal else str(x)
        if isinstance(x, tuple):
            return "(" + ", ".join(self.q(v) for v in x) + ")"
        return str(x)

    def table(self, header: Sequence[str], rows: Sequence[Sequence]) -> str:
        cells = [list(header)] + [[self.q(c) for c in r] for r in rows]
        widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def default_threads() -> int:
    raw = os.environ.get("NONBOSSY_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"NONBOSSY_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _mark(holds: bool) -> str:
    return "✓" if holds else "✗"


def _load_tab(path: str, env_path: Optional[str]) -> tuple:
    env = io.environment_from_json(env_path) if env_path else None
    mech = io.mechanism_from_json(path, env=env)
    if isinstance(mech, TabularMechanism):
        return mech, mech
    return mech, tabulate(mech, canonical_env_for(mech, env))


def _properties(raw: str) -> list:
    names = [p.strip().lower() for p in raw.split(",") if p.strip()]
    bad = [p for p in names if p not in PROPERTY_NAMES]
    if bad or not names:
        raise UsageError(f"unknown properties {bad}; choose from {','.join(PROPERTY_NAMES)}")
    return names


def _order(raw: Optional[str], mech, n: int) -> list:
    if raw:
        try:
            return [int(x) for x in raw.split(",")]
        except ValueError:
            raise UsageError(f"--order must be comma-separated agent indices, got {raw!r}") from None
    if isinstance(mech, SequentialPostedPrice):
        return mech.visit_order()
    return list(range(n))


# -- subcommands ----------------------------------------------------------------------------


def cmd_check(args, out: Printer) -> int:
    mech, tab = _load_tab(args.mechanism, args.env)
    names = _properties(args.properties)
    reports = []
    for name in names:
        if name == "osp":
            reports.append(check_osp_sequential(tab, _order(args.order, mech, tab.n_agents)))
        else:
            reports.extend(run_checks(tab, [name]))
    if args.json:
        print(json.dumps([io.report_to_json(r, out.decimal) for r in reports], indent=2))
    else:
        print(f"grid: {tab.environment.describe_grid()}")
        for r in reports:
            print(f"{r.property.value:<13} {_mark(r.holds)}")
            for w in r.witnesses[: args.max_witnesses]:
                print("    witness: " + _fmt_witness(w, out))
            if len(r.witnesses) > args.max_witnesses:
                print(f"    ... {len(r.witnesses) - args.max_witnesses} more")
    return 0 if all(r.holds for r in reports) else 1


def _fmt_witness(w: dict, out: Printer) -> str:
    if "payments" in w and "outcome" in w and "profiles" in w:
        pays = ", ".join(out.q(p) for p in w["payments"])
        return f"{out.q(w['outcome'])} -> {{{pays}}}"
    return ", ".join(f"{k}={out.q(v)}" for k, v in w.items())


def cmd_synth(args, out: Printer) -> int:
    _, tab = _load_tab(args.mechanism, args.env)
    dl, trace = synthesize_decision_list(tab, max_image=args.max_image)
    cert = certify_order_oblivious(dl, tab.environment)
    print(json.dumps({"decision_list": io.mechanism_to_json(dl),
                      "trace": io.trace_to_json(trace),
                      "order_oblivious": cert.holds}, indent=2))
    return 0


def cmd_extract(args, out: Printer) -> int:
    mech = io.mechanism_from_json(args.mechanism)
    if not isinstance(mech, DecisionList):
        raise UsageError("extract expects a decision-list file")
    plan, dom = extract_posted_price(mech)
    print(json.dumps({"posted_price": io.mechanism_to_json(plan),
                      "domination_order": list(dom.order)}, indent=2))
    return 0


def cmd_eval(args, out: Printer) -> int:
    dist, _ = io.prior_from_json(args.prior)
    mech = io.mechanism_from_json(args.mechanism,
                                  env=io.environment_from_json(args.env) if args.env else None)
    if args.samples:
        est = monte_carlo_metrics(mech, dist, args.samples, args.seed)
        data = {"samples": est.samples, "seed": est.seed,
                "expected_welfare": est.welfare_mean, "welfare_se": est.welfare_se,
                "expected_revenue": est.revenue_mean, "revenue_se": est.revenue_se}
        if args.json:
            print(json.dumps(data, indent=2))
        else:
            print(f"welfare  {est.welfare_mean:.6f} ± {est.welfare_se:.6f}")
            print(f"revenue  {est.revenue_mean:.6f} ± {est.revenue_se:.6f}")
            print(f"({est.samples} samples, seed {est.seed})")
        return 0
    m = expected_metrics(mech, dist)
    if args.json:
        print(json.dumps(io.metrics_to_json(m, out.decimal), indent=2))
    else:
        print(f"expected welfare  {out.q(m.expected_welfare)}")
        print(f"expected revenue  {out.q(m.expected_revenue)}")
    return 0


def _atoms_arg(raw: Optional[str]):
    if raw is None:
        return None
    try:
        return [as_fraction(x.strip()) for x in raw.split(",") if x.strip()]
    except NonbossyError as exc:
        raise UsageError(f"--atoms: {exc.message}") from None


def cmd_search(args, out: Printer) -> int:
    dist, constraint = io.prior_from_json(args.prior)
    atoms = _atoms_arg(args.atoms)
    if args.mech_class == "posted-price":
        res = search_optimal_posted_price(dist, constraint, atoms, args.objective,
                                          max_agents=args.max_agents, max_atoms=args.max_atoms)
    else:
        res = search_optimal_decision_list(dist, constraint, atoms, args.objective,
                                           max_atoms=args.max_atoms, threads=args.threads)
    if args.json:
        print(json.dumps(io.search_result_to_json(res, out.decimal), indent=2))
    else:
        print(f"class       {args.mech_class}")
        print(f"objective   {res.objective.value}")
        print(f"optimum     {out.q(res.optimum)}")
        print(f"welfare     {out.q(res.metrics.expected_welfare)}")
        print(f"revenue     {out.q(res.metrics.expected_revenue)}")
        print(f"candidates  {res.candidates}")
        print(f"evaluated   {res.evaluated}")
        print(f"seconds     {res.seconds:.3f}")
        print(json.dumps(io.mechanism_to_json(res.mechanism), indent=2))
    return 0


# -- demos ------------------------------------------------------------------------------------


def demo_prop2(args, out: Printer) -> int:
    tab = fx.prop2()
    reports = [check_ic(tab), check_ir(tab), check_nb(tab), check_payment_characterization(tab),
               check_upper_semilattice(tab.environment)]
    rows = [(r.property.value, _mark(r.holds)) for r in reports]
    for order in ([0, 1], [1, 0]):
        r = check_osp_sequential(tab, order)
        rows.append((f"OSP, order {order[0]},{order[1]}", _mark(r.holds)))
    print(out.table(("property", "holds"), rows))
    w = check_payment_characterization(tab).witnesses[0]
    print(f"\npayment witness: {_fmt_witness(w, out)}")
    print(f"classification:  {classify_gs(tab)}")
    return 0


def demo_example4(args, out: Printer) -> int:
    tab = fx.example4()
    reference = fx.example4_reference_list()
    dl, _ = synthesize_decision_list(tab)
    rows = [("reference list reproduces the table", _mark(tabulate(reference, tab.environment) == tab)),
            ("synthesized list reproduces the table", _mark(tabulate(dl, tab.environment) == tab)),
            ("synthesized list is order-oblivious",
             _mark(certify_order_oblivious(dl, tab.environment).holds)),
            ("some exception-free ordering works",
             _mark(any(tabulate(d, tab.environment) == tab for d in fx.single_winner_orderings())))]
    print(out.table(("claim", "holds"), rows))
    print("\nsynthesized list:")
    for e in dl.entries:
        exc = ", ".join(out.q(o) for o in sorted(e.exceptions, reverse=True)) or "-"
        print(f"  {out.q(e.outcome)} at {out.q(e.prices)}  except {exc}")
    return 0


def demo_correlated(args, out: Printer) -> int:
    prior = fx.correlated_prior()
    pp = search_optimal_posted_price(prior, None, [1, 2])
    dls = search_optimal_decision_list(prior, None, [1, 2], threads=1)
    ref_list = expected_metrics(fx.correlated_reference_list(), prior)
    ref_plan = expected_metrics(fx.correlated_reference_plan(), prior)
    rows = [("optimal posted price (search)", pp.metrics.expected_revenue,
             pp.metrics.expected_welfare),
            ("adaptive plan, price 1 first", ref_plan.expected_revenue,
             ref_plan.expected_welfare),
            ("optimal decision list (search)", dls.metrics.expected_revenue,
             dls.metrics.expected_welfare),
            ("exception-free list", ref_list.expected_revenue, ref_list.expected_welfare),
            ("optimal welfare", "", expected_optimal_welfare(prior))]
    print(out.table(("mechanism", "revenue", "welfare"), rows))
    return 0


def demo_partition(args, out: Printer) -> int:
    inst = make_partition_instance(args.groups, args.r, as_fraction(args.p))
    plan = build_log_r_mechanism(inst.prior, inst.constraint)
    m = expected_metrics(plan.mechanism, inst.prior)
    rows = [("optimal welfare", plan.opt),
            ("log r mechanism welfare", m.expected_welfare),
            ("log r mechanism revenue", m.expected_revenue),
            ("guarantee OPT/(8 ceil(log2 4r))", plan.guaranteed)]
    try:
        pp = search_optimal_posted_price(inst.prior, inst.constraint, [inst.value_on_hit],
                                         Objective.WELFARE, max_agents=args.max_agents)
        rows.append(("best posted-price welfare", pp.optimum))
    except SizeError as exc:
        rows.append(("best posted-price welfare", f"skipped ({exc.message})"))
    print(f"{args.groups} groups of {args.r}, Pr[value 1] = {out.q(inst.hit_probability)}, "
          f"case {plan.chosen_case.value}")
    print(out.table(("quantity", "value"), rows))
    return 0


def demo_spa(args, out: Printer) -> int:
    tab = fx.spa()
    cert = build_rwsg_witness(tab)
    print(out.table(("property", "holds"),
                    [("IC", _mark(check_ic(tab).holds)), ("NB", _mark(check_nb(tab).holds))]))
    if cert is not None:
        print(f"\nagent {cert.manipulator} with value {out.q(cert.truthful)} reports "
              f"{out.q(cert.deviation)} against {out.q(cert.fixed_others)}: agent {cert.target}'s "
              f"payment goes from {out.q(cert.before[1][cert.target])} to "
              f"{out.q(cert.after[1][cert.target])} ({cert.external_preference.value})")
    return 0


def demo_fpa(args, out: Printer) -> int:
    tab = fx.fpa()
    ic = check_ic(tab)
    print(out.table(("property", "holds"),
                    [("IC", _mark(ic.holds)), ("IR", _mark(check_ir(tab).holds))]))
    if ic.witnesses:
        print("\nfirst witness: " + _fmt_witness(ic.witnesses[0], out))
    return 0


DEMOS = {"prop2": demo_prop2, "example4": demo_example4, "correlated": demo_correlated,
         "partition": demo_partition, "spa": demo_spa, "fpa": demo_fpa}


def cmd_demo(args, out: Printer) -> int:
    return DEMOS[args.fixture](args, out)


# -- parser ---------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--decimal", action="store_true", help="print rationals as decimals")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for searches (default: $NONBOSSY_THREADS or CPU count)")

    p = argparse.ArgumentParser(prog="nonbossy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="run property checkers")
    c.add_argument("mechanism")
    c.add_argument("--env", help="environment file (grid) for list or plan mechanisms")
    c.add_argument("--properties", default=DEFAULT_PROPERTIES,
                   help=f"comma-separated subset of {','.join(PROPERTY_NAMES)}")
    c.add_argument("--order", help="visit order for osp, e.g. 1,0")
    c.add_argument("--max-witnesses", type=int, default=5)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("synth", parents=[common], help="tabulated mechanism to decision list")
    s.add_argument("mechanism")
    s.add_argument("--env")
    s.add_argument("--max-image", type=int, default=16)
    s.set_defaults(func=cmd_synth)

    x = sub.add_parser("extract", parents=[common], help="single-item list to posted prices")
    x.add_argument("mechanism")
    x.set_defaults(func=cmd_extract)

    e = sub.add_parser("eval", parents=[common], help="exact expected welfare and revenue")
    e.add_argument("mechanism")
    e.add_argument("--prior", required=True)
    e.add_argument("--env")
    e.add_argument("--samples", type=int, default=0, help="Monte Carlo sample count")
    e.add_argument("--seed", type=int, default=0, help="64-bit Monte Carlo seed")
    e.set_defaults(func=cmd_eval)

    q = sub.add_parser("search", parents=[common], help="optimal mechanism within a class")
    q.add_argument("--class", dest="mech_class", required=True,
                   choices=("posted-price", "decision-list"))
    q.add_argument("--objective", default="revenue", choices=("revenue", "welfare"))
    q.add_argument("--prior", required=True)
    q.add_argument("--atoms", help="comma-separated price atoms (default: prior support)")
    q.add_argument("--max-agents", type=int, default=4)
    q.add_argument("--max-atoms", type=int, default=3)
    q.set_defaults(func=cmd_search)

    d = sub.add_parser("demo", parents=[common], help="run a named fixture end to end")
    d.add_argument("fixture", choices=sorted(DEMOS))
    d.add_argument("--groups", type=int, default=2)
    d.add_argument("--r", type=int, default=2)
    d.add_argument("--p", default="1/2")
    d.add_argument("--max-agents", type=int, default=6)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.threads is None:
            args.threads = default_threads()
        return args.func(args, Printer(args.decimal))
    except (UsageError, NonbossyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
