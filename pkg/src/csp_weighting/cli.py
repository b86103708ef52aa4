"""Command-line entry point.

Every subcommand writes a TSV report (stdout or ``--output``) whose first line
is a ``#`` header echoing the command and the RNG seed; a short human summary
goes to stderr.  Exit codes: 0 success, 1 verification failure, 2 usage,
format, capacity or precondition error.
"""
from __future__ import annotations

import argparse
import itertools
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import boolean_star as bs
from . import moment as mb
from .csp import DEFAULT_CAP, enumerate_solutions, format_valuation, load_csp, network_of
from .errors import CspError
from .ordering import (directed_edges, greedy_order_construction, is_circuit_free,
                       minimal_elements, parse_orders, renaming_closure, verify_set_equality)
from .weighting import (EPS, check_covering, load_tables, set_weight, verify_weight_conservation,
                        weight_table)

OK, FAILED, USAGE = 0, 1, 2


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "PASS" if value else "FAIL"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (tuple, list)):
        return ",".join(fmt(v) for v in value)
    return str(value)


@dataclass
class RunConfig:
    command: str
    options: argparse.Namespace
    eps: float = EPS
    cap: int | None = DEFAULT_CAP
    seed: int = 0
    output: str | None = None


@dataclass
class Report:
    config: RunConfig
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    status: int = OK

    def row(self, *fields):
        self.rows.append("\t".join(fmt(f) for f in fields))

    def note(self, text: str):
        self.summary.append(text)

    def fail(self):
        self.status = FAILED

    def render(self) -> str:
        head = f"# csp-weighting {self.config.command}\tseed={self.config.seed}\teps={fmt(self.config.eps)}"
        return "\n".join([head] + self.rows) + "\n"


# -- discrete subcommands ------------------------------------------------------------

def _load(opts):
    inst = load_csp(opts.csp)
    return inst, inst.domain


def cmd_solve(cfg: RunConfig, rep: Report):
    inst, dom = _load(cfg.options)
    sols = enumerate_solutions(inst, cfg.cap)
    rep.row("kind", "index", "solution")
    for i, s in enumerate(sols):
        rep.row("solution", i, format_valuation(s, dom))
    rep.row("count", len(sols))
    rep.note(f"{len(sols)} solutions")


def cmd_network(cfg: RunConfig, rep: Report):
    inst, dom = _load(cfg.options)
    net = network_of(inst, cfg.cap)
    rep.row("kind", "a", "b", "c")
    for i, s in enumerate(net.solutions):
        rep.row("solution", i, format_valuation(s, dom))
    for x in range(inst.n):
        for clique in net.cliques(x):
            values = sorted(net.solutions[i][x] for i in clique)
            rep.row("clique", x, ",".join(map(str, clique)), "".join(str(dom[a]) for a in values))
    for i, j, x in net.edges():
        rep.row("edge", i, j, x)
    for k, comp in enumerate(net.components):
        rep.row("component", k, ",".join(map(str, comp)))
    rep.note(f"{len(net)} solutions, {len(net.edges())} edges, {len(net.components)} components")


def cmd_weigh(cfg: RunConfig, rep: Report):
    opts = cfg.options
    inst, dom = _load(opts)
    net = network_of(inst, cfg.cap)
    system = load_tables(opts.tables, inst.n, inst.d, homogeneous=opts.homogeneous, eps=cfg.eps)
    per = weight_table(system, net).prod(axis=1) if len(net) else np.zeros(0)
    rep.row("kind", "id", "weight", "slack", "status")
    for i, s in enumerate(net.solutions):
        rep.row("solution", format_valuation(s, dom), per[i])
    total = set_weight(system, net)
    rep.row("total", "all", total)
    if not system.unitary:
        rep.note("seed is not unitary: conservation check skipped")
        return
    for k, r in enumerate(verify_weight_conservation(system, net)):
        cover = check_covering(system, net, r.component, cap=cfg.cap)
        rep.row("component", k, r.weight, r.slack, r.holds)
        rep.row("covering", k, "", cover.slack, cover.covers)
        if not (r.holds and cover.covers):
            rep.fail()
    verdict = "PASS" if rep.status == OK else "FAIL"
    rep.note(f"total weight {total:.6g}; conservation {verdict}")


def cmd_orient(cfg: RunConfig, rep: Report):
    inst, dom = _load(cfg.options)
    net = network_of(inst, cfg.cap)
    orientation = parse_orders(open(cfg.options.orders).read(), inst.n, inst.d)
    minimal = minimal_elements(net, orientation)
    free = is_circuit_free(net, orientation)
    rep.row("kind", "value")
    for i, j in directed_edges(net, orientation):
        rep.row("arc", f"{format_valuation(net.solutions[i], dom)}>{format_valuation(net.solutions[j], dom)}")
    for i in minimal:
        rep.row("minimal", format_valuation(net.solutions[i], dom))
    rep.row("minimal_count", len(minimal))
    rep.row("circuit_free", free)
    if not free:
        rep.fail()
    rep.note(f"{len(minimal)} minimal elements; circuit-free {'PASS' if free else 'FAIL'}")


def cmd_greedy(cfg: RunConfig, rep: Report):
    opts = cfg.options
    inst, dom = _load(opts)
    net = network_of(inst, cfg.cap)
    system = load_tables(opts.tables, inst.n, inst.d, homogeneous=opts.homogeneous, eps=cfg.eps)
    result = greedy_order_construction(system, net)
    rep.row("kind", "variable", "order", "before", "after", "slack")
    for st in result.steps:
        rep.row("step", st.variable, " ".join(str(dom[a]) for a in st.order),
                st.omega_before, st.omega_after, st.slack)
        if st.slack < -cfg.eps:
            rep.fail()
    rep.row("bound", "", "", result.weight, result.minimal_count, result.weight - result.minimal_count)
    if not result.bound_holds:
        rep.fail()
    rep.note(f"|minimal| = {result.minimal_count} <= W = {result.weight:.6g}: "
             f"{'PASS' if rep.status == OK else 'FAIL'}")


def cmd_family(cfg: RunConfig, rep: Report):
    opts = cfg.options
    inst, _ = _load(opts)
    family = renaming_closure([inst], cap=opts.closure_cap)
    orientation = parse_orders(open(opts.orders).read(), inst.n, inst.d)
    system = load_tables(opts.tables, inst.n, inst.d, homogeneous=opts.homogeneous, eps=cfg.eps)
    r = verify_set_equality(family, orientation, system, cfg.cap, check_closed=False)
    rep.row("kind", "value")
    rep.row("family_size", len(family))
    rep.row("minimal_total", r.minimal_total)
    rep.row("gamma", r.gamma)
    rep.row("difference", r.difference)
    rep.row("couples", r.couples)
    rep.row("classes", r.classes)
    rep.row("partition", r.partition_ok)
    rep.row("worst_class_deviation", r.worst_class_deviation)
    ok = r.holds(opts.tol)
    rep.row("equality", ok)
    if not ok:
        rep.fail()
    rep.note(f"sum |M| = {r.minimal_total}, gamma = {r.gamma:.12g} over {len(family)} instances")


def _star_seed(opts, n):
    if opts.table:
        return bs.parse_star_table(open(opts.table).read(), n)
    return bs.StarWeights.from_rho(n, opts.rho).seed


def cmd_star(cfg: RunConfig, rep: Report):
    opts = cfg.options
    f = bs.load_dimacs(opts.cnf)
    weights = bs.StarWeights(_star_seed(opts, f.n), opts.mode)
    space = bs.StarSpace(f, cfg.cap)
    per = space.improved_weights(weights.seed) if opts.mode == "improved" else space.maneva_weights(weights.seed)
    gamma = float(per.prod(axis=1).sum())
    sat = space.is_satisfiable()
    rep.row("kind", "value")
    rep.row("valid_valuations", int(space.valid.sum()))
    rep.row("boolean_solutions", len(space.boolean_solutions()))
    rep.row("gamma", gamma)
    if opts.nps:
        rep.row("nps", bs.count_flip_stable(f, 0))
    if sat:
        ok = gamma >= 1 - cfg.eps
        rep.row("bound_slack", gamma - 1)
        rep.row("gamma_at_least_one", ok)
        if not ok:
            rep.fail()
    rep.note(f"gamma = {gamma:.12g} ({opts.mode}); satisfiable: {sat}")


def cmd_core(cfg: RunConfig, rep: Report):
    opts = cfg.options
    f = bs.load_dimacs(opts.cnf)
    if opts.solution:
        sols = [bs.parse_star(opts.solution)]
    else:
        sols = [tuple(s) for s in bs.StarSpace(f, cfg.cap).boolean_solutions().tolist()]
    rep.row("solution", "core", "size", "cover", "nontrivial")
    for s in sols:
        core = bs.core_of(f, s)
        cover = bs.is_cover(f, core)
        rep.row(bs.format_star(s), bs.format_star(core), bs.core_size(core), cover,
                "yes" if bs.is_core_nontrivial(core) else "no")
        if not cover:
            rep.fail()
    rep.note(f"{len(sols)} solutions processed")


# -- moment subcommands --------------------------------------------------------------

def _moment_params(opts) -> mb.MomentParams:
    return mb.MomentParams(opts.n, opts.s, opts.t, opts.u, opts.v, opts.p, opts.rho)


def cmd_moment_eval(cfg: RunConfig, rep: Report):
    mp = _moment_params(cfg.options)
    rep.row("quantity", "value")
    for name, count in mb.clause_census(mp).items():
        rep.row(name, count)
    rep.row("q_factor", mb.q_factor(mp))
    log_e = mb.log_ez_t(mp)
    rep.row("log_ez_t", log_e)
    rep.row("ez_t", math.exp(log_e))
    if mp.t <= 500:
        log_u = mb.log_ez_t_unfolded(mp)
        rep.row("log_ez_t_unfolded", log_u)
        same = log_u == log_e == -math.inf
        rep.row("relative_difference", 0.0 if same else abs(math.expm1(log_u - log_e)))
    rep.note(f"ln E Z_t = {log_e:.12g}")


def cmd_moment_mc(cfg: RunConfig, rep: Report):
    mp = _moment_params(cfg.options)
    r = mb.monte_carlo_ez_t(mp, cfg.options.trials, cfg.seed)
    exact = mb.ez_t(mp)
    z = (r.mean - exact) / r.stderr if r.stderr > 0 else (0.0 if r.mean == exact else math.inf)
    rep.row("quantity", "value")
    rep.row("trials", r.trials)
    rep.row("mc_mean", r.mean)
    rep.row("mc_stderr", r.stderr)
    rep.row("closed_form", exact)
    rep.row("z_score", z)
    ok = abs(z) <= 3
    rep.row("within_3_sigma", ok)
    if not ok:
        rep.fail()
    rep.note(f"Monte Carlo {r.mean:.6g} +/- {r.stderr:.2g} vs {exact:.6g}")


def _objective(opts):
    rho = (lambda a: opts.rho) if opts.rho is not None else mb.rho_of_a
    if opts.objective == "h":
        def h(alpha, a, b, r):
            try:
                return mb.exponent_h(mb.AsymptoticParams(alpha, a, b, rho(a), opts.d_param, r))
            except CspError:
                return -math.inf
        return h
    if not opts.f_plugin:
        mb.missing_f(0.0, 0.0, 0.0)
    return mb.f_plus_h(mb.load_f_plugin(opts.f_plugin), opts.d_param, rho)


def cmd_sweep(cfg: RunConfig, rep: Report):
    opts = cfg.options
    objective = _objective(opts)
    box = [tuple(opts.alpha_range), tuple(opts.a_range), tuple(opts.b_range), tuple(opts.r_range)]
    res = mb.sweep_maximize(objective, box, opts.step, opts.refine, workers=opts.workers)
    rep.row("kind", "alpha", "a", "b", "r", "value", "step", "refined", "nonfinite", "evaluations")
    if opts.emit_grid:
        axes = [mb.grid_axis(lo, hi, opts.step) for lo, hi in box]
        for pt in itertools.product(*axes):
            rep.row("cell", *[float(c) for c in pt], float(objective(*pt)))
    rep.row("argmax", *res.argmax, res.max_value, res.grid_step, "yes" if res.refined else "no",
            res.nonfinite, res.evaluations)
    rep.note(f"max {res.max_value:.10g} at {tuple(round(c, 6) for c in res.argmax)}")


def cmd_contour(cfg: RunConfig, rep: Report):
    opts = cfg.options
    if not opts.f_plugin:
        mb.missing_f(0.0, 0.0, 0.0)
    f = mb.load_f_plugin(opts.f_plugin)
    alpha = opts.alpha
    region = mb.contour_region(lambda a, r: f(alpha, a, r), opts.threshold,
                               [tuple(opts.a_range), tuple(opts.r_range)], opts.step)
    rep.row("kind", "a", "r", "inside")
    for i, a in enumerate(region.axes[0]):
        for j, r in enumerate(region.axes[1]):
            rep.row("cell", float(a), float(r), bool(region.mask[i, j]))
    bounds = region.bounds()
    if bounds is None:
        rep.row("bounds", "empty", "empty", "")
    else:
        rep.row("bounds", bounds[0], bounds[1], "")
    rep.note(f"region bounds: {bounds}")


COMMANDS = {
    "solve": cmd_solve, "network": cmd_network, "weigh": cmd_weigh, "orient": cmd_orient,
    "greedy-order": cmd_greedy, "family-equal": cmd_family, "star-weigh": cmd_star,
    "core": cmd_core, "moment-eval": cmd_moment_eval, "moment-mc": cmd_moment_mc,
    "sweep": cmd_sweep, "contour": cmd_contour,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the TSV report here instead of stdout")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common.add_argument("--eps", type=float, default=EPS, help="numerical tolerance")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP, help="exhaustion cap on d**n")

    parser = argparse.ArgumentParser(prog="csp-weighting", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    for name, text in [("solve", "enumerate solutions"), ("network", "cliques, edges, components")]:
        add(name, text).add_argument("csp")
    for name, text in [("weigh", "solution weights and conservation"),
                       ("greedy-order", "greedy orientation and the minimal-count bound")]:
        p = add(name, text)
        p.add_argument("csp")
        p.add_argument("tables")
        p.add_argument("--homogeneous", action="store_true", help="use the seed as dispatcher")
    p = add("orient", "minimal elements under per-variable orders")
    p.add_argument("csp")
    p.add_argument("orders")
    p = add("family-equal", "minimal count vs total weight over a renaming closure")
    p.add_argument("csp")
    p.add_argument("orders")
    p.add_argument("tables")
    p.add_argument("--homogeneous", action="store_true")
    p.add_argument("--closure-cap", type=int, default=200_000)
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("star-weigh", "total {0,1,*} weight of a CNF formula")
    p.add_argument("cnf")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rho", type=float, default=0.5, help="star weight; s0 = s1 = (1 - rho)/2")
    g.add_argument("--table", help="per-variable seed triples 'x s0 s1 s*'")
    p.add_argument("--mode", choices=["improved", "maneva"], default="improved")
    p.add_argument("--nps", action="store_true", help="also count negatively prime solutions")
    p = add("core", "cores of boolean solutions and the cover check")
    p.add_argument("cnf")
    p.add_argument("--solution", help="one boolean solution such as 0110; default: all")

    for name, text in [("moment-eval", "closed-form first moment"), ("moment-mc", "Monte Carlo first moment")]:
        p = add(name, text)
        for flag in ("n", "s", "t"):
            p.add_argument(f"--{flag}", type=int, required=True)
        p.add_argument("--u", type=int, default=0)
        p.add_argument("--v", type=int, default=0)
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--rho", type=float, required=True)
        if name == "moment-mc":
            p.add_argument("--trials", type=int, default=100_000)

    p = add("sweep", "grid maximisation of f + h (or h alone)")
    for flag, default in [("alpha", (4.419, 4.419)), ("a", (0.28, 0.75)), ("b", (0.0, 0.72)), ("r", (1.4, 14.0))]:
        p.add_argument(f"--{flag}-range", type=float, nargs=2, default=default, metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.001)
    p.add_argument("--refine", type=float, default=1e-5)
    p.add_argument("--d-param", type=float, required=True, help="the free constant d of the clause model")
    p.add_argument("--rho", type=float, default=None, help="fixed star weight instead of rho(a)")
    p.add_argument("--objective", choices=["f+h", "h"], default="f+h")
    p.add_argument("--f-plugin", help="python file defining f(alpha, a, r)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--emit-grid", action="store_true", help="one row per coarse grid cell")

    p = add("contour", "cells where f(alpha, a, r) exceeds a threshold")
    p.add_argument("--threshold", type=float, default=-1e-4)
    p.add_argument("--alpha", type=float, default=4.419)
    p.add_argument("--a-range", type=float, nargs=2, default=(0.1, 0.999), metavar=("LO", "HI"))
    p.add_argument("--r-range", type=float, nargs=2, default=(1.2, 20.0), metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--f-plugin", help="python file defining f(alpha, a, r)")
    return parser


def run(config: RunConfig) -> int:
    rep = Report(config)
    try:
        COMMANDS[config.command](config, rep)
    except (CspError, OSError) as exc:
        kind = type(exc).__name__
        print(f"csp-weighting {config.command}: {kind}: {exc}", file=sys.stderr)
        return USAGE
    text = rep.render()
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for line in rep.summary:
        print(line, file=sys.stderr)
    return rep.status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        opts = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    cfg = RunConfig(opts.command, opts, opts.eps, opts.cap, opts.seed, opts.output)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
