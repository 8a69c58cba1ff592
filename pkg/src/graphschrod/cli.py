"""Batch command line front-end.

Every command reads a JSON graph spec, works on one finite section and
writes ``<out>/<command>.csv`` plus ``<out>/summary.json``.  Exit status is
0 when all checked invariants hold, 1 when one fails, 2 when the graph-spec file or the
arguments cannot be parsed and 3 when a solver does not converge.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import GraphSchrodError, NoConvergence, NotLowerBounded, SpecError
from .experiments import (
    deficiency_probe_birth_death,
    formsum_vs_friedrichs,
    positive_core_approximation,
    stability_pipeline,
)
from .forms import greens_identity_terms
from .graph import check_fc, connected_components, validate_graph
from .reports import to_csv, to_json
from .schrodinger import dirichlet_section, kato_inequality_check
from .solvers import ShiftedOperator, lambda0, positivity_check
from .specs import load_spec

COMMANDS = (
    "validate",
    "fc",
    "assemble",
    "lambda0",
    "resolvent",
    "positivity",
    "greens",
    "kato",
    "coincide",
    "core-approx",
    "stability",
    "deficiency",
)
GRID_COMMANDS = ("core-approx", "stability")
EXIT_OK, EXIT_INVARIANT, EXIT_PARSE, EXIT_SOLVER = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def parse_grid(text: str | None, cast=float) -> list | None:
    """``"1,2,4"`` or an inclusive range ``"1:15"`` (optionally ``"1:15:2"``)."""
    if text is None:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            pieces = [int(p) for p in part.split(":")]
            if len(pieces) not in (2, 3):
                raise SpecError(f"bad range {part!r}")
            step = pieces[2] if len(pieces) == 3 else 1
            out.extend(cast(v) for v in range(pieces[0], pieces[1] + 1, step))
        elif part:
            out.append(cast(part))
    if not out:
        raise SpecError("empty grid")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphschrod", description="Finite-section experiments for Schrodinger operators on graphs.")
    p.add_argument("--graph", required=True, help="JSON graph spec")
    p.add_argument("--cmd", required=True, choices=COMMANDS)
    size = p.add_mutually_exclusive_group()
    size.add_argument("--radius", type=int, help="section = ball of this radius around the root")
    size.add_argument("--size", type=int, help="section = first N vertices (deficiency: recursion length)")
    p.add_argument("--alpha", type=float, help="spectral shift (default 1 + max(0, -lambda0))")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--k-grid", help="truncation levels, e.g. 1:15 or 1,2,4")
    p.add_argument("--r-grid", help="resolvent scales, e.g. 1,2,4,8")
    p.add_argument("--out", default=".", help="output directory")
    return p


class _Run:
    """Mutable state of one command: rows, invariants and summary fields."""

    def __init__(self):
        self.header: list = []
        self.rows: list = []
        self.invariants: dict = {}
        self.margins: dict = {}
        self.results: dict = {}

    def check(self, name, passed, margin=None):
        self.invariants[name] = bool(passed)
        if margin is not None:
            self.margins[name] = float(margin)


def _default_alpha(args, lam):
    return args.alpha if args.alpha is not None else 1.0 + max(0.0, -lam)


def _section(spec, args, V=None):
    S = spec.section(size=args.size, radius=args.radius)
    return S, dirichlet_section(spec.graph, spec.potential if V is None else V, S)


def cmd_validate(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    rep = validate_graph(spec.graph, S)
    run.header = ["violation", "detail"]
    run.rows = [(kind, repr(detail)) for kind, detail in rep.violations()]
    run.results["n_vertices"] = len(S)
    # disconnected sections are reported, not refused
    run.results["n_components"] = len(connected_components(spec.graph, S))
    run.check("graph_axioms", rep.ok)


def cmd_fc(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    run.header = ["vertex", "fc_sum"]
    worst = 0.0
    for x in S:
        value = check_fc(spec.graph, x)
        worst = max(worst, value)
        run.rows.append((repr(x), value))
    run.results["max_fc_sum"] = worst
    run.check("fc_finite", math.isfinite(worst))


def cmd_assemble(spec, args, run):
    _, sec = _section(spec, args)
    run.header = ["row", "col", "value"]
    coo = sec.B.tocoo()
    order = np.lexsort((coo.col, coo.row))
    run.rows = [(int(coo.row[i]), int(coo.col[i]), float(coo.data[i])) for i in order]
    asym = abs(sec.B - sec.B.T)
    gap = float(asym.max()) if asym.nnz else 0.0
    run.results.update(n=sec.n, nnz=int(sec.B.nnz))
    run.check("symmetric", gap == 0.0, gap)


def cmd_lambda0(spec, args, run):
    _, sec = _section(spec, args)
    est = lambda0(sec, tol=max(args.tol, 1e-8), return_certificate=True)
    run.header = ["n", "lambda0", "residual"]
    run.rows = [(sec.n, est.value, est.residual)]
    run.results["lambda0"] = est.value
    run.check("certified", True, est.residual)


def cmd_resolvent(spec, args, run):
    _, sec = _section(spec, args)
    lam = lambda0(sec)
    alpha = _default_alpha(args, lam)
    rng = np.random.default_rng(args.seed)
    v = rng.standard_normal(sec.n)
    res = ShiftedOperator(sec, alpha, lam0=lam, tol=args.tol).solve(v)
    run.header = ["vertex", "rhs", "solution"]
    run.rows = [(repr(x), a, b) for x, a, b in zip(sec.vertices, v, res.solution)]
    run.results.update(alpha=alpha, lambda0=lam, residual=res.residual)
    run.check("residual", res.residual <= args.tol * max(1.0, sec.norm(v)), res.residual)


def cmd_positivity(spec, args, run):
    _, sec = _section(spec, args)
    lam = lambda0(sec)
    alpha = _default_alpha(args, lam)
    rep = positivity_check(sec, alpha, trials=args.trials, seed=args.seed, lam0=lam)
    run.header = ["trial", "min_entry"]
    run.rows = list(enumerate(rep.min_entries))
    run.results.update(alpha=alpha, lambda0=lam)
    run.check("positivity", rep.passed, rep.worst_margin)


def _random_pair(rng, n):
    f = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return f * (rng.random(n) < 0.5), u * (rng.random(n) < 0.5)


def cmd_greens(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    rng = np.random.default_rng(args.seed)
    run.header = ["trial", "lhs_real", "lhs_imag", "rhs_real", "rhs_imag", "residual"]
    worst = -math.inf
    for t in range(args.trials):
        f, u = _random_pair(rng, len(S))
        fm = {x: v for x, v in zip(S, f) if v}
        um = {x: v for x, v in zip(S, u) if v}
        terms = greens_identity_terms(spec.graph, spec.potential, fm, um)
        run.rows.append((t, terms.lhs.real, terms.lhs.imag, terms.rhs.real, terms.rhs.imag, terms.residual))
        worst = max(worst, terms.residual - 1e-11 * (1.0 + terms.scale))
    run.check("greens_identity", worst <= 0.0, -worst)


def cmd_kato(spec, args, run):
    S, sec = _section(spec, args, spec.potential + spec.perturbation)
    if sec.n > 2000:
        raise SpecError("kato needs a dense eigensolve; use a section of at most 2000 vertices")
    vals, vecs = np.linalg.eigh(sec.dense)
    run.header = ["index", "eigenvalue", "worst_margin", "passed"]
    tol = max(args.tol, 1e-9)
    ok, worst = True, math.inf
    for i, beta in enumerate(vals):
        f = sec.from_sym(vecs[:, i])
        rep = kato_inequality_check(spec.graph, spec.potential + spec.perturbation, spec.potential, f, beta, S, tol=tol)
        run.rows.append((i, beta, rep.worst_margin, rep.passed))
        ok &= rep.passed
        worst = min(worst, rep.worst_margin)
    run.check("kato", ok, worst)


def cmd_coincide(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    res = formsum_vs_friedrichs(spec.graph, spec.potential, spec.perturbation, S, alpha=args.alpha, seed=args.seed)
    run.header = ["section_size", "discrepancy", "scale", "alpha", "resolvent_drift"]
    run.rows = [(res.section_size, res.max_matrix_discrepancy, res.scale, res.alpha, res.resolvent_drift)]
    run.results.update(discrepancy=res.max_matrix_discrepancy, lambda0=res.lambda0, alpha=res.alpha)
    run.check("assembly_paths", res.max_matrix_discrepancy <= 2.0**-45 * res.scale, res.max_matrix_discrepancy)
    run.check("resolvent_drift", res.resolvent_drift <= 1e-10, res.resolvent_drift)


def cmd_core_approx(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    rng = np.random.default_rng(args.seed)
    u = rng.random(len(S))
    trace = positive_core_approximation(spec.graph, spec.potential, u, S, args.k_grid, args.r_grid)
    run.header = trace.HEADER
    run.rows = trace.rows
    run.results.update(shift=trace.shift, selected=[list(s) for s in trace.selected])
    run.results["r_axis"] = [list(r) for r in trace.r_rows]
    run.check("nonnegative", trace.min_nonneg_margin >= -1e-12, trace.min_nonneg_margin)
    run.check("estimate", trace.min_bound_margin >= -1e-10, trace.min_bound_margin)


def cmd_stability(spec, args, run):
    S = spec.section(size=args.size, radius=args.radius)
    alpha = 1.0 if args.alpha is None else args.alpha
    res = stability_pipeline(spec.graph, spec.potential, spec.perturbation, S, args.k_grid, args.r_grid, alpha=alpha, seed=args.seed)
    run.header = res.GRID_HEADER
    run.rows = res.grid
    scale = 1.0 + float(np.max(np.abs(dirichlet_section(spec.graph, spec.potential + spec.perturbation, S).diag)))
    rb = res.relative_bound
    run.results.update(
        shift=res.shift,
        relative_bound={"a1": rb.a1, "a2": rb.a2, "a2_envelope": rb.a2_envelope, "n_samples": rb.n_samples},
        selection=[list(s) for s in res.selection],
        truncation_direction=res.reports["truncation"].direction,
    )
    run.check("identity", res.identity_discrepancy <= 2.0**-45 * scale, res.identity_discrepancy)
    run.check("domination", res.min_majorant_margin >= -1e-12, res.min_majorant_margin)
    slack = min(row[4] for row in res.selection)
    run.check("selection_bound", slack >= -1e-12, slack)
    run.check("truncation_monotone", res.reports["truncation"].monotone_flag)


def cmd_deficiency(spec, args, run):
    if spec.kind != "birth_death":
        raise SpecError("deficiency needs a birth_death spec")
    g = spec.graph
    N = args.size if args.size is not None else 1000
    if g.is_finite:
        N = min(N, g.n_vertices - 1)
    alpha = 1.0 if args.alpha is None else args.alpha
    if not alpha > 0:
        raise SpecError("deficiency needs alpha > 0")
    rep = deficiency_probe_birth_death(lambda n: g.b(n, n + 1), g.mu, spec.potential, alpha, N)
    run.header = rep.HEADER
    run.rows = list(zip(range(N + 1), rep.log_abs_u, rep.sign_u, rep.log_partial_sums))
    run.results.update(classification=rep.classification, growth_ratio=rep.growth_ratio, N=N)
    run.check("finite", bool(np.all(np.isfinite(rep.log_partial_sums))))


HANDLERS = {
    "validate": cmd_validate,
    "fc": cmd_fc,
    "assemble": cmd_assemble,
    "lambda0": cmd_lambda0,
    "resolvent": cmd_resolvent,
    "positivity": cmd_positivity,
    "greens": cmd_greens,
    "kato": cmd_kato,
    "coincide": cmd_coincide,
    "core-approx": cmd_core_approx,
    "stability": cmd_stability,
    "deficiency": cmd_deficiency,
}


def _thread_cap():
    value = os.environ.get("GS_THREADS")
    if not value:
        return None
    try:
        cap = int(value)
    except ValueError:
        return None
    return cap if cap > 0 else None


def run(argv=None) -> int:
    """Run one command; returns the exit status."""
    raw = list(sys.argv[1:] if argv is None else argv)
    summary = {"argv": raw, "status": "ok"}
    out = None
    try:
        args = build_parser().parse_args(raw)
        out = Path(args.out)
        params = {k: v for k, v in sorted(vars(args).items())}
        summary.update(experiment=args.cmd, params=params)
        if args.tol <= 0:
            raise SpecError("--tol must be positive")
        if args.cmd in GRID_COMMANDS:
            if args.k_grid is None or args.r_grid is None:
                raise SpecError(f"{args.cmd} needs --k-grid and --r-grid")
            args.k_grid = parse_grid(args.k_grid)
            args.r_grid = parse_grid(args.r_grid)
        spec = load_spec(args.graph)
        summary["graph_spec"] = spec.raw
        state = _Run()
        with threadpool_limits(limits=_thread_cap()):
            HANDLERS[args.cmd](spec, args, state)
        (out / f"{args.cmd}.csv").parent.mkdir(parents=True, exist_ok=True)
        (out / f"{args.cmd}.csv").write_text(to_csv(state.header, state.rows), encoding="utf-8")
        passed = all(state.invariants.values())
        summary.update(
            invariants=state.invariants,
            worst_margins=state.margins,
            results=state.results,
            passed=passed,
            status="ok" if passed else "invariant_failure",
        )
        code = EXIT_OK if passed else EXIT_INVARIANT
    except SpecError as exc:
        summary.update(status="parse_error", error=str(exc), passed=False)
        code = EXIT_PARSE
    except (NoConvergence, NotLowerBounded) as exc:
        summary.update(status="no_convergence", error=str(exc), passed=False)
        code = EXIT_SOLVER
    except GraphSchrodError as exc:
        summary.update(status="invariant_failure", error=f"{type(exc).__name__}: {exc}", passed=False)
        code = EXIT_INVARIANT
    summary["exit_code"] = code
    target = out if out is not None else Path(_peek_out(raw))
    target.mkdir(parents=True, exist_ok=True)
    (target / "summary.json").write_text(to_json(summary) + "\n", encoding="utf-8")
    if code != EXIT_OK:
        print(f"graphschrod: {summary['status']}: {summary.get('error', 'see summary.json')}", file=sys.stderr)
    return code


def _peek_out(raw) -> str:
    for i, tok in enumerate(raw):
        if tok == "--out" and i + 1 < len(raw):
            return raw[i + 1]
        if tok.startswith("--out="):
            return tok.split("=", 1)[1]
    return "."


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
