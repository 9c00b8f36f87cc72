"""Command-line front end.

Problems are JSON documents (see problemfile); curve outputs are CSV, scalar
outputs JSON with 17-significant-digit floats.  Exit codes: 0 success,
2 schema or input violations, 3 numerical failures.  RPF_THREADS caps the
worker count, RPF_BACKEND selects the numba or numpy kernel lane.
"""

import argparse
import json
import math
import sys

import numpy as np

from .errors import InputError, NumericalError
from . import acceptance, problemfile
from .classical import key_renewal_asymptote, lalley_counting_asymptote, markov_renewal_G
from .geometry import (
    SelfSimilarSystem,
    average_minkowski_content,
    sierpinski_tube_function,
    tube_volume_series,
)
from .potential import LocallyConstantPotential, detect_lattice, geometric_potential
from .renewal import (
    FFamily,
    RenewalProblem,
    asymptotic_G,
    cesaro_average,
    check_conditions,
    eval_N_grid,
    lattice_Gtilde,
    lattice_Gtilde_table,
)
from .simulate import SimulationSpec, empirical_N
from .spectral import build_transfer, leading_eigendata, pressure, solve_delta

_EXIT_INPUT = 2
_EXIT_NUMERIC = 3


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _open_out(args):
    return open(args.out, "w") if getattr(args, "out", None) else sys.stdout


def _emit(args, payload):
    out = _open_out(args)
    out.write(problemfile.dumps(payload) + "\n")
    if out is not sys.stdout:
        out.close()


def _emit_csv(args, header, rows):
    out = _open_out(args)
    problemfile.write_csv(rows, header, out)
    if out is not sys.stdout:
        out.close()


def _t_values(args, options):
    if getattr(args, "t", None):
        return np.array([float(v) for v in args.t.split(",")])
    if getattr(args, "t_linspace", None):
        lo, hi, n = args.t_linspace
        return np.linspace(float(lo), float(hi), int(n))
    if "t" in options:
        return np.asarray(options["t"], dtype=np.float64)
    raise InputError("provide --t or --t-linspace")


def _problem_from(args):
    problem, options = problemfile.parse_problem(_load_json(args.problem))
    if getattr(args, "tol", None) is not None:
        options["tol"] = args.tol
    options.setdefault("tol", 1e-10)
    return problem, options


def _named_potential(problem, name):
    if name == "tilted":
        return problem.eta - problem.delta * problem.xi
    pot = getattr(problem, name, None)
    if not isinstance(pot, LocallyConstantPotential):
        raise InputError(f"unknown potential {name!r} (use eta, xi, chi or tilted)")
    return pot


def _target_column(problem, ts):
    kind = problem.lattice.kind
    if kind == "non-lattice":
        G = asymptotic_G(problem).G
        return np.full(len(ts), G)
    if kind == "lattice" and problem.lattice.zeta is not None:
        return np.array([lattice_Gtilde(problem, t) for t in ts])
    return np.full(len(ts), math.nan)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_spectral(args):
    problem, _ = _problem_from(args)
    phi = _named_potential(problem, args.potential)
    m = args.depth if args.depth else problem.depth_m
    sd = leading_eigendata(build_transfer(phi, problem.shift, m))
    key = problemfile.word_key
    _emit(args, {
        "gamma": sd.gamma,
        "pressure": sd.pressure,
        "gap": sd.gap,
        "h": {key(w): v for w, v in sd.table("h").items()},
        "nu": {key(w): v for w, v in sd.table("nu").items()},
        "mu": {key(w): v for w, v in sd.table("mu").items()},
    })
    return 0


def _cmd_delta(args):
    problem, options = _problem_from(args)
    delta = problem.delta
    resid = pressure(problem.eta - delta * problem.xi, problem.shift, problem.depth_m)
    _emit(args, {
        "delta": delta,
        "pressure_residual": resid,
        "gamma_residual": math.exp(resid) - 1.0,
        "tol": options["tol"],
    })
    return 0


def _cmd_pressure(args):
    problem, _ = _problem_from(args)
    phi = _named_potential(problem, args.potential)
    m = args.depth if args.depth else problem.depth_m
    _emit(args, {"pressure": pressure(phi, problem.shift, m)})
    return 0


def _cmd_renewal_eval(args):
    problem, options = _problem_from(args)
    ts = _t_values(args, options)
    vals, diag = eval_N_grid(problem, ts, options["tol"])
    weighted = np.exp(-problem.delta * ts) * vals
    target = _target_column(problem, ts)
    rows = [(float(t), float(n), float(w), float(g))
            for t, n, w, g in zip(ts, vals, weighted, target)]
    _emit_csv(args, ["t", "N", "exp_neg_tdelta_N", "target"], rows)
    return 0


def _cmd_asymptote(args):
    problem, _ = _problem_from(args)
    kind = problem.lattice.kind
    if kind == "non-lattice":
        res = asymptotic_G(problem)
        _emit(args, {"kind": res.kind, "G": res.G, "diagnostics": res.diagnostics})
    else:
        ts, vals = lattice_Gtilde_table(problem, n=args.period_points)
        _emit(args, {
            "kind": "lattice",
            "span": problem.lattice.span,
            "t": list(map(float, ts)),
            "G_tilde": list(map(float, vals)),
        })
    return 0


def _cmd_cesaro(args):
    problem, options = _problem_from(args)
    res = cesaro_average(problem, args.t_max, args.points, options["tol"])
    _emit(args, {"kind": res.kind, "value": res.G, **res.diagnostics})
    return 0


def _cmd_conditions(args):
    problem, options = _problem_from(args)
    ts = _t_values(args, options)
    hs = [float(h) for h in args.h.split(",")]
    report = check_conditions(problem, ts, hs)
    _emit(args, report.as_dict())
    return 0


def _cmd_classical_key(args):
    spec = problemfile.parse_key_spec(_load_json(args.spec))
    res = key_renewal_asymptote(spec)
    payload = {
        "nonlattice": res.nonlattice,
        "mean_interarrival": res.mean,
        "integral": res.integral,
        "span": res.span,
        "average": res.average,
    }
    if res.span is not None and args.t:
        ts = [float(v) for v in args.t.split(",")]
        payload["lattice_values"] = {problemfile.format_float(t): res.lattice_value(t)
                                     for t in ts}
    _emit(args, payload)
    return 0


def _cmd_classical_markov(args):
    spec = problemfile.parse_markov_spec(_load_json(args.spec))
    res = markov_renewal_G(spec)
    _emit(args, {
        "delta": res.delta,
        "G": {str(i): v for i, v in res.G.items()},
        "span": res.span,
    })
    return 0


def _cmd_classical_lalley(args):
    doc = _load_json(args.spec)
    problemfile._expect_object(doc, "/", required=("shift", "xi", "x_head", "t"),
                               optional=("chi",))
    shift = problemfile.parse_shift(doc["shift"])
    xi = problemfile.parse_potential(doc["xi"], shift, "/xi")
    chi = (problemfile.parse_potential(doc["chi"], shift, "/chi")
           if "chi" in doc else LocallyConstantPotential.constant(shift, 1.0))
    x_head = tuple(doc["x_head"])
    lat = detect_lattice(xi, shift)
    ts = doc["t"] if isinstance(doc["t"], list) else [doc["t"]]
    values = {problemfile.format_float(float(t)):
              lalley_counting_asymptote(shift, xi, chi, lat, x_head, float(t))
              for t in ts}
    _emit(args, {"span": lat.span, "values": values})
    return 0


def _cmd_minkowski(args):
    ratios = tuple(float(r) for r in args.ratios.split(","))
    if args.gamma == "builtin:gasket":
        gamma = sierpinski_tube_function()
    else:
        gamma = problemfile.parse_timefunction(_load_json(args.gamma), "/")
    system = SelfSimilarSystem(ratios, args.d, gamma)
    lat = detect_lattice(geometric_potential(ratios))
    payload = {
        "D": system.D,
        "lattice_kind": lat.kind,
        "span": lat.span,
        "content": average_minkowski_content(system),
    }
    print(problemfile.dumps(payload))
    if args.t_linspace:
        lo, hi, n = args.t_linspace
        ts = np.linspace(float(lo), float(hi), int(n))
        scale = system.D - system.d
        rows = []
        for t in ts:
            series = tube_volume_series(system, float(t))
            rows.append((float(t), series, math.exp(-t * scale) * series))
        _emit_csv(args, ["t", "series", "scaled_series"], rows)
    return 0


def _cmd_simulate(args):
    doc = _load_json(args.problem)
    problem, options = problemfile.parse_problem(doc)
    n_paths = args.paths or options.get("n_paths", 1000)
    n_max = args.n_max or options.get("n_max", 64)
    seed = args.seed if args.seed is not None else options.get("seed", 0)
    fam = _fold_chi(problem)
    spec = SimulationSpec(problem.shift, problem.eta, problem.xi, fam,
                          problem.x_head, n_max, n_paths, seed)
    ts = _t_values(args, options)
    rows = []
    for t in ts:
        mean, stderr = empirical_N(spec, float(t))
        det, _ = eval_N_grid(problem, [float(t)], options.get("tol", 1e-10))
        rows.append((float(t), mean, stderr, float(det[0])))
    _emit_csv(args, ["t", "mean", "stderr", "deterministic_N"], rows)
    return 0


def _fold_chi(problem):
    """Fold chi into the family (the simulation samples chi * f directly)."""
    from .symbolic import admissible_words

    depth = max(problem.f.depth, problem.chi.depth)
    cache = {}
    fns = {}
    for w in admissible_words(problem.shift, depth):
        c = problem.chi.values[w[: problem.chi.depth]]
        base = problem.f.at(w)
        key = (id(base), c)
        if key not in cache:
            cache[key] = base if c == 1.0 else base.scaled(c)
        fns[w] = cache[key]
    return FFamily(problem.shift, depth, fns)


def _cmd_paper_check(args):
    results = acceptance.run_all()
    print(acceptance.format_table(results))
    return 0 if all(r.passed for r in results) else _EXIT_NUMERIC


# ---------------------------------------------------------------------------


def _build_parser():
    p = argparse.ArgumentParser(
        prog="rpfrenewal",
        description="Renewal functions with dependent interarrival times via "
                    "transfer operators on subshifts of finite type",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        sp = sub.add_parser(name, **kw)
        sp.set_defaults(handler=fn)
        return sp

    common = dict(problem=lambda sp: sp.add_argument("--problem", required=True),
                  out=lambda sp: sp.add_argument("--out", default=None),
                  tol=lambda sp: sp.add_argument("--tol", type=float, default=None),
                  depth=lambda sp: sp.add_argument("--depth", type=int, default=None),
                  t=lambda sp: sp.add_argument("--t", default=None),
                  tlin=lambda sp: sp.add_argument("--t-linspace", nargs=3, default=None,
                                                  metavar=("LO", "HI", "N")))

    sp = add("spectral", _cmd_spectral, help="leading eigendata as JSON")
    for k in ("problem", "out", "tol", "depth"):
        common[k](sp)
    sp.add_argument("--potential", default="tilted")

    sp = add("delta", _cmd_delta, help="renewal exponent delta and residuals")
    for k in ("problem", "out", "tol"):
        common[k](sp)

    sp = add("pressure", _cmd_pressure, help="topological pressure of a potential")
    for k in ("problem", "out", "tol", "depth"):
        common[k](sp)
    sp.add_argument("--potential", default="eta")

    sp = add("renewal-eval", _cmd_renewal_eval, help="N(t,x) on a time grid (CSV)")
    for k in ("problem", "out", "tol", "t", "tlin"):
        common[k](sp)

    sp = add("asymptote", _cmd_asymptote, help="non-lattice G or periodic table")
    for k in ("problem", "out", "tol"):
        common[k](sp)
    sp.add_argument("--period-points", type=int, default=64)

    sp = add("cesaro", _cmd_cesaro, help="Cesaro average of e^(-T delta) N")
    for k in ("problem", "out", "tol"):
        common[k](sp)
    sp.add_argument("--t-max", type=float, required=True)
    sp.add_argument("--points", type=int, default=1024)

    sp = add("conditions", _cmd_conditions, help="regularity condition report")
    for k in ("problem", "out", "tol", "t", "tlin"):
        common[k](sp)
    sp.add_argument("--h", default="0.5,0.25,0.125")

    cls = sub.add_parser("classical", help="closed-form corollary solvers")
    csub = cls.add_subparsers(dest="variant", required=True)
    sp = csub.add_parser("key")
    sp.set_defaults(handler=_cmd_classical_key)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--t", default=None)
    sp.add_argument("--out", default=None)
    sp = csub.add_parser("markov")
    sp.set_defaults(handler=_cmd_classical_markov)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", default=None)
    sp = csub.add_parser("lalley")
    sp.set_defaults(handler=_cmd_classical_lalley)
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", default=None)

    sp = add("minkowski", _cmd_minkowski, help="dimension, span, content, tube curve")
    sp.add_argument("--ratios", required=True)
    sp.add_argument("--gamma", default="builtin:gasket")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--out", default=None)
    common["tlin"](sp)

    sp = add("simulate", _cmd_simulate, help="Monte-Carlo renewal estimates (CSV)")
    for k in ("problem", "out", "t", "tlin"):
        common[k](sp)
    sp.add_argument("--paths", type=int, default=None)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)

    add("paper-check", _cmd_paper_check, help="run the acceptance battery")
    return p


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc} {exc.diagnostics}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
