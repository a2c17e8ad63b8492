"""Command-line front end: ``densgraph <subcommand> ...``.

Exit codes: 0 success (Stable for ``stability``), 1 non-convergence,
2 configuration or usage error, 3 Unstable, 4 Inconclusive.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import calibration as cal
from . import density as dens
from . import fixtures
from . import identities
from . import spectrum
from .config import load_config, parse_config
from .errors import ConfigError, DensGraphError, NonConvergence
from .solver import (
    SolveReport,
    harmonic_extension,
    profile_residual,
    solve_radial_axisymmetric,
    solve_rotational_vertical,
    solve_vertical,
)
from .surface import (
    RadialGraph,
    VerticalGraph,
    field_csv,
    format_float,
    geometry,
    mesh_text,
    parse_mesh_text,
    triangulate,
    vertical_graph_from_vertices,
)

EXIT_OK, EXIT_NONCONV, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
VERDICT_EXIT = {"Stable": EXIT_OK, "Unstable": EXIT_UNSTABLE, "Inconclusive": EXIT_INCONCLUSIVE}


# ---------------------------------------------------------------- output helpers


def json17(obj, indent=2, _level=0):
    """JSON with every float printed at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {json17(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + json17(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return format_float(v)
    return json.dumps(obj)


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- pipeline


def build_density(cfg):
    d = cfg["density"]
    n = cfg.get("problem", "n")
    try:
        return dens.make_density(d["kind"], n + 1, d["dependence"], d["alpha"], d["p"])
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line_of("density", "kind")) from None


def _boundary_source(cfg):
    kind, arg = cfg.get("problem", "boundary").split(":", 1)
    return kind, arg.strip()


def _fixture_graph(name, nodes, cfg):
    try:
        fx = fixtures.get(name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), cfg.line_of("problem", "boundary")) from None
    return fx.graph(nodes=nodes)


def _read_graph(path, line=None):
    try:
        with open(path, encoding="utf-8") as fh:
            verts, _ = parse_mesh_text(fh.read())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read graph file {path!r}: {exc}", line) from None
    return vertical_graph_from_vertices(verts)


def initial_vertical(cfg):
    p = cfg["problem"]
    n, m = p["n"], p["nodes"]
    kind, arg = _boundary_source(cfg)
    line = cfg.line_of("problem", "boundary")
    if kind == "fixture":
        g = _fixture_graph(arg, m, cfg)
        if not isinstance(g, VerticalGraph) or g.n != n:
            raise ConfigError(f"fixture {arg!r} is not a vertical graph with n = {n}", line)
        return harmonic_extension(g)
    if kind == "file":
        g = _read_graph(arg, line)
        if g.n != n:
            raise ConfigError(f"graph file has n = {g.n}, config says {n}", line)
        return g
    if p["bounds"] is None:
        raise ConfigError("problem.bounds is required with a constant boundary",
                          cfg.line_of("problem", "mode"))
    b = p["bounds"]
    bounds = [(b[2 * k], b[2 * k + 1]) for k in range(n)]
    return VerticalGraph(n, bounds, np.full((m,) * n, float(arg)))


def run_solve(cfg, density=None):
    """Run the configured solver; returns (graph, SolveReport)."""
    p = cfg["problem"]
    s = cfg["solver"]
    density = build_density(cfg) if density is None else density
    lam = p["lambda"]
    if p["mode"] == "vertical":
        g0 = initial_vertical(cfg)
        return solve_vertical(density, lam, None, g0, tol=s["tol"], max_iter=s["max_iter"])
    if p["mode"] == "radial":
        kind, arg = _boundary_source(cfg)
        m = p["nodes"]
        if kind == "constant":
            rb = (float(arg), float(arg))
        elif kind == "fixture":
            fg = _fixture_graph(arg, m, cfg)
            if not isinstance(fg, RadialGraph):
                raise ConfigError(f"fixture {arg!r} is not a radial graph",
                                  cfg.line_of("problem", "boundary"))
            col = fg.radii if fg.n == 1 else fg.radii[:, fg.shape[1] // 2]
            rb = (float(col[0]), float(col[-1]))
        else:
            raise ConfigError("radial mode takes a constant or fixture boundary",
                              cfg.line_of("problem", "boundary"))
        r0 = p["initial_radius"] if p["initial_radius"] is not None else 0.5 * sum(rb)
        rho0 = np.full(m, r0)
        return solve_radial_axisymmetric(
            density, lam, rb, p["theta_bounds"], rho0, orientation=p["orientation"],
            phi_bounds=p["phi_bounds"], phi_nodes=m, tol=s["tol"], max_iter=s["max_iter"],
        )
    prof = solve_rotational_vertical(density, lam, p["apex"], p["radius"], p["steps"], p["n"])
    hw = p["half_width"] if p["half_width"] is not None else p["radius"] / math.sqrt(p["n"])
    g = prof.to_vertical_graph(hw, p["nodes"])
    res = profile_residual(prof, density)
    r = float(np.max(np.abs(res)))
    return g, SolveReport(True, p["steps"], [], r, lam)


def _write_outputs(cfg, outdir, graph, density, report, stem="solve"):
    formats = cfg.get("output", "formats")
    if "mesh" in formats:
        write_atomic(os.path.join(outdir, "graph.mesh"), mesh_text(triangulate(graph)))
    if "csv" in formats:
        write_atomic(os.path.join(outdir, "field.csv"), field_csv(geometry(graph, density)))
    if "json" in formats:
        write_atomic(os.path.join(outdir, f"{stem}.json"), json17(report.to_dict()) + "\n")


def _outdir(args, cfg):
    return args.out if getattr(args, "out", None) else cfg.get("output", "directory")


def _config(args):
    return load_config(args.config, args.set or ())


# ---------------------------------------------------------------- subcommands


def cmd_solve(args):
    cfg = _config(args)
    density = build_density(cfg)
    graph, report = run_solve(cfg, density)
    _write_outputs(cfg, _outdir(args, cfg), graph, density, report)
    print(json17(report.to_dict()))
    if not report.converged:
        print(f"solver did not converge (residual {report.final_residual:.3e})", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def _stability_graph(args):
    """(graph, density, spectrum settings) from a fixture, a graph file or a config."""
    sp = {"tol": None, "eig_tol": spectrum.EIG_TOL, "max_iter": spectrum.EIG_MAX_ITER}
    if args.fixture:
        try:
            fx = fixtures.get(args.fixture)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        nodes = args.nodes if args.nodes else fx.base_nodes
        if nodes < 5:
            raise ConfigError("--nodes must be at least 5")
        return fx.graph(nodes=nodes), fx.density, sp, None
    if not args.config:
        raise ConfigError("stability needs a config file or --fixture")
    cfg = _config(args)
    sp.update({k: v for k, v in cfg["spectrum"].items()})
    density = build_density(cfg)
    if args.graph:
        g = _read_graph(args.graph)
        return g, density, sp, cfg
    graph, report = run_solve(cfg, density)
    if not report.converged:
        raise NonConvergence("solve before stability failed", report)
    return graph, density, sp, cfg


def run_stability(graph, density, sp):
    field = geometry(graph, density)
    mesh = triangulate(graph)
    asm = spectrum.assemble(mesh, field, density)
    return spectrum.min_eigenvalue(asm, tol=sp["eig_tol"], max_iter=sp["max_iter"],
                                   verdict_tol=sp["tol"]), asm


def cmd_stability(args):
    graph, density, sp, cfg = _stability_graph(args)
    rep, asm = run_stability(graph, density, sp)
    text = json17(rep.to_dict()) + "\n"
    outdir = args.out or (cfg.get("output", "directory") if cfg else None)
    if outdir:
        write_atomic(os.path.join(outdir, "spectrum.json"), text)
        write_atomic(os.path.join(outdir, "eigenvector.csv"), rep.eigenvector_csv(asm.interior))
    sys.stdout.write(text)
    return VERDICT_EXIT[rep.verdict]


def cmd_identities(args):
    if args.fixtures is None:
        names = list(fixtures.BATTERY)
    else:
        names = [t.strip() for t in args.fixtures.split(",") if t.strip()]
    for nm in names:
        if nm not in fixtures.FIXTURES:
            raise ConfigError(f"unknown fixture {nm!r}")
        if not fixtures.FIXTURES[nm].identities:
            raise ConfigError(f"fixture {nm!r} has no identity battery")
    reports = identities.run_battery(names, levels=args.levels)
    text = json17([r.to_dict() for r in reports]) + "\n"
    if args.out:
        write_atomic(os.path.join(args.out, "identities.json"), text)
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NONCONV


def calibration_base(cfg, args):
    c = cfg["calibration"]
    src = args.base or c["base"]
    line = cfg.line_of("calibration", "base")
    if src is None:
        graph, report = run_solve(cfg)
        if not report.converged:
            raise NonConvergence("solve of the calibration base failed", report)
        return graph
    if src.startswith("fixture:"):
        name = src.split(":", 1)[1].strip()
        try:
            fx = fixtures.get(name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), line) from None
        return fx.graph(nodes=c["nodes"] or fx.base_nodes)
    return _read_graph(src.split(":", 1)[1] if src.startswith("file:") else src, line)


def cmd_calibrate(args):
    cfg = _config(args)
    c = cfg["calibration"]
    trials = c["trials"] if args.trials is None else args.trials
    seed = c["seed"] if args.seed is None else args.seed
    if trials < 0 or not 0 <= seed < 2**64:
        raise ConfigError("trials must be >= 0 and seed a 64-bit unsigned integer")
    density = build_density(cfg)
    base = calibration_base(cfg, args)
    if not isinstance(base, VerticalGraph):
        raise ConfigError("calibration needs a vertical graph base")
    if trials == 0:
        report = cal.CalibrationReport([], 0.0, 0.0)
    else:
        from .surface import graph_weighted_area

        tol = c["tol_area"] * graph_weighted_area(base, density)
        report = cal.run_trials(base, density, trials, seed, tol=tol)
    text = report.to_csv()
    if args.out:
        write_atomic(os.path.join(args.out, "calibration.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK


def _sweep_values(spec):
    """'a:b:count' (inclusive linspace) or a comma list; empty string gives []."""
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        a, b, k = spec.split(":")
        k = int(k)
        if k < 0:
            raise ConfigError("sweep count must be >= 0")
        return list(np.linspace(float(a), float(b), k)) if k else []
    return [float(t) for t in spec.split(",") if t.strip()]


SWEEP_PARAMS = {"alpha": ("density", "alpha"), "p": ("density", "p"),
                "lambda": ("problem", "lambda"), "nodes": ("problem", "nodes")}


def cmd_sweep(args):
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; "
                          f"choose from {', '.join(SWEEP_PARAMS)}")
    try:
        values = _sweep_values(args.range)
    except ValueError as exc:
        raise ConfigError(f"bad sweep range: {exc}") from None
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    base_over = list(args.set or ())
    parse_config(text, base_over)  # validate once before computing anything
    sec, key = SWEEP_PARAMS[args.param]
    rows = ["parameter,mu_min,verdict,solve_residual,eig_residual,error"]
    worst = EXIT_OK
    for v in values:
        val = str(int(round(v))) if key == "nodes" else format_float(v)
        cfg = parse_config(text, base_over + [f"{sec}.{key}={val}"])
        density = build_density(cfg)
        graph, srep = run_solve(cfg, density)
        if not srep.converged:
            worst = EXIT_NONCONV
        sp = dict(cfg["spectrum"])
        rep, _ = run_stability(graph, density, sp)
        err = _fixture_error(cfg, graph)
        rows.append(",".join([val, format_float(rep.mu_min), rep.verdict,
                              format_float(srep.final_residual), format_float(rep.residual),
                              format_float(err)]))
    text_out = "\n".join(rows) + "\n"
    if args.out:
        write_atomic(os.path.join(args.out, "sweep.csv"), text_out)
    sys.stdout.write(text_out)
    return worst


def _fixture_error(cfg, graph):
    """Sup error against the fixture's closed form, NaN when none is known."""
    kind, arg = _boundary_source(cfg)
    if kind != "fixture" or arg not in fixtures.FIXTURES:
        return float("nan")
    fx = fixtures.FIXTURES[arg]
    if fx.exact is None or fx.density != build_density(cfg):
        return float("nan")
    vals = graph.heights if isinstance(graph, VerticalGraph) else graph.radii
    return float(np.max(np.abs(vals - fx.exact(graph))))


def cmd_fixtures(args):
    for name, fx in fixtures.FIXTURES.items():
        print(f"{name:24s} {fx.description}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def make_parser():
    ap = argparse.ArgumentParser(prog="densgraph", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("config", nargs=None if required else "?", help="run configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a configuration key (repeatable)")

    p = sub.add_parser("solve", help="solve H_phi = lambda for the configured graph")
    with_config(p)
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stability", help="smallest eigenvalue of the weighted Jacobi operator")
    with_config(p, required=False)
    p.add_argument("--fixture", help="use a built-in fixture instead of a config")
    p.add_argument("--nodes", type=int, help="nodes per axis for --fixture")
    p.add_argument("--graph", help="vertical graph mesh file (density from the config)")
    p.add_argument("--out", help="directory for spectrum.json and eigenvector.csv")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("identities", help="run the identity battery on built-in fixtures")
    p.add_argument("--fixtures", help="comma-separated fixture names (default: full battery)")
    p.add_argument("--levels", type=int, default=4, help="number of grid levels (>= 2)")
    p.add_argument("--out", help="directory for identities.json")
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("calibrate", help="volume-matched competitor trials")
    with_config(p)
    p.add_argument("--base", help="base graph: mesh file or fixture:<name>")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for calibration.csv")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="solve and test stability over a parameter range")
    with_config(p)
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--range", required=True, help="'start:stop:count' or 'v1,v2,...'")
    p.add_argument("--out", help="directory for sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fixtures", help="list built-in fixtures")
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if getattr(args, "levels", 2) < 2:
        print("error: --levels must be at least 2", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except DensGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
