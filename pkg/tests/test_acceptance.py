"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Thresholds are the stated ones; nothing here is loosened to make a check pass.
"""
import time

import numpy as np
import pytest

from densgraph import calibration as C
from densgraph import cli
from densgraph import density as D
from densgraph import fixtures as F
from densgraph import identities as I
from densgraph import spectrum as Sp
from densgraph import surface as S
from densgraph.rng import SplitMix64
from densgraph.solver import harmonic_extension, solve_vertical


@pytest.fixture
def report(capsys):
    def _report(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _report


def stability_of(graph, density):
    asm = Sp.assemble(S.triangulate(graph), S.geometry(graph, density), density)
    return Sp.min_eigenvalue(asm), asm


# ---------------------------------------------------------------- 1


def solve_closed_form(density, lam, exact, a, b, m):
    f = np.zeros(m)
    f[0], f[-1] = exact(np.array([a, b]))
    g0 = harmonic_extension(S.VerticalGraph(1, [(a, b)], f))
    t = time.perf_counter()
    g, rep = solve_vertical(density, lam, None, g0)
    return np.abs(g.heights - exact(g.axes[0])).max(), rep.converged, time.perf_counter() - t


def test_criterion_1_solver_fixtures(report):
    cases = {
        "grim_reaper": (D.translator(2), 0.0, F.grim_reaper_height, -1.0, 1.0),
        "catenary": (D.singular_minimal(2, 1.0), 0.0, np.cosh, -1.0, 1.0),
        "cmc_arc": (D.constant(2), 1.0, F.cmc_arc_height, -0.5, 0.5),
    }
    ok, parts = True, []
    for name, args in cases.items():
        runs = [solve_closed_form(*args, m) for m in (33, 65, 129, 257)]
        errs = np.array([r[0] for r in runs])
        orders = np.log2(errs[:-1] / errs[1:])
        slowest = max(r[2] for r in runs)
        good = (all(r[1] for r in runs) and errs[-1] <= 5e-4 and orders.min() >= 1.9
                and slowest <= 5.0)
        ok &= good
        parts.append(f"{name} err257={errs[-1]:.2e} min_order={orders.min():.2f} "
                     f"max_time={slowest:.2f}s")
    report(1, ok, "; ".join(parts))


# ---------------------------------------------------------------- 2


def test_criterion_2_identity_battery(report):
    t = time.perf_counter()
    reports = I.run_battery()
    elapsed = time.perf_counter() - t
    failed = [r.name for r in reports if not r.passed]
    orders = [min(r.grid_orders) for r in reports if r.grid_orders]
    plane = max(max(r.details["residuals"]) for r in reports if r.name.startswith("plane/"))
    fixtures_seen = {r.name.split("/")[0] for r in reports}
    ok = (not failed and all(o >= 1.5 for o in orders) and plane <= 1e-12
          and elapsed <= 60.0 and fixtures_seen == set(F.BATTERY))
    report(2, ok, f"{len(reports)} identity checks on {len(fixtures_seen)} fixtures, "
                  f"failed={failed}, min_order={min(orders):.2f}, plane_residual={plane:.1e}, "
                  f"time={elapsed:.1f}s")


# ---------------------------------------------------------------- 3


STABILITY_CASES = [
    ("expander_vertical", (65, 129)),
    ("expander_radial", (65, 129)),
    ("grim_reaper", (257, 513)),
    ("singular_minimal_m2", (257, 513)),
    ("singular_minimal_m1", (257, 513)),
    ("singular_minimal_0", (257, 513)),
]


def test_criterion_3_theorem_backed_stability(report):
    ok, parts = True, []
    for name, levels in STABILITY_CASES:
        fx = F.get(name)
        mus, t = [], time.perf_counter()
        for m in levels:
            rep, _ = stability_of(fx.graph(nodes=m), fx.density)
            mus.append(rep.mu_min if rep.residual <= Sp.EIG_TOL else np.nan)
        elapsed = time.perf_counter() - t
        neg = [max(0.0, -mu) for mu in mus]
        shrinks = neg[0] == 0.0 and neg[1] == 0.0 or neg[1] * 3 <= neg[0]
        good = np.isfinite(mus).all() and mus[0] >= -1e-4 and shrinks and elapsed <= 30.0
        ok &= bool(good)
        parts.append(f"{name} mu={mus[0]:.4g}->{mus[1]:.4g} ({elapsed:.1f}s)")
    report(3, ok, "; ".join(parts))


# ---------------------------------------------------------------- 4


def test_criterion_4_negative_control(report):
    fx = F.get("shrinker_plane")
    rep, _ = stability_of(fx.graph(nodes=65), fx.density)
    gaps = []
    for nodes in (7, 9):
        r, asm = stability_of(fx.graph(nodes=nodes), fx.density)
        gaps.append(abs(r.mu_min - Sp.dense_eigenvalues(asm)[0]))
    ok = rep.mu_min <= -0.1 and rep.verdict == "Unstable" and max(gaps) <= 1e-9
    report(4, ok, f"mu_min={rep.mu_min:.6f} verdict={rep.verdict} "
                  f"dense_gap(7x7 nodes, 7x7 interior)={gaps[0]:.1e},{gaps[1]:.1e}")


# ---------------------------------------------------------------- 5


DECOMPOSITION_CASES = [
    ("expander_vertical", (33, 65)),       # vertical graph, radial density
    ("expander_curve_solved", (129, 257)),  # vertical graph, radial density (n = 1)
    ("shrinker_sphere", (33, 65)),          # radial graph, radial density
    ("grim_reaper", (129, 257)),            # vertical graph, vertical density
    ("catenary", (129, 257)),               # radial graph, vertical density
]


def random_bump(graph, rng):
    spec = []
    for a, b in graph.bounds:
        w = rng.uniform(0.2, 0.45) * (b - a)
        spec.append((rng.uniform(a + w, b - w), w))
    return spec


def bump_values(graph, spec):
    v = np.ones(graph.shape)
    for k, (ax, (c, w)) in enumerate(zip(graph.axes, spec)):
        z = (ax - c) / w
        s = np.where(np.abs(z) < 1.0, np.cos(0.5 * np.pi * z) ** 2, 0.0)
        shape = [1] * graph.n
        shape[k] = -1
        v = v * s.reshape(shape)
    return v[graph.interior_mask]


def test_criterion_5_decompositions(report):
    ok, parts = True, []
    for name, levels in DECOMPOSITION_CASES:
        fx = F.get(name)
        rng = SplitMix64(2024)
        specs = [random_bump(fx.graph(nodes=levels[0]), rng) for _ in range(10)]
        gaps, hs = [], []
        for m in levels:
            g = fx.graph(nodes=m)
            fld = S.geometry(g, fx.density)
            mesh = S.triangulate(g)
            asm = Sp.assemble(mesh, fld, fx.density)
            gaps.append(np.array([
                Sp.decomposition_check(mesh, fld, fx.density, bump_values(g, sp),
                                       fx.decomposition_mode, lam=fx.lam, assembly=asm)[2]
                for sp in specs
            ]))
            hs.append(max(g.spacing))
        consts = gaps[0] / hs[0] ** 2
        # "stable constant": no bump exceeds ten times the median constant
        stability = consts.max() / np.median(consts)
        spread = consts.max() / consts.min()
        ratio = (gaps[0] / gaps[1]).min()
        good = stability <= 10.0 and ratio >= 3.0
        ok &= bool(good)
        parts.append(f"{name}[{fx.decomposition_mode}] C_max/median={stability:.2f} "
                     f"C_max/min={spread:.2f} "
                     f"min_halving_ratio={ratio:.2f}")
    report(5, ok, "; ".join(parts))


# ---------------------------------------------------------------- 6


def calibration_bases():
    x = np.linspace(-1.0, 1.0, 1025)
    xa = np.linspace(-0.5, 0.5, 1025)
    return [
        ("grim_reaper", S.VerticalGraph(1, [(-1, 1)], F.grim_reaper_height(x)), D.translator(2), 0.0),
        ("expander_curve", F.get("expander_curve").graph(nodes=1025), D.expander(2), 0.0),
        ("cmc_arc", S.VerticalGraph(1, [(-0.5, 0.5)], F.cmc_arc_height(xa)), D.constant(2), 1.0),
        ("singular_minimal_m1", S.VerticalGraph(1, [(-1, 1)], F.semicircle_height(x)),
         D.singular_minimal(2, -1.0), 0.0),
    ]


def test_criterion_6_calibration(report):
    ok, parts = True, []
    for name, graph, density, lam in calibration_bases():
        t = time.perf_counter()
        base = C.SmoothBase(graph)
        pts = C.sample_points(base, density, 100, seed=17)
        div = C.divergence_check(base, density, lam, pts).sup_residual
        rep = C.run_trials(graph, density, 50, seed=0, tol=1e-10 * S.graph_weighted_area(graph, density))
        elapsed = time.perf_counter() - t
        worst = min(tr.deltaA for tr in rep.trials)
        good = (div <= 1e-5 and rep.all_consistent and len(rep.trials) == 50
                and worst >= -1e-10 * rep.area and elapsed <= 120.0)
        ok &= bool(good)
        parts.append(f"{name} div_gap={div:.1e} min_deltaA={worst:.2e} ({elapsed:.1f}s)")
    report(6, ok, "; ".join(parts))


# ---------------------------------------------------------------- 7


def simplexwise_form(graph, density, u_interior):
    """Q[u] triangle by triangle with the edge-vector P1 stiffness formula."""
    fld = S.geometry(graph, density)
    mesh = S.triangulate(graph)
    u = np.zeros(mesh.vertices.shape[0])
    u[mesh.interior_vertices] = u_interior
    w, q = fld.weight.ravel(), fld.potential.ravel()
    total = 0.0
    for tri in mesh.simplices:
        P = mesh.vertices[tri]
        area = 0.5 * np.linalg.norm(np.cross(P[1] - P[0], P[2] - P[0]))
        E = [P[2] - P[1], P[0] - P[2], P[1] - P[0]]
        wbar = w[tri].mean()
        ut = u[tri]
        total += wbar * sum(E[i] @ E[j] * ut[i] * ut[j] for i in range(3) for j in range(3)) / (4 * area)
        total -= np.sum(q[tri] * w[tri] * ut**2) * area / 3
    return total


def test_criterion_7_infrastructure(report, tmp_path):
    notes = []
    g = F.get("expander_vertical").graph(nodes=9)
    d = D.expander(3)
    _, asm = stability_of(g, d)
    sym = max(abs(A - A.T).max() for A in (asm.K, asm.P, asm.M))
    spd = bool(np.all(np.linalg.eigvalsh(asm.M.toarray()) > 0))
    u = np.random.default_rng(7).normal(size=asm.size)
    qgap = abs(Sp.quadratic_form(asm, u) - simplexwise_form(g, d, u))
    rep = Sp.min_eigenvalue(asm)
    dgap = abs(rep.mu_min - Sp.dense_eigenvalues(asm)[0])
    notes.append(f"symmetry={sym:.1e} M_spd={spd} qform_gap={qgap:.1e} "
                 f"dense_gap({asm.size} interior)={dgap:.1e}")

    cfg = tmp_path / "grim.cfg"
    cfg.write_text("[density]\nkind = translator\n[problem]\nmode = vertical\nn = 1\n"
                   "nodes = 129\nlambda = 0\nboundary = fixture:grim_reaper\n"
                   "[calibration]\nbase = fixture:grim_reaper\nnodes = 257\n")
    same = True
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        cli.main(["solve", str(cfg), "--out", str(out)])
        cli.main(["stability", str(cfg), "--out", str(out)])
        cli.main(["calibrate", str(cfg), "--trials", "5", "--seed", "99", "--out", str(out)])
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outs[0] == outs[1] and len(outs[0]) == 6
    notes.append(f"byte_identical_reports={same} ({len(outs[0])} files)")
    ok = sym <= 1e-12 and spd and qgap <= 1e-10 and dgap <= 1e-9 and same
    report(7, ok, "; ".join(notes))
