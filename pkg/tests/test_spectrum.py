import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densgraph import density as D
from densgraph import fixtures as F
from densgraph import spectrum as Sp
from densgraph import surface as S


def assembly_of(graph, density):
    fld = S.geometry(graph, density)
    return Sp.assemble(S.triangulate(graph), fld)


def wavy(nodes, amp=0.2):
    g = S.VerticalGraph(2, [(-1, 1), (-1, 1)], np.zeros((nodes, nodes)))
    q = g.chart_points()
    return g.with_heights(amp * np.sin(2 * q[..., 0]) * np.cos(q[..., 1]) + 0.5)


def simplexwise_form(graph, density, u_interior):
    """Q[u] summed triangle by triangle with the edge-vector stiffness formula."""
    fld = S.geometry(graph, density)
    mesh = S.triangulate(graph)
    u = np.zeros(mesh.vertices.shape[0])
    u[mesh.interior_vertices] = u_interior
    w = fld.weight.ravel()
    q = fld.potential.ravel()
    total = 0.0
    for tri in mesh.simplices:
        P = mesh.vertices[tri]
        area = 0.5 * np.linalg.norm(np.cross(P[1] - P[0], P[2] - P[0]))
        edges = [P[2] - P[1], P[0] - P[2], P[1] - P[0]]  # opposite vertex i
        wbar = w[tri].mean()
        for i in range(3):
            for j in range(3):
                total += wbar * edges[i] @ edges[j] / (4 * area) * u[tri[i]] * u[tri[j]]
            total -= q[tri[i]] * w[tri[i]] * area / 3 * u[tri[i]] ** 2
    return total


def test_matrices_symmetric_and_mass_positive():
    asm = assembly_of(wavy(9), D.expander(3))
    for A in (asm.K, asm.P, asm.M, asm.A):
        assert abs(A - A.T).max() <= 1e-12 * max(1.0, abs(A).max())
    assert np.all(asm.lumped_mass() > 0)
    assert asm.size == 49


def test_shrinker_plane_potential_is_half_mass():
    asm = assembly_of(F.get("shrinker_plane").graph(nodes=9), D.shrinker(3))
    np.testing.assert_allclose(asm.P.diagonal(), 0.5 * asm.M.diagonal(), rtol=1e-14)


@pytest.mark.parametrize("density", [D.constant(3), D.expander(3), D.translator(3)],
                         ids=["constant", "expander", "translator"])
def test_quadratic_form_matches_simplexwise_sum(density):
    g = wavy(7)
    asm = assembly_of(g, density)
    u = np.random.default_rng(1).normal(size=asm.size)
    ref = simplexwise_form(g, density, u)
    assert Sp.quadratic_form(asm, u) == pytest.approx(ref, rel=1e-10, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_operator_self_adjoint(seed):
    asm = assembly_of(wavy(7), D.expander(3))
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, asm.size))
    A = asm.A
    assert u @ (A @ v) == pytest.approx(v @ (A @ u), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("nodes", [5, 9])
@pytest.mark.parametrize("density", [D.constant(3), D.expander(3), D.shrinker(3)],
                         ids=["constant", "expander", "shrinker"])
def test_inverse_iteration_matches_dense_solver(nodes, density):
    asm = assembly_of(wavy(nodes), density)
    rep = Sp.min_eigenvalue(asm)
    assert abs(rep.mu_min - Sp.dense_eigenvalues(asm)[0]) <= 1e-9 * max(1.0, abs(rep.mu_min))
    assert rep.residual <= 1e-9
    # witness normalized in M and signed by its mean
    assert rep.eigenvector @ (asm.M @ rep.eigenvector) == pytest.approx(1.0)
    assert rep.eigenvector @ asm.lumped_mass() > 0


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-5, 5))
def test_potential_shift_moves_spectrum(c):
    asm = assembly_of(wavy(7), D.expander(3))
    mu = Sp.min_eigenvalue(asm).mu_min
    shifted = Sp.OperatorAssembly(asm.K, asm.P - c * asm.M, asm.M, asm.interior)
    assert Sp.min_eigenvalue(shifted).mu_min == pytest.approx(mu + c, abs=1e-8)


def test_dirichlet_square():
    plane = F.get("plane").graph(nodes=65)
    rep = Sp.min_eigenvalue(assembly_of(plane, D.constant(3)))
    assert abs(rep.mu_min - 2 * math.pi**2) / (2 * math.pi**2) <= 2e-2
    assert rep.verdict == "Stable"


def test_shrinker_plane_unstable():
    g = F.get("shrinker_plane").graph(nodes=33)
    rep = Sp.min_eigenvalue(assembly_of(g, D.shrinker(3)))
    assert rep.mu_min <= -0.1
    assert rep.verdict == "Unstable"
    assert Sp.check_strong_stability(assembly_of(g, D.shrinker(3))) == "Unstable"


def test_classify_band():
    assert Sp.classify(1.0, 1e-6) == "Stable"
    assert Sp.classify(-1.0, 1e-6) == "Unstable"
    assert Sp.classify(1e-9, 1e-6) == "Inconclusive"
    assert Sp.classify(1.0, 1e-6, converged=False) == "Inconclusive"


def test_report_serialization():
    asm = assembly_of(wavy(5), D.constant(3))
    rep = Sp.min_eigenvalue(asm)
    assert set(rep.to_dict()) == {"mu_min", "iterations", "residual", "verdict", "tol"}
    lines = rep.eigenvector_csv(asm.interior).splitlines()
    assert lines[0] == "node,value" and len(lines) == 10


def test_decomposition_zero_test_function():
    fx = F.get("grim_reaper")
    g = fx.graph(nodes=33)
    fld = S.geometry(g, fx.density)
    out = Sp.decomposition_check(S.triangulate(g), fld, fx.density, np.zeros(31),
                                 fx.decomposition_mode)
    assert out == (0.0, 0.0, 0.0)


def test_decomposition_mode_validation():
    fx = F.get("grim_reaper")
    g = fx.graph(nodes=33)
    fld = S.geometry(g, fx.density)
    with pytest.raises(ValueError):
        Sp.decomposition_check(S.triangulate(g), fld, fx.density, np.ones(31), "bogus")
    with pytest.raises(ValueError):
        Sp.decomposition_check(S.triangulate(g), fld, fx.density, np.ones(31),
                               "radial_graph_radial_density")


@pytest.mark.parametrize("name", ["grim_reaper", "catenary", "expander_curve_solved"])
def test_decomposition_gap_shrinks(name):
    fx = F.get(name)
    gaps = []
    for m in (65, 129, 257):
        g = fx.graph(nodes=m)
        fld = S.geometry(g, fx.density)
        x = g.axes[0][1:-1]
        a, b = g.bounds[0]
        v = np.sin(np.pi * (x - a) / (b - a)) ** 2
        gaps.append(Sp.decomposition_check(S.triangulate(g), fld, fx.density, v,
                                           fx.decomposition_mode, lam=fx.lam)[2])
    assert gaps[0] / gaps[1] >= 3 and gaps[1] / gaps[2] >= 3, gaps
