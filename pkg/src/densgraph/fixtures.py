"""Built-in stationary surfaces used by the tests, the CLI and the demos.

Each fixture builds a graph at a refinement level; level k has
``(base_nodes - 1) * 2**k + 1`` nodes per axis so successive levels halve
the spacing.  Graphs that are not exactly representable are produced by the
solvers, so every fixture is discretely stationary on its interior nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import density as dens
from .solver import (
    harmonic_extension,
    solve_radial_axisymmetric,
    solve_rotational_vertical,
    solve_vertical,
)
from .surface import RadialGraph, VerticalGraph
from .errors import NonConvergence


@dataclass(frozen=True)
class Fixture:
    name: str
    density: object
    lam: float
    base_nodes: int
    builder: Callable = field(repr=False)
    exact: Callable | None = field(default=None, repr=False)
    description: str = ""
    identities: tuple = ()
    decomposition_mode: str | None = None

    def nodes(self, level):
        return (self.base_nodes - 1) * 2**level + 1

    def graph(self, level=0, nodes=None):
        m = self.nodes(level) if nodes is None else nodes
        return _build(self.name, m)

    @property
    def n(self):
        return self.density.ambient_dim - 1


def _solved(density, lam, boundary, g0):
    g, rep = solve_vertical(density, lam, boundary, g0)
    if not rep.converged:
        raise NonConvergence(f"fixture solve failed (residual {rep.final_residual:.3e})", rep)
    return g


# ---------------------------------------------------------------- closed forms


def grim_reaper_height(x):
    return -np.log(np.cos(x))


def cmc_arc_height(x):
    """Lower circular arc of radius 1 through (+-1/2, 0); nH = +1 upward."""
    return np.sqrt(3.0) / 2.0 - np.sqrt(1.0 - x**2)


def semicircle_height(x, a=-1.0, fa=1.0, b=1.0, fb=1.5):
    """Circle centred on the x-axis through (a, fa), (b, fb)."""
    c = (b**2 + fb**2 - a**2 - fa**2) / (2.0 * (b - a))
    R2 = (a - c) ** 2 + fa**2
    return np.sqrt(R2 - (x - c) ** 2)


@lru_cache(maxsize=None)
def _profile(kind, n, apex, radius, steps):
    d = {"translator": dens.translator, "expander": dens.expander}[kind](n + 1)
    return solve_rotational_vertical(d, 0.0, apex, radius, steps)


# ---------------------------------------------------------------- builders


@lru_cache(maxsize=64)
def _build(name, m):
    b = BUILDERS[name]
    return b(m)


def _line_graph(a, b, m, boundary_fn):
    x = np.linspace(a, b, m)
    f = np.zeros(m)
    f[0], f[-1] = boundary_fn(np.array([a, b]))
    return harmonic_extension(VerticalGraph(1, [(a, b)], f))


def _plane(m):
    return VerticalGraph(2, [(0.0, 1.0), (0.0, 1.0)], np.zeros((m, m)))


def _shrinker_plane(m):
    return VerticalGraph(2, [(-10.0, 10.0), (-10.0, 10.0)], np.zeros((m, m)))


SPHERE_CHART = [(np.pi / 4, 3 * np.pi / 4), (0.0, np.pi / 2)]


def _sphere(m):
    return RadialGraph(2, SPHERE_CHART, np.ones((m, m)))


def _shrinker_sphere(m):
    return RadialGraph(2, SPHERE_CHART, np.full((m, m), 2.0))


def _grim_reaper(m):
    d = dens.translator(2)
    g0 = _line_graph(-1.0, 1.0, m, grim_reaper_height)
    return _solved(d, 0.0, lambda q: grim_reaper_height(q[:, 0]), g0)


def _catenary(m):
    d = dens.singular_minimal(2, 1.0)
    g0 = _line_graph(-1.0, 1.0, m, np.cosh)
    return _solved(d, 0.0, lambda q: np.cosh(q[:, 0]), g0)


def _cmc_arc(m):
    d = dens.constant(2)
    g0 = VerticalGraph(1, [(-0.5, 0.5)], np.zeros(m))
    return _solved(d, 1.0, lambda q: np.zeros(len(q)), g0)


def _rotational_boundary(profile):
    spline = profile.interpolant()
    return lambda q: spline(np.linalg.norm(q, axis=-1))


def _bowl(m):
    prof = _profile("translator", 2, 0.0, 1.5, 3000)
    g0 = harmonic_extension(prof.to_vertical_graph(1.0, m))
    return _solved(dens.translator(3), 0.0, None, g0)


def _expander_vertical(m):
    prof = _profile("expander", 2, 1.0, 1.5, 3000)
    g0 = harmonic_extension(prof.to_vertical_graph(1.0, m))
    return _solved(dens.expander(3), 0.0, None, g0)


def _expander_curve(m):
    prof = _profile("expander", 1, 1.0, 1.0, 4000)
    return prof.to_vertical_graph(1.0, m)


def _expander_curve_solved(m):
    prof = _profile("expander", 1, 1.0, 1.0, 4000)
    g0 = harmonic_extension(prof.to_vertical_graph(1.0, m))
    return _solved(dens.expander(2), 0.0, None, g0)


EXPANDER_BAND = (np.pi / 3, 2 * np.pi / 3)


def _expander_radial(m):
    g, rep = solve_radial_axisymmetric(
        dens.expander(3), 0.0, (1.0, 1.0), EXPANDER_BAND, np.ones(m),
        phi_bounds=(0.0, np.pi / 2), phi_nodes=m,
    )
    if not rep.converged:
        raise NonConvergence("expander radial fixture failed", rep)
    return g


def _singular(alpha):
    def build(m):
        d = dens.singular_minimal(2, alpha) if alpha != 0 else dens.constant(2)
        g0 = _line_graph(-1.0, 1.0, m, lambda x: np.array([1.0, 1.5]))
        return _solved(d, 0.0, None, g0)

    return build


BUILDERS = {
    "plane": _plane,
    "sphere": _sphere,
    "shrinker_sphere": _shrinker_sphere,
    "grim_reaper": _grim_reaper,
    "catenary": _catenary,
    "bowl": _bowl,
    "cmc_arc": _cmc_arc,
    "expander_vertical": _expander_vertical,
    "expander_curve": _expander_curve,
    "expander_curve_solved": _expander_curve_solved,
    "expander_radial": _expander_radial,
    "shrinker_plane": _shrinker_plane,
    "singular_minimal_m2": _singular(-2.0),
    "singular_minimal_m1": _singular(-1.0),
    "singular_minimal_0": _singular(0.0),
}

_ALL_IDS = ("gauss_map", "lemma_vertical", "lemma_support", "lu", "f1", "ff", "ff2",
            "first_variation")
_RADIAL_IDS = ("gauss_map", "lemma_vertical", "lemma_support", "lu", "f1", "first_variation")
_VERTICAL_IDS = ("gauss_map", "lemma_vertical", "lemma_support", "ff", "ff2",
                 "first_variation")

FIXTURES = {
    f.name: f
    for f in [
        Fixture("plane", dens.constant(3), 0.0, 17, _plane, lambda g: np.zeros(g.shape),
                "flat graph over the unit square, constant density", _ALL_IDS),
        Fixture("sphere", dens.constant(3), -2.0, 17, _sphere, lambda g: np.ones(g.shape),
                "unit sphere patch, constant density (cmc, outward normal)", _ALL_IDS),
        Fixture("shrinker_sphere", dens.shrinker(3), 0.0, 17, _shrinker_sphere,
                lambda g: np.full(g.shape, 2.0),
                "round self-shrinker sphere of radius 2", _RADIAL_IDS,
                "radial_graph_radial_density"),
        Fixture("grim_reaper", dens.translator(2), 0.0, 33, _grim_reaper,
                lambda g: grim_reaper_height(g.axes[0]),
                "grim reaper translator -log cos x on [-1, 1]", _VERTICAL_IDS,
                "vertical_graph_vertical_density"),
        Fixture("catenary", dens.singular_minimal(2, 1.0), 0.0, 33, _catenary,
                lambda g: np.cosh(g.axes[0]),
                "catenary cosh x, the alpha = 1 singular minimal curve", _VERTICAL_IDS,
                "radial_graph_vertical_density"),
        Fixture("bowl", dens.translator(3), 0.0, 17, _bowl, None,
                "bowl soliton over [-1, 1]^2", _VERTICAL_IDS),
        Fixture("cmc_arc", dens.constant(2), 1.0, 33, _cmc_arc,
                lambda g: cmc_arc_height(g.axes[0]),
                "circular arc with nH = 1 over [-1/2, 1/2]"),
        Fixture("expander_vertical", dens.expander(3), 0.0, 9, _expander_vertical, None,
                "rotational expander graph over [-1, 1]^2", (),
                "vertical_graph_radial_density"),
        Fixture("expander_curve", dens.expander(2), 0.0, 257, _expander_curve, None,
                "symmetric expander curve sampled from the profile ODE"),
        Fixture("expander_curve_solved", dens.expander(2), 0.0, 33, _expander_curve_solved,
                None, "symmetric expander curve from the grid Newton solver", (),
                "vertical_graph_radial_density"),
        Fixture("expander_radial", dens.expander(3), 0.0, 33, _expander_radial, None,
                "axisymmetric expander radial graph over a theta band"),
        Fixture("shrinker_plane", dens.shrinker(3), 0.0, 9, _shrinker_plane,
                lambda g: np.zeros(g.shape), "flat graph over [-10, 10]^2, shrinker density"),
        Fixture("singular_minimal_m2", dens.singular_minimal(2, -2.0), 0.0, 33,
                _singular(-2.0), None, "alpha = -2 singular minimal curve"),
        Fixture("singular_minimal_m1", dens.singular_minimal(2, -1.0), 0.0, 33,
                _singular(-1.0), lambda g: semicircle_height(g.axes[0]),
                "alpha = -1 singular minimal curve (a circle centred on the axis)"),
        Fixture("singular_minimal_0", dens.constant(2), 0.0, 33, _singular(0.0),
                lambda g: 1.25 + 0.25 * g.axes[0], "alpha = 0: a straight segment"),
    ]
}

BATTERY = ("plane", "sphere", "grim_reaper", "catenary", "bowl", "shrinker_sphere")


def get(name):
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}") from None
