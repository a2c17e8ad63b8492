"""Solvers for the stationary equation H_phi = lambda.

* :func:`solve_vertical` -- damped Newton on a full vertical-graph grid.
* :func:`solve_rotational_vertical` -- RK4 for rotationally symmetric profiles.
* :func:`solve_radial_axisymmetric` -- Newton on a theta grid for radial graphs.

The Newton residual at an interior node is nH - <grad phi, N> - lambda with nH
taken from :func:`densgraph.surface.geometry_vertical` (or the radial
counterpart), so re-evaluating a converged graph with the surface module
reproduces the solver's residual exactly.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicHermiteSpline
from scipy.sparse.linalg import spsolve

from . import density as dens
from .errors import BlowUp, DomainError, NonConvergence, PositivityError
from .surface import RadialGraph, VerticalGraph, geometry_radial, geometry_vertical

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_ITER = 50
BACKTRACK = 0.5
ARMIJO = 1e-4


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    final_residual: float = float("nan")
    lambda_: float = 0.0

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _stencil_jacobian(res, u, F0, ishape, rel_step=1e-7):
    """Finite-difference Jacobian for residuals with a 3^n-point stencil.

    Unknowns whose grid indices agree modulo 3 never share a residual row, so
    one residual evaluation per colour recovers a whole set of columns.
    """
    n = len(ishape)
    idx = np.arange(u.size).reshape(ishape)
    grids = np.indices(ishape)
    colour = sum((grids[k] % 3) * 3**k for k in range(n))
    offsets = list(itertools.product((-1, 0, 1), repeat=n))
    rows, cols, vals = [], [], []
    for c in range(3**n):
        sel = colour == c
        if not np.any(sel):
            continue
        cj = idx[sel]
        du = rel_step * np.maximum(1.0, np.abs(u[cj]))
        up = u.copy()
        up[cj] += du
        dF = res(up) - F0
        P = np.argwhere(sel)
        for off in offsets:
            Q = P + np.asarray(off)
            ok = np.all((Q >= 0) & (Q < np.asarray(ishape)), axis=1)
            r = idx[tuple(Q[ok].T)]
            rows.append(r)
            cols.append(cj[ok])
            vals.append(dF[r] / du[ok])
    J = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(u.size, u.size),
    )
    return J.tocsc()


def _damped_newton(res, u0, ishape, lam, tol, max_iter, backtrack, armijo, domain_errors):
    u = np.array(u0, dtype=float)
    F = res(u)
    r = float(np.max(np.abs(F))) if F.size else 0.0
    report = SolveReport(False, 0, [], r, lam)
    for it in range(max_iter):
        if r <= tol:
            break
        J = _stencil_jacobian(res, u, F, ishape)
        d = spsolve(J, -F)
        if not np.all(np.isfinite(d)):
            break
        alpha = 1.0
        accepted = False
        while alpha >= 2.0**-30:
            try:
                Fn = res(u + alpha * d)
            except domain_errors:
                alpha *= backtrack
                continue
            rn = float(np.max(np.abs(Fn)))
            if np.isfinite(rn) and rn <= (1.0 - armijo * alpha) * r:
                accepted = True
                break
            alpha *= backtrack
        if not accepted:
            log.debug("line search failed at iteration %d (residual %.3e)", it, r)
            break
        u = u + alpha * d
        F, r = Fn, rn
        report.iterations += 1
        report.residual_history.append(r)
        log.debug("newton %d: alpha=%g residual=%.3e", it, alpha, r)
    report.final_residual = r
    report.converged = r <= tol
    return u, report


# ---------------------------------------------------------------- vertical


def harmonic_extension(graph):
    """Flat initial guess: boundary heights extended harmonically inside."""
    f = np.array(graph.heights, dtype=float)
    if graph.n == 1:
        x = graph.axes[0]
        f = f[0] + (f[-1] - f[0]) * (x - x[0]) / (x[-1] - x[0])
        return graph.with_heights(f)
    m1, m2 = graph.shape
    hx, hy = graph.spacing
    inner = (m1 - 2, m2 - 2)
    idx = np.arange(inner[0] * inner[1]).reshape(inner)
    rows, cols, vals = [], [], []
    rhs = np.zeros(idx.size)
    cx, cy = 1.0 / hx**2, 1.0 / hy**2
    for i in range(inner[0]):
        for j in range(inner[1]):
            k = idx[i, j]
            rows.append(k)
            cols.append(k)
            vals.append(-2 * cx - 2 * cy)
            for di, dj, c in ((1, 0, cx), (-1, 0, cx), (0, 1, cy), (0, -1, cy)):
                ii, jj = i + di, j + dj
                if 0 <= ii < inner[0] and 0 <= jj < inner[1]:
                    rows.append(k)
                    cols.append(idx[ii, jj])
                    vals.append(c)
                else:
                    rhs[k] -= c * f[ii + 1, jj + 1]
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(idx.size, idx.size))
    f[1:-1, 1:-1] = spsolve(A, rhs).reshape(inner)
    return graph.with_heights(f)


def vertical_residual(graph, density, lam):
    """Nodal H_phi - lambda of a vertical graph (all nodes)."""
    fld = geometry_vertical(graph, density)
    return fld.H_phi - lam


def solve_vertical(
    density,
    lam,
    boundary,
    graph0,
    tol=NEWTON_TOL,
    max_iter=MAX_ITER,
    backtrack=BACKTRACK,
    armijo=ARMIJO,
    raise_on_failure=False,
):
    """Damped Newton for H_phi = lam on the interior nodes of a vertical graph.

    ``boundary`` is a callable mapping chart points (k, n) to heights, or None
    to keep the boundary heights of ``graph0``.  Returns ``(graph, report)``;
    a failed solve returns the last iterate with ``report.converged`` False
    (or raises :class:`NonConvergence` if ``raise_on_failure``).
    """
    graph0.require_stencil()
    f = np.array(graph0.heights, dtype=float)
    bmask = graph0.boundary_mask
    if boundary is not None:
        q = graph0.chart_points()[bmask]
        f[bmask] = np.asarray(boundary(q), dtype=float)
    imask = ~bmask
    ishape = tuple(m - 2 for m in graph0.shape)
    template = graph0.with_heights(f)
    # the density domain must contain the starting graph
    dens.eval_phi(density, template.embedding())

    def res(u):
        g = f.copy()
        g[imask] = u
        return vertical_residual(template.with_heights(g), density, lam)[imask]

    u, report = _damped_newton(
        res, f[imask], ishape, lam, tol, max_iter, backtrack, armijo, (DomainError,)
    )
    f[imask] = u
    out = template.with_heights(f)
    if not report.converged and raise_on_failure:
        raise NonConvergence(
            f"vertical Newton stopped at residual {report.final_residual:.3e}", report
        )
    return out, report


# ---------------------------------------------------------------- rotational ODE


@dataclass
class RotationalProfile:
    n: int
    s: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    lam: float

    def interpolant(self):
        return CubicHermiteSpline(self.s, self.f, self.fp)

    def to_vertical_graph(self, half_width, nodes, center=0.0):
        """Resample onto a grid over [-w, w]^n via Hermite interpolation in |q|."""
        shape = (nodes,) * self.n
        bounds = [(center - half_width, center + half_width)] * self.n
        g = VerticalGraph(self.n, bounds, np.zeros(shape))
        rad = np.linalg.norm(g.chart_points() - center, axis=-1)
        if rad.max() > self.s[-1] * (1 + 1e-12):
            raise ValueError("grid reaches beyond the integrated profile")
        return g.with_heights(self.interpolant()(rad))


def _profile_point(s, f, n):
    if n == 1:
        return np.array([s, f])
    return np.array([s, 0.0, f])


def _profile_accel(density, lam, n, s, f, p):
    W = np.sqrt(1.0 + p * p)
    x = _profile_point(s, f, n)
    N = _profile_point(-p, 1.0, n) / W
    G = float(np.dot(dens.grad_phi(density, x), N)) + lam
    if s == 0.0:
        return G / n
    return W**3 * (G - (n - 1) * p / (s * W))


def solve_rotational_vertical(density, lam, apex_height, radius, steps, n=None, slope_cap=1e8):
    """Integrate the rotationally symmetric profile from a regular apex with RK4.

    At s = 0 the removable singularity is replaced by its limit
    f''(0) = (<grad phi, N> + lambda) / n.
    """
    n = density.ambient_dim - 1 if n is None else n
    if radius <= 0 or steps < 1:
        raise ValueError("radius must be positive and steps >= 1")
    ds = radius / steps
    s = np.linspace(0.0, radius, steps + 1)
    f = np.empty(steps + 1)
    fp = np.empty(steps + 1)
    f[0], fp[0] = apex_height, 0.0

    def rhs(si, y):
        return np.array([y[1], _profile_accel(density, lam, n, si, y[0], y[1])])

    y = np.array([apex_height, 0.0])
    for k in range(steps):
        sk = s[k]
        k1 = rhs(sk, y)
        k2 = rhs(sk + 0.5 * ds, y + 0.5 * ds * k1)
        k3 = rhs(sk + 0.5 * ds, y + 0.5 * ds * k2)
        k4 = rhs(sk + ds, y + ds * k3)
        y = y + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)) or abs(y[1]) > slope_cap:
            raise BlowUp(f"profile stopped being a graph near s = {s[k + 1]:.6g}")
        f[k + 1], fp[k + 1] = y
    return RotationalProfile(n, s, f, fp, lam)


def profile_residual(profile, density):
    """H_phi - lambda of a sampled profile using second-order FD in s (s > 0)."""
    s, f = profile.s, profile.f
    ds = s[1] - s[0]
    fp = np.gradient(f, ds, edge_order=2)
    fpp = np.empty_like(f)
    fpp[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / ds**2
    fpp[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / ds**2
    fpp[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / ds**2
    n = profile.n
    W = np.sqrt(1 + fp**2)
    nH = fpp / W**3
    pos = s > 0
    nH[pos] += (n - 1) * fp[pos] / (s[pos] * W[pos])
    nH[~pos] *= n
    x = np.stack([s, f], axis=-1) if n == 1 else np.stack([s, 0 * s, f], axis=-1)
    N = (np.stack([-fp, np.ones_like(s)], axis=-1) if n == 1
         else np.stack([-fp, 0 * s, np.ones_like(s)], axis=-1)) / W[:, None]
    return dens.weighted_mean_curvature(density, x, N, nH) - profile.lam


# ---------------------------------------------------------------- radial


AXISYM_PHI_NODES = 5


def _axisym_graph(n, theta_bounds, rho, phi_bounds, orientation):
    if n == 1:
        return RadialGraph(1, [theta_bounds], rho, orientation)
    grid = np.repeat(np.asarray(rho)[:, None], AXISYM_PHI_NODES, axis=1)
    return RadialGraph(2, [theta_bounds, phi_bounds], grid, orientation)


def radial_residual(graph, density, lam):
    return geometry_radial(graph, density).H_phi - lam


def solve_radial_axisymmetric(
    density,
    lam,
    boundary_radii,
    theta_bounds,
    rho0,
    orientation=1,
    phi_bounds=(0.0, np.pi / 2),
    phi_nodes=None,
    tol=NEWTON_TOL,
    max_iter=MAX_ITER,
    backtrack=BACKTRACK,
    armijo=ARMIJO,
    raise_on_failure=False,
):
    """Newton on rho(theta) for axisymmetric radial graphs (n = 1 or 2).

    ``rho0`` gives the initial radii on the theta grid; its end values are
    replaced by ``boundary_radii``.  For n = 2 the returned graph spans
    ``phi_bounds`` with ``phi_nodes`` (default: as many as theta nodes).
    """
    n = density.ambient_dim - 1
    rho = np.array(rho0, dtype=float)
    if rho.ndim != 1 or rho.size < 5:
        raise ValueError("rho0 must be a 1-d array with at least 5 nodes")
    rho[0], rho[-1] = boundary_radii
    if np.any(rho <= 0):
        raise PositivityError("initial radii must be positive")
    phi_bounds = tuple(phi_bounds)

    def res(u):
        if np.any(u <= 0):
            raise PositivityError("radial iterate left rho > 0")
        r = rho.copy()
        r[1:-1] = u
        g = _axisym_graph(n, theta_bounds, r, phi_bounds, orientation)
        H = radial_residual(g, density, lam)
        if n == 2:
            H = H[:, AXISYM_PHI_NODES // 2]
        return H[1:-1]

    u, report = _damped_newton(
        res, rho[1:-1], (rho.size - 2,), lam, tol, max_iter, backtrack, armijo,
        (DomainError, PositivityError),
    )
    rho[1:-1] = u
    if n == 1:
        out = RadialGraph(1, [theta_bounds], rho, orientation)
    else:
        m = rho.size if phi_nodes is None else phi_nodes
        out = RadialGraph(
            2, [theta_bounds, phi_bounds], np.repeat(rho[:, None], m, axis=1), orientation
        )
    if not report.converged and raise_on_failure:
        raise NonConvergence(
            f"radial Newton stopped at residual {report.final_residual:.3e}", report
        )
    return out, report
