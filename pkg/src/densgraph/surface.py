"""Discrete vertical and radial graphs, their geometry, meshes and integrals.

Conventions
-----------
Mean curvature is normalized by ``Delta x = nH N``.  Vertical graphs carry
the upward normal ``(-Df, 1)/sqrt(1 + |Df|^2)``, so the upper hemisphere of
radius R has nH = -n/R.  Radial graphs carry the normal with positive support
function h = <N, x> unless ``orientation=-1`` is requested.

Nodal arrays are laid out on the chart grid: shape ``(m,)`` for curves and
``(m1, m2)`` for surfaces, vectors on a trailing axis.  Mesh vertices are the
grid nodes in C order.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import density as dens
from .errors import DomainError, GridError, MeshError, PoleError, SignError
from .quadrature import adaptive_simpson, trapezoid_weights

MIN_STENCIL_NODES = 5


def _as_bounds(n, bounds):
    bounds = tuple(tuple(float(v) for v in b) for b in np.reshape(bounds, (n, 2)))
    for lo, hi in bounds:
        if not hi > lo:
            raise GridError(f"empty chart interval [{lo}, {hi}]")
    return bounds


@dataclass(frozen=True, eq=False)
class _ChartGraph:
    n: int
    bounds: tuple
    values: np.ndarray

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("intrinsic dimension must be 1 or 2")
        object.__setattr__(self, "bounds", _as_bounds(self.n, self.bounds))
        vals = np.array(self.values, dtype=float)
        if vals.ndim != self.n:
            raise GridError(f"expected a {self.n}-d array of nodal values")
        if min(vals.shape) < 2:
            raise GridError("every chart axis needs at least 2 nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("nodal values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape

    @property
    def spacing(self):
        return tuple((hi - lo) / (m - 1) for (lo, hi), m in zip(self.bounds, self.shape))

    @property
    def axes(self):
        return tuple(np.linspace(lo, hi, m) for (lo, hi), m in zip(self.bounds, self.shape))

    def chart_points(self):
        """Chart coordinates of the nodes, shape grid + (n,)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.n):
            sl = [slice(None)] * self.n
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
        return mask

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    def margin_mask(self, k):
        """Nodes at index distance >= k from every chart edge."""
        mask = np.zeros(self.shape, dtype=bool)
        sl = tuple(slice(k, m - k) for m in self.shape)
        mask[sl] = True
        return mask

    def quad_weights(self):
        """Product trapezoid weights in chart coordinates."""
        ws = [trapezoid_weights(m, h) for m, h in zip(self.shape, self.spacing)]
        if self.n == 1:
            return ws[0]
        return np.outer(ws[0], ws[1])

    def require_stencil(self):
        if min(self.shape) < MIN_STENCIL_NODES:
            raise GridError(
                f"finite-difference geometry needs >= {MIN_STENCIL_NODES} nodes per axis"
            )


class VerticalGraph(_ChartGraph):
    """Graph x_{n+1} = f(q) sampled on a uniform grid over an interval or rectangle."""

    @property
    def heights(self):
        return self.values

    def with_heights(self, f):
        return VerticalGraph(self.n, self.bounds, f)

    def embedding(self):
        q = self.chart_points()
        return np.concatenate([q, self.values[..., None]], axis=-1)

    def __repr__(self):
        return f"VerticalGraph(n={self.n}, bounds={self.bounds}, shape={self.shape})"


class RadialGraph(_ChartGraph):
    """Graph x = rho(nu) nu over a chart of the unit sphere.

    n = 1: polar angle interval, nu = (cos t, sin t).
    n = 2: (theta, varphi) with theta the polar angle, poles excluded.
    """

    def __init__(self, n, bounds, radii, orientation=1):
        super().__init__(n, bounds, radii)
        object.__setattr__(self, "orientation", 1 if orientation >= 0 else -1)
        if np.any(self.values <= 0):
            raise DomainError("radial graph radii must be positive")
        if n == 2:
            (t0, t1), (p0, p1) = self.bounds
            if t0 <= 0 or t1 >= np.pi:
                raise PoleError("chart must exclude the poles theta = 0, pi")
            if p1 - p0 > 2 * np.pi:
                raise GridError("varphi interval longer than 2 pi")

    @property
    def radii(self):
        return self.values

    def with_radii(self, rho):
        return RadialGraph(self.n, self.bounds, rho, self.orientation)

    def flipped(self):
        return RadialGraph(self.n, self.bounds, self.values, -self.orientation)

    def sphere_frame(self):
        """nu and its analytic chart derivatives at the nodes."""
        c = self.chart_points()
        if self.n == 1:
            t = c[..., 0]
            nu = np.stack([np.cos(t), np.sin(t)], axis=-1)
            dnu = np.stack([-np.sin(t), np.cos(t)], axis=-1)[..., None, :]
            ddnu = (-nu)[..., None, None, :]
            return nu, dnu, ddnu
        th, ph = c[..., 0], c[..., 1]
        st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        z = np.zeros_like(th)
        nu = np.stack([st * cp, st * sp, ct], axis=-1)
        nu_t = np.stack([ct * cp, ct * sp, -st], axis=-1)
        nu_p = np.stack([-st * sp, st * cp, z], axis=-1)
        nu_tt = -nu
        nu_tp = np.stack([-ct * sp, ct * cp, z], axis=-1)
        nu_pp = np.stack([-st * cp, -st * sp, z], axis=-1)
        dnu = np.stack([nu_t, nu_p], axis=-2)
        ddnu = np.stack(
            [np.stack([nu_tt, nu_tp], axis=-2), np.stack([nu_tp, nu_pp], axis=-2)], axis=-3
        )
        return nu, dnu, ddnu

    def sphere_jacobian(self):
        """Area density of the unit sphere in chart coordinates."""
        if self.n == 1:
            return np.ones(self.shape)
        return np.sin(self.chart_points()[..., 0])

    def embedding(self):
        nu, _, _ = self.sphere_frame()
        return self.values[..., None] * nu

    def __repr__(self):
        return (
            f"RadialGraph(n={self.n}, bounds={self.bounds}, shape={self.shape}, "
            f"orientation={self.orientation})"
        )


# ---------------------------------------------------------------- FD stencils


def d1(F, h, axis):
    """Second-order first derivative (one-sided at the ends)."""
    return np.gradient(F, h, axis=axis, edge_order=2)


def d2(F, h, axis):
    """Second-order second derivative (one-sided four-point at the ends)."""
    F = np.moveaxis(np.asarray(F, dtype=float), axis, 0)
    out = np.empty_like(F)
    out[1:-1] = (F[2:] - 2.0 * F[1:-1] + F[:-2]) / h**2
    out[0] = (2.0 * F[0] - 5.0 * F[1] + 4.0 * F[2] - F[3]) / h**2
    out[-1] = (2.0 * F[-1] - 5.0 * F[-2] + 4.0 * F[-3] - F[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def chart_derivatives(F, spacing):
    """First and second chart derivatives of a scalar nodal function.

    Returns arrays shaped grid + (n,) and grid + (n, n).
    """
    n = len(spacing)
    first = np.stack([d1(F, spacing[k], k) for k in range(n)], axis=-1)
    second = np.empty(F.shape + (n, n))
    for k in range(n):
        second[..., k, k] = d2(F, spacing[k], k)
    if n == 2:
        mixed = d1(first[..., 0], spacing[1], 1)
        second[..., 0, 1] = second[..., 1, 0] = mixed
    return first, second


# ---------------------------------------------------------------- geometry


@dataclass(eq=False)
class GeometryField:
    graph: object
    density: object
    x: np.ndarray
    N: np.ndarray
    nH: np.ndarray
    A2: np.ndarray
    h: np.ndarray
    g_vert: np.ndarray
    area_element: np.ndarray
    phi: np.ndarray
    weight: np.ndarray
    tangents: np.ndarray
    metric: np.ndarray
    metric_inv: np.ndarray
    extra: dict = dc_field(default_factory=dict)

    @property
    def n(self):
        return self.graph.n

    @property
    def kind(self):
        return "vertical" if isinstance(self.graph, VerticalGraph) else "radial"

    @property
    def spacing(self):
        return self.graph.spacing

    @property
    def H_phi(self):
        return dens.weighted_mean_curvature(self.density, self.x, self.N, self.nH)

    @property
    def hess_NN(self):
        return dens.hessian_NN(self.density, self.x, self.N)

    @property
    def potential(self):
        """Stability potential |A|^2 - Hess phi(N, N)."""
        return self.A2 - self.hess_NN

    def dA_phi(self):
        """Nodal quadrature weights for integrals against dA_phi."""
        return self.graph.quad_weights() * self.area_element * self.weight

    def integrate(self, F):
        return float(np.sum(self.dA_phi() * F))


def _geometry_from_embedding(graph, density, x, xi, xij, orient):
    n = graph.n
    gmat = np.einsum("...ia,...ja->...ij", xi, xi)
    if n == 1:
        T = xi[..., 0, :]
        N = np.stack([-T[..., 1], T[..., 0]], axis=-1)
        ginv = 1.0 / gmat
        detg = gmat[..., 0, 0]
    else:
        N = np.cross(xi[..., 0, :], xi[..., 1, :])
        detg = gmat[..., 0, 0] * gmat[..., 1, 1] - gmat[..., 0, 1] ** 2
        ginv = np.empty_like(gmat)
        ginv[..., 0, 0] = gmat[..., 1, 1] / detg
        ginv[..., 1, 1] = gmat[..., 0, 0] / detg
        ginv[..., 0, 1] = ginv[..., 1, 0] = -gmat[..., 0, 1] / detg
    N = N / np.linalg.norm(N, axis=-1, keepdims=True)
    N = N * orient[..., None] if np.ndim(orient) else N * orient
    b = np.einsum("...ija,...a->...ij", xij, N)
    S = ginv @ b
    nH = np.trace(S, axis1=-2, axis2=-1)
    A2 = np.einsum("...ij,...ji->...", S, S)
    phi = dens.eval_phi(density, x)
    with np.errstate(over="ignore"):  # line-search trial steps may leave the region
        weight = np.exp(phi)
    return dict(
        x=x,
        N=N,
        nH=nH,
        A2=A2,
        h=np.sum(N * x, axis=-1),
        g_vert=N[..., -1],
        area_element=np.sqrt(detg),
        phi=phi,
        weight=weight,
        tangents=xi,
        metric=gmat,
        metric_inv=ginv,
    )


def _check_density_dim(graph, density):
    if density.ambient_dim != graph.n + 1:
        raise ValueError(
            f"density lives in R^{density.ambient_dim}, graph in R^{graph.n + 1}"
        )


def geometry_vertical(graph, density):
    """Nodal geometry of a vertical graph from second-order finite differences."""
    graph.require_stencil()
    _check_density_dim(graph, density)
    n = graph.n
    Df, D2f = chart_derivatives(graph.heights, graph.spacing)
    x = graph.embedding()
    xi = np.zeros(graph.shape + (n, n + 1))
    for k in range(n):
        xi[..., k, k] = 1.0
        xi[..., k, n] = Df[..., k]
    xij = np.zeros(graph.shape + (n, n, n + 1))
    xij[..., n] = D2f
    parts = _geometry_from_embedding(graph, density, x, xi, xij, 1.0)
    field = GeometryField(graph=graph, density=density, **parts)
    field.extra["Df"] = Df
    field.extra["D2f"] = D2f
    return field


def geometry_radial(graph, density):
    """Nodal geometry of a radial graph.

    Radii are differentiated by finite differences; the sphere chart itself
    (nu and its derivatives) is evaluated analytically, so a constant radius
    reproduces a round sphere to rounding error.
    """
    graph.require_stencil()
    _check_density_dim(graph, density)
    rho = graph.radii
    drho, d2rho = chart_derivatives(rho, graph.spacing)
    nu, dnu, ddnu = graph.sphere_frame()
    x = rho[..., None] * nu
    xi = drho[..., :, None] * nu[..., None, :] + rho[..., None, None] * dnu
    xij = (
        d2rho[..., :, :, None] * nu[..., None, None, :]
        + drho[..., :, None, None] * dnu[..., None, :, :]
        + drho[..., None, :, None] * dnu[..., :, None, :]
        + rho[..., None, None, None] * ddnu
    )
    parts = _geometry_from_embedding(graph, density, x, xi, xij, 1.0)
    h = parts["h"]
    if np.any(h == 0) or (np.any(h > 0) and np.any(h < 0)):
        raise SignError("support function changes sign: not a radial graph")
    flip = graph.orientation * (1.0 if h.flat[0] > 0 else -1.0)
    if flip < 0:
        for key in ("N", "nH", "h", "g_vert"):
            parts[key] = -parts[key]
    field = GeometryField(graph=graph, density=density, **parts)
    field.extra["drho"] = drho
    return field


def geometry(graph, density):
    if isinstance(graph, VerticalGraph):
        return geometry_vertical(graph, density)
    return geometry_radial(graph, density)


# ---------------------------------------------------------------- surface calculus


def chart_gradient(field, F):
    """Chart partial derivatives of a nodal function, shape grid + (n,)."""
    sp = field.spacing
    return np.stack([d1(F, sp[k], k) for k in range(field.n)], axis=-1)


def surface_gradient(field, F):
    """Tangential gradient of a nodal function as an ambient vector."""
    dF = chart_gradient(field, F)
    comp = np.einsum("...kl,...l->...k", field.metric_inv, dF)
    return np.einsum("...k,...ka->...a", comp, field.tangents)


def laplace_beltrami(field, F):
    """Surface Laplacian (1/sqrt g) d_k (sqrt g g^{kl} d_l F) by nested FD."""
    sp = field.spacing
    dF = chart_gradient(field, F)
    flux = field.area_element[..., None] * np.einsum(
        "...kl,...l->...k", field.metric_inv, dF
    )
    div = sum(d1(flux[..., k], sp[k], k) for k in range(field.n))
    return div / field.area_element


def phi_laplacian(field, F):
    """Drift Laplacian Delta F + <grad phi, grad F>."""
    gphi = dens.grad_phi(field.density, field.x)
    return laplace_beltrami(field, F) + np.sum(gphi * surface_gradient(field, F), axis=-1)


def jacobi_operator(field, F):
    """Weighted Jacobi operator L_phi[F] = Delta_phi F + (|A|^2 - Hess phi(N,N)) F."""
    return phi_laplacian(field, F) + field.potential * F


def orthonormal_frame(field, first=0):
    """Gram-Schmidt frame from the chart tangents, starting from tangent ``first``."""
    t = field.tangents
    if field.n == 1:
        e = t[..., 0, :] / np.linalg.norm(t[..., 0, :], axis=-1, keepdims=True)
        return e[..., None, :]
    a = t[..., first, :]
    b = t[..., 1 - first, :]
    e1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b - np.sum(b * e1, axis=-1, keepdims=True) * e1
    e2 = b / np.linalg.norm(b, axis=-1, keepdims=True)
    return np.stack([e1, e2], axis=-2)


# ---------------------------------------------------------------- meshes


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray
    simplices: np.ndarray
    boundary: np.ndarray
    interior_index: np.ndarray  # -1 on boundary vertices

    @property
    def n(self):
        return self.simplices.shape[1] - 1

    @property
    def n_interior(self):
        return int(np.sum(~self.boundary))

    @property
    def interior_vertices(self):
        return np.flatnonzero(~self.boundary)

    def measures(self):
        return simplex_measures(self.vertices, self.simplices)


def simplex_measures(vertices, simplices):
    P = vertices[simplices]
    e1 = P[:, 1] - P[:, 0]
    if simplices.shape[1] == 2:
        return np.linalg.norm(e1, axis=-1)
    e2 = P[:, 2] - P[:, 0]
    g11 = np.sum(e1 * e1, axis=-1)
    g22 = np.sum(e2 * e2, axis=-1)
    g12 = np.sum(e1 * e2, axis=-1)
    return 0.5 * np.sqrt(np.maximum(g11 * g22 - g12**2, 0.0))


def grid_simplices(shape):
    """Segments (1-d) or triangles split along the (i,j)-(i+1,j+1) diagonal."""
    if len(shape) == 1:
        i = np.arange(shape[0] - 1)
        return np.stack([i, i + 1], axis=1)
    m1, m2 = shape
    idx = np.arange(m1 * m2).reshape(shape)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[1:, :-1].ravel()
    v01 = idx[:-1, 1:].ravel()
    v11 = idx[1:, 1:].ravel()
    t1 = np.stack([v00, v10, v11], axis=1)
    t2 = np.stack([v00, v11, v01], axis=1)
    return np.stack([t1, t2], axis=1).reshape(-1, 3)


def triangulate(graph, min_measure=1e-14):
    if min(graph.shape) < 3:
        raise GridError("triangulation needs at least 3 nodes per axis")
    verts = graph.embedding().reshape(-1, graph.n + 1)
    simp = grid_simplices(graph.shape)
    bnd = graph.boundary_mask.ravel()
    imap = np.full(bnd.size, -1, dtype=int)
    imap[~bnd] = np.arange(int(np.sum(~bnd)))
    if np.any(simplex_measures(verts, simp) <= min_measure):
        raise MeshError("degenerate simplex in triangulation")
    return TriMesh(verts, simp, bnd, imap)


def weighted_area(mesh, field):
    """Sum of simplex measures times the vertex-mean of e^phi."""
    w = field.weight.ravel()
    if w.size != mesh.vertices.shape[0]:
        raise ValueError("mesh and field come from different graphs")
    return float(np.sum(mesh.measures() * w[mesh.simplices].mean(axis=1)))


def graph_weighted_area(graph, density):
    """Weighted area of a graph without finite-difference geometry."""
    mesh = triangulate(graph)
    w = np.exp(dens.eval_phi(density, mesh.vertices))
    return float(np.sum(mesh.measures() * w[mesh.simplices].mean(axis=1)))


# ---------------------------------------------------------------- volumes


def _same_chart(a, b):
    if a.n != b.n or a.shape != b.shape or not np.allclose(a.bounds, b.bounds, rtol=0, atol=0):
        raise ValueError("graphs must share domain and grid")


def weighted_volume_between(base, other, density, tol=1e-12):
    """Signed weighted volume of the slab between two vertical graphs.

    Inner integral per column by adaptive Simpson, outer integral by the
    product trapezoid rule on the common grid.
    """
    _same_chart(base, other)
    _check_density_dim(base, density)
    q = base.chart_points().reshape(-1, base.n)
    f0 = base.heights.ravel()
    f1 = other.heights.ravel()

    def integrand(cols, t):
        pts = np.concatenate([q[cols], t[:, None]], axis=1)
        return np.exp(dens.eval_phi(density, pts))

    col = adaptive_simpson(integrand, f0, f1, tol=tol)
    return float(np.sum(base.quad_weights().ravel() * col))


def radial_volume_between(base, other, density, tol=1e-12):
    """Signed weighted volume between two radial graphs over the same chart."""
    _same_chart(base, other)
    _check_density_dim(base, density)
    nu, _, _ = base.sphere_frame()
    nu = nu.reshape(-1, base.n + 1)
    r0 = base.radii.ravel()
    r1 = other.radii.ravel()
    n = base.n

    def integrand(cols, s):
        pts = s[:, None] * nu[cols]
        return np.exp(dens.eval_phi(density, pts)) * s**n

    col = adaptive_simpson(integrand, r0, r1, tol=tol)
    w = (base.quad_weights() * base.sphere_jacobian()).ravel()
    return float(np.sum(w * col))


# ---------------------------------------------------------------- export


def format_float(v):
    return f"{float(v):.17g}"


def mesh_text(mesh):
    lines = [f"{mesh.vertices.shape[0]} {mesh.simplices.shape[0]}"]
    lines += [" ".join(format_float(c) for c in v) for v in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in s) for s in mesh.simplices]
    return "\n".join(lines) + "\n"


def parse_mesh_text(text):
    """Inverse of :func:`mesh_text`; returns (vertices, simplices)."""
    rows = [ln.split() for ln in text.strip().splitlines()]
    nv, nf = int(rows[0][0]), int(rows[0][1])
    verts = np.array([[float(c) for c in r] for r in rows[1 : 1 + nv]])
    simp = np.array([[int(c) for c in r] for r in rows[1 + nv : 1 + nv + nf]], dtype=int)
    if verts.shape[0] != nv or simp.shape[0] != nf:
        raise ValueError("truncated mesh file")
    return verts, simp


def vertical_graph_from_vertices(verts):
    """Rebuild a VerticalGraph from mesh vertices laid out on a C-order grid."""
    d = verts.shape[1]
    n = d - 1
    axes = [np.unique(verts[:, k]) for k in range(n)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != verts.shape[0]:
        raise GridError("vertices do not form a tensor grid")
    heights = verts[:, -1].reshape(shape)
    bounds = [(a[0], a[-1]) for a in axes]
    g = VerticalGraph(n, bounds, heights)
    if not np.allclose(g.chart_points().reshape(-1, n), verts[:, :n], atol=1e-12):
        raise GridError("vertices are not in grid order")
    return g


def field_csv(field):
    d = field.n + 1
    head = [f"x{k + 1}" for k in range(d)] + [f"N{k + 1}" for k in range(d)]
    head += ["nH", "A2", "h", "phi"]
    cols = [field.x.reshape(-1, d), field.N.reshape(-1, d)]
    cols += [a.reshape(-1, 1) for a in (field.nH, field.A2, field.h, field.phi)]
    data = np.concatenate(cols, axis=1)
    lines = [",".join(head)]
    lines += [",".join(format_float(v) for v in row) for row in data]
    return "\n".join(lines) + "\n"
