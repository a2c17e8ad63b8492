"""Discrete second variation and the strong stability test.

The quadratic form Q_phi[u] = int |grad u|^2 - q u^2 dA_phi with potential
q = |A|^2 - Hess phi(N, N) is discretized with piecewise-linear elements on
the embedded mesh:

* K -- stiffness with exact per-simplex tangential gradients and the
  simplex-mean weight e^phi,
* M -- vertex-lumped weighted mass,
* P -- vertex-lumped potential, P = diag(q) M,

all restricted to interior vertices (Dirichlet test functions).  The smallest
generalized eigenvalue of (K - P) x = mu M x decides strong stability.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from . import density as dens
from .errors import FactorizationError, MeshError, SignError
from .surface import chart_gradient

EIG_TOL = 1e-9
EIG_MAX_ITER = 500


@dataclass(eq=False)
class OperatorAssembly:
    K: sparse.csr_matrix
    P: sparse.csr_matrix
    M: sparse.csr_matrix
    interior: np.ndarray  # mesh vertex index of each unknown
    mesh: object = None
    field: object = None

    @property
    def size(self):
        return self.K.shape[0]

    @property
    def A(self):
        return (self.K - self.P).tocsr()

    def lumped_mass(self):
        return self.M.diagonal()


def p1_gradients(vertices, simplices):
    """Tangential gradients of the barycentric hat functions, (S, n+1, d)."""
    P = vertices[simplices]
    E = P[:, 1:] - P[:, :1]  # (S, n, d)
    G = np.einsum("sad,sbd->sab", E, E)
    Ginv = np.linalg.inv(G)
    grads = np.einsum("sab,sbd->sad", Ginv, E)
    g0 = -grads.sum(axis=1, keepdims=True)
    return np.concatenate([g0, grads], axis=1)


def assemble(mesh, field, density=None):
    density = field.density if density is None else density
    V, T = mesh.vertices, mesh.simplices
    meas = mesh.measures()
    if np.any(meas <= 1e-14):
        raise MeshError("degenerate simplex in assembly")
    nv = V.shape[0]
    k = T.shape[1]
    w = field.weight.ravel()
    N = field.N.reshape(-1, V.shape[1])
    q = (field.A2 - dens.hessian_NN(density, field.x, field.N)).ravel()
    if N.shape[0] != nv:
        raise ValueError("mesh and field come from different graphs")

    grads = p1_gradients(V, T)
    local = np.einsum("sad,sbd->sab", grads, grads)
    local *= (meas * w[T].mean(axis=1))[:, None, None]
    rows = np.repeat(T, k, axis=1).ravel()
    cols = np.tile(T, (1, k)).ravel()
    K = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    lump = np.zeros(nv)
    np.add.at(lump, T.ravel(), np.repeat(meas / k, k))
    lump *= w

    inner = mesh.interior_vertices
    K = K[inner][:, inner]
    K = (0.5 * (K + K.T)).tocsr()
    m = lump[inner]
    M = sparse.diags(m).tocsr()
    P = sparse.diags(q[inner] * m).tocsr()
    return OperatorAssembly(K, P, M, inner, mesh, field)


def quadratic_form(assembly, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (assembly.size,):
        raise ValueError(f"expected a vector of length {assembly.size}")
    return float(u @ (assembly.A @ u))


@dataclass
class SpectrumReport:
    mu_min: float
    eigenvector: np.ndarray
    iterations: int
    residual: float
    verdict: str
    tol: float = 0.0
    shift: float = 0.0

    def to_dict(self):
        return dict(
            mu_min=self.mu_min,
            iterations=self.iterations,
            residual=self.residual,
            verdict=self.verdict,
            tol=self.tol,
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def eigenvector_csv(self, index=None):
        index = np.arange(self.eigenvector.size) if index is None else index
        lines = ["node,value"]
        lines += [f"{int(i)},{v:.17g}" for i, v in zip(index, self.eigenvector)]
        return "\n".join(lines) + "\n"


def gershgorin_lower(assembly):
    """Gershgorin lower bound of M^{-1/2} (K - P) M^{-1/2} with lumped M."""
    s = 1.0 / np.sqrt(assembly.lumped_mass())
    B = sparse.diags(s) @ assembly.A @ sparse.diags(s)
    B = B.tocsr()
    diag = B.diagonal()
    off = np.asarray(abs(B).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - off))


def default_tol(assembly):
    """1e-6 times the largest Rayleigh quotient of a coordinate vector."""
    A = assembly.A
    return 1e-6 * float(np.max(A.diagonal() / assembly.lumped_mass()))


def classify(mu, tol, converged=True):
    if not converged or abs(mu) <= tol:
        return "Inconclusive"
    return "Stable" if mu > 0 else "Unstable"


def min_eigenvalue(assembly, tol=EIG_TOL, max_iter=EIG_MAX_ITER, verdict_tol=None):
    """Smallest generalized eigenvalue by shift-and-invert iteration.

    The shift sits below a Gershgorin bound of the spectrum.  Lanczos (ARPACK)
    on the shifted inverse supplies the eigenvector; plain inverse iteration
    with the same factorization then polishes it until the residual
    |A x - mu M x| / |M x| is at most ``tol``.  ``iterations`` counts solves.
    """
    A = assembly.A.tocsc()
    M = assembly.M.tocsc()
    lower = gershgorin_lower(assembly)
    lu = None
    for gap in (1.0, 2.0):
        sigma = lower - gap
        try:
            lu = splu((A - sigma * M).tocsc())
            break
        except RuntimeError:
            continue
    if lu is None:
        raise FactorizationError("shifted operator is singular")

    x = np.ones(assembly.size)
    it = 0
    if assembly.size > 2:
        # Lanczos on the same shifted inverse; sigma lies below the spectrum, so
        # the dominant Ritz pair is the smallest eigenpair
        def apply_inverse(b):
            nonlocal it
            it += 1
            return lu.solve(np.asarray(b, dtype=float).ravel())

        op = LinearOperator(A.shape, matvec=apply_inverse, dtype=float)
        try:
            _, vecs = eigsh(A, k=1, M=M, sigma=sigma, which="LM", OPinv=op, v0=x,
                            tol=tol, maxiter=max_iter)
            x = vecs[:, 0]
        except ArpackNoConvergence as exc:
            if exc.eigenvectors.shape[1]:
                x = exc.eigenvectors[:, 0]
    x = x / np.sqrt(x @ (M @ x))
    mu, res = np.nan, np.inf
    # plain inverse iteration polishes the pair and certifies the residual
    while True:
        Ax = A @ x
        Mx = M @ x
        mu = float(x @ Ax)
        res = float(np.linalg.norm(Ax - mu * Mx) / np.linalg.norm(Mx))
        if res <= tol or it >= max_iter:
            break
        it += 1
        y = lu.solve(Mx)
        x = y / np.sqrt(y @ (M @ y))
    converged = res <= tol
    # sign convention for the witness: positive mass-weighted mean
    if x @ (M @ np.ones_like(x)) < 0:
        x = -x
    vt = default_tol(assembly) if verdict_tol is None else verdict_tol
    return SpectrumReport(mu, x, it, res, classify(mu, vt, converged), vt, sigma)


def check_strong_stability(assembly, tol=None):
    return min_eigenvalue(assembly, verdict_tol=tol).verdict


def dense_eigenvalues(assembly):
    """Full generalized spectrum by a dense solver (small instances only)."""
    return scipy.linalg.eigh(assembly.A.toarray(), assembly.M.toarray(), eigvals_only=True)


# ---------------------------------------------------------------- decompositions

DECOMPOSITION_MODES = (
    "vertical_graph_radial_density",
    "radial_graph_radial_density",
    "vertical_graph_vertical_density",
    "radial_graph_vertical_density",
)


def decomposition_check(mesh, field, density, v, mode, lam=None, assembly=None):
    """Compare Q_phi[v g] with the test-function decomposition for ``mode``.

    g is N_{n+1} for the vertical-graph modes and h for the radial-graph
    modes.  The right-hand side is computed from nodal values of v, g and the
    chart gradient of v, integrated with the nodal dA_phi weights.
    Returns (lhs, rhs, |lhs - rhs|).
    """
    if mode not in DECOMPOSITION_MODES:
        raise ValueError(f"unknown decomposition mode {mode!r}")
    radial_graph = mode.startswith("radial_graph")
    radial_density = mode.endswith("radial_density")
    if not density.is_constant:
        want = "radial" if radial_density else "vertical"
        if density.dependence != want:
            raise ValueError(f"mode {mode} needs a {want} density")
    g = field.h if radial_graph else field.N[..., -1]
    if np.any(np.abs(g) <= 1e-14):
        raise SignError(f"{'h' if radial_graph else 'N_{n+1}'} vanishes on the field")
    assembly = assemble(mesh, field, density) if assembly is None else assembly

    vfull = np.zeros(field.graph.shape)
    vfull.reshape(-1)[assembly.interior] = np.asarray(v, dtype=float)
    u = (vfull * g).reshape(-1)[assembly.interior]
    lhs = quadratic_form(assembly, u)

    dv = chart_gradient(field, vfull)
    grad2 = np.einsum("...k,...kl,...l->...", dv, field.metric_inv, dv)
    _, d1, d2 = density.derivatives(field.x)
    h = field.h
    Nv = field.N[..., -1]
    if lam is None:
        lam = float(np.mean(field.H_phi[field.graph.interior_mask]))
    v2 = vfull**2
    if mode == "vertical_graph_radial_density":
        extra = 2.0 * v2 * Nv**2 * (d1 + 2.0 * d2 * h**2)
    elif mode == "radial_graph_radial_density":
        extra = 4.0 * h**2 * v2 * (d1 + d2 * h**2) + lam * h * v2
    elif mode == "vertical_graph_vertical_density":
        extra = d2 * v2 * Nv**2
    else:
        t = field.x[..., -1]
        extra = lam * h * v2 + h * v2 * Nv * (d1 + t * d2)
    rhs = field.integrate(g**2 * grad2 + extra)
    return lhs, rhs, abs(lhs - rhs)
