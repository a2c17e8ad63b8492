"""Calibration of weighted vertical graphs and volume-matched competitors.

The calibration field extends e^phi N off the base graph by vertical
translation of the unit normal.  Its ambient divergence has a closed form in
terms of the density and the constant lambda; the tests compare that form
with a finite-difference divergence.  Competitors are graphs with the same
boundary heights whose slab to the base carries zero weighted volume; the
minimizer inequality is then checked as a difference of weighted areas.

The base normal N(q) comes from a quintic spline of the nodal heights, so
the field is smooth enough to differentiate; the spline is only as
stationary as the nodal heights are accurate.
"""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import RectBivariateSpline, make_interp_spline
from scipy.optimize import bisect

from . import density as dens
from .errors import DomainError, NoRootError, StationarityError
from .identities import IdentityReport
from .rng import SplitMix64
from .surface import VerticalGraph, graph_weighted_area, weighted_volume_between

VOLUME_TOL = 1e-12
AREA_TOL = 1e-8
STATIONARITY_TOL = 1e-8


# ---------------------------------------------------------------- smooth base


class SmoothBase:
    """Spline interpolant of a vertical graph with analytic derivatives."""

    def __init__(self, graph, degree=5):
        if not isinstance(graph, VerticalGraph):
            raise TypeError("calibration needs a vertical graph")
        self.graph = graph
        self.n = graph.n
        ax = graph.axes
        if min(graph.shape) <= degree:
            raise ValueError(f"need more than {degree} nodes per axis for the spline")
        if self.n == 1:
            s = make_interp_spline(ax[0], graph.heights, k=degree)
            self._d = [s, s.derivative(1), s.derivative(2)]
        else:
            self._s = RectBivariateSpline(ax[0], ax[1], graph.heights, kx=degree, ky=degree, s=0)

    @classmethod
    def wrap(cls, base):
        return base if isinstance(base, cls) else cls(base)

    def contains(self, q, atol=1e-12):
        q = np.asarray(q, dtype=float)
        ok = np.ones(q.shape[:-1], dtype=bool)
        for k, (a, b) in enumerate(self.graph.bounds):
            ok &= (q[..., k] >= a - atol) & (q[..., k] <= b + atol)
        return ok

    def _check(self, q):
        if not np.all(self.contains(q)):
            raise DomainError("horizontal projection lies outside the base domain")

    def height(self, q):
        q = np.asarray(q, dtype=float)
        self._check(q)
        if self.n == 1:
            return self._d[0](q[..., 0])
        return self._s.ev(q[..., 0], q[..., 1])

    def slope(self, q):
        q = np.asarray(q, dtype=float)
        self._check(q)
        if self.n == 1:
            return self._d[1](q[..., 0])[..., None]
        return np.stack(
            [self._s.ev(q[..., 0], q[..., 1], dx=1), self._s.ev(q[..., 0], q[..., 1], dy=1)], -1
        )

    def hessian(self, q):
        q = np.asarray(q, dtype=float)
        self._check(q)
        if self.n == 1:
            return self._d[2](q[..., 0])[..., None, None]
        x, y = q[..., 0], q[..., 1]
        fxx = self._s.ev(x, y, dx=2)
        fxy = self._s.ev(x, y, dx=1, dy=1)
        fyy = self._s.ev(x, y, dy=2)
        return np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)

    def normal(self, q):
        Df = self.slope(q)
        W = np.sqrt(1.0 + np.sum(Df**2, axis=-1))
        return np.concatenate([-Df, np.ones(Df.shape[:-1] + (1,))], axis=-1) / W[..., None]

    def mean_curvature(self, q):
        """nH = div(Df / W) with the upward normal."""
        Df = self.slope(q)
        D2 = self.hessian(q)
        W2 = 1.0 + np.sum(Df**2, axis=-1)
        tr = np.trace(D2, axis1=-2, axis2=-1)
        quad = np.einsum("...i,...ij,...j->...", Df, D2, Df)
        return (tr - quad / W2) / np.sqrt(W2)

    def point(self, q):
        q = np.asarray(q, dtype=float)
        return np.concatenate([q, self.height(q)[..., None]], axis=-1)

    def weighted_mean_curvature(self, q, density):
        return dens.weighted_mean_curvature(density, self.point(q), self.normal(q),
                                            self.mean_curvature(q))


def stationarity_gap(base, density, lam, margin=2):
    """sup |H_phi - lam| of the spline base at nodes ``margin`` away from the boundary."""
    base = SmoothBase.wrap(base)
    q = base.graph.chart_points()[base.graph.margin_mask(margin)]
    return float(np.max(np.abs(base.weighted_mean_curvature(q, density) - lam)))


# ---------------------------------------------------------------- calibration field


def calibration_field(x, base, density):
    """X(x) = e^{phi(x)} N(q) where q is the horizontal projection of x."""
    base = SmoothBase.wrap(base)
    x = np.asarray(x, dtype=float)
    q = x[..., : base.n]
    return np.exp(dens.eval_phi(density, x))[..., None] * base.normal(q)


def numeric_divergence(x, base, density, step):
    x = np.asarray(x, dtype=float)
    div = np.zeros(x.shape[:-1])
    for k in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[k] = step
        div += (calibration_field(x + e, base, density)[..., k]
                - calibration_field(x - e, base, density)[..., k]) / (2.0 * step)
    return div


def divergence_closed_form(x, base, density, lam):
    """e^phi (<grad phi(x) - grad phi(q, f(q)), N(q)> - lambda), specialized by density."""
    base = SmoothBase.wrap(base)
    x = np.asarray(x, dtype=float)
    q = x[..., : base.n]
    N = base.normal(q)
    W = 1.0 / N[..., -1]
    f = base.height(q)
    t = x[..., -1]
    e_phi = np.exp(dens.eval_phi(density, x))
    if density.is_constant:
        inner = np.zeros_like(t)
    elif density.dependence == "vertical":
        prof = density.profile
        inner = (prof.derivatives(t)[1] - prof.derivatives(f)[1]) / W
    elif density.kind in ("expander", "shrinker"):
        eps = 1.0 if density.kind == "expander" else -1.0
        inner = eps * (t - f) / (2.0 * W)
    else:
        g1 = dens.grad_phi(density, x)
        g0 = dens.grad_phi(density, base.point(q))
        inner = np.sum((g1 - g0) * N, axis=-1)
    return e_phi * (inner - lam)


def sample_points(base, density, count, seed=0, height=0.5, inset=0.05):
    """Random points over the base domain with |t - f(q)| <= height.

    The horizontal samples avoid an ``inset`` fraction of each side so the
    difference stencil stays inside the domain; vertical samples stay in the
    half-space for singular-minimal densities.
    """
    base = SmoothBase.wrap(base)
    rng = SplitMix64(seed)
    pts = []
    for _ in range(count):
        q = []
        for a, b in base.graph.bounds:
            w = inset * (b - a)
            q.append(rng.uniform(a + w, b - w))
        q = np.array(q)
        f = float(base.height(q))
        lo = f - height
        if density.kind == "singular_minimal":
            lo = max(lo, 0.5 * f)
        pts.append(np.append(q, rng.uniform(lo, f + height)))
    return np.array(pts).reshape(count, base.n + 1)


def domain_scale(base):
    return float(max(b - a for a, b in base.graph.bounds))


def divergence_check(base, density, lam, samples, step=None, require_stationary=True):
    base = SmoothBase.wrap(base)
    samples = np.asarray(samples, dtype=float).reshape(-1, base.n + 1)
    if require_stationary:
        gap = stationarity_gap(base, density, lam)
        if gap > STATIONARITY_TOL:
            raise StationarityError(f"base is not stationary: sup |H_phi - lambda| = {gap:.3e}")
    step = 1e-5 * domain_scale(base) if step is None else step
    if samples.shape[0] == 0:
        return IdentityReport("divergence", 0.0, details={"samples": 0})
    num = numeric_divergence(samples, base, density, step)
    closed = divergence_closed_form(samples, base, density, lam)
    gap = np.abs(num - closed)
    return IdentityReport("divergence", float(gap.max()),
                          details={"samples": int(samples.shape[0]), "step": step})


# ---------------------------------------------------------------- competitors


@dataclass
class Competitor:
    graph: VerticalGraph
    volume_gap: float
    amplitude: float
    trivial: bool = False


def _linear_volume_rate(base, psi, density):
    """d/ds of the slab volume at s = 0: sum_k w_k psi_k e^{phi(q_k, f_k)}."""
    g = base
    w = np.exp(dens.eval_phi(density, g.embedding()))
    return float(np.sum(g.quad_weights() * psi * w))


def make_competitor(base, psi, density, s_max=1.0, expansions=3, tol=VOLUME_TOL):
    """Scale ``psi`` so that base + s psi encloses zero weighted volume with base."""
    base = base.graph if isinstance(base, SmoothBase) else base
    psi = np.asarray(psi, dtype=float)
    if psi.shape != base.shape:
        raise ValueError("psi must live on the base grid")
    if np.any(psi[base.boundary_mask] != 0):
        raise ValueError("psi must vanish on the boundary")
    if not np.any(psi):
        raise ValueError("psi is identically zero")

    def graph_at(s):
        return base.with_heights(base.heights + s * psi)

    def volume(s):
        return weighted_volume_between(base, graph_at(s), density, tol=1e-14)

    def rate(s):
        # mean slab volume per unit amplitude; its limit at 0 is the linear rate
        return _linear_volume_rate(base, psi, density) if s == 0 else volume(s) / s

    v1 = volume(s_max)
    if abs(v1) <= tol:
        return Competitor(graph_at(s_max), v1, s_max)
    for _ in range(expansions + 1):
        lo, hi = rate(-s_max), rate(s_max)
        if lo * hi < 0:
            break
        s_max *= 2.0
    else:
        trivial = Competitor(base, 0.0, 0.0, trivial=True)
        raise NoRootError("no nonzero amplitude matches the weighted volume", trivial)

    s = bisect(rate, -s_max, s_max, xtol=1e-15, rtol=1e-15, maxiter=200)
    gap = volume(s)
    if s == 0.0:
        raise NoRootError("only the trivial amplitude matches", Competitor(base, 0.0, 0.0, True))
    return Competitor(graph_at(s), gap, s)


def minimizer_trial(base, competitor, density, tol=None):
    base = base.graph if isinstance(base, SmoothBase) else base
    g = competitor.graph if isinstance(competitor, Competitor) else competitor
    a0 = graph_weighted_area(base, density)
    delta = graph_weighted_area(g, density) - a0
    tol = AREA_TOL * a0 if tol is None else tol
    return delta, ("MinimizerConsistent" if delta >= -tol else "Violation")


# ---------------------------------------------------------------- random trials


def bump_on(graph, center, width):
    """cos^2 bump of half-width ``width`` (per axis), zero outside its support."""
    u = np.ones(graph.shape)
    for k, ax in enumerate(graph.axes):
        z = (ax - center[k]) / width[k]
        s = np.where(np.abs(z) < 1.0, np.cos(0.5 * np.pi * z) ** 2, 0.0)
        shape = [1] * graph.n
        shape[k] = -1
        u = u * s.reshape(shape)
    u[graph.boundary_mask] = 0.0
    return u


@dataclass
class TrialSpec:
    centers: tuple
    widths: tuple
    amplitude: float
    target: float  # predicted volume-matching amplitude


def draw_trial(rng, graph):
    """Two disjoint bumps: one in the lower and one in the upper half of axis 0."""
    (a, b) = graph.bounds[0]
    L = b - a
    centers, widths = [], []
    for half in (0, 1):
        w0 = rng.uniform(0.08, 0.2) * L
        lo = a + half * 0.5 * L + w0
        hi = a + (half + 1) * 0.5 * L - w0
        c = [rng.uniform(lo, hi)]
        w = [w0]
        for ak, bk in graph.bounds[1:]:
            Lk = bk - ak
            wk = rng.uniform(0.15, 0.3) * Lk
            c.append(rng.uniform(ak + wk, bk - wk))
            w.append(wk)
        centers.append(tuple(c))
        widths.append(tuple(w))
    amp = rng.uniform(0.05, 0.3)
    target = rng.uniform(0.3, 1.0) * (1.0 if rng.random() < 0.5 else -1.0)
    return TrialSpec(tuple(centers), tuple(widths), amp, target)


def trial_perturbation(base, density, spec):
    """psi = amp (B1 - (1 + delta) k B2) with k balancing the linear volume.

    The imbalance delta is chosen so that the second-order expansion of the
    slab volume vanishes near ``spec.target``; the bisection then finds the
    exact amplitude.  When the weight is constant along vertical lines the
    volume is linear in the amplitude, delta is zero and every amplitude
    matches.
    """
    b1 = bump_on(base, spec.centers[0], spec.widths[0])
    b2 = bump_on(base, spec.centers[1], spec.widths[1])
    r1 = _linear_volume_rate(base, b1, density)
    k = r1 / _linear_volume_rate(base, b2, density)
    scale = max(1.0, float(np.ptp(base.heights)))
    amp = spec.amplitude * scale
    psi0 = amp * (b1 - k * b2)
    x = base.embedding()
    dw = dens.grad_phi(density, x)[..., -1] * np.exp(dens.eval_phi(density, x))
    curv = 0.5 * float(np.sum(base.quad_weights() * psi0**2 * dw))
    delta = spec.target * curv / (amp * r1) if curv != 0.0 else 0.0
    return psi0 - amp * delta * k * b2


@dataclass
class TrialResult:
    trial: int
    amplitude: float
    deltaA: float
    verdict: str
    volume_gap: float = 0.0


@dataclass
class CalibrationReport:
    trials: list = dc_field(default_factory=list)
    area: float = 0.0
    tol: float = 0.0

    @property
    def all_consistent(self):
        return all(t.verdict == "MinimizerConsistent" for t in self.trials)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "amplitude", "deltaA", "verdict"])
        for t in self.trials:
            w.writerow([t.trial, f"{t.amplitude:.17g}", f"{t.deltaA:.17g}", t.verdict])
        return buf.getvalue()


def thread_count():
    try:
        return max(0, int(os.environ.get("DENSGRAPH_THREADS", "0")))
    except ValueError:
        return 0


def _run_one(base, density, i, spec, tol):
    psi = trial_perturbation(base, density, spec)
    try:
        comp = make_competitor(base, psi, density)
    except NoRootError:
        return TrialResult(i, 0.0, 0.0, "NoRoot")
    delta, verdict = minimizer_trial(base, comp, density, tol)
    return TrialResult(i, comp.amplitude, delta, verdict, comp.volume_gap)


def run_trials(base, density, trials, seed=0, tol=None, threads=None):
    """Volume-matched random competitors; the sequence depends only on ``seed``."""
    base = base.graph if isinstance(base, SmoothBase) else base
    rng = SplitMix64(seed)
    specs = [draw_trial(rng, base) for _ in range(trials)]
    area = graph_weighted_area(base, density)
    tol = AREA_TOL * area if tol is None else tol
    threads = thread_count() if threads is None else threads
    if threads > 0 and trials > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _run_one(base, density, a[0], a[1], tol),
                                    enumerate(specs)))
    else:
        results = [_run_one(base, density, i, s, tol) for i, s in enumerate(specs)]
    return CalibrationReport(results, area, tol)
