"""Densities e^phi on R^{n+1} and the pointwise quantities derived from phi.

A density is a scalar profile composed with one of three dependences:

* radial: phi = phi(r) with r = |x|^2,
* vertical: phi = phi(t) with t = x_{n+1},
* horizontal: phi depends on (x_1, ..., x_n) only; only the constant
  profile is supported here.

Every profile exposes exact (value, first, second) derivatives so no
numerical differentiation happens in this module.  All evaluation functions
accept arrays of points with the ambient coordinate on the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .errors import DomainError, ModeError

KINDS = (
    "constant",
    "expander",
    "shrinker",
    "translator",
    "singular_minimal",
    "radial_power",
    "custom_radial",
    "custom_vertical",
)
DEPENDENCES = ("radial", "vertical", "horizontal")
MODES = (
    "vertical_radial",
    "radial_radial",
    "vertical_coordinate",
    "translator_radial_diagnostic",
)

_NATURAL_DEPENDENCE = {
    "expander": "radial",
    "shrinker": "radial",
    "radial_power": "radial",
    "custom_radial": "radial",
    "translator": "vertical",
    "singular_minimal": "vertical",
    "custom_vertical": "vertical",
}


class ScalarProfile(Protocol):
    """Anything with value/d1/d2 at a scalar (or array) argument."""

    def value(self, s): ...

    def d1(self, s): ...

    def d2(self, s): ...


@dataclass(frozen=True)
class DensityProfile:
    kind: str
    alpha: float | None = None
    p: float | None = None
    custom: Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if self.kind == "singular_minimal" and self.alpha is None:
            raise ValueError("singular_minimal needs alpha")
        if self.kind == "radial_power" and self.p is None:
            raise ValueError("radial_power needs p")
        if self.kind.startswith("custom") and self.custom is None:
            raise ValueError(f"{self.kind} needs a scalar profile object")

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "singular_minimal" and np.any(s <= 0):
            raise DomainError("singular-minimal density requires x_{n+1} > 0")
        if self.kind == "radial_power":
            half = 0.5 * self.p
            smooth_at_origin = half >= 2 or half in (0.0, 1.0)
            if not smooth_at_origin and np.any(s <= 0):
                raise DomainError("|x|^p density requires x != 0 for this p")
        return s

    def derivatives(self, s):
        """Return (phi, phi', phi'') at the profile variable ``s``."""
        s = self._check(s)
        k = self.kind
        if k == "constant":
            z = np.zeros_like(s)
            return z, z.copy(), z.copy()
        if k in ("expander", "shrinker"):
            eps = 1.0 if k == "expander" else -1.0
            return eps * s / 4.0, np.full_like(s, eps / 4.0), np.zeros_like(s)
        if k == "translator":
            return s.copy(), np.ones_like(s), np.zeros_like(s)
        if k == "singular_minimal":
            a = self.alpha
            return a * np.log(s), a / s, -a / s**2
        if k == "radial_power":
            # phi = |x|^p = r^{p/2}
            half = 0.5 * self.p
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.where(s > 0, np.abs(s) ** half, 0.0 if half > 0 else 1.0)
                d1 = half * np.where(s > 0, np.abs(s) ** (half - 1), 0.0)
                d2 = half * (half - 1) * np.where(s > 0, np.abs(s) ** (half - 2), 0.0)
            if half == 1.0:
                d1 = np.ones_like(s)
            if half == 2.0:
                d2 = np.full_like(s, 2.0)
            return v, d1, d2
        c = self.custom
        return (
            np.asarray(c.value(s), dtype=float) + 0 * s,
            np.asarray(c.d1(s), dtype=float) + 0 * s,
            np.asarray(c.d2(s), dtype=float) + 0 * s,
        )


@dataclass(frozen=True)
class Density:
    profile: DensityProfile
    dependence: str
    ambient_dim: int

    def __post_init__(self):
        if self.dependence not in DEPENDENCES:
            raise ValueError(f"unknown dependence {self.dependence!r}")
        if self.ambient_dim not in (2, 3):
            raise ValueError("ambient dimension must be 2 or 3")
        natural = _NATURAL_DEPENDENCE.get(self.profile.kind)
        if natural is not None and natural != self.dependence:
            raise ValueError(
                f"{self.profile.kind} density is {natural}, not {self.dependence}"
            )
        if self.dependence == "horizontal" and self.profile.kind != "constant":
            raise ValueError("horizontal dependence supports only the constant profile")

    @property
    def kind(self):
        return self.profile.kind

    @property
    def is_constant(self):
        return self.profile.kind == "constant"

    def profile_variable(self, x):
        x = self._points(x)
        if self.dependence == "radial":
            return np.sum(x * x, axis=-1)
        if self.dependence == "vertical":
            return x[..., -1]
        return np.zeros(x.shape[:-1])

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient_dim:
            raise ValueError(
                f"points must have {self.ambient_dim} coordinates, got {x.shape[-1]}"
            )
        return x

    def derivatives(self, x):
        """(phi, phi', phi'') of the profile, evaluated at the points ``x``."""
        return self.profile.derivatives(self.profile_variable(x))

    def __repr__(self):
        extra = ""
        if self.profile.alpha is not None:
            extra = f", alpha={self.profile.alpha}"
        if self.profile.p is not None:
            extra = f", p={self.profile.p}"
        return f"Density({self.kind}, {self.dependence}, dim={self.ambient_dim}{extra})"


def make_density(kind, ambient_dim, dependence=None, alpha=None, p=None, custom=None):
    """Build a density, inferring the dependence from the kind when possible."""
    if dependence is None:
        dependence = _NATURAL_DEPENDENCE.get(kind, "vertical")
    prof = DensityProfile(kind, alpha=alpha, p=p, custom=custom)
    return Density(prof, dependence, ambient_dim)


def constant(ambient_dim, dependence="vertical"):
    return make_density("constant", ambient_dim, dependence)


def expander(ambient_dim):
    return make_density("expander", ambient_dim)


def shrinker(ambient_dim):
    return make_density("shrinker", ambient_dim)


def translator(ambient_dim):
    return make_density("translator", ambient_dim)


def singular_minimal(ambient_dim, alpha):
    return make_density("singular_minimal", ambient_dim, alpha=alpha)


def radial_power(ambient_dim, p):
    return make_density("radial_power", ambient_dim, p=p)


def eval_phi(density, x):
    phi, _, _ = density.derivatives(x)
    return phi


def grad_phi(density, x):
    """Ambient gradient: 2 phi'(r) x (radial), phi'(t) a_{n+1} (vertical)."""
    x = density._points(x)
    _, d1, _ = density.derivatives(x)
    if density.dependence == "radial":
        return 2.0 * d1[..., None] * x
    out = np.zeros_like(x)
    if density.dependence == "vertical":
        out[..., -1] = d1
    return out


def hessian(density, x):
    """Full ambient Hessian of phi, shape (..., d, d)."""
    x = density._points(x)
    _, d1, d2 = density.derivatives(x)
    d = density.ambient_dim
    out = np.zeros(x.shape + (d,))
    if density.dependence == "radial":
        out += 2.0 * d1[..., None, None] * np.eye(d)
        out += 4.0 * d2[..., None, None] * x[..., :, None] * x[..., None, :]
    elif density.dependence == "vertical":
        out[..., -1, -1] = d2
    return out


def _check_unit(N):
    N = np.asarray(N, dtype=float)
    if np.any(np.abs(np.linalg.norm(N, axis=-1) - 1.0) > 1e-12):
        raise ValueError("normal vectors must have unit length")
    return N


def hessian_NN(density, x, N):
    """Bakry-Emery quadratic form of the ambient Hessian in the normal direction."""
    x = density._points(x)
    N = _check_unit(N)
    _, d1, d2 = density.derivatives(x)
    if density.dependence == "radial":
        h = np.sum(N * x, axis=-1)
        return 2.0 * (d1 + 2.0 * d2 * h**2)
    if density.dependence == "vertical":
        return d2 * N[..., -1] ** 2
    return np.zeros(x.shape[:-1])


def weighted_mean_curvature(density, x, N, nH):
    """H_phi = nH - <grad phi, N>, with nH defined by Delta x = nH N."""
    N = _check_unit(N)
    return np.asarray(nH) - np.sum(grad_phi(density, x) * N, axis=-1)


def sufficient_condition(density, x, N, mode):
    """Pointwise value of the functional whose sign a stability theorem needs.

    ``vertical_radial``  phi'(r) + 2 phi''(r) h^2
    ``radial_radial``    phi'(r) + phi''(r) h^2
    ``vertical_coordinate``  phi''(t)
    ``translator_radial_diagnostic``  h N_{n+1}
    """
    if mode not in MODES:
        raise ModeError(f"unknown mode {mode!r}")
    x = density._points(x)
    N = _check_unit(N)
    h = np.sum(N * x, axis=-1)
    if mode == "translator_radial_diagnostic":
        if density.kind != "translator":
            raise ModeError("translator diagnostic needs the translator density")
        return h * N[..., -1]
    wants = "vertical" if mode == "vertical_coordinate" else "radial"
    if density.dependence != wants and not density.is_constant:
        raise ModeError(f"mode {mode} needs a {wants} density")
    _, d1, d2 = density.derivatives(x)
    if mode == "vertical_radial":
        return d1 + 2.0 * d2 * h**2
    if mode == "radial_radial":
        return d1 + d2 * h**2
    return d2
