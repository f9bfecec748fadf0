"""Compactly supported mollifiers and smooth cutoff functions.

Every kernel family is a separable product of per-axis profiles that vanish
identically outside a bounding box, so whole-mesh convolutions can run as two
1D passes.  Profiles are evaluated only strictly inside their support (the
clamp threshold keeps the rational exponents from overflowing) and are exactly
zero elsewhere, bitwise.  Normalization divides by the midpoint-rule mass on a
400x400 grid over the support box, computed once at construction.
"""

from __future__ import annotations

import numpy as np

_EDGE_CLAMP = 1.0 - 1e-12
_NORM_GRID = 400


class KernelError(ValueError):
    """Invalid kernel parameters."""


def _inside(u, r):
    return u * u < (r * r) * _EDGE_CLAMP


def bump1d(z, r):
    """exp(-z^2/(r^2 - z^2)) inside |z| < r, exactly 0 outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = _inside(z, r)
    zm = z[m]
    out[m] = np.exp(-zm * zm / (r * r - zm * zm))
    return out if out.ndim else float(out)


def bump1d_deriv(z, r):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = _inside(z, r)
    zm = z[m]
    d = r * r - zm * zm
    out[m] = np.exp(-zm * zm / d) * (-2.0 * zm * r * r / (d * d))
    return out if out.ndim else float(out)


def _gauss1d(u, r):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = _inside(u, r)
    um = u[m]
    out[m] = np.exp(-5.0 * um * um / (r * r - um * um))
    return out


def _gauss1d_deriv(u, r):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = _inside(u, r)
    um = u[m]
    d = r * r - um * um
    out[m] = np.exp(-5.0 * um * um / d) * (-10.0 * um * r * r / (d * d))
    return out


def _poly1d(u, r):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = _inside(u, r)
    t = u[m] / r
    out[m] = (1.0 - t * t) ** 3
    return out


def _poly1d_deriv(u, r):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = _inside(u, r)
    t = u[m] / r
    out[m] = -6.0 * (u[m] / (r * r)) * (1.0 - t * t) ** 2
    return out


def _car1d(u, r_forward, r_backward):
    u = np.asarray(u, dtype=float)
    fwd = _gauss1d(u, r_forward)
    bwd = _gauss1d(u, r_backward)
    return np.where(u > 0.0, fwd, bwd)


def _car1d_deriv(u, r_forward, r_backward):
    u = np.asarray(u, dtype=float)
    fwd = _gauss1d_deriv(u, r_forward)
    bwd = _gauss1d_deriv(u, r_backward)
    return np.where(u > 0.0, fwd, bwd)


class Kernel:
    """Separable 2D kernel: value(x) = scale * fx(x1) * fy(x2).

    Use the classmethod constructors; `flip_x` mirrors the x profile, which is
    how an asymmetric kernel enters a convolution written as
    integral of field(y) * k(y - x) dy (see Kernel.reflected).
    """

    def __init__(self, family, params, fx, dfx, fy, dfy, box, normalize,
                 flip_x=False):
        self.family = family
        self.params = dict(params)
        self._fx_raw, self._dfx_raw = fx, dfx
        self._fy, self._dfy = fy, dfy
        self.flip_x = bool(flip_x)
        xlo, xhi, ylo, yhi = box
        if self.flip_x:
            xlo, xhi = -xhi, -xlo
        self.support_box = (xlo, xhi, ylo, yhi)
        self.normalize = bool(normalize)
        self.scale = 1.0
        if normalize:
            mass = self._midpoint_mass()
            if not mass > 0:
                raise KernelError(f"{family} kernel has nonpositive mass")
            self.scale = 1.0 / mass

    # -- profile plumbing ----------------------------------------------------

    def _fx(self, u):
        return self._fx_raw(-u) if self.flip_x else self._fx_raw(u)

    def _dfx(self, u):
        return -self._dfx_raw(-u) if self.flip_x else self._dfx_raw(u)

    def _midpoint_mass(self):
        xlo, xhi, ylo, yhi = self.support_box
        dx = (xhi - xlo) / _NORM_GRID
        dy = (yhi - ylo) / _NORM_GRID
        xs = xlo + dx * (np.arange(_NORM_GRID) + 0.5)
        ys = ylo + dy * (np.arange(_NORM_GRID) + 0.5)
        return float(np.outer(self._fy(ys), self._fx(xs)).sum() * dx * dy)

    # -- public surface ------------------------------------------------------

    @property
    def support_radius(self):
        """Chebyshev half-width of the support box around the origin."""
        xlo, xhi, ylo, yhi = self.support_box
        return max(abs(xlo), abs(xhi), abs(ylo), abs(yhi))

    @property
    def key(self):
        return (self.family, tuple(sorted(self.params.items())),
                self.normalize, self.flip_x)

    def value(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = self.scale * self._fx(pts[:, 0]) * self._fy(pts[:, 1])
        return out if np.asarray(points).ndim == 2 else float(out[0])

    def grad(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        fx, fy = self._fx(pts[:, 0]), self._fy(pts[:, 1])
        g = np.stack([self._dfx(pts[:, 0]) * fy, fx * self._dfy(pts[:, 1])],
                     axis=1)
        g *= self.scale
        return g if np.asarray(points).ndim == 2 else g[0]

    def axis_taps(self, axis, offsets):
        """Profile values (including scale on x) at 1D offsets along an axis."""
        if axis == 0:
            return self.scale * self._fx(np.asarray(offsets, dtype=float))
        return self._fy(np.asarray(offsets, dtype=float))

    def axis_taps_deriv(self, axis, offsets):
        if axis == 0:
            return self.scale * self._dfx(np.asarray(offsets, dtype=float))
        return self._dfy(np.asarray(offsets, dtype=float))

    def reflected(self):
        """Kernel k~ with k~(u) = k(-u); equal to k for the even families."""
        twin = Kernel.__new__(Kernel)
        twin.family = self.family
        twin.params = dict(self.params)
        twin._fx_raw, twin._dfx_raw = self._fx_raw, self._dfx_raw
        twin._fy, twin._dfy = self._fy, self._dfy
        twin.flip_x = not self.flip_x
        xlo, xhi, ylo, yhi = self.support_box
        twin.support_box = (-xhi, -xlo, ylo, yhi)
        twin.normalize = self.normalize
        twin.scale = self.scale
        return twin

    # -- families --------------------------------------------------------------

    @classmethod
    def gauss_bump(cls, r, normalize=True):
        """exp(-5 x1^2/(r^2-x1^2) - 5 x2^2/(r^2-x2^2)) on (-r, r)^2."""
        r = float(r)
        if r <= 0:
            raise KernelError("gauss_bump radius must be positive")
        return cls("gauss_bump", {"r": r},
                   lambda u: _gauss1d(u, r), lambda u: _gauss1d_deriv(u, r),
                   lambda u: _gauss1d(u, r), lambda u: _gauss1d_deriv(u, r),
                   (-r, r, -r, r), normalize)

    @classmethod
    def poly_bump(cls, r, normalize=True):
        """[(1-(x1/r)^2)(1-(x2/r)^2)]^3 on (-r, r)^2."""
        r = float(r)
        if r <= 0:
            raise KernelError("poly_bump radius must be positive")
        return cls("poly_bump", {"r": r},
                   lambda u: _poly1d(u, r), lambda u: _poly1d_deriv(u, r),
                   lambda u: _poly1d(u, r), lambda u: _poly1d_deriv(u, r),
                   (-r, r, -r, r), normalize)

    @classmethod
    def product_bump(cls, rx, ry, normalize=False):
        """bump1d(x1, rx) * bump1d(x2, ry); unnormalized by default (peak 1)."""
        rx, ry = float(rx), float(ry)
        if rx <= 0 or ry <= 0:
            raise KernelError("product_bump radii must be positive")
        return cls("product_bump", {"rx": rx, "ry": ry},
                   lambda u: np.asarray(bump1d(u, rx)),
                   lambda u: np.asarray(bump1d_deriv(u, rx)),
                   lambda u: np.asarray(bump1d(u, ry)),
                   lambda u: np.asarray(bump1d_deriv(u, ry)),
                   (-rx, rx, -ry, ry), normalize)

    @classmethod
    def car_asymmetric(cls, r_forward, r_backward, normalize=True):
        """Forward/backward asymmetric bump: gauss reach r_forward for x1 > 0,
        r_backward for x1 <= 0, gauss r_forward laterally."""
        rf, rb = float(r_forward), float(r_backward)
        if rf <= 0 or rb <= 0:
            raise KernelError("car_asymmetric radii must be positive")
        return cls("car_asymmetric", {"r_forward": rf, "r_backward": rb},
                   lambda u: _car1d(u, rf, rb), lambda u: _car1d_deriv(u, rf, rb),
                   lambda u: _gauss1d(u, rf), lambda u: _gauss1d_deriv(u, rf),
                   (-rb, rf, -rf, rf), normalize)


_FAMILY_BUILDERS = {
    "gauss_bump": lambda p: Kernel.gauss_bump(p["r"], p.get("normalize", True)),
    "poly_bump": lambda p: Kernel.poly_bump(p["r"], p.get("normalize", True)),
    "product_bump": lambda p: Kernel.product_bump(p["rx"], p["ry"],
                                                  p.get("normalize", False)),
    "car_asymmetric": lambda p: Kernel.car_asymmetric(
        p["r_forward"], p["r_backward"], p.get("normalize", True)),
}


def make_kernel(family, **params):
    """Build a kernel from a family tag and keyword parameters (config path)."""
    try:
        builder = _FAMILY_BUILDERS[family]
    except KeyError:
        raise KernelError(f"unknown kernel family {family!r}") from None
    try:
        return builder(params)
    except KeyError as exc:
        raise KernelError(f"kernel family {family!r} missing parameter {exc}") from None


class CutoffBeta:
    """Smooth cutoff: 1 below alpha1, 0 above alpha2, C^2 ramp in between."""

    def __init__(self, alpha1, alpha2):
        self.alpha1 = float(alpha1)
        self.alpha2 = float(alpha2)
        if not (0.0 <= self.alpha1 < self.alpha2):
            raise KernelError("cutoff requires 0 <= alpha1 < alpha2")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        s = (z - self.alpha1) / (self.alpha2 - self.alpha1)
        out = np.zeros_like(s)
        out[s <= 0.0] = 1.0
        m = (s > 0.0) & (s * s < _EDGE_CLAMP)
        sm = s[m]
        out[m] = np.exp(1.0 - 1.0 / (1.0 - sm * sm))
        return out if out.ndim else float(out)
