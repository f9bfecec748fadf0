"""Nonlocal couplings: mollified density fields and agent sensing functionals.

All operators share one quadrature: a convolution evaluated at x is the sum of
field(cell) * kernel(x - centroid(cell)) * area(cell) over cells, one point per
cell.  Missing (obstacle) cells simply do not contribute and kernel mass is
never re-normalized near boundaries.

Point evaluations gather cells near the support box directly.  Whole-mesh
evaluations on structured meshes run as separable 1D cross-correlations
between the two centroid lattices (direct sums, not FFT), which is the same
quadrature in a different summation order.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .mesh import TriMesh


def saturate(vec):
    """Rowwise xi / sqrt(1 + |xi|^2); keeps every drift addend below norm 1."""
    vec = np.asarray(vec, dtype=float)
    n2 = np.sum(vec * vec, axis=-1, keepdims=True)
    return vec / np.sqrt(1.0 + n2)


def convolve(cell_values, kernel, mesh: TriMesh, points):
    """(field * kernel)(p) for each row p of `points`, by direct gather."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(cell_values, dtype=float)
    out = np.empty(len(pts))
    r = kernel.support_radius
    for i, p in enumerate(pts):
        ids = mesh.cells_near(p, r)
        kv = kernel.value(p[None, :] - mesh.cell_centroid[ids])
        out[i] = float(np.sum(vals[ids] * kv * mesh.cell_area[ids]))
    return out


def convolve_grad(cell_values, kernel, mesh: TriMesh, points):
    """Gradient of the mollification at points; same gather, kernel gradient."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.asarray(cell_values, dtype=float)
    out = np.empty((len(pts), 2))
    r = kernel.support_radius
    for i, p in enumerate(pts):
        ids = mesh.cells_near(p, r)
        kg = kernel.grad(p[None, :] - mesh.cell_centroid[ids])
        w = vals[ids] * mesh.cell_area[ids]
        out[i, 0] = float(np.sum(w * kg[:, 0]))
        out[i, 1] = float(np.sum(w * kg[:, 1]))
    return out


# -- whole-mesh fast path ----------------------------------------------------

def _lattice_taps(mesh, kernel, deriv_axis):
    """Separable taps for the four (eval, source) lattice pairings.

    Cached per (kernel, deriv) on the mesh.  taps[e][s] = (ty, tx) where the
    x taps carry the kernel scale and the cell-area quadrature weight.
    """
    cache_key = ("taps", kernel.key, deriv_axis)
    hit = mesh._caches.get(cache_key)
    if hit is not None:
        return hit

    info = mesh._require_structured()
    hx, hy = info.hx, info.hy
    xlo, xhi, ylo, yhi = kernel.support_box
    kx = int(np.ceil(max(abs(xlo), abs(xhi)) / hx)) + 2
    ky = int(np.ceil(max(abs(ylo), abs(yhi)) / hy)) + 2
    mx = np.arange(-kx, kx + 1)
    my = np.arange(-ky, ky + 1)
    area = hx * hy / 2.0

    # Base centroids: lower (2hx/3, hy/3), upper (hx/3, 2hy/3).
    base = (np.array([2 * hx / 3, hy / 3]), np.array([hx / 3, 2 * hy / 3]))
    taps = [[None, None], [None, None]]
    for e in range(2):
        for s in range(2):
            sx, sy = base[e] - base[s]
            # correlate1d convention: out[i] = sum_k w[k] in[i + k - c], so
            # w[k] must hold the kernel profile at offset (c - k)*h + shift.
            offx = (kx - np.arange(2 * kx + 1)) * hx + sx
            offy = (ky - np.arange(2 * ky + 1)) * hy + sy
            if deriv_axis == 0:
                tx = kernel.axis_taps_deriv(0, offx)
                ty = kernel.axis_taps(1, offy)
            elif deriv_axis == 1:
                tx = kernel.axis_taps(0, offx)
                ty = kernel.axis_taps_deriv(1, offy)
            else:
                tx = kernel.axis_taps(0, offx)
                ty = kernel.axis_taps(1, offy)
            taps[e][s] = (ty, tx * area)
    mesh._caches[cache_key] = taps
    return taps


def _mollify_structured(cell_values, kernel, mesh, deriv_axis):
    info = mesh.structured
    src = mesh.to_lattice(np.asarray(cell_values, dtype=float))
    taps = _lattice_taps(mesh, kernel, deriv_axis)
    mode_x = "wrap" if info.periodic_x else "constant"
    out = np.zeros_like(src)
    for e in range(2):
        for s in range(2):
            ty, tx = taps[e][s]
            g = ndimage.correlate1d(src[s], ty, axis=0, mode="constant", cval=0.0)
            out[e] += ndimage.correlate1d(g, tx, axis=1, mode=mode_x, cval=0.0)
    return mesh.from_lattice(out)


def _mollify_generic(cell_values, kernel, mesh, deriv_axis):
    if deriv_axis is None:
        return convolve(cell_values, kernel, mesh, mesh.cell_centroid)
    return convolve_grad(cell_values, kernel, mesh, mesh.cell_centroid)[:, deriv_axis]


def mollify(cell_values, kernel, mesh: TriMesh):
    """Mollified field sampled at every cell centroid."""
    if mesh.structured is not None:
        return _mollify_structured(cell_values, kernel, mesh, None)
    return _mollify_generic(cell_values, kernel, mesh, None)


def mollify_grad(cell_values, kernel, mesh: TriMesh):
    """Gradient of the mollified field at every cell centroid, shape (nc, 2)."""
    if mesh.structured is not None:
        return np.stack([_mollify_structured(cell_values, kernel, mesh, 0),
                         _mollify_structured(cell_values, kernel, mesh, 1)],
                        axis=1)
    return convolve_grad(cell_values, kernel, mesh, mesh.cell_centroid)


# -- crowd drift fields -------------------------------------------------------

def drift_tourists(rho, eps_matrix, kernel, mesh: TriMesh):
    """Repulsion-style drift: A_i = sum_j eps[i,j] * sat(grad(rho_j * kernel)).

    rho has shape (n, nc); returns (n, nc, 2).  Every addend has norm below
    eps[i,j] by saturation.
    """
    rho = np.asarray(rho, dtype=float)
    eps = np.asarray(eps_matrix, dtype=float)
    n = rho.shape[0]
    if eps.shape != (n, n):
        raise ValueError("eps_matrix must be (n, n)")
    sat_grads = [saturate(mollify_grad(rho[j], kernel, mesh)) for j in range(n)]
    out = np.zeros((n, rho.shape[1], 2))
    for i in range(n):
        for j in range(n):
            out[i] += eps[i, j] * sat_grads[j]
    return out


def drift_hooligans(rho, eps_matrix, rho_pref, kernel, mesh: TriMesh,
                    literal_a2_denominator=False):
    """Two-population drift with density-weighted saturated gradients.

    A_1 = eps11 * sat(m(rho1 - pref) g1) + eps12 * sat(m(rho2 - rho1) g2)
    A_2 = eps22 * sat(m(rho2 - pref) g2) + eps21 * sat(m(rho1 - rho2) g1)

    with m(.) the mollification and g_i the mollified gradient of rho_i.
    `literal_a2_denominator` reproduces the asymmetric variant where the first
    A_2 denominator scalar is m(rho1 - pref) instead of m(rho2 - pref).
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape[0] != 2:
        raise ValueError("hooligan drift is a two-population coupling")
    eps = np.asarray(eps_matrix, dtype=float)
    own1 = mollify(rho[0] - rho_pref, kernel, mesh)
    own2 = mollify(rho[1] - rho_pref, kernel, mesh)
    cross12 = mollify(rho[1] - rho[0], kernel, mesh)
    cross21 = -cross12
    g1 = mollify_grad(rho[0], kernel, mesh)
    g2 = mollify_grad(rho[1], kernel, mesh)

    a1 = eps[0, 0] * saturate(own1[:, None] * g1) \
        + eps[0, 1] * saturate(cross12[:, None] * g2)
    if literal_a2_denominator:
        num = own2[:, None] * g2
        den = np.sqrt(1.0 + np.sum((own1[:, None] * g2) ** 2, axis=1,
                                   keepdims=True))
        first = num / den
    else:
        first = saturate(own2[:, None] * g2)
    a2 = eps[1, 1] * first + eps[1, 0] * saturate(cross21[:, None] * g1)
    return np.stack([a1, a2])


# -- agent sensing ------------------------------------------------------------

def guide_density_samples(rho, kernel, mesh: TriMesh, positions):
    """Own-population mollified density at each guide position; shape (n,)."""
    rho = np.asarray(rho, dtype=float)
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    return np.array([convolve(rho[i], kernel, mesh, pos[i][None, :])[0]
                     for i in range(rho.shape[0])])


def car_crowd_ahead(total_density, kernel, mesh: TriMesh, car_x, road_y):
    """Crowd mass sensed by each car: integral of rho(x) k(x - car) dx.

    The kernel is passed in sensing orientation (forward reach along +x1);
    since convolve evaluates k(point - centroid), the reflected kernel is what
    enters the gather.
    """
    car_x = np.atleast_1d(np.asarray(car_x, dtype=float))
    pts = np.stack([car_x, np.full_like(car_x, float(road_y))], axis=1)
    return convolve(total_density, kernel.reflected(), mesh, pts)


def officer_mixing_drift(rho, kernel, mesh: TriMesh, positions, strength):
    """Saturated ascent direction of the population-overlap product.

    For each officer position p: sum over ordered population pairs (j, l),
    l != j, of sat(grad[(k*rho_l)(k*rho_j)](p)), scaled by strength / N.
    """
    rho = np.asarray(rho, dtype=float)
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = rho.shape[0]
    n_off = len(pos)
    vals = [convolve(rho[i], kernel, mesh, pos) for i in range(n)]
    grads = [convolve_grad(rho[i], kernel, mesh, pos) for i in range(n)]
    out = np.zeros((n_off, 2))
    for j in range(n):
        for l in range(n):
            if l == j:
                continue
            g = grads[l] * vals[j][:, None] + vals[l][:, None] * grads[j]
            out += saturate(g)
    return (strength / n_off) * out
