"""Unit preferred-direction fields from a grid eikonal solve.

Walking directions toward a target boundary, routed around forbidden
regions, are built in three steps: rasterize the walkable region onto an
auxiliary square lattice of nodes, solve the eikonal equation |grad T| = 1
with a first-order fast-marching sweep, then sample -grad T / |grad T| at
the mesh cell centroids.
"""

import heapq
import warnings

import numpy as np

__all__ = ["EikonalGrid", "DirectionField", "solve_eikonal",
           "exact_disk_seed", "sample_distance", "direction_field"]


class EikonalGrid:
    """Square lattice of nodes covering a rectangle, corner-aligned.

    `n` counts intervals along x; the node pitch is (xmax - xmin) / n and
    the y node count follows from keeping the pitch square.
    """

    def __init__(self, box, n=256):
        xmin, xmax, ymin, ymax = (float(v) for v in box)
        if xmax <= xmin or ymax <= ymin:
            raise ValueError("empty grid box")
        self.box = (xmin, xmax, ymin, ymax)
        self.h = (xmax - xmin) / int(n)
        self.nx = int(n) + 1
        self.ny = int(round((ymax - ymin) / self.h)) + 1
        self.x0 = xmin
        self.y0 = ymin

    @property
    def shape(self):
        return (self.ny, self.nx)

    def node_coords(self):
        x = self.x0 + self.h * np.arange(self.nx)
        y = self.y0 + self.h * np.arange(self.ny)
        return np.meshgrid(x, y)

    def mask_from(self, predicate):
        """Boolean node array from a vectorized predicate(x, y)."""
        xg, yg = self.node_coords()
        return np.asarray(predicate(xg, yg), dtype=bool)


class DirectionField:
    """Per-cell unit preferred directions.

    `vectors` has shape (n_cells, 2) with unit rows; `fallback_count`
    says how many cells needed a non-gradient direction.
    """

    def __init__(self, vectors, tag="", fallback_count=0):
        vectors = np.ascontiguousarray(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] != 2:
            raise ValueError("direction vectors must be (n_cells, 2)")
        self.vectors = vectors
        self.tag = tag
        self.fallback_count = int(fallback_count)


def _upwind_value(dist, known, mask, j, i, h):
    ny, nx = dist.shape
    a = np.inf
    if i > 0 and known[j, i - 1]:
        a = dist[j, i - 1]
    if i + 1 < nx and known[j, i + 1]:
        a = min(a, dist[j, i + 1])
    b = np.inf
    if j > 0 and known[j - 1, i]:
        b = dist[j - 1, i]
    if j + 1 < ny and known[j + 1, i]:
        b = min(b, dist[j + 1, i])
    if a > b:
        a, b = b, a
    if b - a >= h:
        return a + h
    # Both directions active: quadratic upwind stencil.
    return 0.5 * (a + b + np.sqrt(2.0 * h * h - (b - a) ** 2))


def solve_eikonal(grid, mask, targets, seed_values=None):
    """First-order fast-marching distance to a target set.

    mask and targets are boolean node arrays on `grid`; target nodes get
    distance 0 unless `seed_values` supplies explicit nonnegative starts
    (np.inf elsewhere).  Returns a node array of distances, np.inf on
    non-walkable nodes; warns if walkable nodes stay unreachable.
    """
    mask = np.asarray(mask, dtype=bool)
    targets = np.asarray(targets, dtype=bool)
    if mask.shape != grid.shape or targets.shape != grid.shape:
        raise ValueError("mask/target shape does not match the grid")
    if not np.any(targets & mask):
        raise ValueError("no walkable target node")

    ny, nx = grid.shape
    h = grid.h
    dist = np.full((ny, nx), np.inf)
    known = np.zeros((ny, nx), dtype=bool)
    heap = []
    if seed_values is None:
        for j, i in zip(*np.nonzero(targets & mask)):
            dist[j, i] = 0.0
            heapq.heappush(heap, (0.0, int(j), int(i)))
    else:
        seed_values = np.asarray(seed_values, dtype=float)
        for j, i in zip(*np.nonzero(targets & mask)):
            v = seed_values[j, i]
            if not np.isfinite(v) or v < 0.0:
                raise ValueError("target seeds must be finite and >= 0")
            dist[j, i] = v
            heapq.heappush(heap, (float(v), int(j), int(i)))

    while heap:
        d, j, i = heapq.heappop(heap)
        if known[j, i] or d > dist[j, i]:
            continue
        known[j, i] = True
        for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            jj, ii = j + dj, i + di
            if not (0 <= jj < ny and 0 <= ii < nx):
                continue
            if known[jj, ii] or not mask[jj, ii]:
                continue
            cand = _upwind_value(dist, known, mask, jj, ii, h)
            if cand < dist[jj, ii]:
                dist[jj, ii] = cand
                heapq.heappush(heap, (cand, jj, ii))

    unreachable = int(np.sum(mask & ~np.isfinite(dist)))
    if unreachable:
        warnings.warn(f"{unreachable} walkable nodes unreachable from the "
                      "target set", RuntimeWarning, stacklevel=2)
    return dist


def exact_disk_seed(grid, mask, center, radius):
    """Exact-distance seeds on walkable nodes within `radius` of a point.

    A single seeded node makes the first-order sweep overestimate along
    diagonals by more than the pitch; seeding a disk with true Euclidean
    distances removes that startup error.  Returns (targets, seed_values).
    """
    cx, cy = float(center[0]), float(center[1])
    xg, yg = grid.node_coords()
    d = np.hypot(xg - cx, yg - cy)
    targets = (d <= radius) & mask
    if not np.any(targets):
        raise ValueError("no walkable node inside the seed disk")
    seed = np.where(targets, d, np.inf)
    return targets, seed


def _patch_indices(grid, points):
    px = (points[:, 0] - grid.x0) / grid.h
    py = (points[:, 1] - grid.y0) / grid.h
    i = np.clip(np.floor(px).astype(int), 0, grid.nx - 2)
    j = np.clip(np.floor(py).astype(int), 0, grid.ny - 2)
    return i, j, px - i, py - j


def sample_distance(grid, dist, points):
    """Bilinear distance samples at arbitrary points.

    Near obstacle edges some patch nodes are non-walkable (np.inf); their
    weight is dropped and the rest renormalized, so samples stay finite
    wherever at least one surrounding node was reached.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    i, j, fx, fy = _patch_indices(grid, points)
    vals = np.stack([dist[j, i], dist[j, i + 1],
                     dist[j + 1, i], dist[j + 1, i + 1]])
    w = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy),
                  (1 - fx) * fy, fx * fy])
    finite = np.isfinite(vals)
    w = np.where(finite, w, 0.0)
    tot = w.sum(axis=0)
    out = np.full(len(points), np.inf)
    ok = tot > 0.0
    out[ok] = (w[:, ok] * np.where(finite[:, ok], vals[:, ok], 0.0)
               ).sum(axis=0) / tot[ok]
    return out


def _cell_adjacency(mesh):
    interior = mesh.edge_right >= 0
    pairs = np.stack([mesh.edge_left[interior],
                      mesh.edge_right[interior]], axis=1)
    adj = [[] for _ in range(mesh.n_cells)]
    for a, b in pairs:
        adj[a].append(int(b))
        adj[b].append(int(a))
    return adj


def direction_field(grid, dist, mesh, target_points=None, tag=""):
    """Unit directions -grad T / |grad T| at the mesh cell centroids.

    The gradient of the bilinear patch around each centroid is used where
    all four nodes are finite.  Cells without a usable gradient fall back
    to the average of their neighbors' directions and, failing that, to
    the straight line toward the nearest target point.
    """
    pts = mesh.cell_centroid
    i, j, fx, fy = _patch_indices(grid, pts)
    t00 = dist[j, i]
    t10 = dist[j, i + 1]
    t01 = dist[j + 1, i]
    t11 = dist[j + 1, i + 1]
    # Patches touching unreachable nodes produce inf - inf here; those cells
    # are caught below and routed through the fallbacks.
    with np.errstate(invalid="ignore"):
        gx = ((t10 - t00) * (1 - fy) + (t11 - t01) * fy) / grid.h
        gy = ((t01 - t00) * (1 - fx) + (t11 - t10) * fx) / grid.h
    g = np.stack([gx, gy], axis=1)
    norm = np.sqrt((g * g).sum(axis=1))
    good = np.isfinite(norm) & (norm > 1e-12)
    vec = np.zeros((mesh.n_cells, 2))
    vec[good] = -g[good] / norm[good, None]

    bad = np.nonzero(~good)[0]
    fallback_count = len(bad)
    if fallback_count:
        adj = _cell_adjacency(mesh)
        resolved = good.copy()
        # A couple of smoothing passes lets directions flow into plateau
        # pockets from their resolved neighbors.
        for _ in range(3):
            still = [c for c in bad if not resolved[c]]
            if not still:
                break
            for c in still:
                nb = [n for n in adj[c] if resolved[n]]
                if not nb:
                    continue
                avg = vec[nb].sum(axis=0)
                nn = np.hypot(avg[0], avg[1])
                if nn > 1e-12:
                    vec[c] = avg / nn
                    resolved[c] = True
        rest = np.nonzero(~resolved)[0]
        if len(rest):
            if target_points is None:
                raise ValueError(f"{len(rest)} cells need the nearest-"
                                 "target fallback but no target_points "
                                 "were given")
            tp = np.atleast_2d(np.asarray(target_points, dtype=float))
            for c in rest:
                off = tp - pts[c]
                k = int(np.argmin((off * off).sum(axis=1)))
                nn = np.hypot(off[k, 0], off[k, 1])
                if nn > 1e-12:
                    vec[c] = off[k] / nn
                else:
                    vec[c] = (1.0, 0.0)
    return DirectionField(vec, tag=tag, fallback_count=fallback_count)
