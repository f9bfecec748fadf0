"""Structured triangular meshes over rectangles with axis-aligned obstacle cutouts.

Every grid square of an nx-by-ny subdivision is split along its bottom-left to
top-right diagonal, giving a "lower" and an "upper" triangle per square.  Cell
centroids therefore form two regular lattices, which the nonlocal operators
exploit for fast whole-mesh convolutions.  Obstacle rectangles are snapped to
mesh lines and their squares removed; edges exposed by the removal are walls.
"""

from __future__ import annotations

import numpy as np

# Edge markers.
INTERIOR = 0
WALL = 1
OUTFLOW = 2

_MARKER_NAMES = {"wall": WALL, "outflow": OUTFLOW}
_SIDES = ("left", "right", "bottom", "top")


class MeshError(ValueError):
    """Invalid mesh geometry or bad build parameters."""


class StructuredInfo:
    """Lattice metadata for meshes built by :func:`build_structured_tri_mesh`."""

    __slots__ = ("nx", "ny", "hx", "hy", "x0", "y0", "lower_ids", "upper_ids",
                 "periodic_x")

    def __init__(self, nx, ny, hx, hy, x0, y0, lower_ids, upper_ids, periodic_x):
        self.nx = nx
        self.ny = ny
        self.hx = hx
        self.hy = hy
        self.x0 = x0
        self.y0 = y0
        self.lower_ids = lower_ids
        self.upper_ids = upper_ids
        self.periodic_x = periodic_x


class TriMesh:
    """Conforming triangulation with oriented edges and cell geometry.

    Vertex triples are counterclockwise.  Edge normals are unit vectors
    pointing from the left cell to the right cell; boundary edges keep their
    single cell on the left, so the normal points outward.
    """

    def __init__(self, vertices, cells, boundary_markers=None, periodic_x=False,
                 structured=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if self.cells.ndim != 2 or self.cells.shape[1] != 3:
            raise MeshError("cells must be an (nc, 3) array of vertex ids")

        v = self.vertices
        c = self.cells
        p0, p1, p2 = v[c[:, 0]], v[c[:, 1]], v[c[:, 2]]
        cross = ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                 - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
        self.cell_area = 0.5 * cross
        if np.any(self.cell_area <= 1e-14):
            bad = int(np.argmin(self.cell_area))
            raise MeshError(
                f"cell {bad} is degenerate or not counterclockwise "
                f"(signed area {self.cell_area[bad]:.3e})")
        self.cell_centroid = (p0 + p1 + p2) / 3.0

        side = np.stack([np.linalg.norm(p1 - p0, axis=1),
                         np.linalg.norm(p2 - p1, axis=1),
                         np.linalg.norm(p0 - p2, axis=1)])
        # Incircle diameter 2A/s with s the semiperimeter.
        self.incircle_diameter = 4.0 * self.cell_area / side.sum(axis=0)

        self.structured = structured
        self.periodic_x = bool(periodic_x)
        self._build_edges(boundary_markers)
        self._caches = {}

    # -- construction ------------------------------------------------------

    def _build_edges(self, boundary_markers):
        markers = {s: WALL for s in _SIDES}
        if boundary_markers:
            for side, name in boundary_markers.items():
                if side not in _SIDES:
                    raise MeshError(f"unknown boundary side {side!r}")
                if name not in _MARKER_NAMES:
                    raise MeshError(f"unknown boundary marker {name!r}")
                markers[side] = _MARKER_NAMES[name]

        edge_map = {}
        order = []
        for cid in range(len(self.cells)):
            tri = self.cells[cid]
            for k in range(3):
                a, b = int(tri[k]), int(tri[(k + 1) % 3])
                key = (a, b) if a < b else (b, a)
                rec = edge_map.get(key)
                if rec is None:
                    edge_map[key] = [(cid, (a, b))]
                    order.append(key)
                else:
                    rec.append((cid, (a, b)))

        xmin, xmax = self.vertices[:, 0].min(), self.vertices[:, 0].max()
        ymin, ymax = self.vertices[:, 1].min(), self.vertices[:, 1].max()

        nv = len(order)
        ev = np.empty((nv, 2), dtype=np.int64)
        left = np.full(nv, -1, dtype=np.int64)
        right = np.full(nv, -1, dtype=np.int64)
        marker = np.zeros(nv, dtype=np.int64)

        for eid, key in enumerate(order):
            rec = edge_map[key]
            cid, (a, b) = rec[0]
            # The first incident cell traverses (a, b) counterclockwise, so
            # (dy, -dx) is its outward normal; that cell becomes "left".
            ev[eid] = (a, b)
            left[eid] = cid
            if len(rec) == 2:
                right[eid] = rec[1][0]
            elif len(rec) > 2:
                raise MeshError(f"edge {key} shared by more than two cells")

        pa = self.vertices[ev[:, 0]]
        pb = self.vertices[ev[:, 1]]
        d = pb - pa
        self.edge_length = np.linalg.norm(d, axis=1)
        if np.any(self.edge_length <= 0):
            raise MeshError("zero-length edge")
        self.edge_normal = np.stack([d[:, 1], -d[:, 0]], axis=1) / self.edge_length[:, None]

        boundary = right < 0
        if np.any(boundary):
            on_left = boundary & (pa[:, 0] == xmin) & (pb[:, 0] == xmin)
            on_right = boundary & (pa[:, 0] == xmax) & (pb[:, 0] == xmax)
            on_bottom = boundary & (pa[:, 1] == ymin) & (pb[:, 1] == ymin)
            on_top = boundary & (pa[:, 1] == ymax) & (pb[:, 1] == ymax)
            # Obstacle-exposed edges are not on the bounding box: always wall.
            marker[boundary] = WALL
            marker[on_left] = markers["left"]
            marker[on_right] = markers["right"]
            marker[on_bottom] = markers["bottom"]
            marker[on_top] = markers["top"]

            if self.periodic_x:
                def ykey(eid):
                    ys = sorted((float(pa[eid, 1]), float(pb[eid, 1])))
                    return (ys[0], ys[1])

                left_ids = {ykey(e): e for e in np.nonzero(on_left)[0]}
                for e in np.nonzero(on_right)[0]:
                    mate = left_ids.pop(ykey(e), None)
                    if mate is None:
                        raise MeshError("periodic_x: unmatched boundary edge")
                    right[e] = left[mate]
                    marker[e] = INTERIOR
                if left_ids:
                    raise MeshError("periodic_x: unmatched boundary edge")
                keep = ~on_left
                ev, left, right = ev[keep], left[keep], right[keep]
                marker = marker[keep]
                self.edge_length = self.edge_length[keep]
                self.edge_normal = self.edge_normal[keep]

        self.edge_vertices = ev
        self.edge_left = left
        self.edge_right = right
        self.edge_marker = marker

        dx = self.incircle_diameter
        other = np.where(right >= 0, right, left)
        self.edge_dxloc = np.minimum(dx[left], dx[other])

    # -- queries -----------------------------------------------------------

    @property
    def n_cells(self):
        return len(self.cells)

    def total_area(self):
        return float(self.cell_area.sum())

    def cells_near(self, point, radius):
        """Ids of cells whose centroid lies within `radius` (Chebyshev) plus
        one incircle-diameter slack of `point`, in increasing id order."""
        order, xs = self._x_order()
        slack = radius + self._caches["max_incircle"]
        x, y = float(point[0]), float(point[1])
        lo = np.searchsorted(xs, x - slack, side="left")
        hi = np.searchsorted(xs, x + slack, side="right")
        cand = order[lo:hi]
        cy = self.cell_centroid[cand, 1]
        cand = cand[np.abs(cy - y) <= slack]
        return np.sort(cand)

    def _x_order(self):
        cached = self._caches.get("x_order")
        if cached is None:
            order = np.argsort(self.cell_centroid[:, 0], kind="stable")
            cached = (order, self.cell_centroid[order, 0])
            self._caches["x_order"] = cached
            self._caches["max_incircle"] = float(self.incircle_diameter.max())
        return cached

    def to_lattice(self, values):
        """Scatter per-cell values onto the (2, ny, nx) lattice, zero where
        cells are absent.  Structured meshes only."""
        info = self._require_structured()
        out = np.zeros((2, info.ny, info.nx), dtype=float)
        for k, ids in enumerate((info.lower_ids, info.upper_ids)):
            present = ids >= 0
            out[k][present] = values[ids[present]]
        return out

    def from_lattice(self, lat):
        """Gather (2, ny, nx) lattice values back to per-cell order."""
        info = self._require_structured()
        out = np.zeros(self.n_cells, dtype=float)
        for k, ids in enumerate((info.lower_ids, info.upper_ids)):
            present = ids >= 0
            out[ids[present]] = lat[k][present]
        return out

    def _require_structured(self):
        if self.structured is None:
            raise MeshError("operation requires a structured mesh")
        return self.structured

    def write_vtk(self, path, cell_data=None):
        write_vtk_unstructured(path, self, cell_data or {})


def _snap_index(coord, origin, h, n, what):
    t = (coord - origin) / h
    idx = int(np.floor(t + 0.5))
    snap = abs(t - idx) * h
    if snap > 0.5 * h + 1e-12:
        raise MeshError(f"{what} snaps by {snap:.3g}, more than half a cell")
    idx = min(max(idx, 0), n)
    return idx, snap


def build_structured_tri_mesh(nx, ny, domain, obstacles=(), boundary_markers=None,
                              periodic_x=False):
    """Triangulate [x0,x1] x [y0,y1] into 2*nx*ny cells minus obstacle cutouts.

    `obstacles` are (ox0, ox1, oy0, oy1) rectangles snapped to mesh lines;
    a rectangle that snaps to an empty range is rejected.  Returns a TriMesh
    whose `structured` attribute carries the lattice metadata.
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be positive")
    x0, x1, y0, y1 = (float(t) for t in domain)
    if not (x1 > x0 and y1 > y0):
        raise MeshError("domain must satisfy x1 > x0 and y1 > y0")
    hx = (x1 - x0) / nx
    hy = (y1 - y0) / ny

    xs = x0 + hx * np.arange(nx + 1)
    ys = y0 + hy * np.arange(ny + 1)
    vx, vy = np.meshgrid(xs, ys)
    vertices = np.stack([vx.ravel(), vy.ravel()], axis=1)

    blocked = np.zeros((ny, nx), dtype=bool)
    snaps = []
    for k, rect in enumerate(obstacles):
        ox0, ox1, oy0, oy1 = (float(t) for t in rect)
        i0, s0 = _snap_index(ox0, x0, hx, nx, f"obstacle {k} x0={ox0}")
        i1, s1 = _snap_index(ox1, x0, hx, nx, f"obstacle {k} x1={ox1}")
        j0, s2 = _snap_index(oy0, y0, hy, ny, f"obstacle {k} y0={oy0}")
        j1, s3 = _snap_index(oy1, y0, hy, ny, f"obstacle {k} y1={oy1}")
        if i1 <= i0 or j1 <= j0:
            raise MeshError(f"obstacle {k} {rect!r} snaps to an empty rectangle")
        blocked[j0:j1, i0:i1] = True
        snaps.append((s0, s1, s2, s3))

    def vid(i, j):
        return j * (nx + 1) + i

    cells = []
    lower_ids = np.full((ny, nx), -1, dtype=np.int64)
    upper_ids = np.full((ny, nx), -1, dtype=np.int64)
    for j in range(ny):
        for i in range(nx):
            if blocked[j, i]:
                continue
            lower_ids[j, i] = len(cells)
            cells.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            upper_ids[j, i] = len(cells)
            cells.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    if not cells:
        raise MeshError("obstacles removed every cell")

    info = StructuredInfo(nx, ny, hx, hy, x0, y0, lower_ids, upper_ids,
                          bool(periodic_x))
    mesh = TriMesh(vertices, np.array(cells, dtype=np.int64),
                   boundary_markers=boundary_markers, periodic_x=periodic_x,
                   structured=info)
    mesh.domain = (x0, x1, y0, y1)
    mesh.obstacle_snaps = snaps
    return mesh


def write_vtk_unstructured(path, mesh, cell_data):
    """Legacy-ASCII VTK unstructured grid dump of a mesh with cell arrays."""
    nv = len(mesh.vertices)
    nc = mesh.n_cells
    lines = ["# vtk DataFile Version 3.0", "crowdflow mesh", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    for p in mesh.vertices:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} 0")
    lines.append(f"CELLS {nc} {4 * nc}")
    for tri in mesh.cells:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {nc}")
    lines.extend(["5"] * nc)
    if cell_data:
        lines.append(f"CELL_DATA {nc}")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (nc,):
                raise MeshError(f"cell array {name!r} has shape {values.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{t:.17g}" for t in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
