import numpy as np
import pytest

from crowdflow.mesh import (MeshError, TriMesh, build_structured_tri_mesh,
                            INTERIOR, WALL, OUTFLOW)


def polygon_closure(mesh):
    """Max over cells of |sum of outward length-weighted edge normals|."""
    acc = np.zeros((mesh.n_cells, 2))
    ln = mesh.edge_normal * mesh.edge_length[:, None]
    np.add.at(acc, mesh.edge_left, ln)
    np.add.at(acc, mesh.edge_right[mesh.edge_right >= 0],
              -ln[mesh.edge_right >= 0])
    return np.abs(acc).max()


def test_unit_square_two_cells():
    m = build_structured_tri_mesh(1, 1, (0, 1, 0, 1))
    assert m.n_cells == 2
    assert np.allclose(m.cell_area, 0.5, atol=1e-15)
    interior = m.edge_marker == INTERIOR
    assert interior.sum() == 1
    assert (~interior).sum() == 4
    # Diagonal edge joins two distinct cells.
    e = np.nonzero(interior)[0][0]
    assert m.edge_left[e] != m.edge_right[e]


def test_2x2_counts_and_geometry():
    m = build_structured_tri_mesh(2, 2, (0, 1, 0, 1))
    assert m.n_cells == 8
    assert len(m.edge_length) == 16
    assert m.total_area() == pytest.approx(1.0, abs=1e-12)
    assert polygon_closure(m) < 1e-12
    # Unit normals.
    assert np.allclose(np.linalg.norm(m.edge_normal, axis=1), 1.0, atol=1e-14)


def test_incircle_diameter_right_triangle():
    m = build_structured_tri_mesh(4, 4, (0, 1, 0, 1))
    h = 0.25
    expect = 2 * h / (2 + np.sqrt(2))
    assert np.allclose(m.incircle_diameter, expect, rtol=1e-13)
    # 2*area/semiperimeter identity, cell by cell.
    for cid in range(0, m.n_cells, 7):
        tri = m.vertices[m.cells[cid]]
        a = np.linalg.norm(tri[1] - tri[0])
        b = np.linalg.norm(tri[2] - tri[1])
        c = np.linalg.norm(tri[0] - tri[2])
        s = 0.5 * (a + b + c)
        assert m.incircle_diameter[cid] == pytest.approx(
            2 * m.cell_area[cid] / s, rel=1e-13)


def test_obstacle_cutout_counts_area_and_walls():
    m = build_structured_tri_mesh(10, 10, (0, 1, 0, 1),
                                  obstacles=[(0, 0.4, 0.45, 0.55)])
    assert m.n_cells == 200 - 2 * (4 * 1)
    assert m.total_area() == pytest.approx(1.0 - 0.04, abs=1e-12)
    # Edges exposed by the cutout are walls even though they are interior to
    # the bounding box.
    xmin, xmax = m.vertices[:, 0].min(), m.vertices[:, 0].max()
    ymin, ymax = m.vertices[:, 1].min(), m.vertices[:, 1].max()
    boundary = m.edge_right < 0
    pa = m.vertices[m.edge_vertices[:, 0]]
    pb = m.vertices[m.edge_vertices[:, 1]]
    on_box = ((pa[:, 0] == xmin) & (pb[:, 0] == xmin)
              | (pa[:, 0] == xmax) & (pb[:, 0] == xmax)
              | (pa[:, 1] == ymin) & (pb[:, 1] == ymin)
              | (pa[:, 1] == ymax) & (pb[:, 1] == ymax))
    exposed = boundary & ~on_box
    assert exposed.sum() > 0
    assert np.all(m.edge_marker[exposed] == WALL)
    # Snap distances are reported (here exactly half a cell in y).
    assert m.obstacle_snaps[0][2] == pytest.approx(0.05, abs=1e-12)


def test_obstacle_empty_after_snap_rejected():
    with pytest.raises(MeshError, match="obstacle 0"):
        build_structured_tri_mesh(10, 10, (0, 1, 0, 1),
                                  obstacles=[(0.41, 0.44, 0.2, 0.4)])


def test_degenerate_cell_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshError, match="degenerate"):
        TriMesh(verts, np.array([[0, 1, 2]]))


def test_clockwise_cell_rejected():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        TriMesh(verts, np.array([[0, 2, 1]]))


def test_outward_normals_and_incidence():
    m = build_structured_tri_mesh(3, 5, (0, 1.5, 0, 2.5))
    interior = m.edge_right >= 0
    dc = (m.cell_centroid[m.edge_right[interior]]
          - m.cell_centroid[m.edge_left[interior]])
    dots = np.einsum("ij,ij->i", dc, m.edge_normal[interior])
    assert np.all(dots > 0)
    assert np.all(m.edge_left[interior] != m.edge_right[interior])
    # Boundary normals point out of the domain.
    bnd = ~interior
    mid = 0.5 * (m.vertices[m.edge_vertices[bnd, 0]]
                 + m.vertices[m.edge_vertices[bnd, 1]])
    out = mid + 1e-6 * m.edge_normal[bnd]
    x0, x1, y0, y1 = 0, 1.5, 0, 2.5
    outside = ((out[:, 0] < x0) | (out[:, 0] > x1)
               | (out[:, 1] < y0) | (out[:, 1] > y1))
    assert np.all(outside)


def test_boundary_marker_config():
    m = build_structured_tri_mesh(4, 4, (0, 1, 0, 1),
                                  boundary_markers={"top": "outflow"})
    pa = m.vertices[m.edge_vertices[:, 0]]
    pb = m.vertices[m.edge_vertices[:, 1]]
    on_top = (pa[:, 1] == 1.0) & (pb[:, 1] == 1.0)
    assert np.all(m.edge_marker[on_top] == OUTFLOW)
    assert np.all(m.edge_marker[(m.edge_right < 0) & ~on_top] == WALL)
    with pytest.raises(MeshError):
        build_structured_tri_mesh(2, 2, (0, 1, 0, 1),
                                  boundary_markers={"top": "slippery"})


def test_periodic_strip_gluing():
    m = build_structured_tri_mesh(8, 1, (0, 1, 0, 0.125), periodic_x=True)
    assert m.n_cells == 16
    # One vertical edge pair merged; no left/right boundary edges remain.
    pa = m.vertices[m.edge_vertices[:, 0]]
    pb = m.vertices[m.edge_vertices[:, 1]]
    bnd = m.edge_right < 0
    vertical_bnd = bnd & (pa[:, 0] == pb[:, 0])
    assert vertical_bnd.sum() == 0
    # Glued edge: left cell adjacent to x=1, right cell adjacent to x=0.
    glued = (m.edge_right >= 0) & (pa[:, 0] == pa[:, 0].max()) \
        & (pb[:, 0] == pa[:, 0].max())
    assert glued.sum() == 1
    e = np.nonzero(glued)[0][0]
    assert m.cell_centroid[m.edge_left[e], 0] > 0.8
    assert m.cell_centroid[m.edge_right[e], 0] < 0.2
    assert m.edge_marker[e] == INTERIOR


def test_deterministic_rebuild():
    kw = dict(nx=7, ny=3, domain=(0, 2, 0, 1), obstacles=[(0.5, 1.0, 0, 1 / 3)])
    a = build_structured_tri_mesh(**kw)
    b = build_structured_tri_mesh(**kw)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.cells, b.cells)
    assert np.array_equal(a.edge_vertices, b.edge_vertices)
    assert np.array_equal(a.edge_left, b.edge_left)
    assert np.array_equal(a.edge_right, b.edge_right)
    assert np.array_equal(a.edge_marker, b.edge_marker)


def test_lattice_roundtrip_and_cells_near():
    m = build_structured_tri_mesh(6, 4, (0, 3, 0, 2),
                                  obstacles=[(1.0, 1.5, 0.5, 1.0)])
    rng = np.random.default_rng(0)
    vals = rng.random(m.n_cells)
    assert np.array_equal(m.from_lattice(m.to_lattice(vals)), vals)
    near = m.cells_near((1.5, 1.0), 0.6)
    assert np.array_equal(near, np.sort(near))
    # Everything within the radius is included (slack only adds cells).
    d = np.abs(m.cell_centroid - np.array([1.5, 1.0])).max(axis=1)
    assert set(np.nonzero(d <= 0.6)[0]) <= set(near.tolist())


def test_vtk_dump_roundtrip(tmp_path):
    m = build_structured_tri_mesh(3, 2, (0, 1, 0, 1))
    path = tmp_path / "mesh.vtk"
    m.write_vtk(path, {"rho": np.arange(m.n_cells, dtype=float)})
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert f"POINTS {len(m.vertices)} double" in text
    assert f"CELLS {m.n_cells} {4 * m.n_cells}" in text
    assert f"CELL_DATA {m.n_cells}" in text
    assert "SCALARS rho double 1" in text
