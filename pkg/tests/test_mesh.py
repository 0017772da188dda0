import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyvem.errors import InvalidGeometryError, MeshFormatError, NonconformingMeshError
from polyvem.mesh import (
    Mesh,
    Polygon,
    collapsing_hexagon,
    generate_hexagonal_mesh,
    generate_square_mesh,
    generate_voronoi_lloyd_mesh,
    hanging_square,
    polygon_geometry,
    read_mesh,
    single_cell_mesh,
    triangulate,
    validate_mesh,
    write_mesh,
)

from conftest import random_star_polygon


def tri_area(t):
    a, b, c = t
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def test_geometry_unit_square():
    area, c, h = polygon_geometry([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert area == 1.0
    np.testing.assert_allclose(c, [0.5, 0.5])
    assert h == pytest.approx(np.sqrt(2.0))


def test_geometry_triangle():
    area, c, _ = polygon_geometry([(0, 0), (1, 0), (0, 1)])
    assert area == 0.5
    np.testing.assert_allclose(c, [1 / 3, 1 / 3])


@pytest.mark.parametrize("bad", [[(0, 0), (1, 0)], [(0, 0), (0, 1), (1, 0)], [(0, 0), (1, 0), (2, 0)], [(0, 0), (1, np.nan), (0, 1)]])
def test_degenerate_polygons_rejected(bad):
    with pytest.raises(InvalidGeometryError):
        Polygon(bad)


def test_collapsing_hexagon_vertices():
    np.testing.assert_array_equal(collapsing_hexagon(1).vertices, [(1, 0), (2, 1), (1, 2), (0, 1), (-1, 1), (0, 0)])
    v3 = collapsing_hexagon(3).vertices
    np.testing.assert_array_equal(v3[1], (2, 0.25))
    np.testing.assert_array_equal(v3[2], (1, 0.5))
    for i in range(1, 12):
        v = collapsing_hexagon(i).vertices
        np.testing.assert_array_equal(v[0], (1, 0))
        np.testing.assert_array_equal(v[5], (0, 0))


def test_collapsing_hexagon_first_element_geometry():
    # shoelace over the listed vertices; centroid and diameter by hand
    area, c, h = polygon_geometry(collapsing_hexagon(1))
    assert area == 3.0
    np.testing.assert_allclose(c, [2 / 3, 5 / 6], rtol=1e-15)
    assert h == 3.0


@pytest.mark.parametrize("i", range(1, 11))
def test_collapsing_hexagon_area(i):
    assert collapsing_hexagon(i).area == pytest.approx(3.0 * 2.0 ** (1 - i), rel=1e-14)


def test_collapsing_hexagon_d2_metric_non_increasing():
    ratios = [validate_mesh(single_cell_mesh(collapsing_hexagon(i))).min_edge_ratio[0] for i in range(1, 11)]
    assert np.all(np.diff(ratios) <= 1e-15)
    # shortest edge 1 (A-F and D-C), diameter 3 (E-B as soon as t < 1): the metric sits at 1/3
    np.testing.assert_allclose(ratios, 1 / 3, rtol=1e-14)


def test_centroid_visibility_proxy():
    # the family is an affine image of i=1 and visibility is affine invariant
    assert all(validate_mesh(single_cell_mesh(collapsing_hexagon(i))).star_shaped[0] for i in range(1, 11))
    u_shape = Polygon([(0, 0), (3, 0), (3, 3), (2, 3), (2, 1), (1, 1), (1, 3), (0, 3)])
    assert not validate_mesh(single_cell_mesh(u_shape)).star_shaped[0]


@pytest.mark.parametrize("i", [1, 2, 5, 9])
def test_hanging_square(i):
    P = hanging_square(i)
    assert P.area == 1.0
    np.testing.assert_array_equal(P.vertices[2], (2.0**-i, 1.0))
    rep = validate_mesh(single_cell_mesh(P))
    assert rep.min_edge_ratio[0] == pytest.approx(2.0**-i / np.sqrt(2.0), rel=1e-14)


@pytest.mark.parametrize("n,nv,nc", [(1, 4, 1), (2, 9, 4), (5, 36, 25)])
def test_square_mesh_counts(n, nv, nc):
    m = generate_square_mesh(n)
    assert (m.n_vertices, m.n_cells) == (nv, nc)
    rep = validate_mesh(m)
    assert rep.area.sum() == pytest.approx(1.0, rel=1e-14)


def test_square_mesh_d2_metric():
    rep = validate_mesh(generate_square_mesh(2))
    np.testing.assert_allclose(rep.min_edge_ratio, 1 / np.sqrt(2.0), rtol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7])
def test_hexagonal_mesh(n):
    m = generate_hexagonal_mesh(n)
    rep = validate_mesh(m)
    assert rep.area.sum() == pytest.approx(1.0, abs=1e-10)


def test_hexagonal_mesh_interior_cells_regular():
    m = generate_hexagonal_mesh(2)
    hexes = [P for P in m.polygons if P.n_vertices == 6 and np.all(P.vertices > 1e-12) and np.all(P.vertices < 1 - 1e-12)]
    assert hexes
    for P in hexes:
        assert np.ptp(P.edge_lengths) < 1e-12


def test_voronoi_symmetric_seeds_give_square_mesh():
    seeds = np.array([(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)])
    m = generate_voronoi_lloyd_mesh(4, 0, seeds=seeds)
    ref = generate_square_mesh(2)
    key = lambda v: sorted(map(tuple, np.round(v, 12)))
    assert key(m.vertices) == key(ref.vertices)
    np.testing.assert_allclose(sorted(P.area for P in m.polygons), 0.25, rtol=1e-12)


def test_voronoi_deterministic_and_valid():
    a = generate_voronoi_lloyd_mesh(25, 100, 7)
    b = generate_voronoi_lloyd_mesh(25, 100, 7)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    assert [list(c) for c in a.cells] == [list(c) for c in b.cells]
    rep = validate_mesh(a)
    assert a.n_cells == 25
    assert rep.area.sum() == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 40), st.integers(0, 20), st.integers(0, 10_000))
def test_voronoi_always_conforming(n, iters, seed):
    validate_mesh(generate_voronoi_lloyd_mesh(n, iters, seed))


def test_triangulate_examples():
    quad = Polygon([(0, 0), (2, 0), (2.5, 1), (0, 1.5)])
    assert len(triangulate(quad)) == 2
    tris = triangulate(collapsing_hexagon(5))
    assert len(tris) == 4
    assert sum(tri_area(t) for t in tris) == pytest.approx(3 * 2.0**-4, rel=1e-14)
    tri = Polygon([(0, 0), (1, 0), (0, 1)])
    np.testing.assert_array_equal(triangulate(tri)[0], tri.vertices)


def test_triangulate_area_sum_random_polygons(rng):
    for _ in range(1000):
        P = random_star_polygon(rng)
        tris = triangulate(P)
        assert len(tris) == P.n_vertices - 2
        assert all(tri_area(t) > 0 for t in tris)
        assert sum(tri_area(t) for t in tris) == pytest.approx(P.area, rel=1e-12)


def test_self_intersecting_polygon_rejected_by_triangulate():
    bowtie_like = Polygon([(0, 0), (2, 0), (2, 2), (1, -1), (0, 2)])
    with pytest.raises(InvalidGeometryError):
        triangulate(bowtie_like)


def test_duplicated_cell_is_nonconforming():
    m = generate_square_mesh(1)
    dup = Mesh(m.vertices, [m.cells[0], m.cells[0]])
    with pytest.raises(NonconformingMeshError) as err:
        validate_mesh(dup)
    assert err.value.edge is not None


def test_hanging_vertex_is_nonconforming():
    v = [(0, 0), (1, 0), (1, 1), (0, 1), (2, 0), (2, 1), (1, 0.5)]
    m = Mesh(v, [[0, 1, 6, 2, 3], [1, 4, 5, 2]])
    with pytest.raises(NonconformingMeshError):
        validate_mesh(m)


def test_mesh_roundtrip(tmp_path):
    for m in (generate_square_mesh(2), generate_hexagonal_mesh(3), generate_voronoi_lloyd_mesh(9, 5, 1)):
        path = tmp_path / "m.vem"
        write_mesh(m, path)
        back = read_mesh(path)
        np.testing.assert_array_equal(back.vertices, m.vertices)
        assert [list(c) for c in back.cells] == [list(c) for c in m.cells]
        validate_mesh(back)


@pytest.mark.parametrize(
    "text,line",
    [
        ("vempol 1\n", 1),
        ("vempoly 1\n4 x\n", 2),
        ("vempoly 1\n4 1\n0 0\n1 0\n1 1\n0 1\n", 6),
        ("vempoly 1\n4 1\n0 0\n1 zero\n1 1\n0 1\n4 0 1 2 3\n", 4),
        ("vempoly 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2\n", 7),
        ("vempoly 1\n4 1\n0 0\n1 0\n1 1\n0 1\n4 0 1 2 9\n", 7),
    ],
)
def test_mesh_parse_errors_carry_line_numbers(tmp_path, text, line):
    path = tmp_path / "bad.vem"
    path.write_text(text)
    with pytest.raises(MeshFormatError) as err:
        read_mesh(path)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")
