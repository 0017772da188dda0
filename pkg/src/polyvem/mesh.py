"""Polygons, polygonal meshes of the unit square and mesh file IO."""
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import InvalidGeometryError, MeshFormatError, NonconformingMeshError

_MERGE_TOL = 1e-10


def _shoelace(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2, eps):
    """Proper crossing test of segment p1p2 against many segments q1q2."""
    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return (d1 * d2 < -eps) & (d3 * d4 < -eps)


@dataclass(frozen=True, eq=False)
class Polygon:
    """A simple, counterclockwise polygon."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise InvalidGeometryError("a polygon needs at least 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidGeometryError("non-finite vertex coordinates")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if not _shoelace(v) > 0.0:
            raise InvalidGeometryError(f"polygon has non-positive signed area {_shoelace(v):.3e}")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @cached_property
    def area(self):
        return _shoelace(self.vertices)

    @cached_property
    def centroid(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        c = np.array([np.dot(v[:, 0] + w[:, 0], cross), np.dot(v[:, 1] + w[:, 1], cross)])
        return c / (6.0 * self.area)

    @cached_property
    def diameter(self):
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    @cached_property
    def edge_lengths(self):
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    def is_simple(self):
        v = self.vertices
        n = len(v)
        a, b = v, np.roll(v, -1, axis=0)
        scale = self.diameter**2
        for i in range(n):
            others = [j for j in range(n) if j not in (i, (i + 1) % n, (i - 1) % n)]
            if not others:
                continue
            if np.any(_segments_cross(a[i], b[i], a[others], b[others], 1e-14 * scale**2)):
                return False
        return True


def polygon_geometry(polygon):
    """Return (area, centroid, diameter) of a polygon."""
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    return polygon.area, polygon.centroid.copy(), polygon.diameter


def collapsing_hexagon(i):
    """Hexagon with bulk collapsing onto the x axis as i grows."""
    if i < 1:
        raise ValueError("i must be >= 1")
    t = 2.0 ** (1 - i)
    return Polygon([(1.0, 0.0), (2.0, t), (1.0, 2.0 * t), (0.0, t), (-1.0, t), (0.0, 0.0)])


def hanging_square(i):
    """Unit square with a hanging node sliding towards the vertex (0, 1)."""
    if i < 1:
        raise ValueError("i must be >= 1")
    return Polygon([(1.0, 0.0), (1.0, 1.0), (2.0 ** (-i), 1.0), (0.0, 1.0), (0.0, 0.0)])


# --------------------------------------------------------------------------- triangulation

def _ear_clip_indices(v):
    n = len(v)
    if n == 3:
        return [(0, 1, 2)]
    scale = max(np.ptp(v[:, 0]), np.ptp(v[:, 1])) ** 2
    eps = 1e-14 * scale
    remaining = list(range(n))
    tris = []
    while len(remaining) > 3:
        m = len(remaining)
        clipped = False
        for k in range(m):
            i0, i1, i2 = remaining[k - 1], remaining[k], remaining[(k + 1) % m]
            a, b, c = v[i0], v[i1], v[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= eps:
                continue
            others = [j for j in remaining if j not in (i0, i1, i2)]
            p = v[others]
            d1 = (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0])
            d2 = (c[0] - b[0]) * (p[:, 1] - b[1]) - (c[1] - b[1]) * (p[:, 0] - b[0])
            d3 = (a[0] - c[0]) * (p[:, 1] - c[1]) - (a[1] - c[1]) * (p[:, 0] - c[0])
            if np.any((d1 >= -eps) & (d2 >= -eps) & (d3 >= -eps)):
                continue
            tris.append((i0, i1, i2))
            remaining.pop(k)
            clipped = True
            break
        if not clipped:
            raise InvalidGeometryError("ear clipping found no ear; polygon is not simple")
    a, b, c = (v[j] for j in remaining)
    if (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) > eps:
        tris.append(tuple(remaining))
    return tris


def triangulate(polygon):
    """Ear-clipping triangulation; returns an array of shape (n_tri, 3, 2)."""
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    v = polygon.vertices
    tris = np.array([v[list(t)] for t in _ear_clip_indices(v)])
    e1, e2 = tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
    covered = 0.5 * np.sum(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if abs(covered - polygon.area) > 1e-10 * polygon.area:
        raise InvalidGeometryError("triangles do not cover the polygon; it is not simple")
    return tris


# --------------------------------------------------------------------------- meshes

@dataclass(frozen=True, eq=False)
class Mesh:
    """Polygonal mesh: shared vertex array plus counterclockwise cell loops."""

    vertices: np.ndarray
    cells: tuple = field(default=())

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        cells = tuple(np.array(c, dtype=np.int64) for c in self.cells)
        for c in cells:
            c.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return len(self.cells)

    def polygon(self, k):
        return Polygon(self.vertices[self.cells[k]])

    @cached_property
    def polygons(self):
        return [self.polygon(k) for k in range(self.n_cells)]

    @cached_property
    def topology(self):
        """Edge table built from the cell loops.

        Returns a dict with ``edges`` (n_edges, 2) sorted endpoint pairs,
        ``edge_cells`` list of incident cells, ``edge_dirs`` the matching
        local directions (+1 if the cell walks low->high), and per cell
        ``cell_edges``/``cell_signs``.
        """
        index = {}
        edges, edge_cells, edge_dirs = [], [], []
        cell_edges, cell_signs = [], []
        for k, c in enumerate(self.cells):
            ids, signs = [], []
            for a, b in zip(c, np.roll(c, -1)):
                a, b = int(a), int(b)
                key = (a, b) if a < b else (b, a)
                s = 1 if a < b else -1
                e = index.get(key)
                if e is None:
                    e = index[key] = len(edges)
                    edges.append(key)
                    edge_cells.append([])
                    edge_dirs.append([])
                edge_cells[e].append(k)
                edge_dirs[e].append(s)
                ids.append(e)
                signs.append(s)
            cell_edges.append(np.array(ids, dtype=np.int64))
            cell_signs.append(np.array(signs, dtype=np.int64))
        counts = np.array([len(ec) for ec in edge_cells], dtype=np.int64)
        return {
            "edges": np.array(edges, dtype=np.int64).reshape(-1, 2),
            "edge_cells": edge_cells,
            "edge_dirs": edge_dirs,
            "edge_count": counts,
            "cell_edges": cell_edges,
            "cell_signs": cell_signs,
        }

    @property
    def edges(self):
        return self.topology["edges"]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @cached_property
    def boundary_edges(self):
        return self.topology["edge_count"] == 1

    @cached_property
    def boundary_vertices(self):
        flags = np.zeros(self.n_vertices, dtype=bool)
        flags[self.edges[self.boundary_edges].ravel()] = True
        return flags

    @property
    def h(self):
        return max(p.diameter for p in self.polygons)


def _merge_cells(cell_points):
    """Glue per-cell coordinate loops into a mesh with shared vertices."""
    allpts = np.concatenate(cell_points)
    tree = cKDTree(allpts)
    scale = max(1.0, float(np.abs(allpts).max()))
    pairs = tree.query_pairs(_MERGE_TOL * scale, output_type="ndarray")
    parent = np.arange(len(allpts))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(allpts))])
    uniq, inverse = np.unique(roots, return_inverse=True)
    vertices = allpts[uniq]
    cells = []
    offset = 0
    for pts in cell_points:
        loop = inverse[offset:offset + len(pts)]
        offset += len(pts)
        dedup = [int(i) for k, i in enumerate(loop) if i != loop[k - 1]]
        if len(dedup) >= 3:
            cells.append(dedup)
    used = np.unique(np.concatenate(cells))
    remap = -np.ones(len(vertices), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return Mesh(vertices[used], [remap[c] for c in cells])


def _clip_to_unit_square(pts):
    """Sutherland-Hodgman clip of a convex loop against [0, 1]^2."""
    out = np.asarray(pts, dtype=np.float64)
    for axis, bound, keep_le in ((0, 0.0, False), (0, 1.0, True), (1, 0.0, False), (1, 1.0, True)):
        if len(out) == 0:
            break
        new = []
        for k in range(len(out)):
            cur, nxt = out[k], out[(k + 1) % len(out)]
            ci = cur[axis] <= bound if keep_le else cur[axis] >= bound
            ni = nxt[axis] <= bound if keep_le else nxt[axis] >= bound
            if ci:
                new.append(cur)
            if ci != ni:
                t = (bound - cur[axis]) / (nxt[axis] - cur[axis])
                q = cur + t * (nxt - cur)
                q[axis] = bound
                new.append(q)
        out = np.array(new).reshape(-1, 2)
    return out


def generate_square_mesh(n):
    """n x n axis-aligned squares on the unit square."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(t, t, indexing="xy")
    vertices = np.column_stack([x.ravel(), y.ravel()])
    cells = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            cells.append([v0, v0 + 1, v0 + n + 2, v0 + n + 1])
    return Mesh(vertices, cells)


def generate_hexagonal_mesh(n):
    """Pointy-top regular hexagons with n+1 center rows, clipped to the unit square.

    The side length is 2/(3n), so the bottom and top rows are cut through
    their centers; cut cells at the boundary are kept as polygons.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s = 1.0 / (1.5 * n)
    w = np.sqrt(3.0) * s
    angles = np.deg2rad(np.array([-90.0, -30.0, 30.0, 90.0, 150.0, 210.0]))
    ref = s * np.column_stack([np.cos(angles), np.sin(angles)])
    loops = []
    ncol = int(np.ceil(1.0 / w)) + 2
    for r in range(n + 1):
        cy = 1.5 * s * r
        for k in range(-1, ncol):
            cx = k * w + (0.5 * w if r % 2 == 0 else 0.0)
            clipped = _clip_to_unit_square(ref + (cx, cy))
            if len(clipped) >= 3 and _shoelace(clipped) > 1e-12:
                loops.append(clipped)
    return _merge_cells(loops)


def _voronoi_cells(seeds):
    mirrored = [seeds]
    for axis in (0, 1):
        for bound in (0.0, 1.0):
            m = seeds.copy()
            m[:, axis] = 2.0 * bound - m[:, axis]
            mirrored.append(m)
    vor = Voronoi(np.concatenate(mirrored))
    loops = []
    for i in range(len(seeds)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise InvalidGeometryError(f"unbounded Voronoi cell for seed {i}")
        pts = vor.vertices[region]
        ang = np.arctan2(pts[:, 1] - seeds[i, 1], pts[:, 0] - seeds[i, 0])
        pts = pts[np.argsort(ang)]
        pts = np.where(np.abs(pts) < 1e-12, 0.0, pts)
        pts = np.where(np.abs(pts - 1.0) < 1e-12, 1.0, pts)
        loops.append(_clip_to_unit_square(pts))
    return loops


def generate_voronoi_lloyd_mesh(n_seeds=25, iterations=100, rng_seed=0, seeds=None, tol=1e-8, max_retries=10):
    """Voronoi mesh of the unit square relaxed by Lloyd iterations.

    ``seeds`` overrides the random initial seeds. Iteration stops early
    once the largest seed displacement drops below ``tol``.
    """
    if n_seeds < 2 and seeds is None:
        raise ValueError("n_seeds must be >= 2")
    rng = np.random.default_rng(rng_seed)
    pts = rng.random((n_seeds, 2)) if seeds is None else np.array(seeds, dtype=np.float64)
    for attempt in range(max_retries + 1):
        d = cKDTree(pts).query(pts, k=2)[0][:, 1]
        if d.min() > 1e-10:
            break
        if attempt == max_retries:
            raise InvalidGeometryError("coincident Voronoi seeds persist after perturbation")
        pts = np.clip(pts + 1e-6 * rng.standard_normal(pts.shape), 1e-6, 1 - 1e-6)
    for _ in range(iterations):
        loops = _voronoi_cells(pts)
        new = np.array([Polygon(lp).centroid for lp in loops])
        moved = np.abs(new - pts).max()
        pts = new
        if moved < tol:
            break
    return _merge_cells(_voronoi_cells(pts))


# --------------------------------------------------------------------------- validation

@dataclass
class ShapeReport:
    """Per-cell shape metrics of a validated mesh."""

    min_edge_ratio: np.ndarray
    star_shaped: np.ndarray
    diameter: np.ndarray
    area: np.ndarray

    @property
    def conforming(self):
        return True


def _point_in_polygon(pt, v):
    x, y = pt
    xi, yi = v[:, 0], v[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    crosses = ((yi > y) != (yj > y)) & (x < (xj - xi) * (y - yi) / np.where(yj == yi, 1.0, yj - yi) + xi)
    return bool(np.count_nonzero(crosses) % 2)


def centroid_visible(polygon, samples=6):
    """True if every sampled boundary point is seen from the centroid without crossing an edge."""
    v = polygon.vertices
    c = polygon.centroid
    if not _point_in_polygon(c, v):
        return False
    a, b = v, np.roll(v, -1, axis=0)
    eps = 1e-14 * polygon.diameter**4
    t = (np.arange(samples) + 0.5) / samples
    for k in range(len(v)):
        others = np.array([j for j in range(len(v)) if j != k])
        for tk in t:
            s = a[k] + tk * (b[k] - a[k])
            if np.any(_segments_cross(c, s, a[others], b[others], eps)):
                return False
    return True


def validate_mesh(mesh):
    """Check conformity and report per-cell (D1)/(D2)-style shape metrics.

    Raises NonconformingMeshError naming the offending edge when an edge is
    shared by more than two cells, when a shared edge is walked in the same
    direction by both cells, or when a vertex hangs inside another edge.
    """
    polys = []
    for k in range(mesh.n_cells):
        try:
            polys.append(mesh.polygon(k))
        except InvalidGeometryError as exc:
            raise NonconformingMeshError(f"cell {k} is not a valid polygon: {exc}") from exc
    topo = mesh.topology
    for e, (cells, dirs) in enumerate(zip(topo["edge_cells"], topo["edge_dirs"])):
        edge = tuple(int(i) for i in topo["edges"][e])
        if len(cells) > 2:
            raise NonconformingMeshError(f"edge {edge} is shared by {len(cells)} cells {cells}", edge)
        if len(cells) == 2 and dirs[0] == dirs[1]:
            raise NonconformingMeshError(f"edge {edge} is traversed twice in the same direction by cells {cells}", edge)
    # hanging vertices: a mesh vertex strictly inside some edge
    v = mesh.vertices
    scale = max(p.diameter for p in polys)
    tol = 1e-10 * scale
    for e, (i, j) in enumerate(topo["edges"]):
        a, b = v[i], v[j]
        d = b - a
        L2 = float(d @ d)
        t = ((v - a) @ d) / L2
        dist = np.abs((v[:, 0] - a[0]) * d[1] - (v[:, 1] - a[1]) * d[0]) / np.sqrt(L2)
        hit = (t > 1e-9) & (t < 1 - 1e-9) & (dist < tol)
        hit[[i, j]] = False
        if np.any(hit):
            raise NonconformingMeshError(
                f"vertex {int(np.flatnonzero(hit)[0])} hangs on edge {(int(i), int(j))}", (int(i), int(j))
            )
    cell_area = sum(p.area for p in polys)
    bnd = topo["edges"][mesh.boundary_edges]
    bdirs = np.array([topo["edge_dirs"][e][0] for e in np.flatnonzero(mesh.boundary_edges)])
    a = np.where(bdirs[:, None] > 0, v[bnd[:, 0]], v[bnd[:, 1]])
    b = np.where(bdirs[:, None] > 0, v[bnd[:, 1]], v[bnd[:, 0]])
    domain_area = 0.5 * float(np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))
    if abs(cell_area - domain_area) > 1e-10 * abs(domain_area):
        raise NonconformingMeshError(f"cells cover area {cell_area!r} but the boundary encloses {domain_area!r}")
    return ShapeReport(
        min_edge_ratio=np.array([p.edge_lengths.min() / p.diameter for p in polys]),
        star_shaped=np.array([centroid_visible(p) for p in polys]),
        diameter=np.array([p.diameter for p in polys]),
        area=np.array([p.area for p in polys]),
    )


def single_cell_mesh(polygon):
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    return Mesh(polygon.vertices, [list(range(polygon.n_vertices))])


# --------------------------------------------------------------------------- IO

def write_mesh(mesh, path):
    lines = ["vempoly 1", f"{mesh.n_vertices} {mesh.n_cells}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [" ".join(str(int(i)) for i in (len(c), *c)) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    raw = Path(path).read_text().splitlines()
    if not raw or raw[0].split() != ["vempoly", "1"]:
        raise MeshFormatError("expected header 'vempoly 1'", 1)
    if len(raw) < 2:
        raise MeshFormatError("missing '<nv> <nc>' count line", 2)
    try:
        nv, nc = (int(t) for t in raw[1].split())
    except ValueError:
        raise MeshFormatError(f"malformed count line {raw[1]!r}", 2) from None
    if nv < 3 or nc < 1:
        raise MeshFormatError(f"invalid counts nv={nv} nc={nc}", 2)
    if len(raw) < 2 + nv + nc:
        raise MeshFormatError(f"expected {nv} vertex and {nc} cell lines, file has {len(raw) - 2}", len(raw))
    vertices = np.empty((nv, 2))
    for k in range(nv):
        lineno = 3 + k
        parts = raw[2 + k].split()
        try:
            if len(parts) != 2:
                raise ValueError
            vertices[k] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshFormatError(f"malformed vertex line {raw[2 + k]!r}", lineno) from None
    cells = []
    for k in range(nc):
        lineno = 3 + nv + k
        try:
            parts = [int(t) for t in raw[2 + nv + k].split()]
        except ValueError:
            raise MeshFormatError("cell line must contain integers", lineno) from None
        if len(parts) < 4 or parts[0] != len(parts) - 1:
            raise MeshFormatError("cell line must read '<k> i1 ... ik' with k >= 3", lineno)
        idx = parts[1:]
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshFormatError(f"vertex index out of range [0, {nv})", lineno)
        cells.append(idx)
    return Mesh(vertices, cells)
