"""Element-level virtual element operators.

Local dof ordering: the N vertex values, then the p-1 interior Gauss-Lobatto
values of each edge (edge k runs from vertex k to vertex k+1), then the
n_{p-2} scaled internal moments (1/|E|) int_E v q_a in multi-index order.

Two polynomial bases are involved on an element:

* the *moment basis* of P_{p-2}, which defines the internal dofs and is the
  object of study (coefficients ``M``), and
* the *projection basis* of P_p in which the energy projector is expanded
  (coefficients ``T``). It changes only the matrix representation of the
  projector, never the stiffness matrix itself.
"""
import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .errors import ConditioningError, UnsupportedDegreeError
from .mesh import Polygon
from .poly import (
    BasisKind,
    dim_p,
    gauss_legendre,
    gauss_lobatto,
    gradient_gram,
    gram_schmidt_coeffs,
    laplacian_matrix,
    make_basis,
    mass_matrix_H,
    monomial_values,
    polygon_quadrature,
)

G_COND_LIMIT = 1e15


class StabilizationKind(enum.Enum):
    S1 = "s1"  # all dofs
    S2 = "s2"  # boundary L2 + interior L2 of the moment projection, p-scaled
    S3 = "s3"  # diagonal, max(1, diag(K_C))
    S4 = "s4"  # boundary dofs only

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class DofLayout:
    n_vertices: int
    p: int

    @property
    def n_edge_internal(self):
        return self.n_vertices * (self.p - 1)

    @property
    def n_boundary(self):
        return self.n_vertices * self.p

    @property
    def n_internal(self):
        return dim_p(self.p - 2)

    @property
    def n_dofs(self):
        return self.n_boundary + self.n_internal

    def edge_dofs(self, k):
        """Local dof indices of the p+1 Gauss-Lobatto nodes of edge k, in edge order."""
        n, p = self.n_vertices, self.p
        inner = [n + k * (p - 1) + m for m in range(p - 1)]
        return [k, *inner, (k + 1) % n]


def dof_count(polygon, p):
    """(total, boundary, internal) dof counts of the local space."""
    if p < 1:
        raise UnsupportedDegreeError("p must be >= 1")
    lay = DofLayout(polygon.n_vertices if isinstance(polygon, Polygon) else int(polygon), p)
    return lay.n_dofs, lay.n_boundary, lay.n_internal


def boundary_nodes(polygon, p):
    """Coordinates of the boundary dofs in local order."""
    v = polygon.vertices
    gl = gauss_lobatto(p).nodes
    t = 0.5 * (gl[1:-1] + 1.0)
    w = np.roll(v, -1, axis=0)
    inner = [a + np.outer(t, b - a) for a, b in zip(v, w)]
    return np.concatenate([v, *inner]) if p > 1 else v.copy()


# --------------------------------------------------------------------------- monomial ingredients

class _MonomialData:
    """Scaled-monomial integrals on one element, shared by every route."""

    def __init__(self, polygon, p):
        self.polygon = polygon
        self.p = p
        self.area = polygon.area
        self.layout = DofLayout(polygon.n_vertices, p)
        self.H = mass_matrix_H(polygon, p)
        self.Gt = gradient_gram(polygon, p)
        self.nodes = boundary_nodes(polygon, p)
        self.Db, _, _ = monomial_values(polygon, p, self.nodes)
        self.Db = self.Db.T
        self.lap = laplacian_matrix(polygon, p)
        self.flux, self.L = self._edge_terms()

    def _edge_terms(self):
        """Boundary flux (d_n m_a, phi_j)_{dE} per boundary dof, and L_ab = (d_n m_a, m_b)_{dE}."""
        poly, p, lay = self.polygon, self.p, self.layout
        gl = gauss_lobatto(p)
        n = dim_p(p)
        flux = np.zeros((n, lay.n_boundary))
        L = np.zeros((n, n))
        v = poly.vertices
        for k in range(lay.n_vertices):
            a, b = v[k], v[(k + 1) % lay.n_vertices]
            d = b - a
            length = np.hypot(*d)
            normal = np.array([d[1], -d[0]]) / length
            pts = a + np.outer(0.5 * (gl.nodes + 1.0), d)
            val, gx, gy = monomial_values(poly, p, pts)
            dn = gx * normal[0] + gy * normal[1]
            w = 0.5 * length * gl.weights
            flux[:, lay.edge_dofs(k)] += dn * w
            L += (dn * w) @ val.T
        return flux, L

    @property
    def vertex_mean(self):
        return self.Db[: self.layout.n_vertices].mean(axis=0)


# --------------------------------------------------------------------------- projection matrices

@dataclass
class ProjectionMatrices:
    """D, B, G, G~ of one element for a chosen moment and projection basis."""

    D: np.ndarray
    B: np.ndarray
    G: np.ndarray
    Gt: np.ndarray
    T: np.ndarray
    M: np.ndarray
    route: str
    extras: dict = field(default_factory=dict)


def _solve_transpose(M, X):
    """X @ inv(M)."""
    return np.linalg.solve(M.T, X.T).T


def _direct_route(data, T, M):
    p, lay, area = data.p, data.layout, data.area
    n, n2, nb = dim_p(p), lay.n_internal, lay.n_boundary
    D = np.zeros((lay.n_dofs, n))
    D[:nb] = data.Db @ T.T
    B = np.zeros((n, lay.n_dofs))
    B[:, :nb] = T @ data.flux
    if n2:
        D[nb:] = M @ data.H[:n2, :] @ T.T / area
        # Lap(q_a) = (T lap inv(M)) q^M and int_E q^M_g phi_j = |E| delta_gj
        B[:, nb:] = -area * _solve_transpose(M, T @ data.lap)
    Gt = T @ data.Gt @ T.T
    G = Gt.copy()
    B[0] = 0.0
    if p == 1:
        B[0, : lay.n_vertices] = 1.0 / lay.n_vertices
        G[0] = T @ data.vertex_mean
    else:
        e1 = np.zeros(n2)
        e1[0] = 1.0
        B[0, nb:] = np.linalg.solve(M.T, e1)
        G[0] = T @ data.H[:, 0] / area
    return ProjectionMatrices(D, B, G, Gt, T, M, "direct")


def _expansion_route(data, GS):
    """Orthonormal-basis matrices assembled from the monomial ones (GS: lower triangular)."""
    p, lay, area = data.p, data.layout, data.area
    n, n2, nb = dim_p(p), lay.n_internal, lay.n_boundary
    gs11 = GS[0, 0]
    Gt = GS @ data.Gt @ GS.T
    G = Gt.copy()
    D = np.zeros((lay.n_dofs, n))
    D[:nb] = data.Db @ GS.T
    B = np.zeros((n, lay.n_dofs))
    if p == 1:
        G[0] = GS @ data.vertex_mean
        B[0, : lay.n_vertices] = 1.0 / lay.n_vertices
    else:
        G[0] = 0.0
        G[0, 0] = 1.0 / (gs11 * area)
        B[0, nb] = 1.0 / gs11
        D[nb:, :n2] = np.eye(n2) / area
    # boundary columns: only the flux term survives, the constant row has none
    B[1:, :nb] = (GS @ data.flux)[1:]
    Lbar = GS @ data.L @ GS.T
    Fbar = Lbar - Gt
    Cbar = np.zeros((n2, lay.n_dofs))
    Cbar[:, nb:] = area * np.eye(n2)
    if n2:
        B[1:, :] -= Fbar[1:, :n2] @ Cbar
    return ProjectionMatrices(D, B, G, Gt, GS, GS[:n2, :n2], "expansion", {"L": Lbar, "F": Fbar, "C": Cbar})


def _default_projection(kind):
    # the projector is always expanded in the Gram-Schmidt basis of P_p unless asked
    # otherwise; a monomial expansion makes G singular on thin elements at moderate p
    return BasisKind.ORTHO_GS


def build_projection_matrices(polygon, p, basis="ortho-gs", route=None, projection=None, data=None):
    """Assemble D, B, G and G~ for one element.

    ``basis`` selects the internal-moment basis. ``projection`` selects the
    basis of P_p used for the projector (default: the Gram-Schmidt basis). ``route`` is "expansion"
    (Gram-Schmidt only: the monomial matrices transformed by GS, with B from
    F = L - G~) or "direct" (Laplacians written out in the moment basis).
    """
    if p < 1:
        raise UnsupportedDegreeError("p must be >= 1")
    kind = BasisKind.parse(basis)
    data = data or _MonomialData(polygon, p)
    proj = _default_projection(kind) if projection is None else BasisKind.parse(projection)
    if route is None:
        route = "expansion" if kind is BasisKind.ORTHO_GS and proj is BasisKind.ORTHO_GS else "direct"
    n2 = dim_p(p - 2)
    if proj is BasisKind.ORTHO_GS:
        T = gram_schmidt_coeffs(polygon, p).coeffs
    else:
        T = make_basis(proj, polygon, p).coeffs
    if route == "expansion":
        if kind is not BasisKind.ORTHO_GS or proj is not BasisKind.ORTHO_GS:
            raise ValueError("the expansion route is defined for the Gram-Schmidt basis only")
        mats = _expansion_route(data, T)
    elif route == "direct":
        if kind is BasisKind.ORTHO_GS and proj is BasisKind.ORTHO_GS:
            M = T[:n2, :n2]
        elif kind is BasisKind.ORTHO_GS:
            M = gram_schmidt_coeffs(polygon, p).coeffs[:n2, :n2]
        else:
            M = make_basis(kind, polygon, p - 2).coeffs if n2 else np.zeros((0, 0))
        mats = _direct_route(data, T, M)
    else:
        raise ValueError(f"unknown route {route!r}")
    return mats


# --------------------------------------------------------------------------- projectors

def projector_pinabla(mats):
    """(Pi*, Pi): energy projector in polynomial coefficients and in dofs."""
    cond = np.linalg.cond(mats.G)
    if not np.isfinite(cond) or cond > G_COND_LIMIT:
        raise ConditioningError("matrix G is numerically singular", {"cond_G": float(cond)})
    pistar = np.linalg.solve(mats.G, mats.B)
    return pistar, mats.D @ pistar


def moment_mass_matrix(polygon, p, M, H=None):
    """(q_a, q_b)_E for the moment basis of P_{p-2}."""
    n2 = dim_p(p - 2)
    H = mass_matrix_H(polygon, max(p - 2, 0)) if H is None else H[:n2, :n2]
    return M @ H @ M.T


def projector_pi0(polygon, p, mats, H=None):
    """Dofs -> coefficients of the L2 projection onto P_{p-2} in the moment basis."""
    if p < 2:
        raise UnsupportedDegreeError("the L2 projection onto P_{p-2} needs p >= 2")
    lay = DofLayout(polygon.n_vertices, p)
    rhs = np.zeros((lay.n_internal, lay.n_dofs))
    rhs[:, lay.n_boundary:] = polygon.area * np.eye(lay.n_internal)
    if mats.route == "expansion":
        return rhs
    return np.linalg.solve(moment_mass_matrix(polygon, p, mats.M, H), rhs)


# --------------------------------------------------------------------------- stabilization

def boundary_mass_matrix(polygon, p):
    """Exact L2(dE) mass matrix of the boundary dofs' piecewise polynomial traces."""
    lay = DofLayout(polygon.n_vertices, p)
    gl = gauss_lobatto(p).nodes
    gq = gauss_legendre(p + 1)
    vander = legendre.legvander(gl, p)
    lag = legendre.legvander(gq.nodes, p) @ np.linalg.inv(vander)
    ref = (lag * gq.weights[:, None]).T @ lag
    out = np.zeros((lay.n_boundary, lay.n_boundary))
    v = polygon.vertices
    for k in range(lay.n_vertices):
        length = np.linalg.norm(v[(k + 1) % lay.n_vertices] - v[k])
        idx = lay.edge_dofs(k)
        out[np.ix_(idx, idx)] += 0.5 * length * ref
    return out


def s3_matrix(KC):
    """Diagonal stabilization max(1, (K_C)_ii)."""
    return np.diag(np.maximum(1.0, np.diag(KC)))


def stabilization_matrix(kind, polygon, p, KC=None, pi0=None, moment_mass=None):
    """Matrix of the stabilizing form in the canonical basis."""
    kind = StabilizationKind.parse(kind)
    lay = DofLayout(polygon.n_vertices, p)
    nd = lay.n_dofs
    if kind is StabilizationKind.S1:
        return np.eye(nd)
    if kind is StabilizationKind.S4:
        return np.diag(np.r_[np.ones(lay.n_boundary), np.zeros(lay.n_internal)])
    if kind is StabilizationKind.S3:
        if KC is None or KC.shape != (nd, nd):
            raise ValueError("S3 needs the consistency matrix K_C of matching size")
        return s3_matrix(KC)
    h = polygon.diameter
    S = np.zeros((nd, nd))
    S[: lay.n_boundary, : lay.n_boundary] = (p / h) * boundary_mass_matrix(polygon, p)
    if p >= 2:
        if pi0 is None or moment_mass is None:
            raise ValueError("S2 needs the moment projection and the moment mass matrix for p >= 2")
        S += (p / h) ** 2 * (pi0.T @ moment_mass @ pi0)
    return S


# --------------------------------------------------------------------------- element bundle

@dataclass
class LocalOperators:
    polygon: Polygon
    p: int
    basis: BasisKind
    stab: StabilizationKind
    layout: DofLayout
    mats: ProjectionMatrices
    pistar: np.ndarray
    pi: np.ndarray
    pi0: np.ndarray
    moment_mass: np.ndarray
    KC: np.ndarray
    S: np.ndarray
    K: np.ndarray
    data: _MonomialData

    @property
    def n_dofs(self):
        return self.layout.n_dofs

    def moment_polynomials(self):
        """Coefficients of the moment basis of P_{p-2} in scaled monomials."""
        return self.mats.M

    def interpolate(self, u, qdegree=None):
        """Dof vector of a smooth function u(x, y) (vectorized)."""
        lay = self.layout
        out = np.empty(lay.n_dofs)
        nodes = self.data.nodes
        out[: lay.n_boundary] = u(nodes[:, 0], nodes[:, 1])
        if lay.n_internal:
            q = polygon_quadrature(self.polygon, qdegree or 2 * self.p + 6)
            val, _, _ = monomial_values(self.polygon, self.p - 2, q.nodes)
            uq = u(q.nodes[:, 0], q.nodes[:, 1])
            out[lay.n_boundary:] = self.mats.M @ (val @ (q.weights * uq)) / self.polygon.area
        return out

    def polynomial_dofs(self, coeffs):
        """Dof vector of the polynomial sum_a coeffs[a] * (projection basis)_a."""
        return self.mats.D @ coeffs

    def projected_gradient(self, dofs, points):
        """Gradient of Pi^nabla v at points, v given by its dofs."""
        c = (self.pistar @ dofs) @ self.mats.T
        _, gx, gy = monomial_values(self.polygon, self.p, points)
        return c @ gx, c @ gy

    def load(self, f, qdegree=None):
        return local_load(self, f, qdegree)


def local_operators(polygon, p, basis="ortho-gs", stab="s1", route=None, projection=None):
    """Build every element matrix for one polygon, degree, moment basis and stabilization."""
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    kind = BasisKind.parse(basis)
    stab = StabilizationKind.parse(stab)
    data = _MonomialData(polygon, p)
    mats = build_projection_matrices(polygon, p, kind, route=route, projection=projection, data=data)
    pistar, pi = projector_pinabla(mats)
    if p >= 2:
        mm = np.eye(dim_p(p - 2)) if mats.route == "expansion" else moment_mass_matrix(polygon, p, mats.M, data.H)
        pi0 = projector_pi0(polygon, p, mats, data.H)
    else:
        mm = np.zeros((0, 0))
        pi0 = np.zeros((0, data.layout.n_dofs))
    KC = pistar.T @ mats.Gt @ pistar
    S = stabilization_matrix(stab, polygon, p, KC=KC, pi0=pi0, moment_mass=mm)
    R = np.eye(data.layout.n_dofs) - pi
    K = KC + R.T @ S @ R
    return LocalOperators(polygon, p, kind, stab, data.layout, mats, pistar, pi, pi0, mm, KC, S, K, data)


def local_stiffness(polygon, p, basis="ortho-gs", stab="s1"):
    return local_operators(polygon, p, basis, stab).K


def local_load(ops, f, qdegree=None):
    """Right-hand side of one element: int f Pi0 phi_j (p >= 2), (int f)/N on vertices (p = 1)."""
    lay = ops.layout
    out = np.zeros(lay.n_dofs)
    if f is None:
        return out
    q = polygon_quadrature(ops.polygon, qdegree or 2 * ops.p + 4)
    fq = f(q.nodes[:, 0], q.nodes[:, 1]) if callable(f) else np.full(len(q.weights), float(f))
    if ops.p == 1:
        out[: lay.n_vertices] = (q.weights @ fq) / lay.n_vertices
        return out
    val, _, _ = monomial_values(ops.polygon, ops.p - 2, q.nodes)
    fm = ops.mats.M @ (val @ (q.weights * fq))
    return ops.pi0.T @ fm
