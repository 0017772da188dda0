"""Polynomial machinery on a polygon.

Scaled monomials m_a(x) = ((x - x_E) / h_E)^a1 ((y - y_E) / h_E)^a2 are
ordered by the graded bijection (0,0)->1, (1,0)->2, (0,1)->3, (2,0)->4, ...
Every other polynomial basis is stored as a coefficient matrix C whose row k
expands basis element k in scaled monomials.
"""
import enum
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from . import _kernels
from .errors import ConditioningError
from .mesh import Polygon, triangulate

# singular values, i.e. eigenvalue ratio 1e-28
SVD_SINGULAR_RTOL = 1e-14


def dim_p(degree):
    """Dimension of P_degree in two variables (0 for negative degree)."""
    return 0 if degree < 0 else (degree + 1) * (degree + 2) // 2


def multi_index(linear):
    """Linear index (1-based) -> exponent pair (a1, a2)."""
    if linear < 1:
        raise ValueError("linear index must be >= 1")
    d = int((np.sqrt(8 * linear - 7) - 1) // 2)
    while dim_p(d) < linear:
        d += 1
    while d > 0 and dim_p(d - 1) >= linear:
        d -= 1
    a2 = linear - dim_p(d - 1) - 1
    return d - a2, a2


def linear_index(a1, a2):
    """Exponent pair -> 1-based linear index."""
    if a1 < 0 or a2 < 0:
        raise ValueError("exponents must be nonnegative")
    return dim_p(a1 + a2 - 1) + a2 + 1


# --------------------------------------------------------------------------- scaled monomials

def scaled_coords(polygon, points):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    h = polygon.diameter
    c = polygon.centroid
    return (pts[:, 0] - c[0]) / h, (pts[:, 1] - c[1]) / h


def monomial_values(polygon, degree, points):
    """Values and physical gradients of all scaled monomials up to ``degree``.

    Returns (val, gx, gy), each of shape (dim_p(degree), n_points).
    """
    sx, sy = scaled_coords(polygon, points)
    val, dx, dy = _kernels.monomial_table(sx, sy, degree)
    h = polygon.diameter
    return val, dx / h, dy / h


def scaled_monomial(polygon, alpha, point):
    """(value, gradient, laplacian) of one scaled monomial at one point."""
    a1, a2 = alpha
    h = polygon.diameter
    sx, sy = scaled_coords(polygon, point)
    sx, sy = float(sx[0]), float(sy[0])

    def pw(t, k):
        return t**k if k >= 0 else 0.0

    value = pw(sx, a1) * pw(sy, a2)
    grad = np.array([a1 * pw(sx, a1 - 1) * pw(sy, a2), a2 * pw(sx, a1) * pw(sy, a2 - 1)]) / h
    lap = (a1 * (a1 - 1) * pw(sx, a1 - 2) * pw(sy, a2) + a2 * (a2 - 1) * pw(sx, a1) * pw(sy, a2 - 2)) / h**2
    return value, grad, lap


def laplacian_matrix(polygon, degree):
    """Exact Laplacian map: row a gives the coefficients of Lap(m_a) in m_b, |b| <= degree - 2."""
    n = dim_p(degree)
    out = np.zeros((n, dim_p(degree - 2)))
    h2 = polygon.diameter**2
    exps = _kernels.exponents(degree)
    for k, (a1, a2) in enumerate(exps):
        if a1 >= 2:
            out[k, linear_index(a1 - 2, a2) - 1] += a1 * (a1 - 1) / h2
        if a2 >= 2:
            out[k, linear_index(a1, a2 - 2) - 1] += a2 * (a2 - 1) / h2
    return out


# --------------------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.asarray(values) @ self.weights


def gauss_lobatto(p):
    """(p+1)-point Gauss-Lobatto rule on [-1, 1], exact to degree 2p - 1."""
    if p < 1:
        raise ValueError("p must be >= 1")
    n = p + 1
    if n == 2:
        return QuadratureRule(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    lp = legendre.Legendre.basis(p)
    dlp = lp.deriv()
    # Chebyshev-Gauss-Lobatto start, Newton on P_p'
    x = -np.cos(np.pi * np.arange(1, p) / p)
    d2lp = dlp.deriv()
    for _ in range(100):
        dx = dlp(x) / d2lp(x)
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    x = 0.5 * (x - x[::-1])
    nodes = np.concatenate([[-1.0], x, [1.0]])
    weights = 2.0 / (p * (p + 1) * lp(nodes) ** 2)
    return QuadratureRule(nodes, weights)


def gauss_legendre(n):
    x, w = legendre.leggauss(n)
    return QuadratureRule(x, w)


def triangle_rule(degree):
    """Collapsed (Duffy) tensor Gauss rule on the unit triangle, exact to ``degree``."""
    n = max(1, int(np.ceil((degree + 2) / 2)))
    g = gauss_legendre(n)
    t = 0.5 * (g.nodes + 1.0)
    wt = 0.5 * g.weights
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(wt, wt, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    w = (wu * wv * (1.0 - u)).ravel()
    return QuadratureRule(np.column_stack([x, y]), w)


def polygon_quadrature(polygon, degree):
    """Rule exact for bivariate polynomials of total degree <= ``degree`` on the polygon."""
    if not isinstance(polygon, Polygon):
        polygon = Polygon(polygon)
    cache = polygon.__dict__.setdefault("_quadrature_cache", {})
    if degree in cache:
        return cache[degree]
    ref = triangle_rule(degree)
    tris = polygon.__dict__.get("_triangles")
    if tris is None:
        tris = polygon.__dict__["_triangles"] = triangulate(polygon)
    nodes, weights = [], []
    for a, b, c in tris:
        jac = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        nodes.append(a + np.outer(ref.nodes[:, 0], b - a) + np.outer(ref.nodes[:, 1], c - a))
        weights.append(jac * ref.weights)
    rule = QuadratureRule(np.concatenate(nodes), np.concatenate(weights))
    cache[degree] = rule
    return rule


def mass_matrix_H(polygon, p):
    """L2(E) Gram matrix of the scaled monomials of degree <= p."""
    q = polygon_quadrature(polygon, 2 * p)
    val, _, _ = monomial_values(polygon, p, q.nodes)
    return (val * q.weights) @ val.T


def gradient_gram(polygon, p):
    """(grad m_a, grad m_b)_E for all scaled monomials of degree <= p."""
    q = polygon_quadrature(polygon, max(2 * p - 2, 0))
    _, gx, gy = monomial_values(polygon, p, q.nodes)
    return (gx * q.weights) @ gx.T + (gy * q.weights) @ gy.T


# --------------------------------------------------------------------------- bases

class BasisKind(enum.Enum):
    MONOMIAL = "monomial"
    ORTHO_GS = "ortho-gs"
    ORTHO_DIAG = "ortho-diag"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"1": cls.MONOMIAL, "2": cls.ORTHO_GS, "3": cls.ORTHO_DIAG}
        key = str(value).strip().lower().replace("_", "-")
        return aliases.get(key) or cls(key)


@dataclass(frozen=True)
class MomentBasis:
    """A basis of P_degree(E): row k of ``coeffs`` expands element k in scaled monomials."""

    kind: BasisKind
    degree: int
    coeffs: np.ndarray

    @property
    def size(self):
        return self.coeffs.shape[0]

    def truncated(self, degree):
        """Restriction to P_degree (only for lower triangular, degree-graded coefficients)."""
        if self.kind is BasisKind.ORTHO_DIAG and degree != self.degree:
            raise ValueError("eigendecomposition coefficients mix degrees and cannot be truncated")
        n = dim_p(degree)
        return MomentBasis(self.kind, degree, self.coeffs[:n, :n])


def orthonormalize(samples, passes=2):
    """Modified Gram-Schmidt with reorthogonalization on weighted samples.

    ``samples`` has one row per function: sqrt(w_q) * f(x_q). Returns the
    lower triangular R (positive diagonal) with R @ samples orthonormal.
    """
    a = np.array(samples, dtype=np.float64)
    n = a.shape[0]
    R = np.eye(n)
    Q = a.copy()
    for k in range(n):
        norm0 = np.linalg.norm(Q[k])
        for _ in range(passes):
            for j in range(k):
                c = Q[j] @ Q[k]
                Q[k] -= c * Q[j]
                R[k] -= c * R[j]
        nk = np.linalg.norm(Q[k])
        if not nk > 1e-13 * norm0:
            raise ConditioningError(
                f"Gram-Schmidt lost positive definiteness at function {k + 1}",
                {"residual_norm": nk, "initial_norm": norm0},
            )
        Q[k] /= nk
        R[k] /= nk
    return R


def gram_schmidt_coeffs(polygon, degree):
    """L2(E)-orthonormal basis of P_degree obtained from the scaled monomials."""
    q = polygon_quadrature(polygon, 2 * degree)
    val, _, _ = monomial_values(polygon, degree, q.nodes)
    R = orthonormalize(val * np.sqrt(q.weights))
    return MomentBasis(BasisKind.ORTHO_GS, degree, R)


def diagonalization_coeffs(polygon, degree):
    """Keep the constant, orthonormalize the nonconstant monomials of P_degree by diagonalization.

    With H22 the mass matrix of the nonconstant monomials and H22 = V D V^T,
    the new elements are the rows of (V D^-1/2)^T. The eigenpairs are taken
    from the SVD of the weighted sample matrix A (H22 = A^T A), which keeps
    the tiny eigenvalues of flat polygons accurate.
    """
    n = dim_p(degree)
    C = np.eye(n)
    if n > 1:
        q = polygon_quadrature(polygon, 2 * degree)
        val, _, _ = monomial_values(polygon, degree, q.nodes)
        A = (val[1:] * np.sqrt(q.weights)).T
        _, sigma, Vt = np.linalg.svd(A, full_matrices=False)
        if not sigma[-1] > SVD_SINGULAR_RTOL * sigma[0]:
            raise ConditioningError(
                "nonconstant block of the mass matrix is numerically singular",
                {"lambda_min": float(sigma[-1] ** 2), "lambda_max": float(sigma[0] ** 2)},
            )
        V = Vt.T
        # deterministic eigenvector signs
        piv = np.argmax(np.abs(V), axis=0)
        V = V * np.sign(V[piv, np.arange(V.shape[1])])
        C[1:, 1:] = (V / sigma).T
    return MomentBasis(BasisKind.ORTHO_DIAG, degree, C)


def make_basis(kind, polygon, degree):
    kind = BasisKind.parse(kind)
    if kind is BasisKind.MONOMIAL:
        return MomentBasis(kind, degree, np.eye(dim_p(degree)))
    if kind is BasisKind.ORTHO_GS:
        return gram_schmidt_coeffs(polygon, degree)
    return diagonalization_coeffs(polygon, degree)
