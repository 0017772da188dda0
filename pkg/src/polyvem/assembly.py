"""Global dof numbering, assembly, Dirichlet lifting, solve, spectra and errors."""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConditioningError, NonconformingMeshError
from .local import local_load, local_operators
from .poly import dim_p, gauss_lobatto, polygon_quadrature

ZERO_EIG_RTOL = 1e-12


@dataclass
class DofMap:
    p: int
    n_dofs: int
    cell_dofs: list
    dirichlet: np.ndarray
    coords: np.ndarray  # coordinates of vertex and edge dofs; NaN for internal moments

    @property
    def free(self):
        return np.flatnonzero(~self.dirichlet)

    @property
    def fixed(self):
        return np.flatnonzero(self.dirichlet)


def check_conformity(mesh):
    topo = mesh.topology
    for e, (cells, dirs) in enumerate(zip(topo["edge_cells"], topo["edge_dirs"])):
        edge = tuple(int(i) for i in topo["edges"][e])
        if len(cells) > 2 or (len(cells) == 2 and dirs[0] == dirs[1]):
            raise NonconformingMeshError(f"edge {edge} is not shared consistently by at most two cells", edge)


def build_dof_map(mesh, p):
    """Global numbering: vertices, then p-1 dofs per edge (from its lower vertex), then cell moments."""
    if p < 1:
        raise ValueError("p must be >= 1")
    check_conformity(mesh)
    topo = mesh.topology
    nv, ne, nc = mesh.n_vertices, mesh.n_edges, mesh.n_cells
    n2 = dim_p(p - 2)
    edge_base = nv
    cell_base = nv + ne * (p - 1)
    n_dofs = cell_base + nc * n2
    cell_dofs = []
    for k, cell in enumerate(mesh.cells):
        dofs = [int(i) for i in cell]
        for e, s in zip(topo["cell_edges"][k], topo["cell_signs"][k]):
            first = edge_base + int(e) * (p - 1)
            inner = list(range(first, first + p - 1))
            dofs += inner if s > 0 else inner[::-1]
        dofs += list(range(cell_base + k * n2, cell_base + (k + 1) * n2))
        cell_dofs.append(np.array(dofs, dtype=np.int64))
    coords = np.full((n_dofs, 2), np.nan)
    coords[:nv] = mesh.vertices
    t = 0.5 * (gauss_lobatto(p).nodes[1:-1] + 1.0)
    for e, (a, b) in enumerate(topo["edges"]):
        va, vb = mesh.vertices[a], mesh.vertices[b]
        coords[edge_base + e * (p - 1): edge_base + (e + 1) * (p - 1)] = va + np.outer(t, vb - va)
    dirichlet = np.zeros(n_dofs, dtype=bool)
    dirichlet[:nv] = mesh.boundary_vertices
    for e in np.flatnonzero(mesh.boundary_edges):
        dirichlet[edge_base + e * (p - 1): edge_base + (e + 1) * (p - 1)] = True
    return DofMap(p, n_dofs, cell_dofs, dirichlet, coords)


@dataclass
class LinearSystem:
    """Dirichlet-reduced system A x = b over the free dofs."""

    matrix: np.ndarray
    rhs: np.ndarray
    boundary_values: np.ndarray
    dofmap: DofMap
    full_matrix: np.ndarray
    full_rhs: np.ndarray
    elements: list = field(repr=False, default_factory=list)

    def expand(self, x_free):
        u = np.zeros(self.dofmap.n_dofs)
        u[self.dofmap.fixed] = self.boundary_values
        u[self.dofmap.free] = x_free
        return u


def assemble(mesh, p, basis="ortho-gs", stab="s1", f=None, g=None, **local_kw):
    """Assemble the global stiffness matrix and load, then eliminate Dirichlet dofs by lifting.

    ``f`` is a vectorized callable f(x, y), a constant or None; ``g`` likewise
    for the boundary data, sampled at the boundary dof nodes.
    """
    dm = build_dof_map(mesh, p)
    K = np.zeros((dm.n_dofs, dm.n_dofs))
    F = np.zeros(dm.n_dofs)
    elements = []
    for k, poly in enumerate(mesh.polygons):
        ops = local_operators(poly, p, basis, stab, **local_kw)
        idx = dm.cell_dofs[k]
        _kernels.scatter_add(K, ops.K, idx)
        np.add.at(F, idx, local_load(ops, f))
        elements.append(ops)
    fixed, free = dm.fixed, dm.free
    if g is None:
        gb = np.zeros(len(fixed))
    elif callable(g):
        gb = np.asarray(g(dm.coords[fixed, 0], dm.coords[fixed, 1]), dtype=np.float64)
    else:
        gb = np.full(len(fixed), float(g))
    A = K[np.ix_(free, free)]
    b = F[free] - K[np.ix_(free, fixed)] @ gb
    return LinearSystem(A, b, gb, dm, K, F, elements)


@dataclass
class SolveResult:
    x: np.ndarray
    residual: float


def solve(system):
    """Cholesky solve of an SPD system; accepts a LinearSystem or a (matrix, rhs) pair."""
    A, b = (system.matrix, system.rhs) if isinstance(system, LinearSystem) else system
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    try:
        c = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
        x = scipy.linalg.cho_solve(c, b)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        ev = np.linalg.eigvalsh(A) if A.shape[0] else np.zeros(0)
        raise ConditioningError(
            f"Cholesky factorization failed: {exc}",
            {"lambda_min": float(ev[0]), "lambda_max": float(ev[-1])} if len(ev) else {},
        ) from exc
    bn = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b) / (bn if bn > 0 else 1.0)
    if isinstance(system, LinearSystem):
        x = system.expand(x)
    return SolveResult(x, float(res))


@dataclass
class SpectralSummary:
    lambda_max: float
    lambda_min_nonzero: float
    condition: float
    kernel_dim: int
    warning: str = ""
    method: str = "eigh"


def _summary(lam_max, lam_min, kernel_dim, n_small, method):
    warning = ""
    if n_small > kernel_dim or not lam_min > 0:
        warning = "kernel-warn"
        warnings.warn("more numerically-zero eigenvalues than the stated kernel dimension", RuntimeWarning, stacklevel=3)
    cond = lam_max / lam_min if lam_min > 0 else np.inf
    return SpectralSummary(float(lam_max), float(lam_min), float(cond), kernel_dim, warning, method)


def condition_number(matrix, kernel_dim=0):
    """lambda_max / lambda_(kernel_dim+1) from a dense symmetric eigendecomposition.

    An eigenvalue past the kernel that is not positive gives an infinite
    condition number with a kernel warning.
    """
    K = np.asarray(matrix, dtype=np.float64)
    ev = np.linalg.eigvalsh(0.5 * (K + K.T))
    n_small = int(np.count_nonzero(ev <= ZERO_EIG_RTOL * ev[-1]))
    return _summary(ev[-1], ev[kernel_dim], kernel_dim, n_small, "eigh")


def congruent_condition_number(matrix, reference, transform, kernel=None):
    """Condition number of ``matrix`` through a well-conditioned congruent ``reference``.

    Requires reference = transform^T @ matrix @ transform exactly (a change of
    dof coordinates x = transform @ y). The smallest nonzero eigenvalue of
    ``matrix`` is 1 / sigma_max(L^-1 Z^T transform^T)^2 with L L^T the Cholesky
    factor of the reference restricted to the complement Z of the kernel, so
    it keeps full relative accuracy however badly ``matrix`` is conditioned.
    ``kernel`` holds the known kernel vectors of ``matrix`` as columns.
    """
    K = np.asarray(matrix, dtype=np.float64)
    R = np.asarray(reference, dtype=np.float64)
    Q = np.asarray(transform, dtype=np.float64)
    n = K.shape[0]
    lam_max = np.linalg.eigvalsh(0.5 * (K + K.T))[-1]
    if kernel is None or np.size(kernel) == 0:
        k, Z = 0, np.eye(n)
    else:
        W = Q.T @ np.asarray(kernel, dtype=np.float64).reshape(n, -1)
        k = W.shape[1]
        Z = np.linalg.qr(W, mode="complete")[0][:, k:]
    A = Z.T @ R @ Z
    try:
        L = np.linalg.cholesky(0.5 * (A + A.T))
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("reference matrix is not positive definite off the kernel") from exc
    X = scipy.linalg.solve_triangular(L, (Q @ Z).T, lower=True)
    mu = scipy.linalg.eigh(X @ X.T, eigvals_only=True, subset_by_index=[X.shape[0] - 1, X.shape[0] - 1])[0]
    lam_min = 1.0 / mu
    n_small = k + int(lam_min <= ZERO_EIG_RTOL * lam_max)
    return _summary(lam_max, lam_min, k, n_small, "congruence")


def moment_transform(target, reference):
    """x_target = Q x_reference for two LocalOperators on one element differing only in the moment basis."""
    lay = target.layout
    Q = np.eye(lay.n_dofs)
    if lay.n_internal:
        Q[lay.n_boundary:, lay.n_boundary:] = np.linalg.solve(reference.mats.M.T, target.mats.M.T).T
    return Q


def congruent_reference(target, reference):
    """(Q^T K_target Q, Q) assembled from the well-conditioned operators of ``reference``.

    The consistency part is invariant under the change of moments, but a
    stabilization acting on the moment dofs directly (S1, S3) is not, so the
    reference keeps the target's S: K_C,ref + E^T S_target E with E = Q (I - Pi_ref).
    """
    Q = moment_transform(target, reference)
    E = Q @ (np.eye(len(Q)) - reference.pi)
    return reference.KC + E.T @ target.S @ E, Q


def global_congruent_reference(target, reference):
    """Free-dof (reference matrix, transform) pair for two assembled systems on one mesh."""
    dm = target.dofmap
    R = np.zeros((dm.n_dofs, dm.n_dofs))
    Q = np.eye(dm.n_dofs)
    for k, (a, b) in enumerate(zip(target.elements, reference.elements)):
        Rk, Qk = congruent_reference(a, b)
        idx = dm.cell_dofs[k]
        _kernels.scatter_add(R, Rk, idx)
        nb = a.layout.n_boundary
        Q[np.ix_(idx[nb:], idx[nb:])] = Qk[nb:, nb:]
    free = dm.free
    return R[np.ix_(free, free)], Q[np.ix_(free, free)]


def h1_error(system_or_elements, dofmap, u_dofs, grad_u, qdegree=None):
    """Broken H1 seminorm of u - Pi^nabla u_n summed over the mesh.

    ``grad_u(x, y)`` returns the exact gradient as a pair of arrays.
    """
    elements = system_or_elements.elements if isinstance(system_or_elements, LinearSystem) else system_or_elements
    total = 0.0
    for k, ops in enumerate(elements):
        loc = u_dofs[dofmap.cell_dofs[k]]
        q = polygon_quadrature(ops.polygon, qdegree or 2 * ops.p + 6)
        gx, gy = ops.projected_gradient(loc, q.nodes)
        ux, uy = grad_u(q.nodes[:, 0], q.nodes[:, 1])
        total += q.weights @ ((ux - gx) ** 2 + (uy - gy) ** 2)
    return float(np.sqrt(total))


def interpolate(system_or_elements, dofmap, u, qdegree=None):
    """Global dof vector of a smooth function (vertex/edge values and cell moments)."""
    elements = system_or_elements.elements if isinstance(system_or_elements, LinearSystem) else system_or_elements
    out = np.zeros(dofmap.n_dofs)
    for k, ops in enumerate(elements):
        out[dofmap.cell_dofs[k]] = ops.interpolate(u, qdegree)
    return out
