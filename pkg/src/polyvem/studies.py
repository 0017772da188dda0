"""Study drivers: p sweeps on a fixed mesh and i sweeps on degenerating single elements."""
import csv
import io
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .assembly import (
    assemble,
    condition_number,
    congruent_condition_number,
    congruent_reference,
    global_congruent_reference,
    h1_error,
    solve,
)
from .errors import ConditioningError, FitError, PolyVEMError
from .local import StabilizationKind, local_operators
from .mesh import (
    collapsing_hexagon,
    generate_hexagonal_mesh,
    generate_square_mesh,
    generate_voronoi_lloyd_mesh,
    hanging_square,
    read_mesh,
)
from .poly import BasisKind

STUDIES = ("p-study", "convergence", "patch-test", "collapse", "hanging")
P_LIMITS = (1, 15)
# above this double-precision estimate the smallest eigenvalue is recomputed by congruence
REFINE_COND = 1e8


@dataclass
class StudyConfig:
    study: str
    mesh: str = "square"
    n: int = 4
    seeds: int = 25
    iters: int = 100
    rng: int = 0
    mesh_file: str = None
    pmin: int = None
    pmax: int = None
    basis: str = "ortho-gs"
    stab: str = "s1"
    imin: int = 1
    imax: int = 8
    solution: str = None
    fit: bool = False
    refine: bool = True

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"unknown study {self.study!r}; expected one of {', '.join(STUDIES)}")
        local = self.study in ("collapse", "hanging")
        if self.pmin is None:
            self.pmin = 6 if local else 1
        if self.pmax is None:
            self.pmax = self.pmin if local else 10
        if local and self.pmin != self.pmax:
            raise ValueError("element studies use a single degree: pmin must equal pmax")
        if not (P_LIMITS[0] <= self.pmin <= self.pmax <= P_LIMITS[1]):
            raise ValueError(f"p range must satisfy {P_LIMITS[0]} <= pmin <= pmax <= {P_LIMITS[1]}")
        if self.mesh not in ("square", "hex", "voronoi", "file"):
            raise ValueError(f"unknown mesh kind {self.mesh!r}")
        if (self.mesh == "file") != (self.mesh_file is not None):
            raise ValueError("a mesh file path is required exactly when mesh='file'")
        if not 1 <= self.imin <= self.imax:
            raise ValueError("i range must satisfy 1 <= imin <= imax")
        if self.solution is None:
            self.solution = "linear" if self.study == "patch-test" else "sinsin"
        if self.solution not in ("sinsin", "linear"):
            raise ValueError(f"unknown solution {self.solution!r}")
        self.basis = BasisKind.parse(self.basis).value
        self.stab = StabilizationKind.parse(self.stab).value

    @property
    def p_values(self):
        return list(range(self.pmin, self.pmax + 1))

    def build_mesh(self):
        if self.mesh == "square":
            return generate_square_mesh(self.n)
        if self.mesh == "hex":
            return generate_hexagonal_mesh(self.n)
        if self.mesh == "voronoi":
            return generate_voronoi_lloyd_mesh(self.seeds, self.iters, self.rng)
        return read_mesh(self.mesh_file)


@dataclass
class StudyRow:
    var: float
    cond: float = math.nan
    error: float = math.nan
    residual: float = math.nan
    flags: list = field(default_factory=list)


@dataclass
class PowerLawFit:
    a: float
    b: float
    residual: float
    n_points: int


@dataclass
class StudyReport:
    study: str
    variable: str
    rows: list
    config: StudyConfig = None
    fit: PowerLawFit = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["var", "cond", "error", "residual", "flags"])
        for r in self.rows:
            w.writerow([_fmt(r.var), _fmt(r.cond), _fmt(r.error), _fmt(r.residual), ";".join(r.flags)])
        return buf.getvalue()

    def to_dat(self):
        lines = [f"# {self.study}: {self.variable} cond error residual"]
        if self.fit is not None:
            lines.append(f"# fit a={self.fit.a:.17g} b={self.fit.b:.17g} residual={self.fit.residual:.17g}")
        for r in self.rows:
            lines.append(" ".join(_fmt(v) for v in (r.var, r.cond, r.error, r.residual)))
        return "\n".join(lines) + "\n"

    def fit_dict(self):
        return None if self.fit is None else asdict(self.fit)


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def parse_csv(text):
    """Rows of a report CSV back to StudyRow objects (values round-trip exactly)."""
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for rec in reader:
        flags = [f for f in rec["flags"].split(";") if f]
        rows.append(StudyRow(float(rec["var"]), float(rec["cond"]), float(rec["error"]), float(rec["residual"]), flags))
    return rows


# --------------------------------------------------------------------------- fitting

def fit_power_law(rows):
    """Least-squares fit of log(value) = log(a) + b log(x) over (x, value) pairs.

    Returns a PowerLawFit whose residual is the root-mean-square log misfit.
    """
    data = np.asarray(list(rows), dtype=np.float64).reshape(-1, 2)
    if len(data) < 3:
        raise FitError("a power-law fit needs at least 3 points")
    if not np.all(np.isfinite(data)) or np.any(data <= 0):
        raise FitError("a power-law fit needs finite positive abscissae and values")
    x, y = np.log(data[:, 0]), np.log(data[:, 1])
    A = np.column_stack([np.ones_like(x), x])
    (loga, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ [loga, b] - y) ** 2)))
    return PowerLawFit(float(np.exp(loga)), float(b), res, len(data))


def linear_fit_r2(x, y):
    """Coefficient of determination of the least-squares line through (x, y)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coef = np.polyfit(x, y, 1)
    ss_res = np.sum((np.polyval(coef, x) - y) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 1.0


# --------------------------------------------------------------------------- exact solutions

def _sinsin():
    pi = np.pi

    def f(x, y):
        return 2.0 * pi**2 * np.sin(pi * x) * np.sin(pi * y)

    def grad(x, y):
        return pi * np.cos(pi * x) * np.sin(pi * y), pi * np.sin(pi * x) * np.cos(pi * y)

    return f, 0.0, grad


def _linear():
    def g(x, y):
        return 1.0 - x - y

    def grad(x, y):
        return -np.ones_like(x), -np.ones_like(y)

    return 0.0, g, grad


SOLUTIONS = {"sinsin": _sinsin, "linear": _linear}


# --------------------------------------------------------------------------- spectra

def _spectrum(matrix, kernel_dim, reference=None):
    """Condition number of matrix; ``reference`` is a callable giving (ref_matrix, transform, kernel)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        summary = condition_number(matrix, kernel_dim)
    if reference is not None and not summary.condition < REFINE_COND:
        ref, Q, kernel = reference()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            summary = congruent_condition_number(matrix, ref, Q, kernel)
    return summary


def _row_flags(summary):
    return [summary.warning] if summary.warning else []


# --------------------------------------------------------------------------- global studies

def _global_row(config, mesh, p, f, g, grad):
    row = StudyRow(p)
    try:
        system = assemble(mesh, p, config.basis, config.stab, f=f, g=g)
    except PolyVEMError:
        row.flags.append("solver-fail")
        return row
    reference = None
    if config.refine and config.basis != BasisKind.ORTHO_GS.value:
        def reference():
            ref = assemble(mesh, p, BasisKind.ORTHO_GS, config.stab)
            return (*global_congruent_reference(system, ref), None)
    if system.matrix.shape[0]:
        summary = _spectrum(system.matrix, 0, reference)
        row.cond = summary.condition
        row.flags += _row_flags(summary)
    if grad is not None:
        try:
            result = solve(system)
        except ConditioningError:
            row.flags.append("solver-fail")
            return row
        row.residual = result.residual
        row.error = h1_error(system, system.dofmap, result.x, grad)
    return row


def _finish(config, rows, variable):
    report = StudyReport(config.study, variable, sorted(rows, key=lambda r: r.var), config)
    if config.fit:
        pts = [(r.var, r.cond) for r in report.rows if np.isfinite(r.cond) and r.cond > 0 and not r.flags]
        if len(report.rows) >= 3:
            report.fit = fit_power_law(pts)
    return report


def run_p_study(config, mesh=None):
    """Global condition number of the Dirichlet-reduced stiffness matrix for each p."""
    mesh = mesh or config.build_mesh()
    rows = [_global_row(config, mesh, p, None, None, None) for p in config.p_values]
    return _finish(config, rows, "p")


def run_convergence(config, mesh=None):
    """Error |u - Pi u_h|_{1,h} and condition number for each p against a closed-form solution."""
    mesh = mesh or config.build_mesh()
    f, g, grad = SOLUTIONS[config.solution]()
    rows = [_global_row(config, mesh, p, f, g, grad) for p in config.p_values]
    return _finish(config, rows, "p")


def run_patch(config, mesh=None):
    if config.solution != "linear":
        raise ValueError("the patch test uses the linear solution")
    return run_convergence(config, mesh)


# --------------------------------------------------------------------------- local studies

def _local_row(polygon, i, p, basis, stab, refine):
    row = StudyRow(i)
    try:
        ops = local_operators(polygon, p, basis, stab)
    except PolyVEMError:
        row.flags.append("solver-fail")
        return row
    reference = None
    if refine and ops.basis is not BasisKind.ORTHO_GS:
        def reference():
            ref = local_operators(polygon, p, BasisKind.ORTHO_GS, stab)
            const = ops.interpolate(lambda x, y: np.ones_like(x))
            return (*congruent_reference(ops, ref), const[:, None])
    summary = _spectrum(ops.K, 1, reference)
    row.cond = summary.condition
    row.flags += _row_flags(summary)
    return row


def _local_study(config, family):
    p = config.pmin
    rows = [
        _local_row(family(i), i, p, config.basis, config.stab, config.refine)
        for i in range(config.imin, config.imax + 1)
    ]
    return _finish(config, rows, "i")


def run_collapse_study(config):
    """Local condition number (constants removed) on collapsing_hexagon(i)."""
    return _local_study(config, collapsing_hexagon)


def run_hanging_study(config):
    """Local condition number (constants removed) on hanging_square(i)."""
    return _local_study(config, hanging_square)


RUNNERS = {
    "p-study": run_p_study,
    "convergence": run_convergence,
    "patch-test": run_patch,
    "collapse": run_collapse_study,
    "hanging": run_hanging_study,
}


def run_study(config):
    return RUNNERS[config.study](config)
