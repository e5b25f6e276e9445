"""Solver-agnostic semidefinite programming layer.

Programs are declared over complex Hermitian block variables (PSD or free)
with affine equality constraints and affine-PSD memberships. Lowering:

* each side-n Hermitian variable becomes n² real parameters (column-major
  upper triangle: Re/Im of off-diagonal entries, then the diagonal entry);
* equalities are imposed directly in parameter space (n² real rows per
  side-n block, no redundancy);
* PSD requirements go through the real embedding
  H ↦ [[Re H, −Im H], [Im H, Re H]], whose scaled-vector form feeds the
  solver's real PSD triangle cones. Eigenvalues double up, which is harmless
  for sign tests.

The engine is Clarabel; residuals and eigenvalues are always recomputed here
with numpy, so solver trust is limited to proposing candidate points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt
from typing import Callable, Iterable, Mapping, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

from .errors import LhsError
from .operators import HermitianOperator

__all__ = [
    "Variable",
    "LinearTerm",
    "EqualityBlock",
    "PsdMembership",
    "ConicProgram",
    "Solution",
    "SolverConfig",
    "ResidualReport",
    "assemble",
    "solve",
    "check_solution",
    "dump_program",
    "with_constants",
    "with_objective",
    "params_from_mat",
    "mat_from_params",
    "functional_from_mat",
    "lin_map_matrix",
]

_SQRT2 = sqrt(2.0)


# ---------------------------------------------------------------------------
# Hermitian ⇄ real-parameter correspondence


def n_params(side: int) -> int:
    return side * side


def params_from_mat(h: np.ndarray) -> np.ndarray:
    """Column-major upper triangle: (Re, Im) per off-diagonal, then diagonal."""
    n = h.shape[0]
    out = np.empty(n * n)
    k = 0
    for j in range(n):
        for i in range(j):
            out[k] = h[i, j].real
            out[k + 1] = h[i, j].imag
            k += 2
        out[k] = h[j, j].real
        k += 1
    return out


def mat_from_params(side: int, x: np.ndarray) -> np.ndarray:
    h = np.zeros((side, side), dtype=complex)
    k = 0
    for j in range(side):
        for i in range(j):
            h[i, j] = x[k] + 1j * x[k + 1]
            h[j, i] = x[k] - 1j * x[k + 1]
            k += 2
        h[j, j] = x[k]
        k += 1
    return h


def functional_from_mat(c: np.ndarray) -> np.ndarray:
    """Vector f with f · params(X) = tr(C X) for Hermitian C, X."""
    n = c.shape[0]
    out = np.empty(n * n)
    k = 0
    for j in range(n):
        for i in range(j):
            out[k] = 2.0 * c[i, j].real
            out[k + 1] = 2.0 * c[i, j].imag
            k += 2
        out[k] = c[j, j].real
        k += 1
    return out


def _basis_iter(side: int):
    """Hermitian basis elements in parameter order."""
    for j in range(side):
        for i in range(j):
            re = np.zeros((side, side), dtype=complex)
            re[i, j] = re[j, i] = 1.0
            yield re
            im = np.zeros((side, side), dtype=complex)
            im[i, j] = 1j
            im[j, i] = -1j
            yield im
        d = np.zeros((side, side), dtype=complex)
        d[j, j] = 1.0
        yield d


def lin_map_matrix(side_in: int, side_out: int, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Real matrix of a Hermitian→Hermitian linear map, in parameter bases."""
    cols = [params_from_mat(fn(b)) for b in _basis_iter(side_in)]
    m = np.column_stack(cols)
    if m.shape[0] != n_params(side_out):
        raise LhsError("bad-program", "map output side does not match declared side")
    return m


def _svec_index(p: int, q: int) -> int:
    # column-major upper triangle of the embedded matrix
    return q * (q + 1) // 2 + p


def _embed_map(side: int) -> sp.csc_matrix:
    """Sparse map: Hermitian params → scaled svec of the 2n×2n real embedding."""
    n = side
    rows, cols, vals = [], [], []
    k = 0
    for j in range(n):
        for i in range(j):
            rows += [_svec_index(i, j), _svec_index(n + i, n + j)]
            cols += [k, k]
            vals += [_SQRT2, _SQRT2]
            rows += [_svec_index(i, n + j), _svec_index(j, n + i)]
            cols += [k + 1, k + 1]
            vals += [-_SQRT2, _SQRT2]
            k += 2
        rows += [_svec_index(j, j), _svec_index(n + j, n + j)]
        cols += [k, k]
        vals += [1.0, 1.0]
        k += 1
    dim = (2 * n) * (2 * n + 1) // 2
    return sp.csc_matrix((vals, (rows, cols)), shape=(dim, n * n))


_EMBED_CACHE: dict[int, sp.csc_matrix] = {}


def _embed(side: int) -> sp.csc_matrix:
    if side not in _EMBED_CACHE:
        _EMBED_CACHE[side] = _embed_map(side)
    return _EMBED_CACHE[side]


# ---------------------------------------------------------------------------
# Declarative program pieces


@dataclass(frozen=True)
class Variable:
    id: str
    side: int
    kind: str = "psd"  # or "free-hermitian"

    def __post_init__(self):
        if self.kind not in ("psd", "free-hermitian"):
            raise LhsError("bad-program", f"unknown variable kind {self.kind!r}")
        if self.side < 1:
            raise LhsError("bad-program", f"variable side must be ≥ 1, got {self.side}")


@dataclass(frozen=True)
class LinearTerm:
    """Contribution of one variable to an affine block.

    map is a real matrix acting on the variable's parameters (None = identity,
    requires matching sides); scale multiplies on top.
    """

    var: str
    map: np.ndarray | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class EqualityBlock:
    """Σ terms(x) = constant, a Hermitian matrix equality."""

    label: str
    side: int
    terms: tuple[LinearTerm, ...]
    constant: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.constant, dtype=complex)
        if c.shape != (self.side, self.side):
            raise LhsError("bad-program", f"equality {self.label}: constant shape {c.shape}")
        if np.abs(c - c.conj().T).max() > 1e-10:
            raise LhsError("bad-program", f"equality {self.label}: constant not Hermitian")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "constant", c)


@dataclass(frozen=True)
class PsdMembership:
    """constant + Σ terms(x) ⪰ 0 without a slack variable."""

    label: str
    side: int
    terms: tuple[LinearTerm, ...]
    constant: np.ndarray | None = None

    def __post_init__(self):
        c = self.constant
        if c is None:
            c = np.zeros((self.side, self.side), dtype=complex)
        c = np.asarray(c, dtype=complex)
        if c.shape != (self.side, self.side):
            raise LhsError("bad-program", f"membership {self.label}: constant shape {c.shape}")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "constant", c)


@dataclass(frozen=True)
class SolverConfig:
    eps_feas: float = 1e-7
    eps_psd: float = 1e-8
    max_iterations: int | None = None
    inaccurate_band: float = 1e-5

    def __post_init__(self):
        if not (0 < self.eps_psd <= self.eps_feas):
            raise LhsError("bad-parameter", "need 0 < eps_psd ≤ eps_feas")


@dataclass(eq=False)
class ConicProgram:
    variables: tuple[Variable, ...]
    equalities: tuple[EqualityBlock, ...]
    memberships: tuple[PsdMembership, ...]
    objective: dict[str, np.ndarray]
    sense: str
    # lowered form
    offsets: dict[str, int] = field(repr=False, default_factory=dict)
    n_params_total: int = field(repr=False, default=0)
    A: sp.csc_matrix = field(repr=False, default=None)
    b: np.ndarray = field(repr=False, default=None)
    q: np.ndarray = field(repr=False, default=None)
    cones: list = field(repr=False, default_factory=list)
    eq_slices: dict[str, slice] = field(repr=False, default_factory=dict)


@dataclass(frozen=True)
class Solution:
    status: str  # optimal | infeasible | inaccurate | unbounded | numerical-failure
    values: dict[str, HermitianOperator]
    objective: float
    primalResidual: float
    minEigenvalue: float
    iterations: int = 0
    solverStatus: str = ""
    solveTime: float = 0.0


@dataclass(frozen=True)
class ResidualReport:
    equalityResiduals: dict[str, float]
    minEigenvalue: float
    maxResidual: float
    flagged: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.flagged


# ---------------------------------------------------------------------------
# Assembly


def _term_triplets(term: LinearTerm, row0: int, col0: int, p_var: int, p_out: int,
                   rows: list, cols: list, vals: list) -> None:
    if term.map is None:
        if p_var != p_out:
            raise LhsError("bad-program", f"identity term on {term.var}: side mismatch")
        rows.append(row0 + np.arange(p_out))
        cols.append(col0 + np.arange(p_out))
        vals.append(np.full(p_out, term.scale))
    else:
        m = np.asarray(term.map, dtype=float)
        if m.shape != (p_out, p_var):
            raise LhsError(
                "bad-program",
                f"term map on {term.var} has shape {m.shape}, expected {(p_out, p_var)}",
            )
        r, c = np.nonzero(m)
        rows.append(row0 + r)
        cols.append(col0 + c)
        vals.append(term.scale * m[r, c])


def assemble(
    variables: Sequence[Variable],
    equalities: Sequence[EqualityBlock] = (),
    memberships: Sequence[PsdMembership] = (),
    objective: Mapping[str, np.ndarray] | None = None,
    sense: str = "feasibility",
) -> ConicProgram:
    """Lower a declarative program to sparse solver form.

    Raises "bad-program" on any dimension inconsistency. Feasibility programs
    carry a zero objective by construction.
    """
    if sense not in ("min", "max", "feasibility"):
        raise LhsError("bad-program", f"unknown sense {sense!r}")
    if sense == "feasibility" and objective:
        raise LhsError("bad-program", "feasibility programs must not carry an objective")

    var_list = tuple(variables)
    ids = [v.id for v in var_list]
    if len(set(ids)) != len(ids):
        raise LhsError("bad-program", "duplicate variable ids")
    offsets: dict[str, int] = {}
    total = 0
    by_id: dict[str, Variable] = {}
    for v in var_list:
        offsets[v.id] = total
        total += n_params(v.side)
        by_id[v.id] = v

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    b_parts: list[np.ndarray] = []
    eq_slices: dict[str, slice] = {}
    row_count = 0

    def _var(term: LinearTerm) -> Variable:
        if term.var not in by_id:
            raise LhsError("bad-program", f"term references unknown variable {term.var!r}")
        return by_id[term.var]

    for eq in equalities:
        p_out = n_params(eq.side)
        for term in eq.terms:
            v = _var(term)
            _term_triplets(term, row_count, offsets[v.id], n_params(v.side), p_out,
                           rows, cols, vals)
        if eq.label in eq_slices:
            raise LhsError("bad-program", f"duplicate equality label {eq.label!r}")
        eq_slices[eq.label] = slice(row_count, row_count + p_out)
        b_parts.append(params_from_mat(eq.constant))
        row_count += p_out

    n_eq_rows = row_count

    # Nonnegative cone: side-1 PSD variables, then side-1 memberships.
    nonneg_rows = 0
    for v in var_list:
        if v.kind == "psd" and v.side == 1:
            rows.append(np.array([row_count]))
            cols.append(np.array([offsets[v.id]]))
            vals.append(np.array([-1.0]))
            b_parts.append(np.zeros(1))
            row_count += 1
            nonneg_rows += 1
    scalar_members = [m for m in memberships if m.side == 1]
    matrix_members = [m for m in memberships if m.side > 1]
    for mem in scalar_members:
        for term in mem.terms:
            v = _var(term)
            _term_triplets(
                LinearTerm(term.var, term.map, -term.scale),
                row_count, offsets[v.id], n_params(v.side), 1, rows, cols, vals,
            )
        b_parts.append(np.array([mem.constant[0, 0].real]))
        row_count += 1
        nonneg_rows += 1

    # PSD triangle cones: matrix PSD variables, then matrix memberships.
    psd_sides: list[int] = []
    composed_cache: dict[tuple[int, int], sp.csc_matrix] = {}
    for v in var_list:
        if v.kind == "psd" and v.side > 1:
            emb = _embed(v.side)
            coo = emb.tocoo()
            rows.append(row_count + coo.row)
            cols.append(offsets[v.id] + coo.col)
            vals.append(-coo.data)
            b_parts.append(np.zeros(emb.shape[0]))
            row_count += emb.shape[0]
            psd_sides.append(2 * v.side)
    for mem in matrix_members:
        emb = _embed(mem.side)
        for term in mem.terms:
            v = _var(term)
            if term.map is None:
                if v.side != mem.side:
                    raise LhsError("bad-program", f"membership {mem.label}: side mismatch")
                composed = emb
            else:
                key = (id(term.map), mem.side)
                if key not in composed_cache:
                    m = np.asarray(term.map, dtype=float)
                    if m.shape != (n_params(mem.side), n_params(v.side)):
                        raise LhsError(
                            "bad-program",
                            f"membership {mem.label}: map shape {m.shape}",
                        )
                    composed_cache[key] = (emb @ sp.csc_matrix(m)).tocsc()
                composed = composed_cache[key]
            coo = composed.tocoo()
            rows.append(row_count + coo.row)
            cols.append(offsets[v.id] + coo.col)
            vals.append(-term.scale * coo.data)
        b_parts.append(np.asarray((emb @ params_from_mat(mem.constant))).ravel())
        row_count += emb.shape[0]
        psd_sides.append(2 * mem.side)

    A = sp.csc_matrix(
        (np.concatenate(vals) if vals else np.zeros(0),
         (np.concatenate(rows) if rows else np.zeros(0, dtype=int),
          np.concatenate(cols) if cols else np.zeros(0, dtype=int))),
        shape=(row_count, total),
    )
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)

    q = np.zeros(total)
    obj = dict(objective or {})
    for var_id, coeff in obj.items():
        if var_id not in by_id:
            raise LhsError("bad-program", f"objective references unknown variable {var_id!r}")
        c = coeff.entries if isinstance(coeff, HermitianOperator) else np.asarray(coeff, dtype=complex)
        side = by_id[var_id].side
        if c.shape != (side, side):
            raise LhsError("bad-program", f"objective coefficient for {var_id}: shape {c.shape}")
        q[offsets[var_id] : offsets[var_id] + side * side] += functional_from_mat(c)
    if sense == "max":
        q = -q

    cones: list = []
    if n_eq_rows:
        cones.append(clarabel.ZeroConeT(n_eq_rows))
    if nonneg_rows:
        cones.append(clarabel.NonnegativeConeT(nonneg_rows))
    cones.extend(clarabel.PSDTriangleConeT(s) for s in psd_sides)

    return ConicProgram(
        variables=var_list,
        equalities=tuple(equalities),
        memberships=tuple(memberships),
        objective=obj,
        sense=sense,
        offsets=offsets,
        n_params_total=total,
        A=A,
        b=b,
        q=q,
        cones=cones,
        eq_slices=eq_slices,
    )


def with_constants(program: ConicProgram, constants: Mapping[str, np.ndarray]) -> ConicProgram:
    """New program sharing the lowered matrix, with equality constants swapped.

    Only labels present in ``constants`` change; this is the cheap path for
    re-certifying many states against one measurement set.
    """
    b = program.b.copy()
    new_eqs = list(program.equalities)
    for idx, eq in enumerate(new_eqs):
        if eq.label in constants:
            c = np.asarray(constants[eq.label], dtype=complex)
            new_eqs[idx] = EqualityBlock(eq.label, eq.side, eq.terms, c)
            b[program.eq_slices[eq.label]] = params_from_mat(new_eqs[idx].constant)
    missing = set(constants) - {e.label for e in program.equalities}
    if missing:
        raise LhsError("bad-program", f"no equality labeled {sorted(missing)}")
    return replace(program, equalities=tuple(new_eqs), b=b)


def with_objective(program: ConicProgram, objective: Mapping[str, np.ndarray], sense: str | None = None) -> ConicProgram:
    """New program sharing the lowered matrix, with the objective swapped."""
    new_sense = sense or program.sense
    if new_sense == "feasibility":
        raise LhsError("bad-program", "cannot set an objective on a feasibility program")
    q = np.zeros(program.n_params_total)
    obj = dict(objective)
    by_id = {v.id: v for v in program.variables}
    for var_id, coeff in obj.items():
        if var_id not in by_id:
            raise LhsError("bad-program", f"objective references unknown variable {var_id!r}")
        c = coeff.entries if isinstance(coeff, HermitianOperator) else np.asarray(coeff, dtype=complex)
        q[program.offsets[var_id] : program.offsets[var_id] + n_params(by_id[var_id].side)] = functional_from_mat(c)
    if new_sense == "max":
        q = -q
    return replace(program, objective=obj, q=q, sense=new_sense)


# ---------------------------------------------------------------------------
# Solving


_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "inaccurate",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "numerical-failure",
    "MaxTime": "numerical-failure",
    "NumericalError": "numerical-failure",
    "InsufficientProgress": "numerical-failure",
}


def _residuals(program: ConicProgram, values: Mapping[str, np.ndarray]) -> tuple[dict[str, float], float]:
    eq_res: dict[str, float] = {}
    for eq in program.equalities:
        acc = -eq.constant.astype(complex)
        for term in eq.terms:
            x = values[term.var]
            if term.map is None:
                acc = acc + term.scale * x
            else:
                p = np.asarray(term.map, dtype=float) @ params_from_mat(x)
                acc = acc + term.scale * mat_from_params(eq.side, p)
        eq_res[eq.label] = float(np.abs(acc).max()) if acc.size else 0.0

    min_eig = np.inf
    for v in program.variables:
        if v.kind == "psd":
            x = values[v.id]
            e = x[0, 0].real if v.side == 1 else float(np.linalg.eigvalsh(x)[0])
            min_eig = min(min_eig, e)
    for mem in program.memberships:
        acc = mem.constant.astype(complex)
        for term in mem.terms:
            x = values[term.var]
            if term.map is None:
                acc = acc + term.scale * x
            else:
                p = np.asarray(term.map, dtype=float) @ params_from_mat(x)
                acc = acc + term.scale * mat_from_params(mem.side, p)
        e = acc[0, 0].real if mem.side == 1 else float(np.linalg.eigvalsh(acc)[0])
        min_eig = min(min_eig, e)
    if not np.isfinite(min_eig):
        min_eig = 0.0
    return eq_res, float(min_eig)


def solve(program: ConicProgram, config: SolverConfig = SolverConfig()) -> Solution:
    """Run the conic solver and post-validate the returned point.

    Status optimal is only reported when our own residual check confirms
    primal feasibility at eps_feas and PSD blocks at -eps_psd; a point that
    fails lands in the inaccurate band or is downgraded to numerical-failure.
    """
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    # Default 1e-8 stalls at AlmostSolved on the larger strategy programs.
    settings.static_regularization_constant = 1e-7
    if config.max_iterations is not None:
        settings.max_iter = config.max_iterations
    P = sp.csc_matrix((program.n_params_total, program.n_params_total))
    try:
        solver = clarabel.DefaultSolver(P, program.q, program.A, program.b, program.cones, settings)
        raw = solver.solve()
    except (KeyboardInterrupt, SystemExit):
        raise
    except BaseException as exc:  # native solver panics are not Exception subclasses
        return Solution(
            status="numerical-failure", values={}, objective=float("nan"),
            primalResidual=float("inf"), minEigenvalue=float("-inf"),
            solverStatus=f"exception: {exc}",
        )
    raw_status = str(raw.status)
    status = _STATUS_MAP.get(raw_status, "numerical-failure")
    solve_time = float(getattr(raw, "solve_time", 0.0))

    if status in ("infeasible", "unbounded"):
        return Solution(
            status=status, values={}, objective=float("nan"),
            primalResidual=float("inf"), minEigenvalue=float("-inf"),
            iterations=raw.iterations, solverStatus=raw_status, solveTime=solve_time,
        )

    # Stalled statuses (InsufficientProgress, MaxIterations, ...) still carry
    # the current iterate; the classification below rests on our own residual
    # check, so the solver verdict only caps how much the objective is trusted.
    x = np.asarray(raw.x)
    if x.size != program.n_params_total or not np.all(np.isfinite(x)):
        return Solution(
            status="numerical-failure", values={}, objective=float("nan"),
            primalResidual=float("inf"), minEigenvalue=float("-inf"),
            iterations=raw.iterations, solverStatus=raw_status, solveTime=solve_time,
        )
    mats = {
        v.id: mat_from_params(v.side, x[program.offsets[v.id] : program.offsets[v.id] + n_params(v.side)])
        for v in program.variables
    }
    eq_res, min_eig = _residuals(program, mats)
    residual = max(eq_res.values(), default=0.0)

    if program.sense == "feasibility":
        objective = 0.0
    else:
        raw_obj = float(program.q @ x)
        objective = -raw_obj if program.sense == "max" else raw_obj

    point_ok = residual <= config.eps_feas and min_eig >= -config.eps_psd
    if point_ok:
        # A verified feasible point settles a feasibility question regardless
        # of how confident the solver was; optimization senses keep the
        # solver's accuracy verdict, downgraded to inaccurate if it stalled.
        if program.sense == "feasibility":
            status = "optimal"
        elif status == "numerical-failure":
            status = "inaccurate"
    else:
        if residual <= config.inaccurate_band and min_eig >= -config.inaccurate_band:
            status = "inaccurate"
        else:
            status = "numerical-failure"

    values = {
        v.id: HermitianOperator(_square_dims(v.side), mats[v.id], v.id)
        for v in program.variables
    }
    return Solution(
        status=status,
        values=values,
        objective=objective,
        primalResidual=residual,
        minEigenvalue=min_eig,
        iterations=raw.iterations,
        solverStatus=raw_status,
        solveTime=solve_time,
    )


def _square_dims(side: int) -> tuple[int, ...]:
    # Variables do not carry tensor structure; a flat single-system dim is
    # enough for HermitianOperator container purposes.
    return (side,)


def check_solution(program: ConicProgram, sol: Solution, config: SolverConfig = SolverConfig()) -> ResidualReport:
    """Recompute all residuals from sol.values, independent of the solver."""
    if sol.status not in ("optimal", "inaccurate"):
        raise LhsError("bad-program", f"no point to check for status {sol.status!r}")
    mats = {k: v.entries for k, v in sol.values.items()}
    eq_res, min_eig = _residuals(program, mats)
    flagged = tuple(
        sorted(label for label, r in eq_res.items() if r > config.eps_feas)
    ) + (("psd",) if min_eig < -config.eps_feas else ())
    return ResidualReport(
        equalityResiduals=eq_res,
        minEigenvalue=min_eig,
        maxResidual=max(eq_res.values(), default=0.0),
        flagged=flagged,
    )


def dump_program(program: ConicProgram) -> str:
    """Deterministic plain-text listing for cross-solver debugging."""
    lines = [f"sense {program.sense}"]
    for v in program.variables:
        lines.append(f"var {v.id} side={v.side} kind={v.kind}")
    for eq in program.equalities:
        parts = " + ".join(
            f"{t.scale:g}*{'I' if t.map is None else 'M'}[{t.var}]" for t in eq.terms
        )
        lines.append(f"eq {eq.label} side={eq.side}: {parts} = C(norm={np.abs(eq.constant).max():.6g})")
    for mem in program.memberships:
        parts = " + ".join(
            f"{t.scale:g}*{'I' if t.map is None else 'M'}[{t.var}]" for t in mem.terms
        )
        lines.append(
            f"psd {mem.label} side={mem.side}: C(norm={np.abs(mem.constant).max():.6g}) + {parts} ⪰ 0"
        )
    for var_id in sorted(program.objective):
        coeff = program.objective[var_id]
        ent = coeff.entries if isinstance(coeff, HermitianOperator) else np.asarray(coeff)
        lines.append(f"obj {var_id} coeff-norm={np.abs(ent).max():.6g}")
    return "\n".join(lines)
