"""Entanglement quantifiers, their optimal witnesses, and the fully
decomposable genuine-multipartite-entanglement witness.

Separability memberships are implemented as the PPT cone (PSD plus PSD
partial transpose), which is exact for 2⊗2 and 2⊗3 and a relaxation above
that; dual witnesses are therefore nonnegative on every PPT state. All seven
quantifier programs come in a primal (noise-robustness) and a dual (witness)
form; `quantify` runs both so the result carries the witness alongside μ*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import (
    EqualityBlock,
    LinearTerm,
    PsdMembership,
    SolverConfig,
    Variable,
    assemble,
    functional_from_mat,
    lin_map_matrix,
    params_from_mat,
    solve,
)
from .errors import LhsError
from .operators import DensityMatrix, HermitianOperator, partial_trace

__all__ = [
    "QUANTIFIER_KINDS",
    "WitnessResult",
    "GmeWitness",
    "quantify",
    "optimal_witness",
    "witness_value",
    "gme_witness",
]

QUANTIFIER_KINDS = (
    "one-sided-random-robustness",
    "one-sided-fixed-robustness",
    "one-sided-generalized-robustness",
    "random-robustness",
    "generalized-robustness",
    "best-separable-approximation",
    "negativity",
)

_ROBUSTNESS_KINDS = QUANTIFIER_KINDS[:5]


@dataclass(frozen=True)
class WitnessResult:
    kind: str
    mu: float
    E: float
    W: HermitianOperator
    relaxation: tuple[str, ...] = ("ppt",)
    dualFeasible: bool = False


@dataclass(frozen=True)
class GmeWitness:
    W: HermitianOperator
    decompositions: dict[str, tuple[HermitianOperator, HermitianOperator]]
    value: float


def _pt_fn(dims: tuple[int, ...], party: int):
    n = len(dims)

    def pt(h: np.ndarray) -> np.ndarray:
        arr = h.reshape(dims + dims)
        perm = list(range(2 * n))
        perm[party], perm[n + party] = perm[n + party], perm[party]
        side = h.shape[0]
        return arr.transpose(perm).reshape(side, side)

    return pt


def _check_dims(rho: DensityMatrix, allow_bound: bool) -> tuple[int, int]:
    dims = rho.dims
    if len(dims) == 2 and dims[0] == 2 and dims[1] <= 3:
        return dims
    if allow_bound and len(dims) == 2:
        return dims
    raise LhsError(
        "ppt-not-exact",
        f"PPT is not equivalent to separability for dims {list(dims)}; "
        "pass allow_bound to accept a lower bound",
    )


def _default_gamma() -> np.ndarray:
    return np.diag([1.0, 0.0]).astype(complex)


def _fixed_robustness_diverges(s: np.ndarray, m: np.ndarray) -> bool:
    """Whether min μ s.t. s + μ m ⪰ 0 (m ⪰ 0) has no finite solution.

    Infeasible for every μ exactly when s restricted to ker(m) has a negative
    eigenvalue, or when that restriction is singular and the singular
    directions couple to the range of m (then the violation decays like 1/μ
    but never vanishes, the weakly infeasible case).
    """
    eigvals, eigvecs = np.linalg.eigh(m)
    scale = max(1.0, float(eigvals[-1]))
    kernel = eigvecs[:, eigvals <= 1e-12 * scale]
    if kernel.shape[1] == 0:
        return False
    rng = eigvecs[:, eigvals > 1e-12 * scale]
    s_kk = kernel.conj().T @ s @ kernel
    kk_vals, kk_vecs = np.linalg.eigh(s_kk)
    if kk_vals[0] < -1e-10:
        return True
    null = kk_vecs[:, np.abs(kk_vals) <= 1e-10]
    if null.shape[1] == 0:
        return False
    coupling = rng.conj().T @ s @ kernel @ null
    return bool(np.abs(coupling).max() > 1e-8)


def _reject_divergent(r: np.ndarray, pt, noise: np.ndarray) -> None:
    if _fixed_robustness_diverges(pt(r), pt(noise)):
        raise LhsError(
            "unbounded-robustness",
            "the fixed noise gamma (x) rho_B does not cover the state; "
            "one-sided fixed robustness diverges for this pair",
        )


def _energy(kind: str, mu: float) -> float:
    if kind in _ROBUSTNESS_KINDS:
        return mu / (1 + mu)
    return mu


def _solved(program, config: SolverConfig):
    sol = solve(program, config)
    if sol.status not in ("optimal", "inaccurate"):
        raise LhsError(
            "solver-failure",
            f"quantifier program ended with status {sol.status} ({sol.solverStatus})",
        )
    return sol


def _primal_mu(rho: DensityMatrix, kind: str, gamma: np.ndarray, config: SolverConfig) -> float:
    dA, dB = rho.dims
    n = dA * dB
    r = rho.entries
    pt = _pt_fn(rho.dims, 0)
    pt_map = lin_map_matrix(n, n, pt)

    if kind in ("one-sided-random-robustness", "one-sided-fixed-robustness", "random-robustness"):
        rho_b = partial_trace(rho, (1,)).entries
        if kind == "one-sided-random-robustness":
            noise = np.kron(np.eye(dA) / dA, rho_b)
        elif kind == "one-sided-fixed-robustness":
            noise = np.kron(gamma, rho_b)
            _reject_divergent(r, pt, noise)
        else:
            noise = np.eye(n) / n
        # rho + mu*noise >= 0 holds automatically (mu >= 0, noise PSD), so
        # only the partial-transpose block constrains mu.
        mems = [
            PsdMembership("ppt", n, (LinearTerm("mu", map=params_from_mat(pt(noise))[:, None]),), pt(r)),
        ]
        prog = assemble(
            [Variable("mu", 1, "psd")], memberships=mems,
            objective={"mu": np.array([[1.0]])}, sense="min",
        )
        return max(0.0, _solved(prog, config).objective)

    if kind == "one-sided-generalized-robustness":
        rho_b = partial_trace(rho, (1,)).entries
        emb_pt = lin_map_matrix(dA, n, lambda w: pt(np.kron(w, rho_b)))
        mems = [
            PsdMembership("ppt", n, (LinearTerm("wA", map=emb_pt),), pt(r)),
        ]
        prog = assemble(
            [Variable("wA", dA, "psd")], memberships=mems,
            objective={"wA": np.eye(dA)}, sense="min",
        )
        return max(0.0, _solved(prog, config).objective)

    if kind == "generalized-robustness":
        mems = [PsdMembership("ppt", n, (LinearTerm("w", map=pt_map),), pt(r))]
        prog = assemble(
            [Variable("w", n, "psd")], memberships=mems,
            objective={"w": np.eye(n)}, sense="min",
        )
        return max(0.0, _solved(prog, config).objective)

    if kind == "best-separable-approximation":
        mems = [
            PsdMembership("ppt", n, (LinearTerm("w", map=pt_map),)),
            PsdMembership("cap", n, (LinearTerm("w", scale=-1.0),), r),
        ]
        prog = assemble(
            [Variable("w", n, "psd")], memberships=mems,
            objective={"w": np.eye(n)}, sense="max",
        )
        return max(0.0, 1.0 - _solved(prog, config).objective)

    if kind == "negativity":
        mems = [PsdMembership("shift", n, (LinearTerm("w"),), pt(r))]
        prog = assemble(
            [Variable("w", n, "psd")], memberships=mems,
            objective={"w": np.eye(n)}, sense="min",
        )
        return max(0.0, _solved(prog, config).objective)

    raise LhsError("bad-parameter", f"unknown quantifier kind {kind!r}")


def _dual_witness(rho: DensityMatrix, kind: str, gamma: np.ndarray, config: SolverConfig):
    dA, dB = rho.dims
    n = dA * dB
    r = rho.entries
    pt = _pt_fn(rho.dims, 0)
    pt_map = lin_map_matrix(n, n, pt)

    if kind == "negativity":
        mems = [
            PsdMembership("pt-psd", n, (LinearTerm("W", map=pt_map),)),
            PsdMembership("pt-cap", n, (LinearTerm("W", map=pt_map, scale=-1.0),), np.eye(n)),
        ]
        prog = assemble(
            [Variable("W", n, "free-hermitian")], memberships=mems,
            objective={"W": r}, sense="min",
        )
        sol = _solved(prog, config)
        w = sol.values["W"].entries
        return w, None, None, max(0.0, -sol.objective)

    variables = [
        Variable("W", n, "free-hermitian"),
        Variable("P", n, "psd"),
        Variable("Q", n, "psd"),
    ]
    eqs = [
        EqualityBlock(
            "decompose", n,
            (
                LinearTerm("W"),
                LinearTerm("P", scale=-1.0),
                LinearTerm("Q", map=pt_map, scale=-1.0),
            ),
            np.zeros((n, n)),
        )
    ]
    mems: list[PsdMembership] = []

    if kind in ("one-sided-random-robustness", "one-sided-fixed-robustness", "random-robustness"):
        rho_b = partial_trace(rho, (1,)).entries
        if kind == "one-sided-random-robustness":
            noise = np.kron(np.eye(dA) / dA, rho_b)
            bound = 1.0
        elif kind == "one-sided-fixed-robustness":
            noise = np.kron(gamma, rho_b)
            _reject_divergent(r, pt, noise)
            bound = 1.0
        else:
            noise = np.eye(n)
            bound = float(n)
        variables.append(Variable("slack", 1, "psd"))
        eqs.append(
            EqualityBlock(
                "cap", 1,
                (
                    LinearTerm("W", map=functional_from_mat(noise)[None, :]),
                    LinearTerm("slack"),
                ),
                np.array([[bound]]),
            )
        )
    elif kind == "one-sided-generalized-robustness":
        rho_b = partial_trace(rho, (1,)).entries
        shrink = lin_map_matrix(
            n, dA,
            lambda w: _trace_b(w @ np.kron(np.eye(dA), rho_b), dA, dB),
        )
        mems.append(
            PsdMembership("marginal-cap", dA, (LinearTerm("W", map=shrink, scale=-1.0),), np.eye(dA))
        )
    elif kind == "generalized-robustness":
        mems.append(PsdMembership("cap", n, (LinearTerm("W", scale=-1.0),), np.eye(n)))
    elif kind == "best-separable-approximation":
        mems.append(PsdMembership("floor", n, (LinearTerm("W"),), np.eye(n)))
    else:
        raise LhsError("bad-parameter", f"unknown quantifier kind {kind!r}")

    prog = assemble(variables, eqs, mems, objective={"W": r}, sense="min")
    sol = _solved(prog, config)
    return (
        sol.values["W"].entries,
        sol.values["P"].entries,
        sol.values["Q"].entries,
        max(0.0, -sol.objective),
    )


def _trace_b(m: np.ndarray, dA: int, dB: int) -> np.ndarray:
    return np.einsum("ibjb->ij", m.reshape(dA, dB, dA, dB))


def _dual_feasible(rho: DensityMatrix, kind: str, gamma: np.ndarray,
                   w: np.ndarray, p: np.ndarray | None, q: np.ndarray | None,
                   tol: float = 1e-7) -> bool:
    dA, dB = rho.dims
    n = dA * dB
    pt = _pt_fn(rho.dims, 0)
    if kind == "negativity":
        wg = pt(w)
        eigs = np.linalg.eigvalsh(wg)
        return bool(eigs[0] >= -tol and eigs[-1] <= 1 + tol)
    if p is None or q is None:
        return False
    ok = (
        np.abs(w - p - pt(q)).max() <= tol
        and np.linalg.eigvalsh(p)[0] >= -tol
        and np.linalg.eigvalsh(q)[0] >= -tol
    )
    if not ok:
        return False
    rho_b = partial_trace(rho, (1,)).entries
    if kind == "one-sided-random-robustness":
        return float(np.trace(w @ np.kron(np.eye(dA) / dA, rho_b)).real) <= 1 + tol
    if kind == "one-sided-fixed-robustness":
        return float(np.trace(w @ np.kron(gamma, rho_b)).real) <= 1 + tol
    if kind == "one-sided-generalized-robustness":
        marg = _trace_b(w @ np.kron(np.eye(dA), rho_b), dA, dB)
        return float(np.linalg.eigvalsh(np.eye(dA) - marg)[0]) >= -tol
    if kind == "random-robustness":
        return float(np.trace(w).real) <= n + tol
    if kind == "generalized-robustness":
        return float(np.linalg.eigvalsh(np.eye(n) - w)[0]) >= -tol
    if kind == "best-separable-approximation":
        return float(np.linalg.eigvalsh(np.eye(n) + w)[0]) >= -tol
    return False


def quantify(
    rho: DensityMatrix,
    kind: str,
    config: SolverConfig = SolverConfig(),
    gamma: HermitianOperator | None = None,
    allow_bound: bool = False,
) -> WitnessResult:
    """μ* and E for one quantifier, with the optimal witness attached.

    Exact for dims [2,2] and [2,3]; larger systems give a lower bound and are
    refused unless allow_bound is set.
    """
    if kind not in QUANTIFIER_KINDS:
        raise LhsError("bad-parameter", f"unknown quantifier kind {kind!r}")
    dA, dB = _check_dims(rho, allow_bound)
    g = gamma.entries if gamma is not None else _default_gamma()
    if g.shape != (dA, dA):
        raise LhsError("bad-dims", f"gamma must act on the {dA}-dim side")
    mu = _primal_mu(rho, kind, g, config)
    w, p, q, _ = _dual_witness(rho, kind, g, config)
    return WitnessResult(
        kind=kind,
        mu=mu,
        E=_energy(kind, mu),
        W=HermitianOperator(rho.dims, w, f"{kind}-witness"),
        relaxation=("ppt",),
        dualFeasible=_dual_feasible(rho, kind, g, w, p, q),
    )


def optimal_witness(
    rho: DensityMatrix,
    kind: str,
    config: SolverConfig = SolverConfig(),
    gamma: HermitianOperator | None = None,
    allow_bound: bool = False,
) -> WitnessResult:
    """Dual solve only: the witness and the μ* implied by its value on ρ."""
    if kind not in QUANTIFIER_KINDS:
        raise LhsError("bad-parameter", f"unknown quantifier kind {kind!r}")
    dA, dB = _check_dims(rho, allow_bound)
    g = gamma.entries if gamma is not None else _default_gamma()
    if g.shape != (dA, dA):
        raise LhsError("bad-dims", f"gamma must act on the {dA}-dim side")
    w, p, q, mu = _dual_witness(rho, kind, g, config)
    return WitnessResult(
        kind=kind,
        mu=mu,
        E=_energy(kind, mu),
        W=HermitianOperator(rho.dims, w, f"{kind}-witness"),
        relaxation=("ppt",),
        dualFeasible=_dual_feasible(rho, kind, g, w, p, q),
    )


def witness_value(W: HermitianOperator, rho: DensityMatrix) -> float:
    """tr[Wρ]; negative certifies entanglement when W is a valid witness."""
    if W.entries.shape != rho.entries.shape:
        raise LhsError("bad-dims", f"shape {W.entries.shape} vs {rho.entries.shape}")
    return float(np.trace(W.entries @ rho.entries).real)


_PARTITION_LABELS = ("A|BC", "B|AC", "C|AB")


def gme_witness(rho: DensityMatrix, config: SolverConfig = SolverConfig()) -> GmeWitness:
    """Optimal fully decomposable witness over the three bipartitions.

    min tr[Wρ] s.t. tr W = 1 and W = P_M + Q_M^{T_M} with P_M, Q_M ⪰ 0 for
    every partition M; a strictly negative value certifies genuine
    multipartite entanglement, a nonnegative one is inconclusive.
    """
    if rho.dims != (2, 2, 2):
        raise LhsError("bad-dims", f"need a three-qubit state, got dims {list(rho.dims)}")
    n = 8
    variables = [Variable("W", n, "free-hermitian")]
    eqs = [
        EqualityBlock(
            "unit-trace", 1,
            (LinearTerm("W", map=functional_from_mat(np.eye(n))[None, :]),),
            np.array([[1.0]]),
        )
    ]
    for party, label in enumerate(_PARTITION_LABELS):
        pt_map = lin_map_matrix(n, n, _pt_fn((2, 2, 2), party))
        variables.append(Variable(f"P{party}", n, "psd"))
        variables.append(Variable(f"Q{party}", n, "psd"))
        eqs.append(
            EqualityBlock(
                f"decompose-{label}", n,
                (
                    LinearTerm("W"),
                    LinearTerm(f"P{party}", scale=-1.0),
                    LinearTerm(f"Q{party}", map=pt_map, scale=-1.0),
                ),
                np.zeros((n, n)),
            )
        )
    prog = assemble(variables, eqs, objective={"W": rho.entries}, sense="min")
    sol = _solved(prog, config)
    decos = {
        label: (
            HermitianOperator((2, 2, 2), sol.values[f"P{party}"].entries, f"P-{label}"),
            HermitianOperator((2, 2, 2), sol.values[f"Q{party}"].entries, f"Q-{label}"),
        )
        for party, label in enumerate(_PARTITION_LABELS)
    }
    return GmeWitness(
        W=HermitianOperator((2, 2, 2), sol.values["W"].entries, "gme-witness"),
        decompositions=decos,
        value=float(sol.objective),
    )
