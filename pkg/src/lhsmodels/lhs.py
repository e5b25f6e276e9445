"""Local-hidden-state certification, family optimization, witness-driven
state generation, and independent certificate verification.

The certification SDP decides whether a depolarized parent operator O admits
a deterministic-strategy decomposition for a finite projective measurement
set: when it does, the state rebuilt as r O + (1-r)(I/2) (x) O_B (projective
mode, r the insphere radius of the set) or as the half-mixture with a fixed
gamma on Alice (povm mode) carries a local model for all measurements of the
corresponding class. Feasibility is sufficient only; infeasibility is always
reported as inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .conic import (
    ConicProgram,
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
    with_constants,
    with_objective,
)
from .errors import LhsError
from .geometry import MeasurementSet, projector, set_from_json, set_to_json, strategies
from .operators import (
    DensityMatrix,
    HermitianOperator,
    operator_from_json,
    operator_to_json,
)
from .states import RngStream
from .witnesses import QUANTIFIER_KINDS, gme_witness, optimal_witness

__all__ = [
    "Assemblage",
    "LhsCertificate",
    "CertificationOutcome",
    "FamilySpec",
    "FamilyResult",
    "GeneratedState",
    "GeneratorStep",
    "GeneratorTrace",
    "CertificateReport",
    "assemblage",
    "certify_projective",
    "certify_povm",
    "certify_multipartite",
    "named_family",
    "family_state",
    "maximize_family",
    "generate_local_state",
    "iterate_generator",
    "verify_certificate",
    "certificate_to_json",
    "certificate_from_json",
]

_MEMORY_CEILING = 2**20
_VERIFY_SEED = 1729
_INTERIOR_DELTA = 1e-6


# ---------------------------------------------------------------------------
# Assemblages


@dataclass(frozen=True)
class Assemblage:
    """Bob's unnormalized conditional states, keyed by (outcome, setting)."""

    elements: dict[tuple[int, int], HermitianOperator]

    def element(self, a: int, x: int) -> HermitianOperator:
        return self.elements[(a, x)]


def _block(op: np.ndarray, proj: np.ndarray, dB: int) -> np.ndarray:
    return np.einsum("ac,cbad->bd", proj, op.reshape(2, dB, 2, dB))


def _trace_alice(op: np.ndarray, dB: int) -> np.ndarray:
    return np.einsum("abad->bd", op.reshape(2, dB, 2, dB))


def assemblage(rho: DensityMatrix, mset: MeasurementSet) -> Assemblage:
    """σ_{a|x} = tr_A[(Π_{a|x} (x) I) ρ] for every direction of the set."""
    if rho.dims[0] != 2:
        raise LhsError("unsupported-dim", f"Alice must be a qubit, got dim {rho.dims[0]}")
    bob_dims = rho.dims[1:]
    dB = int(np.prod(bob_dims))
    elements: dict[tuple[int, int], HermitianOperator] = {}
    for x, u in enumerate(mset.directions):
        for a in (0, 1):
            block = _block(rho.entries, projector(u, a).entries, dB)
            elements[(a, x)] = HermitianOperator(bob_dims, block, f"sigma-{a}|{x}")
    return Assemblage(elements)


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class LhsCertificate:
    mode: str
    set: MeasurementSet
    r: float
    O: HermitianOperator
    hiddenStates: tuple[tuple[str, HermitianOperator], ...]
    residual: float
    gamma: HermitianOperator | None = None

    def hidden_map(self) -> dict[str, HermitianOperator]:
        return dict(self.hiddenStates)


@dataclass(frozen=True)
class CertificationOutcome:
    certified: bool
    status: str  # "certified" | "inconclusive"
    certificate: LhsCertificate | None
    message: str = ""


@dataclass(frozen=True)
class CertificateReport:
    equalities: float
    reconstruction: float
    depolarization: float
    hiddenPsd: float
    hiddenPpt: float
    traceO: float
    weightSum: float

    @property
    def maxViolation(self) -> float:
        return max(
            self.equalities,
            self.reconstruction,
            self.depolarization,
            self.hiddenPsd,
            self.hiddenPpt,
            self.traceO,
            self.weightSum,
        )

    def ok(self, tol: float = 1e-6) -> bool:
        return self.maxViolation <= tol


def _reconstruct(mode: str, o: np.ndarray, r: float, dB: int,
                 gamma: np.ndarray | None) -> np.ndarray:
    ob = _trace_alice(o, dB)
    eff = r * o + (1 - r) * np.kron(np.eye(2) / 2, ob)
    if mode == "projective":
        return eff
    return 0.5 * eff + 0.5 * np.kron(gamma, ob)


def _default_gamma_op() -> HermitianOperator:
    return HermitianOperator((2,), np.diag([1.0, 0.0]).astype(complex), "gamma")


def _bob_pt(h: np.ndarray) -> np.ndarray:
    # partial transpose on the first of Bob's two qubits
    return h.reshape(2, 2, 2, 2).transpose(2, 1, 0, 3).reshape(4, 4)


def _guard_size(m: int, dB: int) -> None:
    if (2**m) * dB * dB > _MEMORY_CEILING:
        raise LhsError(
            "too-large",
            f"2^{m} strategies with Bob dimension {dB} need "
            f"{(2 ** m) * dB * dB} hidden-state entries (ceiling {_MEMORY_CEILING}); "
            "use fewer measurements or a smaller Bob",
        )


_TEMPLATES: dict[tuple, ConicProgram] = {}


def _template_key(mset: MeasurementSet, dB: int, mode: str,
                  gamma: np.ndarray | None, multipartite: bool, flavor: str) -> tuple:
    gbytes = None if gamma is None else gamma.tobytes()
    return (tuple(u.u for u in mset.directions), dB, mode, gbytes, multipartite, flavor)


def _strategy_ids(m: int) -> list[str]:
    return [s.bits for s in strategies(m)]


def _recon_map(mode: str, n: int, dB: int, r: float, gamma: np.ndarray | None) -> np.ndarray:
    def recon(o: np.ndarray) -> np.ndarray:
        return _reconstruct(mode, o, r, dB, gamma)

    return lin_map_matrix(n, n, recon)


def _core_blocks(mset: MeasurementSet, dB: int, ids: list[str]):
    """Per-setting and marginal equalities shared by every program flavor."""
    n = 2 * dB
    equalities = []
    for x, u in enumerate(mset.directions):
        proj = projector(u, 0).entries
        tmap = lin_map_matrix(n, dB, lambda o, p=proj: _block(o, p, dB))
        terms = [LinearTerm(f"s{bits}") for bits in ids if bits[x] == "0"]
        terms.append(LinearTerm("O", map=tmap, scale=-1.0))
        equalities.append(
            EqualityBlock(f"setting-{x}", dB, tuple(terms), np.zeros((dB, dB)))
        )
    tr_map = lin_map_matrix(n, dB, lambda o: _trace_alice(o, dB))
    terms = [LinearTerm(f"s{bits}") for bits in ids]
    terms.append(LinearTerm("O", map=tr_map, scale=-1.0))
    equalities.append(EqualityBlock("marginal", dB, tuple(terms), np.zeros((dB, dB))))
    return equalities


def _certify_template(mset: MeasurementSet, dB: int, mode: str,
                      gamma: np.ndarray | None, multipartite: bool) -> ConicProgram:
    key = _template_key(mset, dB, mode, gamma, multipartite, "certify")
    if key in _TEMPLATES:
        return _TEMPLATES[key]
    m = len(mset.directions)
    _guard_size(m, dB)
    n = 2 * dB
    ids = _strategy_ids(m)
    variables = [Variable("O", n, "free-hermitian")]
    variables.extend(Variable(f"s{bits}", dB, "psd") for bits in ids)
    equalities = _core_blocks(mset, dB, ids)
    recon = _recon_map(mode, n, dB, mset.insphere, gamma)
    equalities.append(
        EqualityBlock("state", n, (LinearTerm("O", map=recon),), np.zeros((n, n)))
    )
    memberships = []
    if multipartite:
        pt_map = lin_map_matrix(dB, dB, _bob_pt)
        memberships = [
            PsdMembership(f"ppt-{bits}", dB, (LinearTerm(f"s{bits}", map=pt_map),))
            for bits in ids
        ]
    prog = assemble(variables, equalities, memberships)
    _TEMPLATES[key] = prog
    return prog


def _generate_template(mset: MeasurementSet, dB: int, mode: str,
                       gamma: np.ndarray | None, multipartite: bool) -> ConicProgram:
    key = _template_key(mset, dB, mode, gamma, multipartite, "generate")
    if key in _TEMPLATES:
        return _TEMPLATES[key]
    m = len(mset.directions)
    _guard_size(m, dB)
    n = 2 * dB
    ids = _strategy_ids(m)
    variables = [Variable("O", n, "free-hermitian")]
    variables.extend(Variable(f"s{bits}", dB, "psd") for bits in ids)
    equalities = _core_blocks(mset, dB, ids)
    equalities.append(
        EqualityBlock(
            "unit-trace", 1,
            (LinearTerm("O", map=functional_from_mat(np.eye(n))[None, :]),),
            np.array([[1.0]]),
        )
    )
    recon = _recon_map(mode, n, dB, mset.insphere, gamma)
    memberships = [PsdMembership("physical", n, (LinearTerm("O", map=recon),))]
    if multipartite:
        pt_map = lin_map_matrix(dB, dB, _bob_pt)
        memberships.extend(
            PsdMembership(f"ppt-{bits}", dB, (LinearTerm(f"s{bits}", map=pt_map),))
            for bits in ids
        )
    prog = assemble(variables, equalities, memberships, sense="min")
    _TEMPLATES[key] = prog
    return prog


def _extract_certificate(sol, mset: MeasurementSet, mode: str, bob_dims: tuple[int, ...],
                         gamma: HermitianOperator | None,
                         rho: DensityMatrix) -> LhsCertificate:
    dims = (2,) + bob_dims
    o_op = HermitianOperator(dims, sol.values["O"].entries, "parent")
    hidden = tuple(
        sorted(
            (name[1:], HermitianOperator(bob_dims, op.entries, f"rho-{name[1:]}"))
            for name, op in sol.values.items()
            if name.startswith("s")
        )
    )
    cert = LhsCertificate(
        mode=mode,
        set=mset,
        r=mset.insphere,
        O=o_op,
        hiddenStates=hidden,
        residual=0.0,
        gamma=gamma,
    )
    report = verify_certificate(cert, rho)
    return replace(cert, residual=report.maxViolation)


def _run_certification(rho: DensityMatrix, mset: MeasurementSet, mode: str,
                       gamma: HermitianOperator | None, multipartite: bool,
                       config: SolverConfig) -> CertificationOutcome:
    bob_dims = rho.dims[1:]
    dB = int(np.prod(bob_dims))
    g = gamma.entries if gamma is not None else None
    template = _certify_template(mset, dB, mode, g, multipartite)
    prog = with_constants(template, {"state": rho.entries})
    sol = solve(prog, config)
    if sol.status in ("optimal", "inaccurate"):
        cert = _extract_certificate(sol, mset, mode, bob_dims, gamma, rho)
        if cert.residual > max(config.eps_feas, 1e-7):
            raise LhsError(
                "solver-failure",
                f"certificate failed independent verification (residual {cert.residual:.2e})",
            )
        return CertificationOutcome(True, "certified", cert)
    # States on the boundary of the certifiable set (generation optima in
    # particular) give the feasibility SDP an empty interior, where the solver
    # can stall or report an almost-infeasible verdict on a feasible instance.
    # Retry once on the slightly mixed state (1-d) rho + d I/n: the instance
    # regains a strict interior while the reconstruction target moves by at
    # most d * ||rho - I/n|| < 1e-6, so the certificate is still checked
    # against the original state at the contract tolerance.
    if sol.status == "numerical-failure" or (
        sol.status == "infeasible" and sol.solverStatus.startswith("Almost")
    ):
        n = 2 * dB
        mixed = (1.0 - _INTERIOR_DELTA) * rho.entries + _INTERIOR_DELTA * np.eye(n) / n
        sol2 = solve(with_constants(template, {"state": mixed}), config)
        if sol2.status in ("optimal", "inaccurate"):
            cert = _extract_certificate(sol2, mset, mode, bob_dims, gamma, rho)
            if cert.residual <= max(config.eps_feas, 1e-6):
                return CertificationOutcome(True, "certified", cert)
        elif sol2.status == "infeasible":
            sol = sol2
    if sol.status == "infeasible":
        return CertificationOutcome(
            False, "inconclusive", None,
            "no model found for this measurement set; the test is a sufficient "
            "condition only, so nothing follows about nonlocality",
        )
    raise LhsError(
        "solver-failure",
        f"certification ended with solver status {sol.status} ({sol.solverStatus})",
    )


def certify_projective(rho: DensityMatrix, mset: MeasurementSet,
                       config: SolverConfig = SolverConfig()) -> CertificationOutcome:
    """Sufficient SDP test for a local-hidden-state model covering all
    projective measurements on Alice."""
    dims = rho.dims
    if len(dims) != 2 or dims[0] != 2 or dims[1] > 4:
        raise LhsError(
            "bad-dims",
            f"need dims [2, d_B] with d_B <= 4, got {list(dims)}; "
            "three-qubit states go through certify_multipartite",
        )
    return _run_certification(rho, mset, "projective", None, False, config)


def certify_povm(rho: DensityMatrix, mset: MeasurementSet,
                 gamma: DensityMatrix | None = None,
                 config: SolverConfig = SolverConfig()) -> CertificationOutcome:
    """Sufficient SDP test for a local model covering all POVMs on Alice."""
    dims = rho.dims
    if len(dims) != 2 or dims[0] != 2 or dims[1] > 4:
        raise LhsError(
            "bad-dims",
            f"need dims [2, d_B] with d_B <= 4, got {list(dims)}; "
            "three-qubit states go through certify_multipartite",
        )
    g = _default_gamma_op() if gamma is None else HermitianOperator(
        (2,), gamma.entries, "gamma")
    return _run_certification(rho, mset, "povm", g, False, config)


def certify_multipartite(rho: DensityMatrix, mset: MeasurementSet,
                         mode: str = "projective",
                         gamma: DensityMatrix | None = None,
                         config: SolverConfig = SolverConfig()) -> CertificationOutcome:
    """Certification for one qubit versus two, with every hidden state forced
    PPT across Bob's pair, so each Bob may measure arbitrary POVMs."""
    if rho.dims != (2, 2, 2):
        raise LhsError("bad-dims", f"need a three-qubit state, got dims {list(rho.dims)}")
    if mode not in ("projective", "povm"):
        raise LhsError("bad-parameter", f"unknown mode {mode!r}")
    g = None
    if mode == "povm":
        g = _default_gamma_op() if gamma is None else HermitianOperator(
            (2,), gamma.entries, "gamma")
    return _run_certification(rho, mset, mode, g, True, config)


# ---------------------------------------------------------------------------
# Families


@dataclass(frozen=True)
class FamilySpec:
    """Affine family θ ↦ constant + Σ θ_i directions_i with linear
    constraints; equalities are coeffs·θ = value, inequalities coeffs·θ ≤ bound."""

    name: str
    constant: HermitianOperator
    directions: tuple[HermitianOperator, ...]
    objective: tuple[float, ...]
    equalities: tuple[tuple[tuple[float, ...], float], ...] = ()
    inequalities: tuple[tuple[tuple[float, ...], float], ...] = ()
    anchor: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "directions", tuple(self.directions))
        object.__setattr__(self, "objective", tuple(float(c) for c in self.objective))
        k = len(self.directions)
        if k == 0:
            raise LhsError("bad-family", "family needs at least one direction")
        if len(self.objective) != k:
            raise LhsError("bad-family", "objective length must match direction count")
        for d in self.directions:
            if d.dims != self.constant.dims:
                raise LhsError("bad-family", "direction dims differ from constant")
        for coeffs, _ in tuple(self.equalities) + tuple(self.inequalities):
            if len(coeffs) != k:
                raise LhsError("bad-family", "constraint coefficient length mismatch")
        if self.anchor is not None and len(self.anchor) != k:
            raise LhsError("bad-family", "anchor length mismatch")


@dataclass(frozen=True)
class FamilyResult:
    theta: tuple[float, ...] | None
    objective: float | None
    certificate: LhsCertificate | None
    status: str  # "optimal" | "infeasible"
    message: str = ""


def family_state(spec: FamilySpec, theta) -> DensityMatrix:
    theta = tuple(float(t) for t in theta)
    if len(theta) != len(spec.directions):
        raise LhsError("bad-parameter", "theta length mismatch")
    entries = spec.constant.entries.copy()
    for t, d in zip(theta, spec.directions):
        entries = entries + t * d.entries
    return DensityMatrix(HermitianOperator(spec.constant.dims, entries, spec.name))


def _bell_projectors() -> tuple[HermitianOperator, ...]:
    from .states import BELL_VECTORS

    ops = []
    for idx, v in enumerate(BELL_VECTORS):
        ops.append(HermitianOperator((2, 2), np.outer(v, v.conj()), f"bell-{idx}"))
    return tuple(ops)


def named_family(name: str) -> FamilySpec:
    bells = _bell_projectors()
    if name == "werner":
        direction = HermitianOperator(
            (2, 2), bells[0].entries - np.eye(4) / 4, "werner-direction")
        return FamilySpec(
            name="werner",
            constant=HermitianOperator((2, 2), np.eye(4, dtype=complex) / 4),
            directions=(direction,),
            objective=(1.0,),
            inequalities=(((-1.0,), 0.0), ((1.0,), 1.0)),
            anchor=(0.0,),
        )
    if name == "bell-diag":
        return FamilySpec(
            name="bell-diag",
            constant=HermitianOperator((2, 2), np.zeros((4, 4), dtype=complex)),
            directions=bells,
            objective=(1.0, 0.0, 0.0, 0.0),
            equalities=(((1.0, 1.0, 1.0, 1.0), 1.0),),
            inequalities=tuple(
                (tuple(-1.0 if j == i else 0.0 for j in range(4)), 0.0)
                for i in range(4)
            ),
            anchor=(0.25, 0.25, 0.25, 0.25),
        )
    if name == "bell-diag-rank3":
        return FamilySpec(
            name="bell-diag-rank3",
            constant=HermitianOperator((2, 2), np.zeros((4, 4), dtype=complex)),
            directions=bells[:3],
            objective=(1.0, 0.0, 0.0),
            equalities=(((1.0, 1.0, 1.0), 1.0),),
            inequalities=tuple(
                (tuple(-1.0 if j == i else 0.0 for j in range(3)), 0.0)
                for i in range(3)
            ),
            anchor=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        )
    raise LhsError("bad-parameter", f"unknown family {name!r}")


def maximize_family(spec: FamilySpec, mset: MeasurementSet, mode: str = "projective",
                    gamma: DensityMatrix | None = None,
                    config: SolverConfig = SolverConfig()) -> FamilyResult:
    """Largest objective value over family members that still certify; the
    reported point is shrunk toward the anchor until it re-certifies, so the
    returned optimum is always backed by its certificate."""
    dims = spec.constant.dims
    if len(dims) < 2 or dims[0] != 2:
        raise LhsError("bad-dims", "family states need a qubit on Alice")
    multipartite = dims == (2, 2, 2)
    if mode not in ("projective", "povm"):
        raise LhsError("bad-parameter", f"unknown mode {mode!r}")
    if spec.anchor is not None:
        family_state(spec, spec.anchor)  # validates the anchor is a state
    bob_dims = dims[1:]
    dB = int(np.prod(bob_dims))
    n = 2 * dB
    m = len(mset.directions)
    _guard_size(m, dB)
    g_op = None
    if mode == "povm":
        g_op = _default_gamma_op() if gamma is None else HermitianOperator(
            (2,), gamma.entries, "gamma")
    g = g_op.entries if g_op is not None else None

    ids = _strategy_ids(m)
    k = len(spec.directions)
    variables = [Variable("O", n, "free-hermitian")]
    variables.extend(Variable(f"s{bits}", dB, "psd") for bits in ids)
    variables.extend(Variable(f"t{i}", 1, "free-hermitian") for i in range(k))

    equalities = _core_blocks(mset, dB, ids)
    recon = _recon_map(mode, n, dB, mset.insphere, g)
    state_terms = [LinearTerm("O", map=recon)]
    state_terms.extend(
        LinearTerm(f"t{i}", map=-params_from_mat(d.entries)[:, None])
        for i, d in enumerate(spec.directions)
    )
    equalities.append(
        EqualityBlock("state", n, tuple(state_terms), spec.constant.entries)
    )
    for j, (coeffs, value) in enumerate(spec.equalities):
        terms = tuple(
            LinearTerm(f"t{i}", scale=c) for i, c in enumerate(coeffs) if c != 0.0
        )
        equalities.append(
            EqualityBlock(f"family-eq-{j}", 1, terms, np.array([[value]]))
        )

    memberships = []
    for j, (coeffs, bound) in enumerate(spec.inequalities):
        terms = tuple(
            LinearTerm(f"t{i}", scale=-c) for i, c in enumerate(coeffs) if c != 0.0
        )
        memberships.append(
            PsdMembership(f"family-ineq-{j}", 1, terms, np.array([[bound]]))
        )
    psd_terms = tuple(
        LinearTerm(f"t{i}", map=params_from_mat(d.entries)[:, None])
        for i, d in enumerate(spec.directions)
    )
    memberships.append(
        PsdMembership("family-psd", n, psd_terms, spec.constant.entries)
    )
    if multipartite:
        pt_map = lin_map_matrix(dB, dB, _bob_pt)
        memberships.extend(
            PsdMembership(f"ppt-{bits}", dB, (LinearTerm(f"s{bits}", map=pt_map),))
            for bits in ids
        )

    objective = {
        f"t{i}": np.array([[c]]) for i, c in enumerate(spec.objective) if c != 0.0
    }
    prog = assemble(variables, equalities, memberships, objective=objective, sense="max")
    sol = solve(prog, config)
    if sol.status == "infeasible":
        return FamilyResult(None, None, None, "infeasible",
                            "no family member admits a model for this set")
    if sol.status not in ("optimal", "inaccurate"):
        raise LhsError(
            "solver-failure",
            f"family optimization ended with status {sol.status} ({sol.solverStatus})",
        )
    theta_star = tuple(
        float(sol.values[f"t{i}"].entries[0, 0].real) for i in range(k)
    )

    base = max(1e-6, 10.0 * sol.primalResidual)
    deltas = [base] + [d for d in (1e-4, 1e-3, 1e-2) if d > base]
    if spec.anchor is None:
        deltas = [0.0]
    for delta in deltas:
        if spec.anchor is None:
            theta_try = theta_star
        else:
            theta_try = tuple(
                t + delta * (a - t) for t, a in zip(theta_star, spec.anchor)
            )
        try:
            state = family_state(spec, theta_try)
        except LhsError:
            continue
        if multipartite:
            outcome = certify_multipartite(state, mset, mode, gamma, config)
        elif mode == "projective":
            outcome = certify_projective(state, mset, config)
        else:
            outcome = certify_povm(state, mset, gamma, config)
        if outcome.certified:
            value = float(sum(c * t for c, t in zip(spec.objective, theta_try)))
            return FamilyResult(theta_try, value, outcome.certificate, "optimal")
    raise LhsError(
        "certification-failed",
        "optimum could not be re-certified after shrinking toward the anchor",
    )


# ---------------------------------------------------------------------------
# Generation


class GeneratedState(NamedTuple):
    state: DensityMatrix
    certificate: LhsCertificate
    witnessValue: float


def _objective_for_witness(w: np.ndarray, mode: str, dB: int, r: float,
                           gamma: np.ndarray | None) -> np.ndarray:
    """Adjoint of the reconstruction map applied to W, so that
    tr[W ρ(O)] = tr[adjoint(W) O]."""
    tra_w = _trace_alice(w, dB)
    eff = r * w + (1 - r) * np.kron(np.eye(2), tra_w) / 2
    if mode == "projective":
        return eff
    wt = w.reshape(2, dB, 2, dB)
    n_b = np.einsum("qp,pbqd->bd", gamma, wt)
    return 0.5 * eff + 0.5 * np.kron(np.eye(2), n_b)


def generate_local_state(W: HermitianOperator, mset: MeasurementSet,
                         mode: str = "projective",
                         gamma: DensityMatrix | None = None,
                         config: SolverConfig = SolverConfig()) -> GeneratedState:
    """State minimizing tr[Wρ] over everything this module can certify; a
    negative optimum hands back a certified-local entangled state."""
    dims = W.dims
    if len(dims) < 2 or dims[0] != 2:
        raise LhsError("bad-dims", f"witness needs a qubit on Alice, got dims {list(dims)}")
    if mode not in ("projective", "povm"):
        raise LhsError("bad-parameter", f"unknown mode {mode!r}")
    multipartite = dims == (2, 2, 2)
    bob_dims = dims[1:]
    dB = int(np.prod(bob_dims))
    if dB > 4:
        raise LhsError("bad-dims", f"Bob dimension {dB} above the supported 4")
    g_op = None
    if mode == "povm":
        g_op = _default_gamma_op() if gamma is None else HermitianOperator(
            (2,), gamma.entries, "gamma")
    g = g_op.entries if g_op is not None else None
    template = _generate_template(mset, dB, mode, g, multipartite)
    r = mset.insphere
    coeff = _objective_for_witness(W.entries, mode, dB, r, g)
    prog = with_objective(template, {"O": coeff})
    sol = solve(prog, config)
    if sol.status not in ("optimal", "inaccurate"):
        raise LhsError(
            "solver-failure",
            f"generation ended with solver status {sol.status} ({sol.solverStatus})",
        )
    o = sol.values["O"].entries
    rho_raw = _reconstruct(mode, o, r, dB, g)
    min_eig = float(np.linalg.eigvalsh(rho_raw)[0])
    if min_eig < -1e-8:
        raise LhsError(
            "solver-failure",
            f"generated state has eigenvalue {min_eig:.2e} below tolerance",
        )
    if min_eig < 0:
        rho_raw = rho_raw + 2 * abs(min_eig) * np.eye(2 * dB)
        rho_raw = rho_raw / np.trace(rho_raw).real
    rho = DensityMatrix(HermitianOperator((2,) + bob_dims, rho_raw, "generated"))
    cert = _extract_certificate(sol, mset, mode, bob_dims, g_op, rho)
    if cert.residual > max(config.eps_feas, 1e-7):
        raise LhsError(
            "solver-failure",
            f"generated certificate failed verification (residual {cert.residual:.2e})",
        )
    value = float(np.trace(W.entries @ rho.entries).real)
    return GeneratedState(rho, cert, value)


@dataclass(frozen=True)
class GeneratorStep:
    witness: HermitianOperator
    state: DensityMatrix
    E: float
    certificate: LhsCertificate


@dataclass(frozen=True)
class GeneratorTrace:
    steps: tuple[GeneratorStep, ...]
    converged: bool
    aborted: str | None = None


def iterate_generator(seedState: DensityMatrix, quantifier: str, mset: MeasurementSet,
                      mode: str = "projective", maxIters: int = 50, tol: float = 1e-5,
                      gamma: DensityMatrix | None = None,
                      config: SolverConfig = SolverConfig()) -> GeneratorTrace:
    """Alternate optimal-witness and certified-state generation until the
    entanglement of the produced state stops improving.

    quantifier is one of the seven bipartite kinds, or "gme" for three-qubit
    seeds (fully decomposable witness, E = max(0, -tr[Wρ]))."""
    if maxIters < 1:
        raise LhsError("bad-parameter", "maxIters must be >= 1")
    if quantifier != "gme" and quantifier not in QUANTIFIER_KINDS:
        raise LhsError("bad-parameter", f"unknown quantifier {quantifier!r}")
    robustness = quantifier in QUANTIFIER_KINDS[:5]
    steps: list[GeneratorStep] = []
    rho = seedState
    prev_e = None
    converged = False
    aborted = None
    for _ in range(maxIters):
        try:
            if quantifier == "gme":
                witness = gme_witness(rho, config).W
            else:
                witness = optimal_witness(rho, quantifier, config).W
            produced = generate_local_state(witness, mset, mode, gamma, config)
        except LhsError as err:
            aborted = str(err)
            break
        mu = max(0.0, -produced.witnessValue)
        e_val = mu / (1 + mu) if robustness else mu
        steps.append(GeneratorStep(witness, produced.state, e_val, produced.certificate))
        if prev_e is not None and abs(e_val - prev_e) < tol:
            converged = True
            break
        prev_e = e_val
        rho = produced.state
    return GeneratorTrace(tuple(steps), converged, aborted)


# ---------------------------------------------------------------------------
# Verification


def _random_unit_vectors(count: int, seed: int) -> np.ndarray:
    gen = RngStream(seed, 0).generator
    v = gen.normal(size=(count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def verify_certificate(cert: LhsCertificate, rho: DensityMatrix) -> CertificateReport:
    """Solver-free recheck of every certificate identity.

    Covers the strategy equalities for both outcomes, the state
    reconstruction, the depolarization identity on 50 random directions
    (fixed internal stream, directions off the polytope vertices), and
    positivity of the hidden states (plus PPT across Bob's pair for
    three-qubit certificates)."""
    bob_dims = cert.O.dims[1:]
    dB = int(np.prod(bob_dims))
    if rho.dims != cert.O.dims:
        raise LhsError("bad-dims", f"state dims {list(rho.dims)} vs certificate {list(cert.O.dims)}")
    o = cert.O.entries
    r = cert.r
    hidden = [(bits, op.entries) for bits, op in cert.hiddenStates]
    g = cert.gamma.entries if cert.gamma is not None else None

    eq_viol = 0.0
    for x, u in enumerate(cert.set.directions):
        for a in (0, 1):
            proj = projector(u, a).entries
            lhs = _block(o, proj, dB)
            rhs = np.zeros((dB, dB), dtype=complex)
            for bits, op in hidden:
                if int(bits[x]) == a:
                    rhs = rhs + op
            eq_viol = max(eq_viol, float(np.abs(lhs - rhs).max()))

    rebuilt = _reconstruct(cert.mode, o, r, dB, g)
    recon_viol = float(np.abs(rebuilt - rho.entries).max())

    eff = _reconstruct("projective", o, r, dB, None)
    depol_viol = 0.0
    for v in _random_unit_vectors(50, _VERIFY_SEED):
        for a in (0, 1):
            sign = 1.0 if a == 0 else -1.0
            pauli = np.array(
                [[v[2], v[0] - 1j * v[1]], [v[0] + 1j * v[1], -v[2]]], dtype=complex
            )
            noisy = (np.eye(2) + sign * r * pauli) / 2
            sharp = (np.eye(2) + sign * pauli) / 2
            lhs = _block(o, noisy, dB)
            rhs = _block(eff, sharp, dB)
            depol_viol = max(depol_viol, float(np.abs(lhs - rhs).max()))

    psd_viol = 0.0
    ppt_viol = 0.0
    weight = 0.0
    for bits, op in hidden:
        psd_viol = max(psd_viol, max(0.0, -float(np.linalg.eigvalsh(op)[0])))
        weight += float(np.trace(op).real)
        if len(bob_dims) == 2:
            pt = _bob_pt(op)
            ppt_viol = max(ppt_viol, max(0.0, -float(np.linalg.eigvalsh(pt)[0])))

    return CertificateReport(
        equalities=eq_viol,
        reconstruction=recon_viol,
        depolarization=depol_viol,
        hiddenPsd=psd_viol,
        hiddenPpt=ppt_viol if len(bob_dims) == 2 else 0.0,
        traceO=abs(float(np.trace(o).real) - 1.0),
        weightSum=abs(weight - 1.0),
    )


# ---------------------------------------------------------------------------
# Serialization


def certificate_to_json(cert: LhsCertificate) -> dict:
    doc = {
        "mode": cert.mode,
        "set": set_to_json(cert.set),
        "r": cert.r,
        "O": operator_to_json(cert.O),
        "hiddenStates": [
            {"lambda": bits, "op": operator_to_json(op)}
            for bits, op in cert.hiddenStates
        ],
        "residual": cert.residual,
    }
    if cert.gamma is not None:
        doc["gamma"] = operator_to_json(cert.gamma)
    return doc


def certificate_from_json(doc: dict) -> LhsCertificate:
    try:
        mset = set_from_json(doc["set"])
        o_op = operator_from_json(doc["O"])
        hidden = tuple(
            (entry["lambda"], operator_from_json(entry["op"]))
            for entry in doc["hiddenStates"]
        )
        gamma = operator_from_json(doc["gamma"]) if "gamma" in doc else None
        return LhsCertificate(
            mode=str(doc["mode"]),
            set=mset,
            r=float(doc["r"]),
            O=o_op,
            hiddenStates=hidden,
            residual=float(doc["residual"]),
            gamma=gamma,
        )
    except (KeyError, TypeError) as err:
        raise LhsError("bad-certificate-json", f"malformed certificate: {err}") from err
