"""Finite-dimensional Hermitian operator algebra.

Everything downstream (measurement geometry, conic programs, certificates)
manipulates operators through this module. Values are immutable after
construction and all operations are pure, so they are safe to share across
worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod, sqrt
from typing import Iterable, Sequence

import numpy as np

from .errors import LhsError

__all__ = [
    "HermitianOperator",
    "DensityMatrix",
    "BipartiteCut",
    "tensor",
    "partial_trace",
    "partial_transpose",
    "negativity",
    "trace_distance",
    "is_ppt",
    "gell_mann_basis",
    "joint_probabilities",
    "operator_to_json",
    "operator_from_json",
]

_HERMITICITY_TOL = 1e-10


def _as_hermitian(entries: np.ndarray) -> np.ndarray:
    """Symmetrize roundoff-level asymmetry, reject anything larger."""
    m = np.asarray(entries, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise LhsError("bad-dims", f"operator entries must be square, got shape {m.shape}")
    asym = np.abs(m - m.conj().T).max()
    if asym > _HERMITICITY_TOL:
        raise LhsError("not-hermitian", f"asymmetry {asym:.3e} exceeds {_HERMITICITY_TOL:.0e}")
    out = (m + m.conj().T) / 2
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class HermitianOperator:
    """A Hermitian matrix on a tensor product of subsystems.

    dims lists the subsystem dimensions in order; the matrix side is their
    product. Construction symmetrizes (M + M†)/2 when the asymmetry is at
    roundoff level (≤ 1e-10) and rejects anything larger.
    """

    dims: tuple[int, ...]
    entries: np.ndarray
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(d < 1 for d in self.dims) or not self.dims:
            raise LhsError("bad-dims", f"invalid subsystem dims {self.dims}")
        ent = _as_hermitian(self.entries)
        if ent.shape[0] != prod(self.dims):
            raise LhsError(
                "bad-dims",
                f"matrix side {ent.shape[0]} does not match prod(dims)={prod(self.dims)}",
            )
        object.__setattr__(self, "entries", ent)

    @property
    def side(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def relabel(self, label: str | None) -> "HermitianOperator":
        return HermitianOperator(self.dims, self.entries, label)


@dataclass(frozen=True)
class DensityMatrix:
    """Positive unit-trace operator; tolerances match solver noise downstream."""

    op: HermitianOperator

    def __post_init__(self):
        tr = self.op.trace()
        if abs(tr - 1.0) > 1e-9:
            raise LhsError("bad-trace", f"trace {tr!r} differs from 1 by more than 1e-9")
        mineig = float(self.op.eigenvalues()[0])
        if mineig < -1e-9:
            raise LhsError("not-positive", f"minimum eigenvalue {mineig:.3e} below -1e-9")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims

    @property
    def entries(self) -> np.ndarray:
        return self.op.entries


@dataclass(frozen=True)
class BipartiteCut:
    """The "A side" of a bipartition: positions of the subsystems on that side."""

    partyIndices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.partyIndices)
        if len(set(idx)) != len(idx):
            raise LhsError("bad-cut", f"duplicate party indices {idx}")
        object.__setattr__(self, "partyIndices", tuple(sorted(idx)))

    def validate(self, dims: Sequence[int]) -> None:
        n = len(dims)
        if not self.partyIndices:
            raise LhsError("bad-cut", "cut must be non-empty")
        if any(i < 0 or i >= n for i in self.partyIndices):
            raise LhsError("bad-cut", f"indices {self.partyIndices} out of range for {n} parties")
        if len(self.partyIndices) == n:
            raise LhsError("bad-cut", "cut must be a proper subset of the parties")


_DEFAULT_CUT = BipartiteCut((0,))


def _operand(op) -> np.ndarray:
    if isinstance(op, DensityMatrix):
        return op.op.entries
    if isinstance(op, HermitianOperator):
        return op.entries
    return np.asarray(op, dtype=complex)


def _operand_dims(op) -> tuple[int, ...]:
    if isinstance(op, DensityMatrix):
        return op.op.dims
    return op.dims


def tensor(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    """Kronecker product; dims concatenate."""
    return HermitianOperator(
        _operand_dims(a) + _operand_dims(b), np.kron(_operand(a), _operand(b))
    )


def _to_tensor_form(op) -> tuple[np.ndarray, tuple[int, ...]]:
    dims = _operand_dims(op)
    return _operand(op).reshape(dims + dims), dims


def partial_trace(op, keep: BipartiteCut | Iterable[int] = _DEFAULT_CUT) -> HermitianOperator:
    """Trace out every subsystem not listed in ``keep``."""
    if not isinstance(keep, BipartiteCut):
        keep = BipartiteCut(tuple(keep))
    arr, dims = _to_tensor_form(op)
    keep.validate(dims)
    n = len(dims)
    traced = [i for i in range(n) if i not in keep.partyIndices]
    for offset, i in enumerate(traced):
        axis = i - sum(1 for j in traced[:offset] if j < i)
        arr = np.trace(arr, axis1=axis, axis2=axis + (n - offset))
    kept_dims = tuple(dims[i] for i in keep.partyIndices)
    side = prod(kept_dims)
    label = getattr(op, "label", None) if isinstance(op, HermitianOperator) else None
    return HermitianOperator(kept_dims, arr.reshape(side, side), label)


def partial_transpose(op, cut: BipartiteCut | Iterable[int] = _DEFAULT_CUT) -> HermitianOperator:
    """Transpose the subsystems in ``cut`` only. Involution; Hermiticity preserved."""
    if not isinstance(cut, BipartiteCut):
        cut = BipartiteCut(tuple(cut))
    arr, dims = _to_tensor_form(op)
    cut.validate(dims)
    n = len(dims)
    perm = list(range(2 * n))
    for i in cut.partyIndices:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    side = prod(dims)
    return HermitianOperator(dims, arr.transpose(perm).reshape(side, side))


def negativity(rho, cut: BipartiteCut = _DEFAULT_CUT) -> float:
    """Absolute sum of the negative eigenvalues of the partial transpose."""
    eigs = partial_transpose(rho, cut).eigenvalues()
    return float(np.sum(np.maximum(0.0, -eigs)))


def trace_distance(a, b) -> float:
    """Half the trace norm of the difference."""
    am, bm = _operand(a), _operand(b)
    if am.shape != bm.shape:
        raise LhsError("bad-dims", f"shape mismatch {am.shape} vs {bm.shape}")
    eigs = np.linalg.eigvalsh(am - bm)
    return float(np.abs(eigs).sum() / 2)


def is_ppt(rho, cut: BipartiteCut = _DEFAULT_CUT, tol: float = 1e-9) -> bool:
    """Peres-Horodecki test: min eigenvalue of the partial transpose ≥ -tol.

    Decides separability exactly for dims [2,2] and [2,3].
    """
    eigs = partial_transpose(rho, cut).eigenvalues()
    return bool(eigs[0] >= -tol)


def gell_mann_basis(d: int) -> list[HermitianOperator]:
    """The d²-1 generalized Gell-Mann matrices, tr(λᵢλⱼ) = 2δᵢⱼ.

    Ordering: symmetric pairs, antisymmetric pairs, then diagonal; for d = 2
    this is exactly (σ_x, σ_y, σ_z).
    """
    if d < 2:
        raise LhsError("bad-dim", f"basis needs dimension ≥ 2, got {d}")
    out: list[np.ndarray] = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            out.append(sym)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j
            asym[k, j] = 1j
            out.append(asym)
    for l in range(1, d):
        diag = np.zeros((d, d), dtype=complex)
        diag[np.arange(l), np.arange(l)] = 1.0
        diag[l, l] = -l
        out.append(diag * sqrt(2.0 / (l * (l + 1))))
    return [HermitianOperator((d,), m) for m in out]


def _check_povm(effects: Sequence, side: int) -> list[np.ndarray]:
    mats = [_operand(e) for e in effects]
    for m in mats:
        if m.shape != (side, side):
            raise LhsError("bad-dims", f"effect shape {m.shape}, expected {(side, side)}")
        if np.linalg.eigvalsh(m)[0] < -1e-9:
            raise LhsError("bad-povm", "effect has a negative eigenvalue beyond 1e-9")
    total = sum(mats)
    if np.abs(total - np.eye(side)).max() > 1e-8:
        raise LhsError("bad-povm", "effects do not sum to the identity")
    return mats


def joint_probabilities(rho: DensityMatrix, alice: Sequence[Sequence], bob: Sequence[Sequence]) -> np.ndarray:
    """P(a,b|x,y) = tr[(A_{a|x} ⊗ B_{b|y}) ρ], returned indexed [a, b, x, y].

    Each party supplies a list of measurements, each measurement a list of
    effect operators forming a POVM. Outcome counts must agree across a
    party's measurements so the table is rectangular.
    """
    dims = rho.dims
    if len(dims) != 2:
        raise LhsError("bad-dims", f"state must be bipartite, dims {dims}")
    dA, dB = dims
    na = {len(m) for m in alice}
    nb = {len(m) for m in bob}
    if len(na) != 1 or len(nb) != 1:
        raise LhsError("bad-dims", "outcome counts differ across one party's measurements")
    a_mats = [_check_povm(m, dA) for m in alice]
    b_mats = [_check_povm(m, dB) for m in bob]
    table = np.empty((na.pop(), nb.pop(), len(alice), len(bob)))
    r = rho.entries
    for x, mx in enumerate(a_mats):
        for y, my in enumerate(b_mats):
            for a, ea in enumerate(mx):
                for b, eb in enumerate(my):
                    table[a, b, x, y] = float(np.trace(np.kron(ea, eb) @ r).real)
    return table


def operator_to_json(op) -> dict:
    """Serialize to {dims, re, im} with row-major entries."""
    ent = _operand(op)
    return {
        "dims": list(_operand_dims(op)),
        "re": ent.real.tolist(),
        "im": ent.imag.tolist(),
    }


def operator_from_json(data: dict) -> HermitianOperator:
    """Inverse of operator_to_json; re-validates Hermiticity on read."""
    try:
        dims = tuple(int(d) for d in data["dims"])
        entries = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise LhsError("bad-operator-json", f"malformed operator object: {exc}") from exc
    return HermitianOperator(dims, entries)
