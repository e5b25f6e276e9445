"""Measurement sets on the Bloch sphere and their polytope geometry.

A measurement set stores one direction per binary measurement (outcomes use
±û). The insphere radius of the convex hull of the antipodally closed
direction set is the depolarization factor carried through every certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import LhsError
from .operators import HermitianOperator

__all__ = [
    "BlochDirection",
    "MeasurementSet",
    "DeterministicStrategy",
    "SOLID_NAMES",
    "solid_directions",
    "random_directions",
    "measurement_set",
    "insphere_radius",
    "projector",
    "depolarized_projector",
    "strategies",
    "set_to_json",
    "set_from_json",
]

_MERGE_TOL = 1e-10

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class BlochDirection:
    """Unit vector on the Bloch sphere."""

    u: tuple[float, float, float]

    def __post_init__(self):
        vec = tuple(float(c) for c in self.u)
        if len(vec) != 3:
            raise LhsError("bad-direction", f"need a 3-vector, got {len(vec)} components")
        norm = sqrt(sum(c * c for c in vec))
        if abs(norm - 1.0) > 1e-12:
            raise LhsError("bad-direction", f"norm {norm!r} is not 1 within 1e-12")
        object.__setattr__(self, "u", vec)

    def as_array(self) -> np.ndarray:
        return np.array(self.u)


@dataclass(frozen=True)
class MeasurementSet:
    """Canonicalized direction set with its cached insphere radius.

    vertexCount is the size of the antipodally closed vertex set the insphere
    was computed from (twice the measurement count).
    """

    directions: tuple[BlochDirection, ...]
    name: str
    insphere: float
    vertexCount: int

    def __len__(self) -> int:
        return len(self.directions)

    def direction_matrix(self) -> np.ndarray:
        return np.array([d.u for d in self.directions])


@dataclass(frozen=True)
class DeterministicStrategy:
    """Outcome assignment λ: measurement x answers bit λ_x."""

    bits: str

    def outcome(self, x: int) -> int:
        return int(self.bits[x])


def _canonicalize(raw: np.ndarray) -> np.ndarray:
    """Normalize, fold antipodes onto the lexicographically larger rep, dedupe."""
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < _MERGE_TOL):
        raise LhsError("bad-direction", "zero vector among directions")
    unit = raw / norms[:, None]
    reps = []
    for v in unit:
        w = tuple(v)
        neg = tuple(-v)
        reps.append(np.array(max(w, neg)))
    merged: list[np.ndarray] = []
    for v in reps:
        if not any(np.abs(v - m).max() <= _MERGE_TOL for m in merged):
            merged.append(v)
    order = np.lexsort(np.array(merged).T[::-1])
    return np.array([merged[i] for i in order[::-1]])


def _insphere_of_closure(dirs: np.ndarray) -> tuple[float, int]:
    closure = np.vstack([dirs, -dirs])
    try:
        hull = ConvexHull(closure)
    except QhullError as exc:
        raise LhsError("degenerate-polytope", f"hull construction failed: {exc}") from exc
    # Facet plane: normal·x + offset = 0 with the interior on the negative side.
    normals = hull.equations[:, :3]
    offsets = hull.equations[:, 3]
    dists = np.abs(offsets) / np.linalg.norm(normals, axis=1)
    r = float(dists.min())
    if np.any(offsets > -_MERGE_TOL) or r <= 0.0:
        raise LhsError("degenerate-polytope", "origin is not strictly inside the hull")
    return r, len(closure)


def measurement_set(directions: Iterable, name: str) -> MeasurementSet:
    """Build a canonical MeasurementSet from raw direction vectors."""
    raw = np.array([d.u if isinstance(d, BlochDirection) else d for d in directions], dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise LhsError("bad-direction", f"directions must be 3-vectors, got shape {raw.shape}")
    canon = _canonicalize(raw)
    r, nvert = _insphere_of_closure(canon)
    return MeasurementSet(
        directions=tuple(BlochDirection(tuple(v)) for v in canon),
        name=name,
        insphere=r,
        vertexCount=nvert,
    )


_PHI = (1 + sqrt(5)) / 2


def _cyclic(coords: Sequence[float]) -> list[tuple[float, float, float]]:
    a, b, c = coords
    return [(a, b, c), (c, a, b), (b, c, a)]


def _sign_combos(coords: Sequence[float], even_only: bool = False) -> list[tuple[float, ...]]:
    out = []
    for s0 in (1, -1):
        for s1 in (1, -1):
            for s2 in (1, -1):
                if even_only and s0 * s1 * s2 < 0:
                    continue
                out.append((s0 * coords[0], s1 * coords[1], s2 * coords[2]))
    return out


def _permutations3(coords: Sequence[float]) -> list[tuple[float, ...]]:
    from itertools import permutations

    return [tuple(p) for p in set(permutations(coords))]


def _solid_vertices(name: str) -> list[tuple[float, ...]]:
    if name == "icosahedron":
        return [v for base in _cyclic((0.0, 1.0, _PHI)) for v in _sign_combos(base)]
    if name == "dodecahedron":
        cube = _sign_combos((1.0, 1.0, 1.0))
        rects = [v for base in _cyclic((0.0, 1.0 / _PHI, _PHI)) for v in _sign_combos(base)]
        return cube + rects
    if name == "truncated-cube":
        xi = sqrt(2) - 1
        return [s for p in _permutations3((xi, 1.0, 1.0)) for s in _sign_combos(p)]
    if name == "truncated-octahedron":
        return [s for p in _permutations3((0.0, 1.0, 2.0)) for s in _sign_combos(p)]
    if name == "truncated-tetrahedron-antipodal":
        base = [
            s
            for p in _permutations3((1.0, 1.0, 3.0))
            for s in _sign_combos(p, even_only=True)
        ]
        # The solid itself is not centrally symmetric; antipodes are appended.
        return base + [(-x, -y, -z) for (x, y, z) in base]
    if name == "rhombicuboctahedron":
        return [s for p in _permutations3((1.0, 1.0, 1 + sqrt(2))) for s in _sign_combos(p)]
    if name == "octahedron":
        return [
            (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
            (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
            (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
        ]
    if name == "cube":
        return _sign_combos((1.0, 1.0, 1.0))
    raise LhsError("unknown-solid", f"no solid named {name!r}; known: {', '.join(SOLID_NAMES)}")


SOLID_NAMES = (
    "icosahedron",
    "dodecahedron",
    "truncated-cube",
    "truncated-octahedron",
    "truncated-tetrahedron-antipodal",
    "rhombicuboctahedron",
    "octahedron",
    "cube",
)


def solid_directions(name: str) -> MeasurementSet:
    """Measurement set along the vertices of a named solid.

    Coordinates are exact algebraic expressions evaluated in floating point,
    normalized to the unit sphere; antipodal vertex pairs merge into a single
    measurement.
    """
    return measurement_set(_solid_vertices(name), name)


def random_directions(m: int, seed) -> MeasurementSet:
    """m i.i.d. uniform directions (normalized Gaussian 3-vectors)."""
    if m < 3:
        raise LhsError("too-few", f"need at least 3 directions for a 3D hull, got {m}")
    rng = _as_generator(seed)
    vecs = rng.normal(size=(m, 3))
    return measurement_set(vecs, f"random-{m}")


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    gen = getattr(seed, "generator", None)
    if gen is not None:
        return gen if isinstance(gen, np.random.Generator) else gen()
    return np.random.default_rng(seed)


def insphere_radius(mset: MeasurementSet) -> float:
    """Cached insphere radius of the antipodal closure's convex hull."""
    return mset.insphere


def projector(u: BlochDirection, a: int) -> HermitianOperator:
    """Π_{a|u} = (I + (-1)^a u·σ)/2."""
    vec = u.as_array() if isinstance(u, BlochDirection) else np.asarray(u, dtype=float)
    sign = -1.0 if a else 1.0
    m = (np.eye(2) + sign * sum(c * p for c, p in zip(vec, _PAULI))) / 2
    return HermitianOperator((2,), m)


def depolarized_projector(u: BlochDirection, a: int, r: float) -> HermitianOperator:
    """r·Π_{a|u} + (1-r)·I/2; the effect's Bloch vector has norm r."""
    if not 0.0 <= r <= 1.0:
        raise LhsError("bad-noise", f"depolarization weight {r} outside [0,1]")
    m = r * projector(u, a).entries + (1 - r) * np.eye(2) / 2
    return HermitianOperator((2,), m)


def strategies(m: int) -> Iterator[DeterministicStrategy]:
    """All 2^m deterministic outcome assignments, index bit at string position x.

    The enumeration order is fixed: strategy k answers (k >> x) & 1 on
    measurement x, so bit-strings are least-significant-measurement first.
    """
    if m > 14:
        raise LhsError(
            "too-many-strategies",
            f"2^{m} hidden states exceed the guardrail; choose a solid with ≤ 14 measurements",
        )
    for k in range(2**m):
        yield DeterministicStrategy("".join(str((k >> x) & 1) for x in range(m)))


def set_to_json(mset: MeasurementSet) -> dict:
    return {
        "name": mset.name,
        "directions": [list(d.u) for d in mset.directions],
        "insphere": mset.insphere,
    }


def set_from_json(data: dict) -> MeasurementSet:
    try:
        return measurement_set(data["directions"], str(data["name"]))
    except (KeyError, TypeError) as exc:
        raise LhsError("bad-set-json", f"malformed measurement-set object: {exc}") from exc
