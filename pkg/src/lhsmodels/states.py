"""Named state families and random density-matrix sampling.

Conventions fixed here and recorded in campaign outputs:

* Bell basis order (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻); the Werner parameter is the visibility
  of Φ⁺ against white noise. Any other Bell state differs by a Bob-side
  unitary, which changes neither negativity nor model feasibility.
* Amplitude damping uses the survival parameter η = e^{-γt}:
  E₀ = |0⟩⟨0| + √η |1⟩⟨1|, E₁ = √(1-η) |0⟩⟨1|, applied to both qubits.
  η = 1 leaves the state untouched; η = 0 decays to |00⟩.
* Hilbert-Schmidt sampling: ρ = GG†/tr with G a 4×4 complex Ginibre matrix.
  Bures sampling: ρ ∝ (I+U) GG† (I+U†) with U Haar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LhsError
from .operators import DensityMatrix, HermitianOperator

__all__ = [
    "RngStream",
    "FamilyPoint",
    "BELL_VECTORS",
    "bell_diagonal",
    "werner",
    "amplitude_damped",
    "noisy_tripartite",
    "sample_hs",
    "sample_bures",
    "haar_unitary",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic substream: (seed, streamId) fixes every draw bit-exactly.

    ``generator`` returns a fresh generator positioned at the stream start on
    every access, so sampling operations called with the same stream always
    reproduce the same values.
    """

    seed: int
    streamId: int = 0

    @property
    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.streamId,))
        return np.random.default_rng(seq)


@dataclass(frozen=True)
class FamilyPoint:
    familyName: str
    parameters: dict[str, float]
    state: DensityMatrix


_SQ2 = np.sqrt(2.0)
BELL_VECTORS = (
    np.array([1, 0, 0, 1], dtype=complex) / _SQ2,   # Φ⁺
    np.array([1, 0, 0, -1], dtype=complex) / _SQ2,  # Φ⁻
    np.array([0, 1, 1, 0], dtype=complex) / _SQ2,   # Ψ⁺
    np.array([0, 1, -1, 0], dtype=complex) / _SQ2,  # Ψ⁻
)


def _dm(entries: np.ndarray, dims: tuple[int, ...], label: str | None = None) -> DensityMatrix:
    return DensityMatrix(HermitianOperator(dims, entries, label))


def bell_diagonal(p) -> DensityMatrix:
    """Σᵢ pᵢ |Ψᵢ⟩⟨Ψᵢ| in the fixed Bell order; eigenvalues are exactly p."""
    weights = np.asarray(p, dtype=float)
    if weights.shape != (4,):
        raise LhsError("bad-probabilities", f"need 4 weights, got shape {weights.shape}")
    if weights.min() < -1e-12 or abs(weights.sum() - 1.0) > 1e-9:
        raise LhsError(
            "bad-probabilities",
            f"weights must lie on the simplex (min {weights.min():.3e}, sum {weights.sum()!r})",
        )
    weights = np.clip(weights, 0.0, None)
    weights = weights / weights.sum()
    rho = sum(w * np.outer(v, v.conj()) for w, v in zip(weights, BELL_VECTORS))
    return _dm(rho, (2, 2), "bell-diagonal")


def werner(w: float) -> DensityMatrix:
    """Visibility-w mixture of a Bell state with white noise.

    Bell-diagonal weights ((1+3w)/4, (1-w)/4, (1-w)/4, (1-w)/4); negativity
    max(0, (3w-1)/4), PPT boundary at w = 1/3.
    """
    if not 0.0 <= w <= 1.0:
        raise LhsError("bad-parameter", f"Werner parameter {w} outside [0,1]")
    return bell_diagonal([(1 + 3 * w) / 4, (1 - w) / 4, (1 - w) / 4, (1 - w) / 4])


def amplitude_damped(eta: float) -> DensityMatrix:
    """Both qubits of a Bell pair through an amplitude-damping channel.

    eta is the survival probability of |1⟩ (η = e^{-γt}): 1 is noiseless,
    0 decays everything to |00⟩. Entangled for every η > 0.
    """
    if not 0.0 <= eta <= 1.0:
        raise LhsError("bad-parameter", f"survival parameter {eta} outside [0,1]")
    e0 = np.array([[1.0, 0.0], [0.0, np.sqrt(eta)]], dtype=complex)
    e1 = np.array([[0.0, np.sqrt(1.0 - eta)], [0.0, 0.0]], dtype=complex)
    psi = BELL_VECTORS[0]
    rho0 = np.outer(psi, psi.conj())
    rho = np.zeros((4, 4), dtype=complex)
    for ka in (e0, e1):
        for kb in (e0, e1):
            k = np.kron(ka, kb)
            rho += k @ rho0 @ k.conj().T
    return _dm(rho, (2, 2), "amplitude-damped")


def noisy_tripartite(kind: str, p: float) -> DensityMatrix:
    """p |ψ⟩⟨ψ| + (1-p) I/8 for ψ ∈ {GHZ, W}."""
    if not 0.0 <= p <= 1.0:
        raise LhsError("bad-parameter", f"mixing parameter {p} outside [0,1]")
    if kind == "ghz":
        psi = np.zeros(8, dtype=complex)
        psi[0] = psi[7] = 1 / _SQ2
    elif kind == "w":
        psi = np.zeros(8, dtype=complex)
        psi[1] = psi[2] = psi[4] = 1 / np.sqrt(3.0)
    else:
        raise LhsError("bad-parameter", f"kind must be 'ghz' or 'w', got {kind!r}")
    rho = p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(8) / 8
    return _dm(rho, (2, 2, 2), f"noisy-{kind}")


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator
    return np.random.default_rng(rng)


def _ginibre(gen: np.random.Generator, n: int) -> np.ndarray:
    return gen.normal(size=(n, n)) + 1j * gen.normal(size=(n, n))


def sample_hs(rng) -> DensityMatrix:
    """Two-qubit state under the Hilbert-Schmidt measure."""
    g = _ginibre(_as_generator(rng), 4)
    m = g @ g.conj().T
    return _dm(m / np.trace(m).real, (2, 2), "hs-sample")


def sample_bures(rng) -> DensityMatrix:
    """Two-qubit state under the Bures measure."""
    gen = _as_generator(rng)
    g = _ginibre(gen, 4)
    u = haar_unitary(4, gen)
    a = (np.eye(4) + u) @ g
    m = a @ a.conj().T
    return _dm(m / np.trace(m).real, (2, 2), "bures-sample")


def haar_unitary(d: int, rng) -> np.ndarray:
    """Haar-random unitary via phase-normalized QR of a Ginibre matrix."""
    if d < 1:
        raise LhsError("bad-dim", f"need d ≥ 1, got {d}")
    gen = _as_generator(rng)
    q, r = np.linalg.qr(_ginibre(gen, d))
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases
