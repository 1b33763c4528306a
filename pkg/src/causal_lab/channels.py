"""Quantum channels in Kraus form and their transpose-absorbed Choi operators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import PAULI_X, as_operator, dagger, haar_unitary


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Trace-preserving CP map ``ρ ↦ Σ K ρ K†`` from ``C^dim_in`` to ``C^dim_out``."""

    kraus: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops) or len(shape) != 2:
            raise ValueError("Kraus operators must share one 2-d shape")
        object.__setattr__(self, "kraus", ops)
        residual = np.max(np.abs(self.tp_defect()))
        if residual > 1e-10:
            raise ValueError(f"channel is not trace preserving (residual {residual:.2e})")

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    def tp_defect(self) -> np.ndarray:
        return sum(dagger(k) @ k for k in self.kraus) - np.eye(self.dim_in)

    def __call__(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        out = self.kraus[0] @ op @ self.kraus[0].conj().T
        for k in self.kraus[1:]:
            out = out + k @ op @ k.conj().T
        return out

    def choi(self) -> np.ndarray:
        """``Σ_ab |b⟩⟨a| ⊗ Λ(|a⟩⟨b|)`` on ``in ⊗ out``.

        With this convention ``Tr[C (ρ ⊗ M)] = Tr[Λ(ρ) M]`` holds without any
        transposition of ``ρ``.  As a consequence the operator is the partial
        transpose (on the input) of the usual positive Choi matrix.
        """
        d = self.dim_in
        out = np.zeros((d * self.dim_out, d * self.dim_out), dtype=complex)
        for a in range(d):
            for b in range(d):
                unit = np.zeros((d, d), dtype=complex)
                unit[a, b] = 1.0
                swap = np.zeros((d, d), dtype=complex)
                swap[b, a] = 1.0
                out += np.kron(swap, self(unit))
        return out

    def positive_choi(self) -> np.ndarray:
        """The standard (PSD) Choi matrix ``Σ_ab |a⟩⟨b| ⊗ Λ(|a⟩⟨b|)``."""
        d = self.dim_in
        out = np.zeros((d * self.dim_out, d * self.dim_out), dtype=complex)
        for a in range(d):
            for b in range(d):
                unit = np.zeros((d, d), dtype=complex)
                unit[a, b] = 1.0
                out += np.kron(unit, self(unit))
        return out

    def to_dict(self) -> dict:
        from .io import encode_matrix

        return {"kraus": [encode_matrix(k) for k in self.kraus]}


def identity_channel(d: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(d, dtype=complex),))


def unitary_channel(u) -> QuantumChannel:
    return QuantumChannel((as_operator(u),))


def bit_flip_channel() -> QuantumChannel:
    """Deterministic Pauli-X conjugation on a qubit."""
    return unitary_channel(PAULI_X)


def constant_channel(state, dim_in: int) -> QuantumChannel:
    """Replacement channel ``ρ ↦ Tr(ρ) σ``."""
    sigma = as_operator(state)
    evals, evecs = np.linalg.eigh((sigma + dagger(sigma)) / 2)
    kraus = []
    for lam, vec in zip(evals, evecs.T):
        if lam <= 1e-15:
            continue
        for j in range(dim_in):
            k = np.zeros((sigma.shape[0], dim_in), dtype=complex)
            k[:, j] = np.sqrt(lam) * vec
            kraus.append(k)
    return QuantumChannel(tuple(kraus))


def cnot_then_discard_control(control_first: bool = True) -> QuantumChannel:
    """Qubit channel on ``control ⊗ target`` that applies CNOT and keeps the target.

    Kraus operators ``(⟨i|_control ⊗ I) CNOT`` for ``i = 0, 1``.
    """
    cnot = np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    )
    if not control_first:
        swap = np.eye(4)[[0, 2, 1, 3]]
        cnot = swap @ cnot @ swap
    kraus = []
    for i in range(2):
        bra = np.zeros((1, 2))
        bra[0, i] = 1.0
        if control_first:
            proj = np.kron(bra, np.eye(2))
        else:
            proj = np.kron(np.eye(2), bra)
        kraus.append(proj @ cnot)
    return QuantumChannel(tuple(kraus))


def random_channel(dim_in: int, dim_out: int, env_dim: int = 2, seed=None) -> QuantumChannel:
    """Stinespring channel from a Haar isometry ``C^dim_in → C^dim_out ⊗ C^env_dim``."""
    big = dim_out * env_dim
    if big < dim_in:
        raise ValueError("dim_out * env_dim must be at least dim_in")
    iso = haar_unitary(big, seed)[:, :dim_in]
    iso = iso.reshape(dim_out, env_dim, dim_in)
    return QuantumChannel(tuple(iso[:, e, :] for e in range(env_dim)))


def channel_from_kraus(kraus: Sequence) -> QuantumChannel:
    return QuantumChannel(tuple(kraus))
