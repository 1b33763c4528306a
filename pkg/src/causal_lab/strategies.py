"""Definite-order environment strategies and their outcome statistics.

Every strategy exposes a multilinear *operational functional*
``F(A, B, C, D) = Tr[W (A ⊗ B ⊗ C ⊗ D)]`` evaluated by composing states and
channels directly, without ever forming ``W``.  Probabilities follow from
``P(j1, k1, j2, k2) = P(k1|j1) P(k2|j2) F(M1_j1, ρ_k1, M2_j2, ρ_k2)``.

The Born-rule backend contracts an explicit process matrix instead; the two
agree to machine precision, which the test-suite checks for every class.

Conventions: subsystems are ordered ``I1, O1, I2, O2``; an instrument
element is represented by ``P(k|j) M_j ⊗ ρ_k`` and a channel by the
transpose-absorbed Choi operator of :meth:`QuantumChannel.choi`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .channels import QuantumChannel, constant_channel
from .operators import (
    DimensionError,
    as_operator,
    check_density,
    embed_mixed,
    frobenius,
    hermitian_basis,
    hs_gram,
    kron,
    partial_trace,
    partial_transpose,
    reorder_subsystems,
)
from .settings import MpSetting, PlayerSetting
from .statistics import JointDistribution

I1, O1, I2, O2 = 0, 1, 2, 3
FORWARD = "1->2"
BACKWARD = "2->1"
DIRECTIONS = (FORWARD, BACKWARD)

#: Class tags.
SI, SC, SQ, SN, SC_SEQ, SQ_SEQ = "SI", "SC", "SQ", "SN", "SCseq", "SQseq"
CLASS_TAGS = (SI, SC, SQ, SN, SC_SEQ, SQ_SEQ)

VALIDITY_TOL = 1e-8
WEIGHT_TOL = 1e-12

# frame (I_first, O_first, I_second, O_second) -> global order for 2->1
_BACKWARD_PERM = [2, 3, 0, 1]
# (I1, I2, O1, O2) -> (I1, O1, I2, O2)
_PARALLEL_PERM = [0, 2, 1, 3]


class UnsupportedClosedForm(ValueError):
    """Raised when a strategy has no closed-form process matrix."""


class InvalidProcessMatrix(ValueError):
    """Raised when a process matrix yields probabilities below the tolerance."""


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"branch weights must be nonnegative and sum to 1, got {w}")


def _check_direction(direction):
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def _global_args(direction, a, b, c, d):
    """Map global (I1, O1, I2, O2) operators to the causal frame."""
    if direction == FORWARD:
        return a, b, c, d
    return c, d, a, b


def _frame_to_global(w, frame_dims, direction):
    if direction == FORWARD:
        return w
    return reorder_subsystems(w, frame_dims, _BACKWARD_PERM)


def _frame_dims_to_global(frame_dims, direction):
    if direction == FORWARD:
        return tuple(frame_dims)
    f = frame_dims
    return (f[2], f[3], f[0], f[1])


def _tr(op) -> complex:
    return np.trace(op)


def _tr_prod(x, y) -> complex:
    """``Tr(x y)`` without forming the product."""
    return np.sum(x * y.T)


def _kron2(a, b) -> np.ndarray:
    (m, n), (p, q) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(m * p, n * q)


def _joint_trace(rho, dims, a, c) -> complex:
    """``Tr[ρ (a ⊗ c)]`` for ``ρ`` on a bipartite space with local ``dims``."""
    d1, d2 = dims
    r = rho.reshape(d1, d2, d1, d2)
    return np.einsum("ikjl,ji,lk->", r, a, c)


def _aux_state(rho1_aux, d1, da, a) -> np.ndarray:
    """``Tr_1[(a ⊗ I) ρ_{1,aux}]``: the memory conditioned on Alice's effect."""
    r = rho1_aux.reshape(d1, da, d1, da)
    return np.einsum("jk,kxjy->xy", a, r)


# --------------------------------------------------------------------------- #
# Parallel strategies
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class _Parallel:
    """Shared machinery: a mixture of input states on ``I1 ⊗ I2``, outputs discarded."""

    d_o1: int = 2
    d_o2: int = 2

    direction = None

    def _joint_inputs(self) -> list[tuple[float, np.ndarray, tuple[int, int]]]:
        raise NotImplementedError

    @property
    def dims(self) -> tuple[int, int, int, int]:
        _, rho, (d1, d2) = self._joint_inputs()[0]
        return (d1, self.d_o1, d2, self.d_o2)

    def functional(self, a, b, c, d) -> complex:
        total = 0.0
        for p, rho, dims in self._joint_inputs():
            total += p * _joint_trace(rho, dims, a, c)
        return total * _tr(b) * _tr(d)

    def process_matrix(self) -> np.ndarray:
        d_i1, d_o1, d_i2, d_o2 = self.dims
        rho = sum(p * r for p, r, _ in self._joint_inputs())
        w = kron(rho, np.eye(d_o1), np.eye(d_o2))
        return reorder_subsystems(w, (d_i1, d_i2, d_o1, d_o2), _PARALLEL_PERM)


@dataclass(frozen=True, eq=False)
class IndividualStrategy(_Parallel):
    """Independent inputs ``ρ1`` for Alice and ``ρ2`` for Bob."""

    rho1: np.ndarray = None
    rho2: np.ndarray = None

    tag = SI

    def __init__(self, rho1, rho2, d_o1=2, d_o2=2):
        object.__setattr__(self, "rho1", check_density(rho1, "rho1"))
        object.__setattr__(self, "rho2", check_density(rho2, "rho2"))
        object.__setattr__(self, "d_o1", int(d_o1))
        object.__setattr__(self, "d_o2", int(d_o2))

    def _joint_inputs(self):
        return [(1.0, np.kron(self.rho1, self.rho2), (self.rho1.shape[0], self.rho2.shape[0]))]

    def functional(self, a, b, c, d) -> complex:
        return _tr_prod(self.rho1, a) * _tr(b) * _tr_prod(self.rho2, c) * _tr(d)

    def as_sequential(self) -> "NoMemorySequential":
        """The same statistics written as a memoryless sequential strategy 1->2.

        Bob's input comes from the replacement channel ``ρ ↦ Tr(ρ) ρ2``.
        """
        return NoMemorySequential(
            self.rho1, constant_channel(self.rho2, self.d_o1), FORWARD, d_o_last=self.d_o2
        )


@dataclass(frozen=True, eq=False)
class ClassicalParallel(_Parallel):
    """Shared randomness ``X``: branches ``(p_X, ρ1_X, ρ2_X)``."""

    branches: tuple = ()

    tag = SC

    def __init__(self, branches, d_o1=2, d_o2=2):
        branches = tuple(
            (float(p), check_density(r1, "rho1_X"), check_density(r2, "rho2_X"))
            for p, r1, r2 in branches
        )
        if not branches:
            raise ValueError("need at least one branch")
        _check_weights([b[0] for b in branches])
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "d_o1", int(d_o1))
        object.__setattr__(self, "d_o2", int(d_o2))

    def _joint_inputs(self):
        return [(p, np.kron(r1, r2), (r1.shape[0], r2.shape[0])) for p, r1, r2 in self.branches]


@dataclass(frozen=True, eq=False)
class QuantumParallel(_Parallel):
    """A joint (possibly entangled) input state ``ρ12`` on ``I1 ⊗ I2``."""

    rho12: np.ndarray = None
    input_dims: tuple = (2, 2)

    tag = SQ

    def __init__(self, rho12, input_dims=(2, 2), d_o1=2, d_o2=2):
        rho = check_density(rho12, "rho12")
        dims = tuple(int(d) for d in input_dims)
        if len(dims) != 2 or dims[0] * dims[1] != rho.shape[0]:
            raise DimensionError(f"rho12 of dim {rho.shape[0]} does not match {dims}")
        object.__setattr__(self, "rho12", rho)
        object.__setattr__(self, "input_dims", dims)
        object.__setattr__(self, "d_o1", int(d_o1))
        object.__setattr__(self, "d_o2", int(d_o2))

    def _joint_inputs(self):
        return [(1.0, self.rho12, self.input_dims)]


# --------------------------------------------------------------------------- #
# Sequential strategies
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class ParallelBranch:
    """Branch of a quantum-memory sequential strategy that sends a joint state."""

    weight: float
    rho12: np.ndarray
    input_dims: tuple = (2, 2)

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "rho12", check_density(self.rho12, "rho12"))
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))


@dataclass(frozen=True, eq=False)
class MemoryBranch:
    """Branch with a quantum memory.

    ``rho1_aux`` lives on ``I_first ⊗ aux``; ``channel`` maps ``aux ⊗ O_first``
    to ``I_second``.
    """

    weight: float
    rho1_aux: np.ndarray
    aux_dim: int
    channel: QuantumChannel

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        rho = check_density(self.rho1_aux, "rho1_aux")
        if rho.shape[0] % int(self.aux_dim):
            raise DimensionError("rho1_aux dimension is not a multiple of aux_dim")
        object.__setattr__(self, "rho1_aux", rho)
        object.__setattr__(self, "aux_dim", int(self.aux_dim))
        if self.channel.dim_in % self.aux_dim:
            raise DimensionError("channel input must be aux ⊗ O_first")

    @property
    def d_in_first(self) -> int:
        return self.rho1_aux.shape[0] // self.aux_dim

    @property
    def d_out_first(self) -> int:
        return self.channel.dim_in // self.aux_dim


@dataclass(frozen=True, eq=False)
class _Sequential:
    direction: str = FORWARD
    d_o_last: int = 2

    def _frame_dims(self) -> tuple[int, int, int, int]:
        raise NotImplementedError

    def _frame_functional(self, a, b, c, d) -> complex:
        raise NotImplementedError

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return _frame_dims_to_global(self._frame_dims(), self.direction)

    def functional(self, a, b, c, d) -> complex:
        return self._frame_functional(*_global_args(self.direction, a, b, c, d))


@dataclass(frozen=True, eq=False)
class NoMemorySequential(_Sequential):
    """First player receives ``ρ1``; her output goes through ``Λ`` to the second player."""

    rho1: np.ndarray = None
    channel: QuantumChannel = None

    tag = SN

    def __init__(self, rho1, channel, direction=FORWARD, d_o_last=2):
        _check_direction(direction)
        object.__setattr__(self, "rho1", check_density(rho1, "rho1"))
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "d_o_last", int(d_o_last))

    def _frame_dims(self):
        return (self.rho1.shape[0], self.channel.dim_in, self.channel.dim_out, self.d_o_last)

    def _frame_functional(self, a, b, c, d):
        return _tr_prod(self.rho1, a) * _tr_prod(self.channel(b), c) * _tr(d)

    def process_matrix(self) -> np.ndarray:
        w = kron(self.rho1, self.channel.choi(), np.eye(self.d_o_last))
        return _frame_to_global(w, self._frame_dims(), self.direction)


@dataclass(frozen=True, eq=False)
class ClassicalSequential(_Sequential):
    """Classical memory ``X`` shared between the first input and the channel."""

    branches: tuple = ()

    tag = SC_SEQ

    def __init__(self, branches, direction=FORWARD, d_o_last=2):
        _check_direction(direction)
        branches = tuple((float(p), check_density(r, "rho1_X"), ch) for p, r, ch in branches)
        if not branches:
            raise ValueError("need at least one branch")
        _check_weights([b[0] for b in branches])
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "d_o_last", int(d_o_last))

    def _frame_dims(self):
        _, r, ch = self.branches[0]
        return (r.shape[0], ch.dim_in, ch.dim_out, self.d_o_last)

    def _frame_functional(self, a, b, c, d):
        total = 0.0
        for p, r, ch in self.branches:
            total += p * _tr_prod(r, a) * _tr_prod(ch(b), c)
        return total * _tr(d)

    def process_matrix(self) -> np.ndarray:
        eye = np.eye(self.d_o_last)
        w = sum(p * kron(r, ch.choi(), eye) for p, r, ch in self.branches)
        return _frame_to_global(w, self._frame_dims(), self.direction)


@dataclass(frozen=True, eq=False)
class QuantumSequential(_Sequential):
    """Quantum memory: a mixture of :class:`ParallelBranch` and :class:`MemoryBranch`."""

    branches: tuple = ()
    d_o_first: int = None

    tag = SQ_SEQ

    def __init__(self, branches, direction=FORWARD, d_o_last=2, d_o_first=None):
        _check_direction(direction)
        branches = tuple(branches)
        if not branches:
            raise ValueError("need at least one branch")
        _check_weights([b.weight for b in branches])
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "d_o_last", int(d_o_last))
        memory = [b for b in branches if isinstance(b, MemoryBranch)]
        if d_o_first is None:
            d_o_first = memory[0].d_out_first if memory else 2
        object.__setattr__(self, "d_o_first", int(d_o_first))
        for b in memory:
            if b.d_out_first != self.d_o_first:
                raise DimensionError("memory branches disagree on the first output dimension")

    def _frame_dims(self):
        b = self.branches[0]
        if isinstance(b, ParallelBranch):
            d_i_first, d_i_second = b.input_dims
        else:
            d_i_first, d_i_second = b.d_in_first, b.channel.dim_out
        return (d_i_first, self.d_o_first, d_i_second, self.d_o_last)

    def _frame_functional(self, a, b, c, d):
        total = 0.0
        for br in self.branches:
            if isinstance(br, ParallelBranch):
                total += br.weight * _joint_trace(br.rho12, br.input_dims, a, c) * _tr(b)
            else:
                aux = _aux_state(br.rho1_aux, br.d_in_first, br.aux_dim, a)
                total += br.weight * _tr_prod(br.channel(_kron2(aux, b)), c)
        return total * _tr(d)

    def process_matrix(self) -> np.ndarray:
        raise UnsupportedClosedForm(
            "quantum-memory sequential strategies have no closed form here; "
            "use reconstruct_process_matrix"
        )


Strategy = Union[
    IndividualStrategy,
    ClassicalParallel,
    QuantumParallel,
    NoMemorySequential,
    ClassicalSequential,
    QuantumSequential,
]


def class_label(spec) -> str:
    """Identification label of the class a strategy belongs to, e.g. ``"S_N,1->2"``."""
    base = {SI: "S_I", SC: "S_C", SQ: "S_Q", SN: "S_N", SC_SEQ: "S_C", SQ_SEQ: "S_Q"}[spec.tag]
    if spec.direction is None:
        return base
    return f"{base},{spec.direction}"


# --------------------------------------------------------------------------- #
# Process matrices
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class ProcessMatrix:
    """Operator on ``I1 ⊗ O1 ⊗ I2 ⊗ O2`` together with its local dimensions."""

    matrix: np.ndarray
    dims: tuple

    def __post_init__(self):
        m = as_operator(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 4 or int(np.prod(dims)) != m.shape[0]:
            raise DimensionError(f"matrix of dim {m.shape[0]} does not match dims {dims}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def d_out(self) -> int:
        return self.dims[O1] * self.dims[O2]

    def reduced(self, keep) -> np.ndarray:
        return partial_trace(self.matrix, self.dims, keep)

    def to_dict(self) -> dict:
        from .io import encode_matrix

        return {"dims": list(self.dims), "matrix": encode_matrix(self.matrix)}


def build_process_matrix(spec) -> ProcessMatrix:
    """Closed-form process matrix for every class except quantum-memory sequential."""
    return ProcessMatrix(spec.process_matrix(), spec.dims)


def _check_setting_dims(dims, setting: MpSetting):
    if tuple(dims) != setting.dims:
        raise DimensionError(f"strategy dims {tuple(dims)} do not match setting dims {setting.dims}")


def _clean(probs: np.ndarray, tol: float) -> np.ndarray:
    if np.any(probs < -tol):
        raise InvalidProcessMatrix(f"negative probability {probs.min():.3e}")
    return np.clip(probs, 0.0, None)


def simulate_distribution(spec, setting: MpSetting) -> JointDistribution:
    """Exact ``P(j1, k1, j2, k2)`` by composing the strategy's states and channels."""
    _check_setting_dims(spec.dims, setting)
    alice, bob = setting.alice, setting.bob
    shape = setting.cardinalities
    probs = np.zeros(shape)
    for j1, k1, j2, k2 in itertools.product(*(range(n) for n in shape)):
        w = alice.cond[j1, k1] * bob.cond[j2, k2]
        if w == 0.0:
            continue
        val = spec.functional(
            alice.effects[j1], alice.preparations[k1], bob.effects[j2], bob.preparations[k2]
        )
        probs[j1, k1, j2, k2] = w * val.real
    return JointDistribution(_clean(probs, 1e-12))


def instrument_choi(player: PlayerSetting, j: int, k: int) -> np.ndarray:
    """``P(k|j) M_j ⊗ ρ_k`` on ``input ⊗ output`` (0-based indices)."""
    if not (0 <= j < player.n_outcomes and 0 <= k < player.n_preparations):
        raise IndexError(f"instrument index ({j}, {k}) out of range")
    return player.cond[j, k] * np.kron(player.effects[j], player.preparations[k])


def _instrument_stack(player: PlayerSetting) -> np.ndarray:
    return np.array(
        [[instrument_choi(player, j, k) for k in range(player.n_preparations)]
         for j in range(player.n_outcomes)]
    )


def born_distribution(w: ProcessMatrix, setting: MpSetting, tol: float = 1e-10) -> JointDistribution:
    """Generalized Born rule ``Tr[W (C[Γ1] ⊗ C[Γ2])]`` for every outcome quadruple."""
    _check_setting_dims(w.dims, setting)
    d1 = w.dims[I1] * w.dims[O1]
    d2 = w.dims[I2] * w.dims[O2]
    w4 = w.matrix.reshape(d1, d2, d1, d2)
    g1 = _instrument_stack(setting.alice)
    g2 = _instrument_stack(setting.bob)
    # Tr[W (X ⊗ Y)] = Σ W[a b, c d] X[c, a] Y[d, b]
    vals = np.einsum("abcd,jkca,lmdb->jklm", w4, g1, g2)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-8:
        raise InvalidProcessMatrix("Born probabilities have an imaginary part; W is not Hermitian")
    return JointDistribution(_clean(vals.real, tol))


def reconstruct_process_matrix(spec, dims: Sequence[int] | None = None) -> ProcessMatrix:
    """Linear inversion of the operational functional on a Hermitian product basis.

    Evaluates ``F(E_a, E_b, E_c, E_d)`` on local Hermitian bases and solves the
    Gram system, giving the unique ``W`` with ``Tr[W X] = F(X)`` on all of
    ``B(I1 ⊗ O1 ⊗ I2 ⊗ O2)``.
    """
    dims = tuple(spec.dims if dims is None else dims)
    if tuple(spec.dims) != dims:
        raise DimensionError(f"strategy dims {spec.dims} do not match requested {dims}")
    bases = [hermitian_basis(d) for d in dims]
    coeffs = np.zeros([d * d for d in dims])
    for idx in itertools.product(*(range(d * d) for d in dims)):
        coeffs[idx] = spec.functional(*(bases[s][i] for s, i in enumerate(idx))).real
    grams = [hs_gram(b) for b in bases]
    for g in grams:
        if np.linalg.cond(g) > 1e12:
            raise np.linalg.LinAlgError("singular reconstruction system")
    # solve mode by mode: x = (G1^-1 ⊗ G2^-1 ⊗ G3^-1 ⊗ G4^-1) c
    x = coeffs
    for axis, g in enumerate(grams):
        x = np.moveaxis(np.tensordot(np.linalg.inv(g), x, axes=([1], [axis])), 0, axis)
    total = int(np.prod(dims))
    w = np.zeros((total, total), dtype=complex)
    for idx in itertools.product(*(range(d * d) for d in dims)):
        c = x[idx]
        if c != 0.0:
            w += c * kron(*(bases[s][i] for s, i in enumerate(idx)))
    return ProcessMatrix(w, dims)


def process_matrix(spec) -> ProcessMatrix:
    """Closed form when available, otherwise reconstruction."""
    try:
        return build_process_matrix(spec)
    except UnsupportedClosedForm:
        return reconstruct_process_matrix(spec)


# --------------------------------------------------------------------------- #
# Validity and structure
# --------------------------------------------------------------------------- #


@dataclass
class ValidityReport:
    psd: bool
    min_eigenvalue: float
    trace: float
    trace_residual: float
    residual_eq1: float
    residual_eq2: float
    residual_eq3: float
    tol: float = VALIDITY_TOL

    @property
    def failures(self) -> list[str]:
        out = []
        if not self.psd:
            out.append("psd")
        if self.trace_residual > self.tol:
            out.append("trace")
        for name in ("residual_eq1", "residual_eq2", "residual_eq3"):
            if getattr(self, name) > self.tol:
                out.append(name)
        return out

    @property
    def physical(self) -> bool:
        return not self.failures


def validate_process_matrix(w: ProcessMatrix, tol: float = VALIDITY_TOL) -> ValidityReport:
    """Positivity, normalization and the three no-signalling-in-time constraints.

    Positivity is checked on the output-transposed operator, which is the
    positive representative in the usual Choi convention (the
    transpose-absorbed one used here need not be PSD when channels are
    involved).  Residuals are Frobenius norms.
    """
    m, dims = w.matrix, w.dims
    positive = partial_transpose(m, dims, [O1, O2])
    min_eig = float(np.linalg.eigvalsh((positive + positive.conj().T) / 2).min())
    trace = float(np.trace(m).real)

    # (1): marginal of Bob's side is independent of O2
    bob = partial_trace(m, dims, [I2, O2])
    eq1 = frobenius(embed_mixed(bob, (dims[I2], dims[O2]), [1]) - bob)
    # (2): marginal of Alice's side is independent of O1
    alice = partial_trace(m, dims, [I1, O1])
    eq2 = frobenius(embed_mixed(alice, (dims[I1], dims[O1]), [1]) - alice)
    # (3): no term depends on both outputs
    eq3 = frobenius(
        m
        - embed_mixed(m, dims, [O1])
        - embed_mixed(m, dims, [O2])
        + embed_mixed(m, dims, [O1, O2])
    )
    return ValidityReport(
        psd=min_eig >= -1e-10,
        min_eigenvalue=min_eig,
        trace=trace,
        trace_residual=abs(trace - w.d_out),
        residual_eq1=eq1,
        residual_eq2=eq2,
        residual_eq3=eq3,
        tol=tol,
    )


def _projection_forward(m, dims, tag):
    """Class-projected form of ``m`` for direction 1->2 (or parallel classes)."""
    total = np.trace(m).real
    if tag == SI:
        r1 = partial_trace(m, dims, [I1]) / total
        r2 = partial_trace(m, dims, [I2]) / total
        return total * kron(r1, np.eye(dims[O1]) / dims[O1], r2, np.eye(dims[O2]) / dims[O2])
    if tag == SQ:
        return embed_mixed(m, dims, [O1, O2])
    if tag == SN:
        r1 = partial_trace(m, dims, [I1]) / total
        choi = partial_trace(m, dims, [O1, I2]) / dims[O2]
        return kron(r1, choi, np.eye(dims[O2]))
    if tag == SQ_SEQ:
        return embed_mixed(m, dims, [O2])
    raise ValueError(f"no structural check for class {tag!r}")


def structural_class_check(w: ProcessMatrix, tag: str, direction: str | None = FORWARD) -> float:
    """Frobenius distance between ``W`` and its projection onto the class structure.

    Supported tags: ``SI``, ``SQ`` (parallel) and ``SN``, ``SQseq`` with a
    direction.  Zero (to rounding) for in-class ``W``; strictly positive
    otherwise.
    """
    m, dims = w.matrix, w.dims
    if tag in (SN, SQ_SEQ):
        _check_direction(direction)
        if direction == BACKWARD:
            # view W in the causal frame (I2, O2, I1, O1)
            m = reorder_subsystems(m, dims, [2, 3, 0, 1])
            dims = (dims[I2], dims[O2], dims[I1], dims[O1])
    elif tag not in (SI, SQ):
        raise ValueError(f"no structural check for class {tag!r}")
    return frobenius(m - _projection_forward(m, dims, tag))


def swap_parties(dist: JointDistribution) -> JointDistribution:
    """Exchange the roles of the two players ``(j1, k1, j2, k2) → (j2, k2, j1, k1)``."""
    return JointDistribution(np.transpose(dist.probs, (2, 3, 0, 1)))


# --------------------------------------------------------------------------- #
# Reference strategies of the optical experiment
# --------------------------------------------------------------------------- #

#: Weight of the parallel (shared Φ+) branch in the quantum-memory sequential strategy.
SQ_SEQ_PARALLEL_WEIGHT = 0.75


def _plus() -> np.ndarray:
    return np.full((2, 2), 0.5, dtype=complex)


def _basis(i: int) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    out[i, i] = 1.0
    return out


def _phi_plus() -> np.ndarray:
    from .operators import bell_state

    return bell_state()


def _sn(direction):
    from .channels import identity_channel

    return NoMemorySequential(_basis(0), identity_channel(2), direction)


def _sc_seq(direction):
    from .channels import bit_flip_channel, identity_channel

    return ClassicalSequential(
        [(0.5, _basis(0), identity_channel(2)), (0.5, _basis(1), bit_flip_channel())], direction
    )


def _sq_seq(direction):
    from .channels import cnot_then_discard_control

    # aux is the control, Alice's output the target; the target goes to Bob
    return QuantumSequential(
        [
            ParallelBranch(SQ_SEQ_PARALLEL_WEIGHT, _phi_plus()),
            MemoryBranch(1.0 - SQ_SEQ_PARALLEL_WEIGHT, _phi_plus(), 2, cnot_then_discard_control(True)),
        ],
        direction,
    )


BUILTIN_STRATEGIES = {
    "si": lambda: IndividualStrategy(_plus(), _plus()),
    "sc": lambda: ClassicalParallel(
        [(0.5, _basis(0), _basis(0)), (0.5, _basis(1), _basis(1))]
    ),
    "sq": lambda: QuantumParallel(_phi_plus()),
    "sn12": lambda: _sn(FORWARD),
    "sn21": lambda: _sn(BACKWARD),
    "sc12": lambda: _sc_seq(FORWARD),
    "sc21": lambda: _sc_seq(BACKWARD),
    "sq12": lambda: _sq_seq(FORWARD),
    "sq21": lambda: _sq_seq(BACKWARD),
}

#: The six strategies realized in the experiment, in table order.
EXPERIMENT_STRATEGIES = ("si", "sc", "sq", "sn12", "sc12", "sq12")


def builtin_strategy(name: str):
    try:
        return BUILTIN_STRATEGIES[name.lower()]()
    except KeyError:
        raise KeyError(
            f"unknown builtin strategy {name!r}; choose from {sorted(BUILTIN_STRATEGIES)}"
        ) from None
