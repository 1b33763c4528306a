"""Measure-and-prepare settings for the two players.

A player measures a POVM ``{M_j}``, then prepares ``ρ_k`` with probability
``P(k|j)``.  The catalogs below are the step-1 (order identification) and
step-2 (CHSH) settings used in the optical experiment; angles are Bloch
``(θ, φ)`` pairs in degrees.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .operators import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    as_operator,
    basis_projector,
    bloch_pure_state,
    bloch_vector,
    check_density,
    check_effect,
    hermitian_basis,
    operator_rank,
    random_density,
    random_effect,
    seed_sequence,
)

COMPLETENESS_TOL = 1e-10
ROW_DISTINCT_TOL = 1e-9

#: P(K_i = J_i) used for every catalogued and random two-outcome setting.
MATCH_PROBABILITY = 0.65

# Step-1 catalog: per setting, (Alice POVM, Bob POVM, Alice preparations, Bob preparations),
# stored exactly as printed.
TABLE_E1 = {
    1: (((0, 0), (180, 0)), ((45, 0), (-135, 0)), ((0, 0), (45, 0)), ((0, 0), (45, 0))),
    2: (((36, 103), (144, 283)), ((15, 340), (165, 160)), ((0, 0), (152, 158)), ((0, 0), (45, 0))),
    3: (((18, 76), (162, 258)), ((87, 50), (93, 230)), ((0, 0), (149, 17)), ((0, 0), (45, 0))),
    4: (((2, 177), (178, 357)), ((62, 143), (118, 323)), ((0, 0), (38, 85)), ((0, 0), (45, 0))),
    5: (((12, 212), (168, 32)), ((1, 271), (179, 91)), ((0, 0), (172, 236)), ((0, 0), (45, 0))),
    6: (((25, 163), (155, 343)), ((8, 270), (172, 90)), ((0, 0), (37, 248)), ((0, 0), (45, 0))),
    7: (((12, 292), (168, 112)), ((134, 32), (46, 212)), ((0, 0), (75, 110)), ((0, 0), (45, 0))),
}

# Step-2 catalog: per setting, (Alice POVMs A1, A2), (Bob POVMs B1, B2).
TABLE_E2 = {
    1: ((((0, 0), (180, 0)), ((90, 0), (90, 180))), (((45, 0), (135, 180)), ((135, 0), (45, 180)))),
    2: ((((36, 103), (144, 283)), ((49, 46), (131, 226))), (((15, 340), (165, 160)), ((79, 211), (101, 31)))),
    3: ((((18, 76), (162, 256)), ((79, 95), (101, 275))), (((87, 50), (93, 230)), ((48, 291), (132, 111)))),
    4: ((((2, 177), (178, 357)), ((61, 19), (119, 199))), (((62, 143), (118, 323)), ((28, 59), (152, 239)))),
    5: ((((12, 212), (168, 32)), ((18, 252), (162, 72))), (((1, 271), (179, 91)), ((68, 262), (112, 82)))),
    6: ((((25, 163), (155, 343)), ((88, 300), (92, 120))), (((8, 270), (172, 90)), ((109, 24), (71, 204)))),
    7: ((((12, 292), (168, 112)), ((91, 330), (89, 150))), (((134, 32), (46, 212)), ((33, 58), (147, 238)))),
}

# A printed "antipodal" partner may deviate from the exact antipode by rounding
# (one step-1 entry does, by 2 degrees); larger gaps indicate a wrong table.
ANTIPODE_TOLERANCE_DEG = 5.0


def match_rule(n: int = 2, p: float = MATCH_PROBABILITY) -> np.ndarray:
    """``P(k|j)`` with ``p`` on the diagonal and the rest spread evenly."""
    if n == 1:
        return np.ones((1, 1))
    cond = np.full((n, n), (1.0 - p) / (n - 1))
    np.fill_diagonal(cond, p)
    return cond


@dataclass(frozen=True, eq=False)
class PlayerSetting:
    """One player's POVM, preparation list and conditional rule ``cond[j, k] = P(k|j)``."""

    effects: tuple
    preparations: tuple
    cond: np.ndarray

    def __post_init__(self):
        effects = tuple(check_effect(m, f"effect {j}") for j, m in enumerate(self.effects))
        preps = tuple(check_density(r, f"preparation {k}") for k, r in enumerate(self.preparations))
        cond = np.array(self.cond, dtype=float)
        if not effects or not preps:
            raise ValueError("a player needs at least one effect and one preparation")
        if cond.shape != (len(effects), len(preps)):
            raise ValueError(
                f"cond has shape {cond.shape}, expected {(len(effects), len(preps))}"
            )
        d_in = effects[0].shape[0]
        if any(m.shape != (d_in, d_in) for m in effects):
            raise ValueError("effects must share one dimension")
        if any(r.shape != preps[0].shape for r in preps):
            raise ValueError("preparations must share one dimension")
        completeness = np.max(np.abs(sum(effects) - np.eye(d_in)))
        if completeness > COMPLETENESS_TOL:
            raise ValueError(f"effects do not sum to identity (residual {completeness:.2e})")
        if np.any(cond < 0) or np.max(np.abs(cond.sum(axis=1) - 1)) > 1e-12:
            raise ValueError("each cond row must be a probability vector")
        for a in range(len(cond)):
            for b in range(a + 1, len(cond)):
                if np.max(np.abs(cond[a] - cond[b])) < ROW_DISTINCT_TOL:
                    raise ValueError(
                        f"cond rows {a} and {b} coincide; the preparation must depend on the outcome"
                    )
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "preparations", preps)
        cond.setflags(write=False)
        object.__setattr__(self, "cond", cond)

    @property
    def d_in(self) -> int:
        return self.effects[0].shape[0]

    @property
    def d_out(self) -> int:
        return self.preparations[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    @property
    def n_preparations(self) -> int:
        return len(self.preparations)


@dataclass(frozen=True, eq=False)
class MpSetting:
    alice: PlayerSetting
    bob: PlayerSetting

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """``(d_I1, d_O1, d_I2, d_O2)``."""
        return (self.alice.d_in, self.alice.d_out, self.bob.d_in, self.bob.d_out)

    @property
    def cardinalities(self) -> tuple[int, int, int, int]:
        """``(n_J1, n_K1, n_J2, n_K2)``."""
        return (
            self.alice.n_outcomes,
            self.alice.n_preparations,
            self.bob.n_outcomes,
            self.bob.n_preparations,
        )

    def swapped(self) -> "MpSetting":
        return MpSetting(self.bob, self.alice)


@dataclass(frozen=True, eq=False)
class ChshSetting:
    """Two binary POVMs per player for the nonlocality step.

    Preparations are irrelevant for the ``J1, J2`` marginal and are fixed to
    ``|0⟩⟨0|`` for both outcomes.
    """

    alice_povms: tuple
    bob_povms: tuple

    def pair(self, i: int, j: int) -> MpSetting:
        """Step-1-shaped setting using Alice's POVM ``i`` and Bob's POVM ``j`` (1-based)."""
        zero = basis_projector(0, 2)
        return MpSetting(
            PlayerSetting(self.alice_povms[i - 1], (zero, zero), _fixed_prep_rule()),
            PlayerSetting(self.bob_povms[j - 1], (zero, zero), _fixed_prep_rule()),
        )

    def pairs(self) -> dict[tuple[int, int], MpSetting]:
        return {(i, j): self.pair(i, j) for i in (1, 2) for j in (1, 2)}


def _fixed_prep_rule() -> np.ndarray:
    return match_rule(2)


def binary_povm_from_angles(first, second) -> tuple[np.ndarray, np.ndarray]:
    """Two-outcome projective POVM ``{Π(first), I − Π(first)}``.

    ``second`` must lie within :data:`ANTIPODE_TOLERANCE_DEG` of the antipode of
    ``first``; the complement is used so the POVM is exactly complete.
    """
    n1 = bloch_vector(*first)
    n2 = bloch_vector(*second)
    gap = np.degrees(np.arccos(np.clip(-n1 @ n2, -1.0, 1.0)))
    if gap > ANTIPODE_TOLERANCE_DEG:
        raise ValueError(f"angles {first} and {second} are not antipodal (off by {gap:.1f} deg)")
    proj = bloch_pure_state(*first)
    return (proj, np.eye(2, dtype=complex) - proj)


def table_e1_setting(n: int) -> MpSetting:
    """Catalogued step-1 setting ``n`` (1..7) with the 0.65 matching rule for both players."""
    if n not in TABLE_E1:
        raise ValueError(f"step-1 setting must be in 1..7, got {n}")
    a_povm, b_povm, a_preps, b_preps = TABLE_E1[n]
    return MpSetting(
        PlayerSetting(
            binary_povm_from_angles(*a_povm),
            tuple(bloch_pure_state(*a) for a in a_preps),
            match_rule(2),
        ),
        PlayerSetting(
            binary_povm_from_angles(*b_povm),
            tuple(bloch_pure_state(*a) for a in b_preps),
            match_rule(2),
        ),
    )


def table_e2_setting(n: int) -> ChshSetting:
    """Catalogued step-2 setting ``n`` (1..7): two binary POVMs per player."""
    if n not in TABLE_E2:
        raise ValueError(f"step-2 setting must be in 1..7, got {n}")
    alice, bob = TABLE_E2[n]
    return ChshSetting(
        tuple(binary_povm_from_angles(*p) for p in alice),
        tuple(binary_povm_from_angles(*p) for p in bob),
    )


def pauli_ic_povm(d: int = 2) -> tuple[np.ndarray, ...]:
    """Informationally complete POVM.

    For qubits: the six Pauli eigenprojectors scaled by 1/3.  For ``d > 2``:
    eigenprojectors of the generalized Gell-Mann matrices, pooled and
    rescaled to sum to the identity.
    """
    if d == 2:
        effects = []
        for pauli in (PAULI_X, PAULI_Y, PAULI_Z):
            effects.append((PAULI_I + pauli) / 6)
            effects.append((PAULI_I - pauli) / 6)
        return tuple(effects)
    pool = []
    for g in hermitian_basis(d)[1:]:
        _, vecs = np.linalg.eigh(g)
        pool.extend(np.outer(v, np.conj(v)) for v in vecs.T)
    total = sum(pool)
    # total is a multiple of the identity: each basis element contributes one full eigenbasis
    scale = np.trace(total).real / d
    return tuple(p / scale for p in pool)


def ic_preparations(d: int = 2) -> tuple[np.ndarray, ...]:
    """``d²`` pure states spanning ``B(C^d)``.

    Qubits: ``|0⟩, |1⟩, |+⟩, |+i⟩``.  General ``d``: ``|a⟩``, ``(|a⟩+|b⟩)/√2``,
    ``(|a⟩+i|b⟩)/√2``.
    """
    states = []
    eye = np.eye(d, dtype=complex)
    for a in range(d):
        states.append(np.outer(eye[a], eye[a]))
    for a in range(d):
        for b in range(a + 1, d):
            for phase in (1, 1j):
                v = (eye[a] + phase * eye[b]) / np.sqrt(2)
                states.append(np.outer(v, np.conj(v)))
    return tuple(states)


def graded_rule(n_outcomes: int, n_preps: int) -> np.ndarray:
    """Full-support ``P(k|j)`` with pairwise distinct rows.

    Row ``j`` is proportional to ``1 + c_j (k + 1)`` with increasing ``c_j``;
    the ratio of consecutive entries is monotone in ``c_j``, so rows differ.
    """
    c = 0.25 * (np.arange(n_outcomes) + 1)
    k = np.arange(n_preps) + 1
    raw = 1.0 + np.outer(c, k)
    return raw / raw.sum(axis=1, keepdims=True)


def tomographically_complete_setting(dims: Sequence[int] = (2, 2, 2, 2)) -> MpSetting:
    """Setting whose effects and preparations span all four local operator spaces."""
    d_i1, d_o1, d_i2, d_o2 = (int(d) for d in dims)

    def player(d_in, d_out):
        effects = pauli_ic_povm(d_in)
        preps = ic_preparations(d_out)
        return PlayerSetting(effects, preps, graded_rule(len(effects), len(preps)))

    return MpSetting(player(d_i1, d_o1), player(d_i2, d_o2))


def is_tomographically_complete(setting: MpSetting, tol: float = 1e-8) -> bool:
    """True iff every effect family and preparation family spans its operator space.

    Also requires full-support ``P(k|j)``; a zero entry removes the matching
    ``M_j ⊗ ρ_k`` term from the instrument and breaks the spanning argument.
    """
    for player in (setting.alice, setting.bob):
        if operator_rank(player.effects, tol) < player.d_in**2:
            return False
        if operator_rank(player.preparations, tol) < player.d_out**2:
            return False
        if np.any(player.cond <= 0):
            return False
    return True


def random_s2_setting(dims: Sequence[int] = (2, 2, 2, 2), seed=None) -> MpSetting:
    """Random minimal setting: ``{M, I−M}`` per player and two random preparations each.

    Four independent child seeds drive Alice's effect, Bob's effect, Alice's
    preparations and Bob's preparations.
    """
    d_i1, d_o1, d_i2, d_o2 = (int(d) for d in dims)
    t1, t2, t3, t4 = seed_sequence(seed).spawn(4)
    m1 = random_effect(d_i1, t1)
    m2 = random_effect(d_i2, t2)
    rng3, rng4 = np.random.default_rng(t3), np.random.default_rng(t4)
    preps1 = (random_density(d_o1, rng3), random_density(d_o1, rng3))
    preps2 = (random_density(d_o2, rng4), random_density(d_o2, rng4))
    eye1, eye2 = np.eye(d_i1), np.eye(d_i2)
    return MpSetting(
        PlayerSetting((m1, eye1 - m1), preps1, match_rule(2)),
        PlayerSetting((m2, eye2 - m2), preps2, match_rule(2)),
    )


def random_chsh_setting(seed=None, post_select: bool = False, max_tries: int = 10_000) -> ChshSetting:
    """Random projective qubit POVMs for step 2.

    With ``post_select`` the draw is repeated until the settings violate CHSH
    on ``|Φ+⟩``, mirroring how the catalogued step-2 settings were chosen.
    """
    from .identifier import chsh_max, phi_plus_correlators

    rng = np.random.default_rng(seed_sequence(seed))
    for _ in range(max_tries):
        axes = rng.standard_normal((4, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        povms = []
        for n in axes:
            proj = 0.5 * (PAULI_I + n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z)
            povms.append((proj, PAULI_I - proj))
        setting = ChshSetting((povms[0], povms[1]), (povms[2], povms[3]))
        if not post_select:
            return setting
        if chsh_max(phi_plus_correlators(setting)).max_s > 2.0:
            return setting
    raise RuntimeError("no CHSH-violating setting found")


def player_from_operators(effects, preparations, cond) -> PlayerSetting:
    return PlayerSetting(
        tuple(as_operator(e) for e in effects),
        tuple(as_operator(r) for r in preparations),
        np.asarray(cond, dtype=float),
    )
