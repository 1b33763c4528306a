"""Two-step identification of the environment's causal order and memory type.

Step 1 tests the hierarchy of Markov conditions level by level and stops at
the first accepted level.  If the accepted class carries a memory, step 2
decides between classical and quantum memory from CHSH values of the
``J1, J2`` marginals.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .operators import bell_state
from .settings import ChshSetting
from .statistics import (
    DEFAULT_ALPHA,
    PRIMITIVES,
    CountsTable,
    JointDistribution,
    UndefinedTestError,
    chi2_condition,
    exact_ci_deviation,
)

S_I = "S_I"
S_C = "S_C"
S_Q = "S_Q"
S_N12 = "S_N,1->2"
S_N21 = "S_N,2->1"
S_C12 = "S_C,1->2"
S_Q12 = "S_Q,1->2"
S_C21 = "S_C,2->1"
S_Q21 = "S_Q,2->1"
UNIDENTIFIED = "Unidentified"

# step-1 outcomes that still need step 2
PARALLEL_MEMORY = "parallel-memory"
SEQ_MEMORY_12 = "sequential-memory,1->2"
SEQ_MEMORY_21 = "sequential-memory,2->1"
MEMORY_PENDING = (PARALLEL_MEMORY, SEQ_MEMORY_12, SEQ_MEMORY_21)

LABELS = (S_I, S_C, S_Q, S_N12, S_N21, S_C12, S_Q12, S_C21, S_Q21, UNIDENTIFIED)

_MEMORY_LABELS = {
    PARALLEL_MEMORY: (S_C, S_Q),
    SEQ_MEMORY_12: (S_C12, S_Q12),
    SEQ_MEMORY_21: (S_C21, S_Q21),
}

# (candidate label, defining primitive tags) per level
LEVELS = (
    ((S_I, ("1",)),),
    ((S_N12, ("3", "5")), (S_N21, ("4", "6")), (PARALLEL_MEMORY, ("2", "5"))),
    ((SEQ_MEMORY_12, ("5",)), (SEQ_MEMORY_21, ("6",))),
)

CLASSICAL_CAVEAT = (
    "no CHSH violation observed; a quantum memory can still produce local "
    "correlations for these settings, so a classical label is not conclusive"
)

# admissible CHSH sign patterns: c_ij ∈ {±1} with an odd number of minus signs
SIGN_PATTERNS = tuple(
    np.array(s, dtype=float).reshape(2, 2)
    for s in itertools.product((1, -1), repeat=4)
    if np.prod(s) == -1
)


class MissingStep2Error(ValueError):
    """Raised when a memory-bearing verdict needs CHSH data that was not supplied."""


# --------------------------------------------------------------------------- #
# CHSH
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ChshResult:
    correlators: np.ndarray
    max_s: float
    threshold: float
    signs: np.ndarray

    @property
    def violated(self) -> bool:
        return self.max_s > self.threshold

    def to_dict(self) -> dict:
        return {
            "correlators": [[float(v) for v in row] for row in self.correlators],
            "maxS": float(self.max_s),
            "threshold": float(self.threshold),
            "violated": bool(self.violated),
        }


def _pm(n: int) -> np.ndarray:
    """Outcome 1 → +1, outcome 2 → −1 (only binary outcomes are meaningful)."""
    if n != 2:
        raise ValueError(f"CHSH needs binary outcomes, got {n}")
    return np.array([1.0, -1.0])


def _correlator_from_table(table: np.ndarray) -> float:
    total = table.sum()
    if total <= 0:
        raise ValueError("empty step-2 table")
    pj = table.sum(axis=(1, 3))  # J1, J2 marginal
    s1, s2 = _pm(pj.shape[0]), _pm(pj.shape[1])
    return float(s1 @ pj @ s2 / total)


def correlators_from_counts(tables: Mapping) -> np.ndarray:
    """``⟨A_i B_j⟩`` from four step-2 count tables keyed by ``(i, j)`` (1-based)."""
    out = np.zeros((2, 2))
    for i, j in itertools.product((1, 2), repeat=2):
        if (i, j) not in tables:
            raise MissingStep2Error(f"missing step-2 table for pair ({i}, {j})")
        t = tables[(i, j)]
        arr = t.counts if isinstance(t, CountsTable) else np.asarray(t)
        out[i - 1, j - 1] = _correlator_from_table(arr.astype(float))
    return out


def correlators_from_distributions(dists: Mapping) -> np.ndarray:
    out = np.zeros((2, 2))
    for i, j in itertools.product((1, 2), repeat=2):
        d = dists[(i, j)]
        probs = d.probs if isinstance(d, JointDistribution) else np.asarray(d)
        out[i - 1, j - 1] = _correlator_from_table(probs)
    return out


def observable(povm) -> np.ndarray:
    """``±1``-valued observable ``M_1 − M_2`` of a binary POVM."""
    return povm[0] - povm[1]


def state_correlators(rho, setting: ChshSetting) -> np.ndarray:
    """``Tr[ρ (A_i ⊗ B_j)]`` for a two-qubit state and a step-2 setting."""
    out = np.zeros((2, 2))
    for i, j in itertools.product(range(2), repeat=2):
        obs = np.kron(observable(setting.alice_povms[i]), observable(setting.bob_povms[j]))
        out[i, j] = np.trace(rho @ obs).real
    return out


def phi_plus_correlators(setting: ChshSetting) -> np.ndarray:
    return state_correlators(bell_state(), setting)


def chsh_sigma(correlators, totals) -> float:
    """Standard error of any CHSH combination, with ``var E = (1 − E²)/N`` per pair."""
    e = np.asarray(correlators, dtype=float)
    n = np.asarray(totals, dtype=float)
    return float(np.sqrt(np.sum((1.0 - np.clip(e, -1, 1) ** 2) / n)))


def chsh_max(correlators, tol: float = 0.0) -> ChshResult:
    """Maximum of ``|Σ c_ij ⟨A_i B_j⟩|`` over the eight admissible sign patterns.

    Violation means ``max_S > 2 + tol``.
    """
    e = np.asarray(correlators, dtype=float)
    if e.shape != (2, 2):
        raise ValueError("correlators must be a 2x2 array")
    if np.any(np.abs(e) > 1 + 1e-10):
        raise ValueError("correlators must lie in [-1, 1]")
    values = [abs(float(np.sum(c * e))) for c in SIGN_PATTERNS]
    best = int(np.argmax(values))
    return ChshResult(e, values[best], 2.0 + float(tol), SIGN_PATTERNS[best])


# --------------------------------------------------------------------------- #
# Verdicts
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ExactResult:
    """Exact-distribution stand-in for a χ² result: accepted iff deviation ≤ tol."""

    tag: str
    deviation: float
    tol: float

    @property
    def accepted(self) -> bool:
        return self.deviation <= self.tol

    @property
    def p_value(self) -> float:
        # ranking score for tie-breaks only
        return 1.0 - self.deviation

    def to_dict(self) -> dict:
        return {"tag": self.tag, "deviation": self.deviation, "tol": self.tol, "accepted": self.accepted}


@dataclass
class Verdict:
    label: str
    level: Optional[int]
    conditions: list = field(default_factory=list)
    chsh: Optional[ChshResult] = None
    ambiguity: bool = False
    candidates: list = field(default_factory=list)
    status: str = "identified"
    note: str = ""

    @property
    def memory_pending(self) -> bool:
        return self.label in MEMORY_PENDING

    def condition(self, tag: str):
        for r in self.conditions:
            if r.tag == tag:
                return r
        raise KeyError(tag)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "level": self.level,
            "status": self.status,
            "conditions": [r.to_dict() for r in self.conditions],
            "chsh": None if self.chsh is None else self.chsh.to_dict(),
            "ambiguity": self.ambiguity,
            "candidates": list(self.candidates),
            "note": self.note,
        }


def _walk_levels(test) -> Verdict:
    """Run the level hierarchy; ``test(tag)`` returns a result with ``accepted``/``p_value``."""
    cache: dict = {}
    order: list = []

    def run(tag):
        if tag not in cache:
            cache[tag] = test(tag)
            order.append(cache[tag])
        return cache[tag]

    for level, candidates in enumerate(LEVELS, start=1):
        for _, tags in candidates:
            for t in tags:
                run(t)
        accepted = []
        for label, tags in candidates:
            results = [cache[t] for t in tags]
            if all(r.accepted for r in results):
                accepted.append((min(r.p_value for r in results), label))
        if accepted:
            # stable: ties on the score keep the listed candidate order
            best = max(accepted, key=lambda item: item[0])
            return Verdict(
                label=best[1],
                level=level,
                conditions=list(order),
                ambiguity=len(accepted) > 1,
                candidates=[lab for _, lab in accepted],
                status="pending-step2" if best[1] in MEMORY_PENDING else "identified",
            )
    return Verdict(UNIDENTIFIED, None, list(order), status="all-rejected")


def step1_identify(counts, alpha: float = DEFAULT_ALPHA) -> Verdict:
    """Level-wise χ² identification from step-1 counts."""
    arr = counts.counts if isinstance(counts, CountsTable) else np.asarray(counts)
    if arr.ndim != 4 or min(arr.shape) < 2:
        raise ValueError(f"step-1 counts must be at least 2x2x2x2, got {arr.shape}")
    try:
        return _walk_levels(lambda tag: chi2_condition(counts, tag, alpha))
    except UndefinedTestError as exc:
        return Verdict(UNIDENTIFIED, None, [], status="test-error", note=str(exc))


def step1_identify_exact(dist: JointDistribution, tol: float = 1e-9) -> Verdict:
    """Same hierarchy on an exact distribution, accepting conditions with deviation ≤ tol."""
    return _walk_levels(lambda tag: ExactResult(tag, exact_ci_deviation(dist, PRIMITIVES[tag]), tol))


def _finish(partial: Verdict, chsh: ChshResult) -> Verdict:
    classical, quantum = _MEMORY_LABELS[partial.label]
    verdict = Verdict(
        label=quantum if chsh.violated else classical,
        level=partial.level,
        conditions=list(partial.conditions),
        chsh=chsh,
        ambiguity=partial.ambiguity,
        candidates=list(partial.candidates),
        status="identified",
        note="" if chsh.violated else CLASSICAL_CAVEAT,
    )
    return verdict


def step2_memory_type(partial: Verdict, step2_counts=None, chsh_margin: float = 0.0) -> Verdict:
    """Resolve a memory-bearing verdict with CHSH on step-2 counts.

    ``chsh_margin`` is a multiple ``k`` of the standard error of the CHSH
    combination; the default 0 compares the raw value against 2.
    """
    if not partial.memory_pending:
        return partial
    if step2_counts is None:
        raise MissingStep2Error(f"verdict {partial.label!r} needs step-2 counts")
    e = correlators_from_counts(step2_counts)
    tol = 0.0
    if chsh_margin:
        totals = np.zeros((2, 2))
        for (i, j), t in step2_counts.items():
            arr = t.counts if isinstance(t, CountsTable) else np.asarray(t)
            totals[i - 1, j - 1] = arr.sum()
        tol = chsh_margin * chsh_sigma(e, totals)
    return _finish(partial, chsh_max(e, tol))


def step2_memory_type_exact(partial: Verdict, step2_dists=None, tol: float = 0.0) -> Verdict:
    if not partial.memory_pending:
        return partial
    if step2_dists is None:
        raise MissingStep2Error(f"verdict {partial.label!r} needs step-2 distributions")
    return _finish(partial, chsh_max(correlators_from_distributions(step2_dists), tol))


def identify(
    step1_counts,
    step2_counts=None,
    alpha: float = DEFAULT_ALPHA,
    chsh_margin: float = 0.0,
    allow_pending: bool = False,
) -> Verdict:
    """Full two-step procedure on counts.

    With ``allow_pending`` a memory-bearing verdict without step-2 data is
    returned as is instead of raising.
    """
    partial = step1_identify(step1_counts, alpha)
    if not partial.memory_pending:
        return partial
    if step2_counts is None and allow_pending:
        partial.note = "memory detected; supply step-2 counts to decide its type"
        return partial
    return step2_memory_type(partial, step2_counts, chsh_margin)


def identify_exact(dist, step2_dists=None, tol: float = 1e-9, allow_pending: bool = False) -> Verdict:
    partial = step1_identify_exact(dist, tol)
    if not partial.memory_pending:
        return partial
    if step2_dists is None and allow_pending:
        return partial
    return step2_memory_type_exact(partial, step2_dists)
