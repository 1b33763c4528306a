"""Joint outcome tables, Markov conditions and χ² conditional-independence tests.

Outcome variables are indexed ``J1=0, K1=1, J2=2, K2=3`` throughout.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .operators import _rng

J1, K1, J2, K2 = 0, 1, 2, 3
VARIABLE_NAMES = ("J1", "K1", "J2", "K2")

NORMALIZATION_TOL = 1e-10
DEFAULT_ALPHA = 0.05


class UndefinedTestError(ValueError):
    """Raised when a χ² test is requested on an empty table."""


# --------------------------------------------------------------------------- #
# Tables
# --------------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table ``P(j1, k1, j2, k2)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 4:
            raise ValueError(f"joint distribution must be 4-d, got shape {p.shape}")
        if np.any(p < -1e-12):
            raise ValueError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {p.sum():.12f}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def cardinalities(self) -> tuple[int, int, int, int]:
        return tuple(self.probs.shape)

    def marginal(self, axes: Sequence[int]) -> np.ndarray:
        """Marginal over ``axes`` in the given order."""
        axes = list(axes)
        drop = tuple(a for a in range(4) if a not in axes)
        m = self.probs.sum(axis=drop)
        kept = sorted(axes)
        return np.transpose(m, [kept.index(a) for a in axes])


@dataclass(frozen=True, eq=False)
class CountsTable:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 4:
            raise ValueError(f"counts table must be 4-d, got shape {c.shape}")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.equal(np.mod(c, 1), 0)):
                raise ValueError("counts must be integers")
        c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def cardinalities(self) -> tuple[int, int, int, int]:
        return tuple(self.counts.shape)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total


def sample_counts(dist: JointDistribution, n: int, seed=None) -> CountsTable:
    """Multinomial draw of ``n`` outcome quadruples."""
    if int(n) < 1:
        raise ValueError("need at least one sample")
    rng = _rng(seed)
    flat = dist.probs.ravel()
    flat = flat / flat.sum()
    draw = rng.multinomial(int(n), flat)
    return CountsTable(draw.reshape(dist.cardinalities))


# --------------------------------------------------------------------------- #
# Conditions
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class MarkovCondition:
    """``X − Y − Z``; an empty ``y`` means plain independence ``X ⊥ Z``."""

    tag: str
    x: tuple
    y: tuple
    z: tuple

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self.tag]

    def describe(self) -> str:
        def grp(axes):
            names = [VARIABLE_NAMES[a] for a in axes]
            return names[0] if len(names) == 1 else "(" + ",".join(names) + ")"

        if not self.y:
            return f"{grp(self.x)}⊥{grp(self.z)}"
        return f"{grp(self.x)}−{grp(self.y)}−{grp(self.z)}"

    @property
    def primitives(self) -> tuple["MarkovCondition", ...]:
        return (self,)


@dataclass(frozen=True)
class CompositeCondition:
    """Conjunction of primitive conditions."""

    name: str
    primitives: tuple

    @property
    def tag(self) -> str:
        return self.name

    def describe(self) -> str:
        return " ∧ ".join(c.describe() for c in self.primitives)


Condition = Union[MarkovCondition, CompositeCondition]

C1 = MarkovCondition("1", (J1, K1), (), (J2, K2))
C2 = MarkovCondition("2", (K1,), (J1,), (J2,))
C3 = MarkovCondition("3", (J1,), (K1,), (J2,))
C4 = MarkovCondition("4", (J1,), (K2,), (J2,))
C5 = MarkovCondition("5", (J1, K1), (J2,), (K2,))
C6 = MarkovCondition("6", (K1,), (J1,), (J2, K2))
PRIMITIVES = {c.tag: c for c in (C1, C2, C3, C4, C5, C6)}
_SYMBOLS = {"1": "①", "2": "②", "3": "③", "4": "④", "5": "⑤", "6": "⑥"}

CHAIN_J1K1J2K2 = CompositeCondition("J1-K1-J2-K2", (C3, C5))
CHAIN_K1J1J2K2 = CompositeCondition("K1-J1-J2-K2", (C2, C5))
CHAIN_K1J1K2J2 = CompositeCondition("K1-J1-K2-J2", (C4, C6))

#: Markov conditions characterizing each class (by class tag and direction).
CLASS_CONDITIONS = {
    ("SI", None): CompositeCondition("Mar(S_I)", (C1,)),
    ("SN", "1->2"): CompositeCondition("Mar(S_N,1->2)", CHAIN_J1K1J2K2.primitives),
    ("SN", "2->1"): CompositeCondition("Mar(S_N,2->1)", CHAIN_K1J1K2J2.primitives),
    ("SQ", None): CompositeCondition("Mar(S_Q)", CHAIN_K1J1J2K2.primitives),
    ("SQseq", "1->2"): CompositeCondition("Mar(S_Q,1->2)", (C5,)),
    ("SQseq", "2->1"): CompositeCondition("Mar(S_Q,2->1)", (C6,)),
}
# classical-memory classes share the Markov conditions of their quantum parents
CLASS_CONDITIONS[("SC", None)] = CLASS_CONDITIONS[("SQ", None)]
CLASS_CONDITIONS[("SCseq", "1->2")] = CLASS_CONDITIONS[("SQseq", "1->2")]
CLASS_CONDITIONS[("SCseq", "2->1")] = CLASS_CONDITIONS[("SQseq", "2->1")]

_ALIASES = {"①": "1", "②": "2", "③": "3", "④": "4", "⑤": "5", "⑥": "6"}


def get_condition(key) -> Condition:
    """Look up a condition by tag (``"1"``, ``"①"``, ``3``) or by class key."""
    if isinstance(key, (MarkovCondition, CompositeCondition)):
        return key
    if isinstance(key, tuple):
        return CLASS_CONDITIONS[key]
    k = _ALIASES.get(str(key), str(key))
    if k in PRIMITIVES:
        return PRIMITIVES[k]
    for comp in (CHAIN_J1K1J2K2, CHAIN_K1J1J2K2, CHAIN_K1J1K2J2, *CLASS_CONDITIONS.values()):
        if comp.name == k:
            return comp
    raise KeyError(f"unknown condition {key!r}")


def class_condition(tag: str, direction=None) -> CompositeCondition:
    if tag in ("SI", "SC", "SQ"):
        direction = None
    return CLASS_CONDITIONS[(tag, direction)]


def _grouped(table: np.ndarray, x, y, z) -> np.ndarray:
    """Marginalize onto ``x ∪ y ∪ z`` and flatten each group: shape ``(dX, dY, dZ)``."""
    used = list(x) + list(y) + list(z)
    drop = tuple(a for a in range(4) if a not in used)
    m = table.sum(axis=drop)
    kept = sorted(used)
    m = np.transpose(m, [kept.index(a) for a in used])
    shape = table.shape
    dx = int(np.prod([shape[a] for a in x]))
    dy = int(np.prod([shape[a] for a in y])) if y else 1
    dz = int(np.prod([shape[a] for a in z]))
    return m.reshape(dx, dy, dz)


# --------------------------------------------------------------------------- #
# Exact checks
# --------------------------------------------------------------------------- #


def exact_ci_deviation(dist: JointDistribution, condition) -> float:
    """Largest violation of the condition on an exact distribution.

    ``max |P(x, z|y) − P(x|y) P(z|y)|`` over cells with ``P(y) > 0``; for
    composites the maximum over the primitives.
    """
    cond = get_condition(condition)
    return max(_primitive_deviation(dist.probs, c) for c in cond.primitives)


def _primitive_deviation(p: np.ndarray, c: MarkovCondition) -> float:
    g = _grouped(p, c.x, c.y, c.z)
    worst = 0.0
    for yi in range(g.shape[1]):
        block = g[:, yi, :]
        py = block.sum()
        if py <= 0.0:
            continue
        cond = block / py
        outer = np.outer(cond.sum(axis=1), cond.sum(axis=0))
        worst = max(worst, float(np.max(np.abs(cond - outer))))
    return worst


# --------------------------------------------------------------------------- #
# χ² distribution
# --------------------------------------------------------------------------- #

_ITMAX = 10_000
_EPS = 1e-16
_FPMIN = 1e-300


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)`` by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_ITMAX):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)`` by modified Lentz."""
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _ITMAX):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma(a: float, x: float) -> tuple[float, float]:
    """``(P(a, x), Q(a, x))`` with the more accurate branch computed directly."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cfrac(a, x)
    return 1.0 - q, q


def chi2_cdf(x: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be at least 1")
    if x <= 0:
        return 0.0
    return regularized_gamma(df / 2.0, x / 2.0)[0]


def chi2_sf(x: float, df: int) -> float:
    if df < 1:
        raise ValueError("df must be at least 1")
    if x <= 0:
        return 1.0
    return regularized_gamma(df / 2.0, x / 2.0)[1]


@functools.lru_cache(maxsize=256)
def chi2_critical(df: int, alpha: float = DEFAULT_ALPHA) -> float:
    """Upper ``alpha`` quantile, found by root bracketing on :func:`chi2_cdf`."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    target = 1.0 - alpha
    hi = max(2.0 * df, 10.0)
    while chi2_cdf(hi, df) < target:
        hi *= 2.0
    return brentq(lambda v: chi2_cdf(v, df) - target, 0.0, hi, xtol=1e-12, rtol=1e-14)


# --------------------------------------------------------------------------- #
# χ² tests
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Chi2Result:
    tag: str
    statistic: float
    df: int
    p_value: float
    critical_value: float
    alpha: float

    @property
    def accepted(self) -> bool:
        return self.statistic <= self.critical_value

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "chi2": self.statistic,
            "df": self.df,
            "p": self.p_value,
            "critical": self.critical_value,
            "accepted": self.accepted,
        }


@dataclass(frozen=True)
class CompositeResult:
    name: str
    results: tuple

    @property
    def accepted(self) -> bool:
        return all(r.accepted for r in self.results)

    @property
    def min_p_value(self) -> float:
        return min(r.p_value for r in self.results)


def _as_counts(counts) -> np.ndarray:
    arr = counts.counts if isinstance(counts, CountsTable) else np.asarray(counts)
    if arr.sum() <= 0:
        raise UndefinedTestError("all counts are zero")
    return arr.astype(float)


def _result(tag, stat, df, alpha) -> Chi2Result:
    return Chi2Result(tag, float(stat), int(df), chi2_sf(stat, df), chi2_critical(df, alpha), alpha)


def _chi2_grouped(g: np.ndarray) -> tuple[float, int]:
    """Conditional-independence statistic on a ``(dX, dY, dZ)`` count array."""
    n_xy = g.sum(axis=2)  # N_ij
    n_yz = g.sum(axis=0)  # N_jk
    n_y = g.sum(axis=(0, 2))  # N_j
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = np.where(
            n_y[None, :, None] > 0, n_xy[:, :, None] * n_yz[None, :, :] / n_y[None, :, None], 0.0
        )
        terms = np.where(expected > 0, (g - expected) ** 2 / expected, 0.0)
    dx, dy, dz = g.shape
    return float(terms.sum()), (dx - 1) * dy * (dz - 1)


def chi2_conditional(counts, x, y, z, alpha: float = DEFAULT_ALPHA, tag: str = "") -> Chi2Result:
    """Test ``X − Y − Z`` with ``E_ijk = N_ij N_jk / N_j``.

    Cells whose expected count is zero contribute nothing and the degrees of
    freedom stay at ``(dX − 1) dY (dZ − 1)``.
    """
    arr = _as_counts(counts)
    if not y:
        raise ValueError("conditional test needs a nonempty conditioning group")
    stat, df = _chi2_grouped(_grouped(arr, tuple(x), tuple(y), tuple(z)))
    return _result(tag, stat, df, alpha)


def chi2_independence(counts, x, z, alpha: float = DEFAULT_ALPHA, tag: str = "") -> Chi2Result:
    """Two-way test of ``X ⊥ Z`` with ``E_ij = N_i N_j / N``."""
    arr = _as_counts(counts)
    stat, df = _chi2_grouped(_grouped(arr, tuple(x), (), tuple(z)))
    return _result(tag, stat, df, alpha)


def chi2_condition(counts, condition, alpha: float = DEFAULT_ALPHA):
    """χ² result for a primitive condition, or a :class:`CompositeResult`."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cond = get_condition(condition)
    if isinstance(cond, CompositeCondition):
        return CompositeResult(cond.name, tuple(chi2_condition(counts, c, alpha) for c in cond.primitives))
    if not cond.y:
        return chi2_independence(counts, cond.x, cond.z, alpha, tag=cond.tag)
    return chi2_conditional(counts, cond.x, cond.y, cond.z, alpha, tag=cond.tag)
