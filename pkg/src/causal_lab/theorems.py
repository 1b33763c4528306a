"""Numerical harnesses for the structure ⇔ Markov equivalence and its genericity.

Each trial draws its randomness from ``SeedSequence(master, spawn_key=(suite,
group, trial))``, so a trial's outcome does not depend on how many trials run
or in which order.  Reports carry one row per trial plus per-group summaries.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import strategies as st
from .channels import random_channel
from .identifier import (
    PARALLEL_MEMORY,
    S_C12,
    S_I,
    S_N12,
    S_Q12,
    SEQ_MEMORY_12,
    chsh_max,
    correlators_from_distributions,
    identify,
    step1_identify,
)
from .operators import (
    frobenius,
    partial_trace,
    random_density,
    random_effect,
    random_entangled_pure_state,
)
from .settings import random_s2_setting, table_e1_setting, table_e2_setting, tomographically_complete_setting
from .statistics import (
    C1,
    CHAIN_K1J1J2K2,
    CHAIN_J1K1J2K2,
    CHAIN_K1J1K2J2,
    C4,
    C5,
    C6,
    DEFAULT_ALPHA,
    JointDistribution,
    class_condition,
    exact_ci_deviation,
    sample_counts,
)

IN_CLASS_TOL = 1e-9
VIOLATION_TOL = 1e-7
STRUCTURAL_MIN = 1e-3
PROBABILITY_ONE = 0.995
MAX_RESAMPLE = 100

_SUITE_IDS = {"theorem1": 1, "theorem2": 2, "product": 3, "merge": 4, "table3": 5}

#: class key → (tag, direction) understood by structural checks and condition lookup
CLASS_KEYS = {
    "SI": (st.SI, None),
    "SQ": (st.SQ, None),
    "SN12": (st.SN, st.FORWARD),
    "SN21": (st.SN, st.BACKWARD),
    "SQseq12": (st.SQ_SEQ, st.FORWARD),
    "SQseq21": (st.SQ_SEQ, st.BACKWARD),
}


def trial_seed(master: int, suite: str, group: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(_SUITE_IDS[suite], int(group), int(trial)))


def _seed_label(master, suite, group, trial) -> str:
    return f"{master}/{_SUITE_IDS[suite]}/{group}/{trial}"


def mar_condition(class_key: str):
    tag, direction = CLASS_KEYS[class_key]
    return class_condition(tag, direction)


def structural_residual(spec, class_key: str) -> float:
    tag, direction = CLASS_KEYS[class_key]
    return st.structural_class_check(st.process_matrix(spec), tag, direction)


# --------------------------------------------------------------------------- #
# Random strategies
# --------------------------------------------------------------------------- #


def random_individual(seed) -> st.IndividualStrategy:
    a, b = seed.spawn(2)
    return st.IndividualStrategy(random_density(2, a), random_density(2, b))


def random_quantum_parallel(seed, entangled: bool = False) -> st.QuantumParallel:
    if entangled:
        return st.QuantumParallel(random_entangled_pure_state((2, 2), seed))
    return st.QuantumParallel(random_density(4, seed))


def random_no_memory(seed, direction=st.FORWARD) -> st.NoMemorySequential:
    a, b = seed.spawn(2)
    return st.NoMemorySequential(random_density(2, a), random_channel(2, 2, 2, b), direction)


def random_quantum_sequential(seed, direction=st.FORWARD) -> st.QuantumSequential:
    """Mixture of a random joint input and a random quantum-memory branch (aux dim 2)."""
    a, b, c, d = seed.spawn(4)
    w = float(np.random.default_rng(a).uniform(0.1, 0.9))
    return st.QuantumSequential(
        [
            st.ParallelBranch(w, random_density(4, b)),
            st.MemoryBranch(1.0 - w, random_density(4, c), 2, random_channel(4, 2, 2, d)),
        ],
        direction,
    )


IN_CLASS_GENERATORS: dict[str, Callable] = {
    "SI": random_individual,
    "SQ": random_quantum_parallel,
    "SN12": lambda s: random_no_memory(s, st.FORWARD),
    "SN21": lambda s: random_no_memory(s, st.BACKWARD),
    "SQseq12": lambda s: random_quantum_sequential(s, st.FORWARD),
    "SQseq21": lambda s: random_quantum_sequential(s, st.BACKWARD),
}


def _out_of_class_si(seed, trial):
    # alternate between entangled parallel inputs and signalling sequential specs
    if trial % 2 == 0:
        return random_quantum_parallel(seed, entangled=True)
    return random_no_memory(seed, st.FORWARD)


OUT_OF_CLASS_GENERATORS: dict[str, Callable] = {
    "SI": _out_of_class_si,
    "SQ": lambda s, t: random_quantum_sequential(s, st.FORWARD),
    "SN12": lambda s, t: random_quantum_sequential(s, st.FORWARD),
    "SN21": lambda s, t: random_quantum_sequential(s, st.BACKWARD),
    "SQseq12": lambda s, t: random_quantum_sequential(s, st.BACKWARD),
    "SQseq21": lambda s, t: random_quantum_sequential(s, st.FORWARD),
}


def describe_spec(spec) -> str:
    label = type(spec).__name__
    return label if spec.direction is None else f"{label}({spec.direction})"


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #


@dataclass
class TrialReport:
    seed: str
    group: str
    strategy: str
    setting: str
    class_key: str
    condition: str
    deviation: float
    expectation: str  # "in" (deviation ≤ tol) or "out" (deviation > tol)
    tol: float
    structural_residual: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.expectation == "in":
            return self.deviation <= self.tol
        return self.deviation > self.tol


@dataclass
class SuiteReport:
    suite: str
    master_seed: int
    params: dict
    trials: list
    required_fraction: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def groups(self) -> list[str]:
        seen = []
        for t in self.trials:
            if t.group not in seen:
                seen.append(t.group)
        return seen

    def group_summary(self, group: str) -> dict:
        rows = [t for t in self.trials if t.group == group]
        devs = np.array([t.deviation for t in rows])
        passed = sum(t.passed for t in rows)
        need = self.required_fraction.get(group, 1.0)
        frac = passed / len(rows) if rows else 0.0
        out = {
            "group": group,
            "expectation": rows[0].expectation if rows else None,
            "trials": len(rows),
            "passed": passed,
            "fraction": frac,
            "required_fraction": need,
            "ok": bool(rows) and frac >= need,
            "min_deviation": float(devs.min()) if rows else None,
            "median_deviation": float(np.median(devs)) if rows else None,
            "max_deviation": float(devs.max()) if rows else None,
        }
        res = [t.structural_residual for t in rows if t.structural_residual is not None]
        if res:
            out["min_structural_residual"] = float(min(res))
            out["max_structural_residual"] = float(max(res))
        return out

    @property
    def summary(self) -> list[dict]:
        return [self.group_summary(g) for g in self.groups()]

    @property
    def failures(self) -> int:
        return sum(not s["ok"] for s in self.summary)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def to_dict(self, timestamp: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "master_seed": self.master_seed,
            "params": self.params,
            "ok": self.ok,
            "failures": self.failures,
            "summary": self.summary,
            "trials": [
                {k: v for k, v in asdict(t).items()} | {"passed": t.passed} for t in self.trials
            ],
        }
        if self.extra:
            out["extra"] = self.extra
        if timestamp:
            out["generated_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
        return out

    def to_csv(self) -> str:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "group", "class", "condition", "deviation", "passed"])
        for t in self.trials:
            w.writerow([t.seed, t.group, t.class_key, t.condition, repr(t.deviation), int(t.passed)])
        return buf.getvalue()


def report_digest(report: dict) -> str:
    """SHA-256 of a report dict with the timestamp removed."""
    clean = {k: v for k, v in report.items() if k != "generated_at"}
    return hashlib.sha256(json.dumps(clean, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------- #
# Structure ⇔ Markov
# --------------------------------------------------------------------------- #


def _draw_out_of_class(gen, seed, trial, class_key):
    """Draw until the structural residual against ``class_key`` clears the minimum."""
    children = seed.spawn(MAX_RESAMPLE)
    for attempt, child in enumerate(children):
        spec = gen(child, trial)
        res = structural_residual(spec, class_key)
        if res >= STRUCTURAL_MIN:
            return spec, res, attempt
    raise RuntimeError(f"no out-of-class spec for {class_key} after {MAX_RESAMPLE} draws")


def theorem1_suite(trials: int = 50, seed: int = 0, classes: Sequence[str] | None = None) -> SuiteReport:
    """In-class specs satisfy Mar(S_X) exactly; structurally out-of-class specs violate it.

    Uses the tomographically complete setting for every trial.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    classes = list(classes or CLASS_KEYS)
    setting = tomographically_complete_setting()
    rows = []
    for ci, key in enumerate(classes):
        cond = mar_condition(key)
        for t in range(trials):
            s_in = trial_seed(seed, "theorem1", 2 * ci, t)
            spec = IN_CLASS_GENERATORS[key](s_in)
            dev = exact_ci_deviation(st.simulate_distribution(spec, setting), cond)
            rows.append(TrialReport(
                _seed_label(seed, "theorem1", 2 * ci, t), f"{key}:in", describe_spec(spec), "ic",
                key, cond.name, dev, "in", IN_CLASS_TOL, structural_residual(spec, key),
            ))
            s_out = trial_seed(seed, "theorem1", 2 * ci + 1, t)
            spec, res, attempts = _draw_out_of_class(OUT_OF_CLASS_GENERATORS[key], s_out, t, key)
            dev = exact_ci_deviation(st.simulate_distribution(spec, setting), cond)
            rows.append(TrialReport(
                _seed_label(seed, "theorem1", 2 * ci + 1, t), f"{key}:out", describe_spec(spec), "ic",
                key, cond.name, dev, "out", VIOLATION_TOL, res, {"resamples": attempts},
            ))
    return SuiteReport("theorem1", int(seed), {"trials": trials, "classes": classes}, rows)


@dataclass(frozen=True)
class Theorem2Pair:
    name: str
    factory: Callable
    class_key: str
    in_class: bool = False


DEFAULT_THEOREM2_PAIRS = (
    Theorem2Pair("sq-vs-SI", lambda: st.builtin_strategy("sq"), "SI"),
    Theorem2Pair("sc12-vs-SN12", lambda: st.builtin_strategy("sc12"), "SN12"),
    Theorem2Pair("sn12-vs-SI", lambda: st.builtin_strategy("sn12"), "SI"),
    Theorem2Pair("sq12-vs-SQ", lambda: st.builtin_strategy("sq12"), "SQ"),
    Theorem2Pair("sq12-vs-SN12", lambda: st.builtin_strategy("sq12"), "SN12"),
    Theorem2Pair("sn12-vs-SN21", lambda: st.builtin_strategy("sn12"), "SN21"),
    Theorem2Pair("sc-vs-SI", lambda: st.builtin_strategy("sc"), "SI"),
    Theorem2Pair("sq-vs-SN12", lambda: st.builtin_strategy("sq"), "SN12"),
    Theorem2Pair("sq21-vs-SQseq12", lambda: st.builtin_strategy("sq21"), "SQseq12"),
    Theorem2Pair("si-vs-SI(control)", lambda: st.builtin_strategy("si"), "SI", in_class=True),
)


def theorem2_suite(pairs=None, trials_per_pair: int = 200, seed: int = 0) -> SuiteReport:
    """Random minimal settings expose every out-of-class strategy almost surely."""
    pairs = DEFAULT_THEOREM2_PAIRS if pairs is None else tuple(pairs)
    rows, need, residuals = [], {}, {}
    for pi, pair in enumerate(pairs):
        spec = pair.factory()
        res = structural_residual(spec, pair.class_key)
        residuals[pair.name] = res
        if not pair.in_class and res < STRUCTURAL_MIN:
            raise ValueError(f"pair {pair.name}: strategy is structurally inside {pair.class_key}")
        cond = mar_condition(pair.class_key)
        need[pair.name] = 1.0 if pair.in_class else PROBABILITY_ONE
        for t in range(trials_per_pair):
            setting = random_s2_setting(seed=trial_seed(seed, "theorem2", pi, t))
            dev = exact_ci_deviation(st.simulate_distribution(spec, setting), cond)
            rows.append(TrialReport(
                _seed_label(seed, "theorem2", pi, t), pair.name, describe_spec(spec), "s2",
                pair.class_key, cond.name, dev,
                "in" if pair.in_class else "out",
                IN_CLASS_TOL if pair.in_class else VIOLATION_TOL, res,
            ))
    return SuiteReport(
        "theorem2", int(seed), {"trials_per_pair": trials_per_pair, "pairs": [p.name for p in pairs]},
        rows, need, {"structural_residuals": residuals},
    )


# --------------------------------------------------------------------------- #
# Lemmas
# --------------------------------------------------------------------------- #


def _outcome_deviation(rho, m_a, m_b) -> float:
    """``max |P(a, b) − P(a) P(b)|`` for binary POVMs ``{M, I − M}`` on each side."""
    da, db = m_a.shape[0], m_b.shape[0]
    povm_a = (m_a, np.eye(da) - m_a)
    povm_b = (m_b, np.eye(db) - m_b)
    p = np.array([[np.trace(rho @ np.kron(a, b)).real for b in povm_b] for a in povm_a])
    return float(np.max(np.abs(p - np.outer(p.sum(axis=1), p.sum(axis=0)))))


def product_lemma_check(rho_ab, trials: int = 200, seed: int = 0, dims=(2, 2)) -> SuiteReport:
    """Correlated bipartite states give dependent outcomes for almost every POVM pair."""
    rho = np.asarray(rho_ab, dtype=complex)
    da, db = dims
    product = np.kron(partial_trace(rho, dims, [0]), partial_trace(rho, dims, [1]))
    distance = frobenius(rho - product)
    correlated = distance >= 1e-6
    group = "correlated" if correlated else "product"
    rows = []
    for t in range(trials):
        a, b = trial_seed(seed, "product", 0, t).spawn(2)
        dev = _outcome_deviation(rho, random_effect(da, a), random_effect(db, b))
        rows.append(TrialReport(
            _seed_label(seed, "product", 0, t), group, "rho_ab", "random-povm-pair", "-", "A⊥B",
            dev, "out" if correlated else "in", 1e-9 if correlated else 1e-10,
        ))
    return SuiteReport(
        "product_lemma", int(seed), {"trials": trials, "distance_to_product": distance}, rows,
        {group: PROBABILITY_ONE if correlated else 1.0},
    )


def _random_conditional(rng, n_in, n_out) -> np.ndarray:
    """Random ``P(out|in)`` bounded away from zero, rows drawn from a flat Dirichlet."""
    rows = rng.dirichlet(np.ones(n_out), size=n_in)
    return 0.1 / n_out + 0.9 * rows


def lemma_merge_check(trials: int = 100, seed: int = 0, card: int = 2) -> SuiteReport:
    """Chain merging on random full-support distributions.

    Groups:

    * ``both-chains``: product of two arbitrary blocks ``P(j1,k1) P(j2,k2)``;
      it satisfies both chains and ① must hold.
    * ``chain-12-dependent``: ``P(j1) P(k1|j1) P(j2|k1) P(k2|j2)`` satisfies
      J1−K1−J2−K2 but is correlated across the players; by the merge rule
      at least one of ④, ⑥ must then fail.
    * ``cond5-6``: ``P(j1) P(k1|j1) P(j2|j1) P(k2|j2)`` satisfies ⑤ and ⑥;
      the merged chain K1−J1−J2−K2 must hold.
    """
    n = card
    rows = []
    for t in range(trials):
        rng = np.random.default_rng(trial_seed(seed, "merge", 0, t))
        block_a = rng.dirichlet(np.ones(n * n)).reshape(n, n)
        block_b = rng.dirichlet(np.ones(n * n)).reshape(n, n)
        prod = JointDistribution(np.einsum("ab,cd->abcd", block_a, block_b))
        chains = max(exact_ci_deviation(prod, CHAIN_J1K1J2K2), exact_ci_deviation(prod, CHAIN_K1J1K2J2))
        dev = exact_ci_deviation(prod, C1)
        rows.append(TrialReport(
            _seed_label(seed, "merge", 0, t), "both-chains", "product", "-", "-", "1", dev, "in",
            IN_CLASS_TOL, extra={"chain_deviation": chains},
        ))

        rng = np.random.default_rng(trial_seed(seed, "merge", 1, t))
        pj1 = rng.dirichlet(np.ones(n))
        k1 = _random_conditional(rng, n, n)
        j2 = _random_conditional(rng, n, n)
        k2 = _random_conditional(rng, n, n)
        chain = JointDistribution(np.einsum("a,ab,bc,cd->abcd", pj1, k1, j2, k2))
        dev = max(exact_ci_deviation(chain, C4), exact_ci_deviation(chain, C6))
        rows.append(TrialReport(
            _seed_label(seed, "merge", 1, t), "chain-12-dependent", "chain", "-", "-", "4&6", dev,
            "out", IN_CLASS_TOL,
            extra={"chain_deviation": exact_ci_deviation(chain, CHAIN_J1K1J2K2),
                   "independence_deviation": exact_ci_deviation(chain, C1)},
        ))

        rng = np.random.default_rng(trial_seed(seed, "merge", 2, t))
        pj1 = rng.dirichlet(np.ones(n))
        k1 = _random_conditional(rng, n, n)
        j2 = _random_conditional(rng, n, n)
        k2 = _random_conditional(rng, n, n)
        dist = JointDistribution(np.einsum("a,ab,ac,cd->abcd", pj1, k1, j2, k2))
        premise = max(exact_ci_deviation(dist, C5), exact_ci_deviation(dist, C6))
        dev = exact_ci_deviation(dist, CHAIN_K1J1J2K2)
        rows.append(TrialReport(
            _seed_label(seed, "merge", 2, t), "cond5-6", "fork", "-", "-", CHAIN_K1J1J2K2.name, dev,
            "in", IN_CLASS_TOL, extra={"premise_deviation": premise},
        ))
    return SuiteReport("lemma_merge", int(seed), {"trials": trials, "cardinality": card}, rows)


# --------------------------------------------------------------------------- #
# Table reproduction under ideal statistics
# --------------------------------------------------------------------------- #

#: correct step-1 outcome per experiment strategy
STEP1_EXPECTED = {
    "si": S_I,
    "sc": PARALLEL_MEMORY,
    "sq": PARALLEL_MEMORY,
    "sn12": S_N12,
    "sc12": SEQ_MEMORY_12,
    "sq12": SEQ_MEMORY_12,
}

FINAL_EXPECTED = {
    "si": S_I,
    "sc": "S_C",
    "sq": "S_Q",
    "sn12": S_N12,
    "sc12": S_C12,
    "sq12": S_Q12,
}

#: experimental outcome reported for each (strategy, setting); only one misidentification
EXPERIMENTAL_OUTCOME = {(name, n): FINAL_EXPECTED[name] for name in FINAL_EXPECTED for n in range(1, 8)}
EXPERIMENTAL_OUTCOME[("sq12", 3)] = S_C12


def reproduce_table3(
    samples: int = 1_000_000,
    seeds: int = 20,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    required_rate: float = 0.95,
    chsh_margin: float = 0.0,
    strategies: Sequence[str] = st.EXPERIMENT_STRATEGIES,
) -> dict:
    """Step-1 and step-2 verdicts for every (strategy, catalogued setting) cell.

    Per cell: the ideal CHSH value from exact step-2 distributions, the
    finite-sample step-1 success count over ``seeds`` runs and the tally of
    final labels, next to the experimental outcome.
    """
    cells = []
    for si, name in enumerate(strategies):
        spec = st.builtin_strategy(name)
        for n in range(1, 8):
            dist = st.simulate_distribution(spec, table_e1_setting(n))
            pairs = table_e2_setting(n).pairs()
            exact2 = {k: st.simulate_distribution(spec, v) for k, v in pairs.items()}
            ideal = chsh_max(correlators_from_distributions(exact2))
            expected1 = STEP1_EXPECTED[name]
            correct = 0
            labels: dict = {}
            for r in range(seeds):
                ss = trial_seed(seed, "table3", si * 10 + n, r)
                c1, *c2 = ss.spawn(5)
                counts = sample_counts(dist, samples, c1)
                v1 = step1_identify(counts, alpha)
                correct += v1.label == expected1
                if v1.memory_pending:
                    tables = {k: sample_counts(exact2[k], samples, c) for k, c in zip(sorted(exact2), c2)}
                    final = identify(counts, tables, alpha, chsh_margin).label
                else:
                    final = v1.label
                labels[final] = labels.get(final, 0) + 1
            rate = correct / seeds
            if expected1 in (PARALLEL_MEMORY, SEQ_MEMORY_12):
                classical, quantum = ("S_C", "S_Q") if expected1 == PARALLEL_MEMORY else (S_C12, S_Q12)
                ideal_label = quantum if ideal.violated else classical
            else:
                ideal_label = expected1
            cells.append({
                "strategy": name,
                "setting": n,
                "expected_step1": expected1,
                "step1_correct": correct,
                "runs": seeds,
                "step1_rate": rate,
                "step1_ok": rate >= required_rate,
                "ideal_max_s": ideal.max_s,
                "ideal_label": ideal_label,
                "final_labels": dict(sorted(labels.items())),
                "experimental_label": EXPERIMENTAL_OUTCOME[(name, n)],
                "ideal_matches_experiment": ideal_label == EXPERIMENTAL_OUTCOME[(name, n)],
            })
    sq3 = next((c for c in cells if c["strategy"] == "sq12" and c["setting"] == 3), None)
    total_correct = sum(c["step1_correct"] for c in cells)
    total_runs = sum(c["runs"] for c in cells)
    report = {
        "suite": "reproduce-table3",
        "master_seed": int(seed),
        "params": {"samples": samples, "seeds": seeds, "alpha": alpha, "required_rate": required_rate,
                   "chsh_margin": chsh_margin},
        "cells": cells,
        "cells_ok": sum(c["step1_ok"] for c in cells),
        "cells_total": len(cells),
        "overall_step1_rate": total_correct / total_runs if total_runs else None,
        "ok": all(c["step1_ok"] for c in cells),
    }
    if sq3 is not None:
        report["sq12_setting3"] = {
            "ideal_max_s": sq3["ideal_max_s"],
            "ideal_side": "above 2" if sq3["ideal_max_s"] > 2 else "at or below 2",
            "ideal_label": sq3["ideal_label"],
            "experimental_label": sq3["experimental_label"],
            "agrees_with_experiment": sq3["ideal_matches_experiment"],
        }
    return report
