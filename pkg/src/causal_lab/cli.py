"""``causal-lab``: simulate MP experiments, identify strategies from counts, run suites.

Exit codes: 0 success (any verdict), 2 user error, 3 I/O error, 4 internal
invariant breach.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from . import io as fio
from . import strategies as st
from .identifier import MissingStep2Error, identify
from .operators import bell_state
from .settings import random_chsh_setting, random_s2_setting, table_e1_setting, table_e2_setting, tomographically_complete_setting
from .statistics import DEFAULT_ALPHA, sample_counts
from .theorems import (
    lemma_merge_check,
    product_lemma_check,
    reproduce_table3,
    theorem1_suite,
    theorem2_suite,
)

EXIT_OK, EXIT_USER, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4
SEED_ENV = "CAUSAL_LAB_SEED"
SIMULATE_SAMPLES = 100_000
TABLE3_SAMPLES = 1_000_000
SUITES = ("theorem1", "theorem2", "lemmas", "reproduce-table3")


class UserError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    strategy: Optional[str] = None
    setting: str = "e1:1"
    step2_setting: Optional[str] = None
    samples: Optional[int] = None
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    chsh_margin: float = 0.0
    exact: bool = False
    out: Optional[str] = None
    step2_out: Optional[str] = None
    sidecar: Optional[str] = None
    csv: Optional[str] = None
    counts: Optional[str] = None
    step2: list = field(default_factory=list)
    suite: Optional[str] = None
    trials: Optional[int] = None
    seeds: int = 20
    post_select: bool = False

    def validate(self) -> "RunConfig":
        if self.samples is not None and int(self.samples) < 1:
            raise UserError("--samples must be at least 1")
        if not 0.0 < float(self.alpha) < 1.0:
            raise UserError("--alpha must lie in (0, 1)")
        if float(self.chsh_margin) < 0:
            raise UserError("--chsh-margin must be nonnegative")
        if self.trials is not None and int(self.trials) < 1:
            raise UserError("--trials must be at least 1")
        if int(self.seeds) < 1:
            raise UserError("--seeds must be at least 1")
        return self


# --------------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------------- #


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UserError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # None means "not given", so config files can fill the gap
        p.add_argument("--config", help="JSON file with option values (flags take precedence)")
        p.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
        p.add_argument("--alpha", type=float, default=None, help="significance level (default 0.05)")
        p.add_argument("--out", default=None, help="output file (default stdout)")

    p = sub.add_parser("simulate", help="simulate counts for a strategy and setting")
    common(p)
    p.add_argument("--strategy", default=None,
                   help=f"builtin ({'|'.join(st.BUILTIN_STRATEGIES)}) or strategy JSON file")
    p.add_argument("--setting", default=None,
                   help="e1:n | e2:n | s2:seed | r2:seed | ic | setting JSON file")
    p.add_argument("--post-select", action="store_true", default=None,
                   help="r2:seed only: redraw until the setting violates CHSH on Φ+")
    p.add_argument("--step2-setting", default=None, help="catalogued step-2 setting e2:n for --step2-out")
    p.add_argument("--samples", type=int, default=None, help="samples per table (default 100000)")
    p.add_argument("--exact", action="store_true", default=None, help="also record exact distributions")
    p.add_argument("--sidecar", default=None, help="path of the exact-distribution JSON sidecar")
    p.add_argument("--step2-out", default=None, help="also write step-2 counts (pair column CSV)")

    p = sub.add_parser("identify", help="identify the strategy class from counts files")
    common(p)
    p.add_argument("--counts", default=None, help="step-1 counts (CSV or JSON)")
    p.add_argument("--step2", nargs="+", default=None,
                   help="step-2 counts: one file with a pair column, or four files 11 12 21 22")
    p.add_argument("--chsh-margin", type=float, default=None, help="CHSH margin in standard errors")

    p = sub.add_parser("suites", help="run verification suites")
    common(p)
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--trials", type=int, default=None, help="trials per class / pair")
    p.add_argument("--seeds", type=int, default=None, help="runs per cell (reproduce-table3)")
    p.add_argument("--samples", type=int, default=None, help="samples per run (reproduce-table3)")
    p.add_argument("--chsh-margin", type=float, default=None, help="CHSH margin in standard errors")
    p.add_argument("--csv", default=None, help="per-trial CSV summary")
    return parser


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UserError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UserError(f"config {path}: top level must be an object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < explicit flags."""
    values = {"command": args.command, "seed": _default_seed()}
    known = set(RunConfig.__dataclass_fields__)
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        unknown = set(cfg) - known
        if unknown:
            raise UserError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(cfg)
    for key, val in vars(args).items():
        if key in known and val is not None:
            values[key] = val
    values["command"] = args.command
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise UserError(str(exc)) from None
    return cfg.validate()


def parse_setting(selector: str, post_select: bool = False):
    """Return ``("mp", MpSetting)`` or ``("chsh", ChshSetting)``."""
    sel = str(selector).strip()
    if sel == "ic":
        return "mp", tomographically_complete_setting()
    if sel.endswith(".json"):
        try:
            return "mp", fio.setting_from_dict(fio.read_json(sel))
        except (ValueError, TypeError) as exc:
            if isinstance(exc, fio.FormatError):
                raise
            raise UserError(f"setting {sel}: {exc}") from None
    kind, sep, arg = sel.partition(":")
    if not sep:
        raise UserError(f"malformed setting selector {sel!r}; use e1:n, e2:n, s2:seed, r2:seed or ic")
    try:
        n = int(arg)
    except ValueError:
        raise UserError(f"setting selector {sel!r} needs an integer argument") from None
    if kind in ("e1", "e2") and not 1 <= n <= 7:
        raise UserError(f"catalogued settings are numbered 1..7, got {n}")
    if kind == "e1":
        return "mp", table_e1_setting(n)
    if kind == "e2":
        return "chsh", table_e2_setting(n)
    if kind == "s2":
        return "mp", random_s2_setting(seed=n)
    if kind == "r2":
        return "chsh", random_chsh_setting(seed=n, post_select=post_select)
    raise UserError(f"unknown setting kind {kind!r}; use e1, e2, s2, r2 or ic")


def load_strategy(ref: Optional[str]):
    if not ref:
        raise UserError("--strategy is required")
    if ref.lower() in st.BUILTIN_STRATEGIES:
        return st.builtin_strategy(ref)
    if ref.endswith(".json"):
        try:
            return fio.strategy_from_dict(fio.read_json(ref))
        except fio.FormatError:
            raise
        except (ValueError, TypeError) as exc:
            raise UserError(f"strategy {ref}: {exc}") from None
    raise UserError(f"unknown strategy {ref!r}; use a builtin name or a JSON file")


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #


def _timestamp() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        fio._atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _seeds(seed: int):
    step1, step2 = np.random.SeedSequence(int(seed)).spawn(2)
    return step1, step2.spawn(4)


def cmd_simulate(cfg: RunConfig) -> int:
    spec = load_strategy(cfg.strategy)
    kind, setting = parse_setting(cfg.setting, bool(cfg.post_select))
    s1_seed, s2_seeds = _seeds(cfg.seed)
    try:
        if kind == "mp":
            dists = {"step1": st.simulate_distribution(spec, setting)}
        else:
            dists = {f"{i}{j}": st.simulate_distribution(spec, s) for (i, j), s in setting.pairs().items()}
        step2_dists = None
        if cfg.step2_out:
            sel = cfg.step2_setting
            if sel is None:
                if not str(cfg.setting).startswith("e1:"):
                    raise UserError("--step2-out needs --step2-setting unless --setting is e1:n")
                sel = "e2:" + str(cfg.setting).split(":", 1)[1]
            kind2, chsh_setting = parse_setting(sel, bool(cfg.post_select))
            if kind2 != "chsh":
                raise UserError("--step2-setting must be a step-2 selector (e2:n or r2:seed)")
            step2_dists = {k: st.simulate_distribution(spec, s) for k, s in chsh_setting.pairs().items()}
    except st.DimensionError as exc:
        raise UserError(str(exc)) from None

    sidecar = None
    if cfg.exact:
        sidecar = {
            "generated_at": _timestamp(),
            "config": {k: v for k, v in asdict(cfg).items() if v is not None},
            "strategy": fio.strategy_to_dict(spec),
            "exact": {k: fio.distribution_to_json(d) for k, d in dists.items()},
        }
        if step2_dists:
            sidecar["exact_step2"] = {
                f"{i}{j}": fio.distribution_to_json(d) for (i, j), d in step2_dists.items()
            }
        if not cfg.out:
            _emit(fio.dumps_json(sidecar), cfg.sidecar)
            return EXIT_OK

    n = cfg.samples or SIMULATE_SAMPLES
    if kind == "mp":
        text = fio.counts_to_csv(sample_counts(dists["step1"], n, s1_seed))
    else:
        tables = {
            key: sample_counts(dists[f"{key[0]}{key[1]}"], n, s)
            for key, s in zip(fio.PAIR_CODES.values(), s2_seeds)
        }
        text = fio.step2_to_csv(tables)
    _emit(text, cfg.out)
    if step2_dists:
        tables = {key: sample_counts(step2_dists[key], n, s)
                  for key, s in zip(fio.PAIR_CODES.values(), s2_seeds)}
        fio.write_step2(cfg.step2_out, tables)
    if sidecar is not None:
        fio.write_json(cfg.sidecar or f"{cfg.out}.exact.json", sidecar)
    return EXIT_OK


def cmd_identify(cfg: RunConfig) -> int:
    if not cfg.counts:
        raise UserError("--counts is required")
    step1 = fio.read_counts(cfg.counts)
    step2 = fio.read_step2(cfg.step2) if cfg.step2 else None
    if min(step1.cardinalities) < 2:
        raise UserError(f"step-1 counts must be at least 2x2x2x2, got {step1.cardinalities}")
    try:
        verdict = identify(step1, step2, cfg.alpha, cfg.chsh_margin, allow_pending=True)
    except MissingStep2Error as exc:
        raise UserError(str(exc)) from None
    _check_verdict(verdict)
    out = {"generated_at": _timestamp()} | verdict.to_dict()
    text = fio.dumps_json(out)
    if cfg.out:
        fio.write_json(cfg.out, out)
    sys.stdout.write(text)
    return EXIT_OK


def _check_verdict(verdict) -> None:
    """The label must be backed by accepted conditions (internal invariant)."""
    if verdict.label == "Unidentified":
        return
    accepted = any(r.accepted for r in verdict.conditions)
    if not accepted:
        raise AssertionError(f"verdict {verdict.label} without an accepted condition")
    if verdict.label not in ("S_I", "S_N,1->2", "S_N,2->1") and not verdict.memory_pending and verdict.chsh is None:
        raise AssertionError(f"memory label {verdict.label} without CHSH data")


def _run_suite(cfg: RunConfig) -> tuple[dict, Optional[str]]:
    if cfg.suite == "theorem1":
        rep = theorem1_suite(cfg.trials or 50, cfg.seed)
        return rep.to_dict(), rep.to_csv()
    if cfg.suite == "theorem2":
        rep = theorem2_suite(None, cfg.trials or 200, cfg.seed)
        return rep.to_dict(), rep.to_csv()
    if cfg.suite == "lemmas":
        trials = cfg.trials or 200
        reports = {
            "product_phi_plus": product_lemma_check(bell_state(), trials, cfg.seed),
            "product_classical": product_lemma_check(np.diag([0.5, 0, 0, 0.5]).astype(complex), trials, cfg.seed),
            "product_product": product_lemma_check(
                np.kron(np.diag([0.3, 0.7]), np.full((2, 2), 0.5)).astype(complex), trials, cfg.seed
            ),
            "merge": lemma_merge_check(trials, cfg.seed),
        }
        out = {
            "suite": "lemmas",
            "master_seed": cfg.seed,
            "ok": all(r.ok for r in reports.values()),
            "reports": {k: r.to_dict(timestamp=False) for k, r in reports.items()},
            "generated_at": _timestamp(),
        }
        csv_text = "".join(
            r.to_csv() if i == 0 else r.to_csv().split("\n", 1)[1] for i, r in enumerate(reports.values())
        )
        return out, csv_text
    if cfg.suite == "reproduce-table3":
        rep = reproduce_table3(cfg.samples or TABLE3_SAMPLES, cfg.seeds, cfg.seed,
                               cfg.alpha, chsh_margin=cfg.chsh_margin)
        rep["generated_at"] = _timestamp()
        lines = ["strategy,setting,expected_step1,step1_correct,runs,ideal_max_s,ideal_label,experimental_label"]
        for c in rep["cells"]:
            lines.append(
                f"{c['strategy']},{c['setting']},{c['expected_step1']},{c['step1_correct']},{c['runs']},"
                f"{c['ideal_max_s']!r},{c['ideal_label']},{c['experimental_label']}"
            )
        return rep, "\n".join(lines) + "\n"
    raise UserError(f"unknown suite {cfg.suite!r}")


def cmd_suites(cfg: RunConfig) -> int:
    report, csv_text = _run_suite(cfg)
    text = fio.dumps_json(report)
    _emit(text, cfg.out)
    if cfg.csv and csv_text is not None:
        fio._atomic_write(cfg.csv, csv_text)
    status = "ok" if report.get("ok") else "FAILED"
    print(f"{cfg.suite}: {status}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "suites": cmd_suites}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.command](cfg)
    except (UserError, fio.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
