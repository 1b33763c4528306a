"""File formats: counts CSV/JSON, strategy and setting JSON, report writers.

Complex matrices are stored row-major as nested lists of ``[re, im]`` pairs.
All writers go through a temporary file and an atomic rename, so a failed
run never leaves partial output behind.
"""
from __future__ import annotations

import csv
import io as _io
import itertools
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .channels import QuantumChannel
from .operators import bloch_pure_state
from .settings import MpSetting, PlayerSetting
from .statistics import CountsTable, JointDistribution

COUNTS_HEADER = ("j1", "k1", "j2", "k2", "count")
STEP2_HEADER = ("pair",) + COUNTS_HEADER
PAIR_CODES = {"11": (1, 1), "12": (1, 2), "21": (2, 1), "22": (2, 2)}


class FormatError(ValueError):
    """Malformed input file (user error)."""


# --------------------------------------------------------------------------- #
# Matrices
# --------------------------------------------------------------------------- #


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("only 2-d matrices can be encoded")
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"matrix is not a nested list of [re, im] pairs: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise FormatError(f"matrix must have shape (rows, cols, 2), got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


# --------------------------------------------------------------------------- #
# Atomic writes
# --------------------------------------------------------------------------- #


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def write_json(path, obj) -> None:
    _atomic_write(path, dumps_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None


# --------------------------------------------------------------------------- #
# Counts
# --------------------------------------------------------------------------- #


def counts_to_csv(counts: CountsTable) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)
    for idx in itertools.product(*(range(n) for n in counts.cardinalities)):
        w.writerow([i + 1 for i in idx] + [int(counts.counts[idx])])
    return buf.getvalue()


def step2_to_csv(tables: dict) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STEP2_HEADER)
    for code, key in PAIR_CODES.items():
        t = tables[key]
        for idx in itertools.product(*(range(n) for n in t.cardinalities)):
            w.writerow([code] + [i + 1 for i in idx] + [int(t.counts[idx])])
    return buf.getvalue()


def _parse_int(value: str, what: str, line: int) -> int:
    try:
        v = int(value)
    except (TypeError, ValueError):
        raise FormatError(f"line {line}: {what} is not an integer: {value!r}") from None
    return v


def _rows_to_table(rows, line_numbers, source) -> CountsTable:
    """Assemble a full grid from ``(indices, count)`` rows; every cell exactly once."""
    if not rows:
        raise FormatError(f"{source}: no data rows")
    cards = [max(r[0][a] for r in rows) for a in range(4)]
    arr = np.full(cards, -1, dtype=np.int64)
    for (idx, count), line in zip(rows, line_numbers):
        if min(idx) < 1:
            raise FormatError(f"{source} line {line}: indices are 1-based")
        if count < 0:
            raise FormatError(f"{source} line {line}: negative count")
        cell = tuple(i - 1 for i in idx)
        if arr[cell] >= 0:
            raise FormatError(f"{source} line {line}: duplicate cell {idx}")
        arr[cell] = count
    missing = np.argwhere(arr < 0)
    if len(missing):
        first = tuple(int(i) + 1 for i in missing[0])
        raise FormatError(f"{source}: {len(missing)} missing cell(s), first {first} (truncated file?)")
    if arr.sum() == 0:
        raise FormatError(f"{source}: all counts are zero")
    return CountsTable(arr)


def _read_csv_rows(text: str, header, source):
    if text and not text.endswith("\n"):
        # every writer ends with LF; a missing one means the last row may be cut
        raise FormatError(f"{source}: file does not end with a newline (truncated?)")
    reader = csv.reader(_io.StringIO(text))
    try:
        head = next(reader)
    except StopIteration:
        raise FormatError(f"{source}: empty file") from None
    if tuple(h.strip().lower() for h in head) != tuple(header):
        raise FormatError(f"{source}: expected header {','.join(header)}, got {','.join(head)}")
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"{source} line {line}: expected {len(header)} fields, got {len(row)}")
        yield line, row


def parse_counts_csv(text: str, source: str = "<counts>") -> CountsTable:
    rows, lines = [], []
    for line, row in _read_csv_rows(text, COUNTS_HEADER, source):
        vals = [_parse_int(v, COUNTS_HEADER[i], line) for i, v in enumerate(row)]
        rows.append((tuple(vals[:4]), vals[4]))
        lines.append(line)
    return _rows_to_table(rows, lines, source)


def parse_step2_csv(text: str, source: str = "<step2>") -> dict:
    grouped: dict = {key: ([], []) for key in PAIR_CODES.values()}
    for line, row in _read_csv_rows(text, STEP2_HEADER, source):
        code = row[0].strip()
        if code not in PAIR_CODES:
            raise FormatError(f"{source} line {line}: pair must be one of {sorted(PAIR_CODES)}")
        vals = [_parse_int(v, STEP2_HEADER[i + 1], line) for i, v in enumerate(row[1:])]
        rows, lines = grouped[PAIR_CODES[code]]
        rows.append((tuple(vals[:4]), vals[4]))
        lines.append(line)
    return {
        key: _rows_to_table(rows, lines, f"{source} pair {key[0]}{key[1]}")
        for key, (rows, lines) in grouped.items()
    }


def counts_to_json(counts: CountsTable) -> dict:
    cells = []
    for idx in itertools.product(*(range(n) for n in counts.cardinalities)):
        j1, k1, j2, k2 = (i + 1 for i in idx)
        cells.append({"j1": j1, "k1": k1, "j2": j2, "k2": k2, "count": int(counts.counts[idx])})
    return {"cardinalities": list(counts.cardinalities), "total": counts.total, "cells": cells}


def counts_from_json(obj, source: str = "<counts>") -> CountsTable:
    try:
        cells = obj["cells"]
        rows = [
            (tuple(int(c[k]) for k in COUNTS_HEADER[:4]), int(c["count"])) for c in cells
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed counts JSON ({exc})") from None
    table = _rows_to_table(rows, list(range(1, len(rows) + 1)), source)
    if "cardinalities" in obj and list(obj["cardinalities"]) != list(table.cardinalities):
        raise FormatError(f"{source}: cardinalities do not match the cells")
    return table


def read_counts(path) -> CountsTable:
    """Step-1 counts from ``.csv`` or ``.json``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return counts_from_json(read_json(path), str(path))
    return parse_counts_csv(path.read_text(encoding="utf-8"), str(path))


def read_step2(paths) -> dict:
    """Step-2 counts: one file with a ``pair`` column, or four files in order 11, 12, 21, 22."""
    paths = [Path(p) for p in paths]
    if len(paths) == 1:
        p = paths[0]
        if p.suffix.lower() == ".json":
            obj = read_json(p)
            try:
                return {PAIR_CODES[code]: counts_from_json(obj[code], f"{p}:{code}") for code in PAIR_CODES}
            except KeyError as exc:
                raise FormatError(f"{p}: missing pair {exc}") from None
        return parse_step2_csv(p.read_text(encoding="utf-8"), str(p))
    if len(paths) == 4:
        return {key: read_counts(p) for key, p in zip(PAIR_CODES.values(), paths)}
    raise FormatError("step-2 data must be one file with a pair column or four files")


def write_counts(path, counts: CountsTable) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        write_json(path, counts_to_json(counts))
    else:
        _atomic_write(path, counts_to_csv(counts))


def write_step2(path, tables: dict) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        write_json(path, {code: counts_to_json(tables[key]) for code, key in PAIR_CODES.items()})
    else:
        _atomic_write(path, step2_to_csv(tables))


def distribution_to_json(dist: JointDistribution) -> dict:
    return {
        "cardinalities": list(dist.cardinalities),
        "probabilities": [float(v) for v in dist.probs.ravel()],
    }


# --------------------------------------------------------------------------- #
# Settings
# --------------------------------------------------------------------------- #


def player_to_dict(player: PlayerSetting) -> dict:
    return {
        "povm": [encode_matrix(m) for m in player.effects],
        "preps": [encode_matrix(r) for r in player.preparations],
        "cond": [[float(v) for v in row] for row in player.cond],
    }


def _operator_or_angles(item) -> np.ndarray:
    """Explicit matrix, or a ``[θ, φ]`` Bloch pair in degrees for qubit projectors."""
    try:
        arr = np.asarray(item, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"cannot read operator from {item!r}") from None
    if arr.shape == (2,):
        return bloch_pure_state(*arr)
    return decode_matrix(item)


def player_from_dict(obj) -> PlayerSetting:
    try:
        effects = obj["povm"] if "povm" in obj else obj["effects"]
        preps = obj["preps"] if "preps" in obj else obj["preparations"]
        return PlayerSetting(
            tuple(_operator_or_angles(m) for m in effects),
            tuple(_operator_or_angles(r) for r in preps),
            np.asarray(obj["cond"], dtype=float),
        )
    except KeyError as exc:
        raise FormatError(f"player setting lacks field {exc}") from None


def setting_to_dict(setting: MpSetting) -> dict:
    return {"alice": player_to_dict(setting.alice), "bob": player_to_dict(setting.bob)}


def setting_from_dict(obj) -> MpSetting:
    try:
        return MpSetting(player_from_dict(obj["alice"]), player_from_dict(obj["bob"]))
    except KeyError as exc:
        raise FormatError(f"setting lacks field {exc}") from None


# --------------------------------------------------------------------------- #
# Strategies
# --------------------------------------------------------------------------- #


def _channel_from(obj) -> QuantumChannel:
    return QuantumChannel(tuple(decode_matrix(k) for k in obj["kraus"]))


def strategy_to_dict(spec) -> dict:
    from . import strategies as st

    out = {"class": spec.tag, "direction": spec.direction}
    if isinstance(spec, st.IndividualStrategy):
        out["rho1"] = encode_matrix(spec.rho1)
        out["rho2"] = encode_matrix(spec.rho2)
    elif isinstance(spec, st.ClassicalParallel):
        out["branches"] = [
            {"weight": p, "rho1": encode_matrix(r1), "rho2": encode_matrix(r2)}
            for p, r1, r2 in spec.branches
        ]
    elif isinstance(spec, st.QuantumParallel):
        out["rho12"] = encode_matrix(spec.rho12)
        out["input_dims"] = list(spec.input_dims)
    elif isinstance(spec, st.NoMemorySequential):
        out["rho1"] = encode_matrix(spec.rho1)
        out["channel"] = spec.channel.to_dict()
    elif isinstance(spec, st.ClassicalSequential):
        out["branches"] = [
            {"weight": p, "rho1": encode_matrix(r), "channel": ch.to_dict()} for p, r, ch in spec.branches
        ]
    elif isinstance(spec, st.QuantumSequential):
        branches = []
        for b in spec.branches:
            if isinstance(b, st.ParallelBranch):
                branches.append(
                    {"kind": "parallel", "weight": b.weight, "rho12": encode_matrix(b.rho12),
                     "input_dims": list(b.input_dims)}
                )
            else:
                branches.append(
                    {"kind": "memory", "weight": b.weight, "rho1_aux": encode_matrix(b.rho1_aux),
                     "aux_dim": b.aux_dim, "channel": b.channel.to_dict()}
                )
        out["branches"] = branches
        out["d_o_first"] = spec.d_o_first
    else:
        raise TypeError(f"cannot serialize {type(spec).__name__}")
    if spec.direction is None:
        out["d_o1"], out["d_o2"] = spec.d_o1, spec.d_o2
    else:
        out["d_o_last"] = spec.d_o_last
    return out


def strategy_from_dict(obj):
    from . import strategies as st

    try:
        tag = obj["class"]
        direction = obj.get("direction") or st.FORWARD
        mat = lambda key, o=obj: decode_matrix(o[key])  # noqa: E731
        if tag == st.SI:
            return st.IndividualStrategy(mat("rho1"), mat("rho2"), obj.get("d_o1", 2), obj.get("d_o2", 2))
        if tag == st.SC:
            return st.ClassicalParallel(
                [(b["weight"], decode_matrix(b["rho1"]), decode_matrix(b["rho2"])) for b in obj["branches"]],
                obj.get("d_o1", 2), obj.get("d_o2", 2),
            )
        if tag == st.SQ:
            return st.QuantumParallel(
                mat("rho12"), tuple(obj.get("input_dims", (2, 2))), obj.get("d_o1", 2), obj.get("d_o2", 2)
            )
        d_last = obj.get("d_o_last", 2)
        if tag == st.SN:
            return st.NoMemorySequential(mat("rho1"), _channel_from(obj["channel"]), direction, d_last)
        if tag == st.SC_SEQ:
            return st.ClassicalSequential(
                [(b["weight"], decode_matrix(b["rho1"]), _channel_from(b["channel"])) for b in obj["branches"]],
                direction, d_last,
            )
        if tag == st.SQ_SEQ:
            branches = []
            for b in obj["branches"]:
                if b["kind"] == "parallel":
                    branches.append(
                        st.ParallelBranch(b["weight"], decode_matrix(b["rho12"]), tuple(b.get("input_dims", (2, 2))))
                    )
                elif b["kind"] == "memory":
                    branches.append(
                        st.MemoryBranch(b["weight"], decode_matrix(b["rho1_aux"]), b["aux_dim"],
                                        _channel_from(b["channel"]))
                    )
                else:
                    raise FormatError(f"unknown branch kind {b['kind']!r}")
            return st.QuantumSequential(branches, direction, d_last, obj.get("d_o_first"))
    except KeyError as exc:
        raise FormatError(f"strategy JSON lacks field {exc}") from None
    raise FormatError(f"unknown strategy class {obj.get('class')!r}")


def process_matrix_from_dict(obj):
    from .strategies import ProcessMatrix

    try:
        return ProcessMatrix(decode_matrix(obj["matrix"]), tuple(obj["dims"]))
    except KeyError as exc:
        raise FormatError(f"process matrix JSON lacks field {exc}") from None
