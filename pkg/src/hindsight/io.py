"""CSV and JSON serialization with reproducible formatting."""

import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError
from .game import OutcomeData

OUTCOME_COLUMNS = ("player_id", "group_id", "Y", "X", "C_of_group")


def format_float(x):
    """Fixed 17-significant-digit text, which round-trips every double."""
    return format(float(x), ".17g")


def _sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".json")


def write_outcomes(data, path):
    """Write one row per player plus a JSON sidecar with the design metadata."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OUTCOME_COLUMNS)
        c = data.signals[data.group_of]
        for i in range(data.num_players):
            writer.writerow([i, int(data.group_of[i]), int(data.actions[i]),
                             format_float(data.covariates[i]), format_float(c[i])])
    sidecar = dict(data.meta)
    sidecar["num_actions"] = data.num_actions
    sidecar["num_groups"] = data.num_groups
    sidecar["num_players"] = data.num_players
    write_json(_sidecar_path(path), sidecar)
    return path


def read_outcomes(path):
    """Read an outcome CSV written by ``write_outcomes``.

    Raises ``DataError`` naming the offending line on any malformed row.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != OUTCOME_COLUMNS:
            raise DataError(f"{path}:1: expected header {','.join(OUTCOME_COLUMNS)}")
        ids, groups, ys, xs, cs = [], [], [], [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(OUTCOME_COLUMNS):
                raise DataError(f"{path}:{line}: expected {len(OUTCOME_COLUMNS)} fields, got {len(row)}")
            try:
                ids.append(int(row[0]))
                groups.append(int(row[1]))
                ys.append(int(row[2]))
                xs.append(float(row[3]))
                cs.append(float(row[4]))
            except ValueError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
            if not (np.isfinite(xs[-1]) and np.isfinite(cs[-1])):
                raise DataError(f"{path}:{line}: nonfinite value")
    if not ids:
        raise DataError(f"{path}: no data rows")
    if sorted(ids) != list(range(len(ids))):
        raise DataError(f"{path}: player_id must enumerate 0..N-1")
    order = np.argsort(ids)
    groups = np.asarray(groups)[order]
    num_groups = int(groups.max()) + 1
    signals = np.full(num_groups, np.nan)
    for g, c in zip(groups, np.asarray(cs)[order]):
        if np.isnan(signals[g]):
            signals[g] = c
        elif signals[g] != c:
            raise DataError(f"{path}: group {g} has inconsistent C_of_group values")
    if np.any(np.isnan(signals)):
        raise DataError(f"{path}: group ids must be contiguous from 0")
    meta, num_actions = {}, max(2, int(max(ys)) + 1)
    side = _sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
        num_actions = int(meta.get("num_actions", num_actions))
    return OutcomeData(
        actions=np.asarray(ys)[order], covariates=np.asarray(xs)[order], signals=signals,
        group_of=groups, num_actions=num_actions, meta=meta,
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_table(path, columns, rows):
    """Write dict rows; floats get 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                format_float(row[c]) if isinstance(row[c], (float, np.floating)) else row[c]
                for c in columns
            ])


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def code_version():
    return {
        "package": "hindsight",
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.machine(),
    }


def write_manifest(directory, command, config, seed, outputs, extra=None):
    """Record everything needed to rerun ``command`` bit-identically."""
    payload = {
        "command": command,
        "config": config,
        "seed": seed,
        "outputs": sorted(str(Path(o).name) for o in outputs),
        "code": code_version(),
    }
    if extra:
        payload.update(extra)
    path = Path(directory) / "manifest.json"
    write_json(path, payload)
    return path
