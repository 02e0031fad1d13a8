"""
File formats: price ingestion, model persistence, reports and tables.

Price files are delimited text with a ``date,close`` header and ISO-8601
dates. Model files are JSON with explicit parameter names, a format
version and every float written with 17 significant digits, so a round
trip is exact.
"""

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .ghyp import GhypParams
from .panel import ReturnPanel
from .regime import AssetStates, RegimeModel, TransitionMatrix

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# prices


def read_prices(path):
    """
    Read one ``date,close`` file.

    Returns
    -------
    dates : ndarray of datetime64[D], ascending
    closes : ndarray of float
    """
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["date", "close"]:
            raise DataError(f"{path}: expected header 'date,close', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected two fields, got {row!r}")
            try:
                date = np.datetime64(row[0].strip(), "D")
                close = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: cannot parse row {row!r}") from None
            if not (math.isfinite(close) and close > 0.0):
                raise DataError(f"{path}:{lineno}: non-positive or non-finite close {row[1]!r}")
            rows.append((date, close))
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two prices, found {len(rows)}")
    dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
    closes = np.array([r[1] for r in rows])
    order = np.argsort(dates, kind="stable")
    dates, closes = dates[order], closes[order]
    if np.any(dates[1:] == dates[:-1]):
        dup = dates[1:][dates[1:] == dates[:-1]][0]
        raise DataError(f"{path}: duplicate date {dup}")
    return dates, closes


def write_prices(path, dates, closes):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "close"])
        for d, c in zip(dates, closes):
            w.writerow([str(d), _fmt(c)])


@dataclass(frozen=True)
class IngestResult:
    panel: ReturnPanel
    dropped: int


def ingest(sources):
    """
    Build a :class:`ReturnPanel` from price files.

    ``sources`` maps market names to paths (or is a sequence of paths,
    named by file stem). Log returns are formed per file, then only dates
    present in every file are kept; ``dropped`` counts the return dates
    that were discarded.
    """
    if not isinstance(sources, dict):
        sources = {Path(p).stem: p for p in sources}
    if not sources:
        raise DataError("no price files given")
    series = {}
    for name, path in sources.items():
        dates, closes = read_prices(path)
        series[name] = (dates[1:], np.diff(np.log(closes)))
    common = None
    union = set()
    for dates, _ in series.values():
        s = set(dates.tolist())
        union |= s
        common = s if common is None else common & s
    if not common:
        raise DataError("price files share no return dates")
    keep = np.array(sorted(common), dtype="datetime64[D]")
    cols = []
    for dates, rets in series.values():
        cols.append(rets[np.isin(dates, keep)])
    panel = ReturnPanel(keep, tuple(series), np.column_stack(cols),
                        tuple(os.path.basename(str(p)) for p in sources.values()))
    return IngestResult(panel, len(union) - len(common))


# ---------------------------------------------------------------------------
# models


def _fmt(x):
    return format(float(x), ".17g")


def _dump(obj, indent=0):
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [_dump(v, indent + 1) for v in obj]
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(items) + "]"
        return "[\n" + ",\n".join(pad + i for i in items) + "\n" + "  " * indent + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return json.dumps(None)
        return _fmt(obj)
    return json.dumps(str(obj))


def dumps_json(obj):
    """JSON text with 17 significant digits for every float."""
    return _dump(obj) + "\n"


def _params_dict(p):
    return {"lambda": p.lam, "alpha": p.alpha, "beta": p.beta, "scale": p.scale, "location": p.location}


def _params_from(d):
    try:
        return GhypParams(float(d["lambda"]), float(d["alpha"]), float(d["beta"]),
                          float(d["scale"]), float(d["location"]))
    except KeyError as exc:
        raise DataError(f"model file: missing GHYP field {exc}") from None


def model_to_dict(model, diagnostics=None):
    out = {
        "format_version": FORMAT_VERSION,
        "kind": "regime-ghyp-2state",
        "transitions": {"p11": model.transitions.p11, "p22": model.transitions.p22},
        "assets": [
            {"name": a.name, "common_mean": a.common_mean,
             "state1": _params_dict(a.state1), "state2": _params_dict(a.state2)}
            for a in model.assets
        ],
    }
    if diagnostics:
        out["diagnostics"] = diagnostics
    return out


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model file (format_version={d.get('format_version') if isinstance(d, dict) else None!r})")
    try:
        t = d["transitions"]
        assets = tuple(AssetStates(str(a["name"]), _params_from(a["state1"]), _params_from(a["state2"]))
                       for a in d["assets"])
        return RegimeModel(TransitionMatrix(float(t["p11"]), float(t["p22"])), assets)
    except (KeyError, TypeError) as exc:
        raise DataError(f"model file: malformed entry ({exc})") from None


def save_model(path, model, diagnostics=None):
    Path(path).write_text(dumps_json(model_to_dict(model, diagnostics)))


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a model file ({exc})") from None
    return model_from_dict(d)


# ---------------------------------------------------------------------------
# reports and tables


def write_report(path, mapping):
    """Key-value text, one ``key = value`` per line, in insertion order."""
    lines = []
    for k, v in mapping.items():
        if isinstance(v, (float, np.floating)):
            v = _fmt(v)
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_table(path, header, columns):
    """Delimited table with a header row; floats get 17 significant digits."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in row])
