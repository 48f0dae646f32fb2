"""CSV datasets and JSON-lines chain archives.

Floats are written with 17 significant digits in CSV and with Python's
shortest round-trip repr in JSON, so both formats read back bit-for-bit.
"""
import csv
import hashlib
import json
import os

import numpy as np

from .sampler import PosteriorChain
from .baselines import HomogeneousChain

ARCHIVE_FORMAT = "simplex-drift-chain"


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def fmt(x):
    return format(float(x), ".17g")


def _open_write(path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise DataError(f"{path}: file not found") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows[0], rows[1:]


def _columns(header, prefix):
    cols = [i for i, h in enumerate(header) if h.startswith(prefix) and h[len(prefix):].isdigit()]
    cols.sort(key=lambda i: int(header[i][len(prefix):]))
    return cols


def _parse(row, cols, path, line):
    try:
        return [float(row[i]) for i in cols]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}:{line}: malformed row {row!r}") from exc


def read_pairs_csv(path):
    """(ids, start proportions, end proportions) from a raw pairs file."""
    header, rows = _read_rows(path)
    if not header or header[0] != "location_id":
        raise DataError(f"{path}:1: first column must be location_id")
    p, q = _columns(header, "p_"), _columns(header, "q_")
    if len(p) < 3 or len(p) != len(q):
        raise DataError(f"{path}:1: need matching p_1..p_n and q_1..q_n columns with n >= 3")
    ids, start, end = [], [], []
    for line, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        start.append(_parse(row, p, path, line))
        end.append(_parse(row, q, path, line))
    return ids, np.array(start, float).reshape(-1, len(p)), np.array(end, float).reshape(-1, len(q))


def write_pairs_csv(path, ids, start, end):
    n = start.shape[1]
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location_id"] + [f"p_{i + 1}" for i in range(n)] + [f"q_{i + 1}" for i in range(n)])
        for i, row_id in enumerate(ids):
            w.writerow([row_id] + [fmt(v) for v in start[i]] + [fmt(v) for v in end[i]])


def write_directions_csv(path, ids, locations, theta2, directions):
    """location_id, p_1..p_{D+1}, theta2, y_1..y_{D-1} (y_1 only when D = 2)."""
    locations = np.atleast_2d(locations)
    dirs = np.asarray(directions, float).reshape(locations.shape[0], -1)
    theta2 = np.broadcast_to(np.asarray(theta2, float), (locations.shape[0],))
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location_id"] + [f"p_{i + 1}" for i in range(locations.shape[1])]
                   + ["theta2"] + [f"y_{i + 1}" for i in range(dirs.shape[1])])
        for i, row_id in enumerate(ids):
            w.writerow([row_id] + [fmt(v) for v in locations[i]] + [fmt(theta2[i])]
                       + [fmt(v) for v in dirs[i]])


def read_directions_csv(path):
    """(ids, locations (N, D+1), theta2 (N,), directions (N,) or (N, D-1))."""
    header, rows = _read_rows(path)
    if not header or header[0] != "location_id" or "theta2" not in header:
        raise DataError(f"{path}:1: expected location_id, p_*, theta2, y_* columns")
    p, y = _columns(header, "p_"), _columns(header, "y_")
    t = header.index("theta2")
    if len(p) < 3:
        raise DataError(f"{path}:1: need at least 3 proportion columns")
    expected = 1 if len(p) == 3 else len(p) - 2
    if len(y) != expected:
        raise DataError(f"{path}:1: {len(p)} proportions need {expected} direction column(s)")
    ids, locs, th, dirs = [], [], [], []
    for line, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0])
        loc = _parse(row, p, path, line)
        if any(v < 0 for v in loc) or abs(sum(loc) - 1.0) > 1e-6:
            raise DataError(f"{path}:{line}: proportions must be nonnegative and sum to 1")
        locs.append(loc)
        th.append(_parse(row, [t], path, line)[0])
        dirs.append(_parse(row, y, path, line))
    dirs = np.array(dirs, float).reshape(-1, len(y))
    return ids, np.array(locs, float).reshape(-1, len(p)), np.array(th), \
        (dirs[:, 0] if len(p) == 3 else dirs)


# ---------------------------------------------------------------------------
# chain archives

def spec_hash(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(blob.encode()).hexdigest()


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _line(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_default) + "\n"


_SPATIAL = ("z", "varphi", "nu", "zeta", "lam")
_HOMOG = ("w", "varphi", "lam", "zeta")


def write_chain_archive(path, chains, header):
    """Header line, then one line per stored draw, then one stats line per chain."""
    with _open_write(path) as fh:
        fh.write(_line({"format": ARCHIVE_FORMAT, "version": 1, "n_chains": len(chains), **header}))
        for c, ch in enumerate(chains):
            fields = _SPATIAL if isinstance(ch, PosteriorChain) else _HOMOG
            for j in range(len(ch)):
                fh.write(_line({"chain": c, "draw": j, **{f: getattr(ch, f)[j] for f in fields}}))
        for c, ch in enumerate(chains):
            stats = getattr(ch, "acceptance_stats", {}) or {}
            fh.write(_line({"chain": c, "stats": stats}))


def read_chain_archive(path):
    """(header, list of chains)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [json.loads(s) for s in fh if s.strip()]
    except FileNotFoundError as exc:
        raise DataError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a JSON-lines archive ({exc})") from exc
    if not lines or lines[0].get("format") != ARCHIVE_FORMAT:
        raise DataError(f"{path}: missing chain archive header")
    header = lines[0]
    n = header["n_chains"]
    draws = [[] for _ in range(n)]
    stats = [{} for _ in range(n)]
    for rec in lines[1:]:
        if "stats" in rec:
            stats[rec["chain"]] = rec["stats"]
        else:
            draws[rec["chain"]].append(rec)
    chains = []
    for c in range(n):
        recs = draws[c]
        if header.get("model") in ("iV", "iVM"):
            chains.append(HomogeneousChain(
                np.array([r["w"] for r in recs], float), np.array([r["varphi"] for r in recs], float),
                np.array([r["lam"] for r in recs], float), np.array([r["zeta"] for r in recs], np.int64)))
        else:
            arr = {f: np.array([r[f] for r in recs], np.int64 if f == "zeta" else float) for f in _SPATIAL}
            chains.append(PosteriorChain(**arr, acceptance_stats=stats[c]))
    return header, chains


def write_json(path, obj):
    with _open_write(path) as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: file not found") from exc
