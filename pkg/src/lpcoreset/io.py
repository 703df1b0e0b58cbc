"""Matrix files (LPCM binary, CSV), dataset hashing and coreset JSON."""
import hashlib
import json
import struct

import numpy as np

from .errors import InputError
from .sampling import WeightedCoreset

MAGIC = b"LPCM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")
CORESET_FORMAT = "lpcoreset/1"


def write_matrix_bin(path, A):
    A = np.ascontiguousarray(A, dtype="<f8")
    if A.ndim != 2:
        raise InputError("expected a 2-d array")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, A.shape[0], A.shape[1]))
        fh.write(A.tobytes())


def _read_header(fh, path):
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: truncated header")
    magic, version, n, d = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise InputError(f"{path}: not an LPCM file")
    if version != VERSION:
        raise InputError(f"{path}: unsupported LPCM version {version}")
    return n, d


def read_matrix_bin(path, mmap=False):
    with open(path, "rb") as fh:
        n, d = _read_header(fh, path)
    expected = _HEADER.size + 8 * n * d
    if mmap:
        return np.memmap(path, dtype="<f8", mode="r", offset=_HEADER.size, shape=(n, d))
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        buf = fh.read()
    if len(buf) != expected - _HEADER.size:
        raise InputError(f"{path}: expected {n}x{d} values, file size disagrees")
    return np.frombuffer(buf, dtype="<f8").reshape(n, d).astype(np.float64)


def write_csv(path, A):
    # %.17g round-trips every binary64 value
    np.savetxt(path, np.asarray(A, dtype=np.float64), fmt="%.17g", delimiter=",")


def _parse_csv_line(line, lineno, path):
    try:
        return np.array([float(x) for x in line.split(",")])
    except ValueError as exc:
        raise InputError(f"{path}:{lineno}: {exc}") from None


def _csv_lines(path, header):
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if line:
                yield lineno, line


def read_csv(path, header=False):
    rows = [_parse_csv_line(line, no, path) for no, line in _csv_lines(path, header)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise InputError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.vstack(rows)


def is_binary(path):
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_matrix(path, header=False):
    A = read_matrix_bin(path) if is_binary(path) else read_csv(path, header)
    if not np.all(np.isfinite(A)):
        raise InputError(f"{path}: non-finite entries")
    return A


def iter_rows(path, header=False):
    """(row count, iterator over rows) without loading the file; CSV is counted in a first pass."""
    if is_binary(path):
        M = read_matrix_bin(path, mmap=True)
        return M.shape[0], (np.array(M[i], dtype=np.float64) for i in range(M.shape[0]))
    n = sum(1 for _ in _csv_lines(path, header))

    def gen():
        width = None
        for no, line in _csv_lines(path, header):
            row = _parse_csv_line(line, no, path)
            if width is None:
                width = row.size
            elif row.size != width:
                raise InputError(f"{path}:{no}: expected {width} values, got {row.size}")
            yield row
    return n, gen()


class RowHasher:
    """sha256 of the row-major little-endian binary64 bytes, fed one row at a time."""

    def __init__(self):
        self._h = hashlib.sha256()

    def update(self, row):
        self._h.update(np.ascontiguousarray(row, dtype="<f8").tobytes())

    def hexdigest(self):
        return self._h.hexdigest()


def dataset_sha256(A):
    return hashlib.sha256(np.ascontiguousarray(A, dtype="<f8").tobytes()).hexdigest()


def hashed(rows, hasher):
    for row in rows:
        hasher.update(row)
        yield row


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=1) + "\n"


def coreset_to_json(c, cfg, sha):
    meta = dict(c.meta)
    for key, default in (("rounds", 0), ("per_round_sizes", []), ("lambda_per_round", []), ("mode", "offline")):
        meta.setdefault(key, default)
    return dumps({
        "format": CORESET_FORMAT, "dataset_sha256": sha, "p": cfg.p, "k": cfg.k, "eps": cfg.eps,
        "delta": cfg.delta, "seed": cfg.seed, "indices": c.indices, "scales": c.scales, "meta": meta,
    })


def coreset_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"coreset file is not JSON: {exc}") from None
    if doc.get("format") != CORESET_FORMAT:
        raise InputError(f"unsupported coreset format {doc.get('format')!r}")
    c = WeightedCoreset(np.array(doc["indices"], dtype=np.int64), np.array(doc["scales"], dtype=np.float64),
                        float(doc["p"]), doc["dataset_sha256"], meta=doc.get("meta", {}))
    return c, doc
