"""File formats: SPF1 feature archives, CSV emitters, trial/score lists, configs.

SPF1 layout (little-endian)::

    b"SPF1" | u32 T | u32 D | T*D float32, row-major
"""

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import MalformedFile

SPF_MAGIC = b"SPF1"
_SPF_HEADER = struct.Struct("<4sII")


def write_spf(path, matrix):
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError("SPF1 stores 1-D or 2-D arrays")
    with open(path, "wb") as f:
        f.write(_SPF_HEADER.pack(SPF_MAGIC, m.shape[0], m.shape[1]))
        f.write(m.astype("<f4").tobytes(order="C"))


def read_spf(path):
    """Return the archive as a float64 (T, D) array."""
    data = Path(path).read_bytes()
    if len(data) < _SPF_HEADER.size:
        raise MalformedFile(f"{path}: truncated SPF1 header")
    magic, T, D = _SPF_HEADER.unpack_from(data)
    if magic != SPF_MAGIC:
        raise MalformedFile(f"{path}: bad magic {magic!r}")
    body = data[_SPF_HEADER.size:]
    if len(body) != 4 * T * D:
        raise MalformedFile(f"{path}: expected {T}x{D} floats, got {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(T, D).astype(np.float64)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [row for row in r if row]


def write_matrix_csv(path, matrix, index_name="frame"):
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[:, None]
    header = [index_name] + [f"c{j}" for j in range(m.shape[1])]
    write_csv(path, header, ([i] + [repr(float(v)) for v in row] for i, row in enumerate(m)))


def _data_lines(path):
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def read_trials(path):
    """Parse ``enroll_id test_id target|nontarget`` lines into a list of tuples."""
    trials = []
    for lineno, fields in _data_lines(path):
        if len(fields) != 3 or fields[2] not in ("target", "nontarget"):
            raise MalformedFile(f"{path}:{lineno}: expected 'enroll test target|nontarget'")
        trials.append((fields[0], fields[1], fields[2] == "target"))
    return trials


def write_trials(path, trials):
    with open(path, "w") as f:
        for enroll, test, is_target in trials:
            f.write(f"{enroll} {test} {'target' if is_target else 'nontarget'}\n")


def read_scores(path):
    """Parse ``enroll_id test_id score`` lines into a dict keyed by (enroll, test)."""
    scores = {}
    for lineno, fields in _data_lines(path):
        if len(fields) != 3:
            raise MalformedFile(f"{path}:{lineno}: expected 'enroll test score'")
        try:
            scores[(fields[0], fields[1])] = float(fields[2])
        except ValueError:
            raise MalformedFile(f"{path}:{lineno}: score {fields[2]!r} is not a number") from None
    return scores


def write_scores(path, trials, scores):
    with open(path, "w") as f:
        for (enroll, test, _), s in zip(trials, scores):
            f.write(f"{enroll} {test} {float(s)!r}\n")


def read_key_values(path):
    """Parse ``key = value`` lines (``#`` comments) into an ordered dict of strings."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise MalformedFile(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out
