"""File formats: CSV matrices, stable JSON, PGM/PPM pattern heatmaps."""
from __future__ import annotations

import hashlib
import math
from pathlib import Path

import numpy as np

__all__ = [
    "CSVParseError",
    "read_matrix_csv",
    "write_matrix_csv",
    "dumps_stable",
    "write_json",
    "pattern_to_gray",
    "write_pgm",
    "write_ppm",
    "file_sha256",
    "PALETTE",
]


class CSVParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = str(path), line


def read_matrix_csv(path) -> np.ndarray:
    """Row-major decimal CSV without header.  Blank lines are skipped."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = [float(tok) for tok in line.strip().split(",")]
            except ValueError:
                raise CSVParseError(path, lineno, f"non-numeric entry in {line.strip()!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CSVParseError(path, lineno, f"expected {width} columns, found {len(row)}")
            rows.append(row)
    if not rows:
        raise CSVParseError(path, 0, "empty matrix")
    return np.array(rows)


def write_matrix_csv(path, W) -> None:
    W = np.atleast_2d(np.asarray(W, float))
    with open(path, "w") as fh:
        for row in W:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        return f"{x:.17g}" if x != int(x) or abs(x) >= 1e16 else f"{x:.1f}"
    if isinstance(obj, str):
        import json

        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_stable(obj, indent: int = 2) -> str:
    """JSON with insertion-ordered keys and floats printed to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_stable(obj), encoding="utf-8")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def pattern_to_gray(pattern) -> np.ndarray:
    """Gray level per cell: classes ranked by value, smallest value darkest (0), largest 255."""
    ranks = pattern.value_ranks()[pattern.labels]
    m = max(pattern.num_classes - 1, 1)
    return np.round(ranks * 255.0 / m).astype(np.uint8)


def _upscale(img: np.ndarray, scale: int) -> np.ndarray:
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def write_pgm(path, pattern, scale: int = 16) -> None:
    """Binary PGM (P5), one flat gray block per cell."""
    img = _upscale(pattern_to_gray(pattern), scale)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


PALETTE = np.array([
    [31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40],
    [148, 103, 189], [140, 86, 75], [227, 119, 194], [127, 127, 127],
    [188, 189, 34], [23, 190, 207], [0, 0, 0], [255, 255, 255],
], dtype=np.uint8)


def write_ppm(path, pattern, scale: int = 16) -> None:
    """Binary PPM (P6); class value rank indexes the 12-colour palette (cyclically)."""
    ranks = pattern.value_ranks()[pattern.labels] % len(PALETTE)
    img = _upscale(PALETTE[ranks], scale)
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pnm(path) -> np.ndarray:
    """Minimal reader for the P5/P6 files written above (used by tests)."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    magic, (w, h), maxval = parts[0], map(int, parts[1].split()), int(parts[2])
    assert maxval == 255
    arr = np.frombuffer(parts[3], dtype=np.uint8)
    return arr.reshape(h, w, 3) if magic == b"P6" else arr.reshape(h, w)
