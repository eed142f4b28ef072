"""Finite marked point configurations and their CSV form."""
from __future__ import annotations

import csv
import io
import os

import numpy as np

from .errors import InvalidParameterError

# Payload column names per mark kind.
MARK_COLUMNS = {
    "unit": (),
    "amplitude": ("amplitude",),
    "disc": ("amplitude", "radius"),
}


def _lex_order(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return np.arange(points.shape[0])
    return np.lexsort(points.T[::-1])


def fmt_real(v: float) -> str:
    """Decimal text with 17 significant digits, which round-trips any double."""
    return format(float(v), ".17g")


class MarkedConfiguration:
    """Points in R^d with one mark vector each.

    Points are stored in lexicographic order of their coordinates; this
    order is also the accumulation order of every field sum, which makes
    field values independent of how a configuration was assembled.
    """

    __slots__ = ("points", "marks", "mark_kind")

    def __init__(self, points, marks=None, mark_kind: str = "unit"):
        if mark_kind not in MARK_COLUMNS:
            raise InvalidParameterError(f"unknown mark kind {mark_kind!r}")
        points = np.array(points, dtype=float)
        if points.ndim != 2:
            raise InvalidParameterError("points must be an (n, d) array")
        m = len(MARK_COLUMNS[mark_kind])
        if marks is None:
            if m:
                raise InvalidParameterError(f"{mark_kind} marks need a payload")
            marks = np.zeros((points.shape[0], 0))
        marks = np.array(marks, dtype=float).reshape(points.shape[0], m)
        order = _lex_order(points)
        points = np.ascontiguousarray(points[order])
        marks = np.ascontiguousarray(marks[order])
        points.setflags(write=False)
        marks.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "mark_kind", mark_kind)

    def __setattr__(self, name, value):
        raise AttributeError("MarkedConfiguration is immutable")

    @classmethod
    def empty(cls, dim: int, mark_kind: str = "unit") -> "MarkedConfiguration":
        m = len(MARK_COLUMNS[mark_kind])
        return cls(np.zeros((0, dim)), np.zeros((0, m)), mark_kind)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __eq__(self, other) -> bool:
        return (isinstance(other, MarkedConfiguration)
                and self.mark_kind == other.mark_kind
                and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.marks, other.marks))

    def __repr__(self) -> str:
        return f"MarkedConfiguration(n={len(self)}, dim={self.dim}, marks={self.mark_kind})"

    def subset(self, keep) -> "MarkedConfiguration":
        keep = np.asarray(keep)
        return MarkedConfiguration(self.points[keep], self.marks[keep], self.mark_kind)

    def translate(self, v) -> "MarkedConfiguration":
        """The configuration ``zeta + v``."""
        v = np.asarray(v, dtype=float).reshape(1, self.dim)
        return MarkedConfiguration(self.points + v, self.marks, self.mark_kind)

    # Disc marks are (amplitude, radius).
    @property
    def amplitudes(self) -> np.ndarray:
        if self.mark_kind == "unit":
            return np.ones(len(self))
        return self.marks[:, 0]

    @property
    def radii(self) -> np.ndarray:
        if self.mark_kind != "disc":
            raise InvalidParameterError("only disc marks carry radii")
        return self.marks[:, 1]

    def to_csv(self, path_or_buf=None) -> str | None:
        """Write ``x1..xd,mark_kind,<payload>`` rows; returns text if no target."""
        header = [f"x{i + 1}" for i in range(self.dim)] + ["mark_kind"]
        header += list(MARK_COLUMNS[self.mark_kind])
        buf = io.StringIO(newline="")
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow(header)
        for p, m in zip(self.points, self.marks):
            wr.writerow([fmt_real(v) for v in p] + [self.mark_kind] + [fmt_real(v) for v in m])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if isinstance(path_or_buf, (str, os.PathLike)):
            with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            path_or_buf.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_buf) -> "MarkedConfiguration":
        if isinstance(path_or_buf, (str, os.PathLike)):
            with open(path_or_buf, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
        else:
            rows = list(csv.reader(path_or_buf))
        header = rows[0]
        k = header.index("mark_kind")
        payload = tuple(header[k + 1:])
        kinds = {r[k] for r in rows[1:]}
        if len(kinds) > 1:
            raise InvalidParameterError("mixed mark kinds in one file")
        kind = kinds.pop() if kinds else next(
            name for name, cols in MARK_COLUMNS.items() if cols == payload)
        if MARK_COLUMNS[kind] != payload:
            raise InvalidParameterError(f"payload columns {payload} do not match {kind!r}")
        pts = np.array([[float(v) for v in r[:k]] for r in rows[1:]]).reshape(-1, k)
        mk = np.array([[float(v) for v in r[k + 1:]] for r in rows[1:]]).reshape(-1, len(payload))
        return cls(pts, mk, kind)


def superpose(a: MarkedConfiguration, b: MarkedConfiguration) -> MarkedConfiguration:
    """Multiset union of two configurations."""
    if a.dim != b.dim:
        raise InvalidParameterError("cannot superpose configurations of different dimension")
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    if a.mark_kind != b.mark_kind:
        raise InvalidParameterError("cannot superpose configurations with different mark kinds")
    return MarkedConfiguration(np.vstack([a.points, b.points]),
                               np.vstack([a.marks, b.marks]), a.mark_kind)
