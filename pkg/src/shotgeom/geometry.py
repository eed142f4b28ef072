"""Lattice windows, their continuous fills, and spatial regions.

A window is a finite set of integer cells ``W``.  Its fill is the union of
half-open unit cubes ``k + [-1/2, 1/2)^d`` over ``k`` in ``W``, so the
fill tiles without overlap and has volume ``|W|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .configuration import MarkedConfiguration
from .errors import InvalidParameterError

# Offset used to probe the open fill around a point.
_INTERIOR_PROBE = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class LatticeWindow:
    """A finite set of lattice cells together with its fill.

    Cells are kept sorted lexicographically and the object is immutable.
    """

    __slots__ = ("dim", "cells", "_lo", "_mask", "_is_box")

    def __init__(self, cells, dim: int | None = None):
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim == 1:
            cells = cells.reshape(-1, 1) if dim in (None, 1) else cells.reshape(1, -1)
        if cells.shape[0] == 0:
            raise InvalidParameterError("a window needs at least one cell")
        if dim is not None and cells.shape[1] != dim:
            raise InvalidParameterError("cell coordinates do not match dim")
        cells = np.unique(cells, axis=0)
        object.__setattr__(self, "dim", int(cells.shape[1]))
        object.__setattr__(self, "cells", _frozen(cells, np.int64))
        lo = cells.min(axis=0)
        hi = cells.max(axis=0)
        mask = np.zeros(tuple(hi - lo + 1), dtype=bool)
        mask[tuple((cells - lo).T)] = True
        mask.setflags(write=False)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_mask", mask)
        object.__setattr__(self, "_is_box", bool(mask.all()))

    def __setattr__(self, name, value):
        raise AttributeError("LatticeWindow is immutable")

    def __len__(self) -> int:
        return int(self.cells.shape[0])

    def __eq__(self, other) -> bool:
        return (isinstance(other, LatticeWindow) and other.dim == self.dim
                and np.array_equal(other.cells, self.cells))

    def __hash__(self) -> int:
        return hash((self.dim, self.cells.tobytes()))

    def __repr__(self) -> str:
        if self._is_box:
            lo, hi = self.bounds
            return f"LatticeWindow(box {lo.tolist()}..{hi.tolist()})"
        return f"LatticeWindow(dim={self.dim}, |W|={len(self)})"

    @property
    def volume(self) -> float:
        """Volume of the fill, which is the cell count."""
        return float(len(self))

    @property
    def is_box(self) -> bool:
        return self._is_box

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Corners of the smallest box containing the fill."""
        lo = self._lo - 0.5
        hi = self._lo + np.array(self._mask.shape) - 0.5
        return lo.astype(float), hi.astype(float)

    @property
    def mask(self) -> np.ndarray:
        """Boolean cell mask over the bounding box, first axis = x1."""
        return self._mask

    def has_cells(self, k) -> np.ndarray:
        """Vectorized membership test for integer cells."""
        k = np.asarray(k, dtype=np.int64).reshape(-1, self.dim)
        idx = k - self._lo
        ok = np.all((idx >= 0) & (idx < np.array(self._mask.shape)), axis=1)
        out = np.zeros(k.shape[0], dtype=bool)
        out[ok] = self._mask[tuple(idx[ok].T)]
        return out

    def cell_of(self, x) -> np.ndarray:
        """Cell index of each point under the half-open convention."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.floor(x + 0.5).astype(np.int64)

    def fill_contains(self, x) -> np.ndarray:
        return self.has_cells(self.cell_of(x))

    def interior_contains(self, x) -> np.ndarray:
        """Membership in the open fill int(W~).

        A point counts as interior when all ``2^d`` probes at L-infinity
        distance 1e-12 lie in the fill.
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        if self._is_box:
            lo, hi = self.bounds
            return np.all((x > lo) & (x < hi), axis=1)
        ok = np.ones(x.shape[0], dtype=bool)
        for signs in np.ndindex(*(2,) * self.dim):
            s = (2 * np.array(signs) - 1) * _INTERIOR_PROBE
            ok &= self.fill_contains(x + s)
        return ok

    def translate(self, k) -> "LatticeWindow":
        return LatticeWindow(self.cells + np.asarray(k, dtype=np.int64), self.dim)

    def boundary_faces(self) -> list[tuple[int, float, np.ndarray, np.ndarray]]:
        """Unit faces of the fill's boundary.

        Each face is ``(axis, coordinate, lo, hi)``: it lies in the
        hyperplane ``x[axis] = coordinate`` and spans the box ``[lo, hi]``
        in the remaining coordinates.
        """
        faces = []
        for axis in range(self.dim):
            e = np.zeros(self.dim, dtype=np.int64)
            e[axis] = 1
            for sgn in (-1, 1):
                open_side = ~self.has_cells(self.cells + sgn * e)
                for c in self.cells[open_side]:
                    rest = np.delete(c, axis).astype(float)
                    faces.append((axis, c[axis] + 0.5 * sgn, rest - 0.5, rest + 0.5))
        return faces


def make_cube_window(a: float, d: int) -> LatticeWindow:
    """The window ``Q_a``: integer points of ``[-a/2, a/2)^d``."""
    if not (d >= 1 and int(d) == d):
        raise InvalidParameterError(f"dimension must be a positive integer, got {d}")
    if not (a >= 1):
        raise InvalidParameterError(f"side must be at least 1, got {a}")
    lo = math.ceil(-a / 2)
    hi = math.ceil(a / 2) - 1
    axis = np.arange(lo, hi + 1)
    grids = np.meshgrid(*([axis] * int(d)), indexing="ij")
    cells = np.stack([g.ravel() for g in grids], axis=1)
    return LatticeWindow(cells, int(d))


def lattice_boundary(w: LatticeWindow) -> np.ndarray:
    """Cells of ``w`` that have an axis neighbour outside ``w``."""
    on = np.zeros(len(w), dtype=bool)
    for axis in range(w.dim):
        e = np.zeros(w.dim, dtype=np.int64)
        e[axis] = 1
        on |= ~w.has_cells(w.cells + e)
        on |= ~w.has_cells(w.cells - e)
    return w.cells[on]


@dataclass(frozen=True)
class Region:
    """A subset of R^d with a membership test.

    Kinds:

    ``box``
        half-open box ``[lo, hi)``
    ``ball``
        closed Euclidean ball of ``radius`` around ``center``
    ``shell``
        ``[-b/2, b/2)^d`` minus ``[-a/2, a/2)^d`` (``a <= b``)
    ``cells``
        fill of a lattice window
    ``complement``
        everything outside ``parts[0]``
    ``intersection``
        points lying in all ``parts``
    """

    kind: str
    dim: int
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0
    window: LatticeWindow | None = None
    parts: tuple = ()

    @staticmethod
    def box(lo: Sequence[float], hi: Sequence[float]) -> "Region":
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if len(lo) != len(hi) or not lo:
            raise InvalidParameterError("box corners must have equal, positive length")
        if any(h < l for l, h in zip(lo, hi)):
            raise InvalidParameterError("box upper corner below lower corner")
        return Region("box", len(lo), lo=lo, hi=hi)

    @staticmethod
    def cube(a: float, d: int) -> "Region":
        """The half-open cube ``[-a/2, a/2)^d``."""
        return Region.box([-a / 2] * d, [a / 2] * d)

    @staticmethod
    def ball(center: Sequence[float], radius: float) -> "Region":
        if radius < 0:
            raise InvalidParameterError("ball radius must be non-negative")
        c = tuple(float(v) for v in center)
        return Region("ball", len(c), center=c, radius=float(radius))

    @staticmethod
    def shell(a: float, b: float, d: int) -> "Region":
        if not 0 <= a <= b:
            raise InvalidParameterError("shell needs 0 <= a <= b")
        return Region("shell", d, lo=(a,), hi=(b,))

    @staticmethod
    def cells(w: LatticeWindow) -> "Region":
        return Region("cells", w.dim, window=w)

    def complement(self) -> "Region":
        return Region("complement", self.dim, parts=(self,))

    def __and__(self, other: "Region") -> "Region":
        if other.dim != self.dim:
            raise InvalidParameterError("region dimensions differ")
        return Region("intersection", self.dim, parts=(self, other))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        if self.kind == "box":
            return np.all((x >= np.array(self.lo)) & (x < np.array(self.hi)), axis=1)
        if self.kind == "ball":
            d2 = np.sum((x - np.array(self.center)) ** 2, axis=1)
            return d2 <= self.radius ** 2
        if self.kind == "shell":
            a, b = self.lo[0], self.hi[0]
            in_b = np.all((x >= -b / 2) & (x < b / 2), axis=1)
            in_a = np.all((x >= -a / 2) & (x < a / 2), axis=1)
            return in_b & ~in_a
        if self.kind == "cells":
            return self.window.fill_contains(x)
        if self.kind == "complement":
            return ~self.parts[0].contains(x)
        if self.kind == "intersection":
            out = np.ones(x.shape[0], dtype=bool)
            for p in self.parts:
                out &= p.contains(x)
            return out
        raise InvalidParameterError(f"unknown region kind {self.kind!r}")

    @property
    def volume(self) -> float | None:
        """Closed-form volume, ``inf`` if unbounded, ``None`` if unknown."""
        if self.kind == "box":
            return float(np.prod(np.subtract(self.hi, self.lo)))
        if self.kind == "ball":
            d = self.dim
            return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius ** d
        if self.kind == "shell":
            return self.hi[0] ** self.dim - self.lo[0] ** self.dim
        if self.kind == "cells":
            return self.window.volume
        if self.kind == "complement":
            return math.inf
        if self.kind == "intersection":
            boxes = [p for p in self.parts if p.kind == "box"]
            if len(boxes) == len(self.parts):
                lo = np.max([b.lo for b in boxes], axis=0)
                hi = np.min([b.hi for b in boxes], axis=0)
                return float(np.prod(np.clip(hi - lo, 0, None)))
            if self.bounding_box() is None:
                return math.inf
        return None

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """A finite box containing the region, or ``None``."""
        if self.kind == "box":
            return np.array(self.lo), np.array(self.hi)
        if self.kind == "ball":
            c = np.array(self.center)
            return c - self.radius, c + self.radius
        if self.kind == "shell":
            b = self.hi[0]
            return np.full(self.dim, -b / 2), np.full(self.dim, b / 2)
        if self.kind == "cells":
            return self.window.bounds
        if self.kind == "complement":
            return None
        if self.kind == "intersection":
            boxes = [p.bounding_box() for p in self.parts]
            boxes = [b for b in boxes if b is not None]
            if not boxes:
                return None
            lo = np.max([b[0] for b in boxes], axis=0)
            hi = np.min([b[1] for b in boxes], axis=0)
            return lo, np.maximum(hi, lo)
        return None


def padded_box(w: LatticeWindow, pad: float) -> Region:
    """Bounding box of the fill grown by ``pad`` on every side."""
    lo, hi = w.bounds
    return Region.box(lo - pad, hi + pad)


def restrict(zeta: MarkedConfiguration, r: Region) -> MarkedConfiguration:
    """Points of ``zeta`` whose location lies in ``r``, marks unchanged."""
    if len(zeta) == 0:
        return zeta
    if zeta.dim != r.dim:
        raise InvalidParameterError("region and configuration dimensions differ")
    return zeta.subset(r.contains(zeta.points))
