"""Shot-noise field evaluation on points and on lattice-aligned grids."""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass

import numpy as np

from . import _compiled as cc
from .configuration import MarkedConfiguration, fmt_real
from .errors import InvalidParameterError, SingularEvaluationError
from .geometry import LatticeWindow
from .kernels import RadialKernel, TokenKernel

# Per-axis offset added to every grid node.  Grid nodes otherwise sit on
# dyadic coordinates where atoms placed by hand (or by a coarse grid) would
# coincide with them exactly.
GRID_JITTER = (3.1e-10, 7.3e-10, 5.3e-10)

GRID_MAGIC = b"SNFG"
GRID_VERSION = 1


def _query(y, dim):
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    Q = np.ascontiguousarray(y.reshape(-1, dim))
    return Q, single


def _check_dim(zeta, kernel):
    if len(zeta) and zeta.dim != kernel.dim:
        raise InvalidParameterError(f"configuration has dim {zeta.dim}, kernel {kernel.dim}")


def eval_field(zeta: MarkedConfiguration, kernel: RadialKernel | TokenKernel, y):
    """``f(y) = sum of g_m(y - x)`` over the atoms of ``zeta``.

    ``y`` may be one point or an ``(m, d)`` array.  Radial kernels raise
    ``SingularEvaluationError`` at distance below 1e-12 from an atom.
    """
    _check_dim(zeta, kernel)
    Q, single = _query(y, kernel.dim)
    if len(zeta) == 0:
        out = np.zeros(Q.shape[0])
    elif isinstance(kernel, TokenKernel):
        if zeta.mark_kind != "disc":
            raise InvalidParameterError("token kernel needs disc marks")
        rad = zeta.radii
        out = cc.token_points(zeta.points, zeta.amplitudes, rad, float(rad.max()), Q)
    else:
        out, sing = cc.radial_points(zeta.points, zeta.amplitudes, Q, *kernel.params())
        if sing.any():
            raise SingularEvaluationError(
                f"{int(sing.sum())} query point(s) within 1e-12 of an atom")
    return float(out[0]) if single else out


def eval_gradient(zeta: MarkedConfiguration, kernel: RadialKernel, y):
    """Gradient of a radial shot-noise field."""
    if isinstance(kernel, TokenKernel):
        raise InvalidParameterError("token fields have no gradient density")
    _check_dim(zeta, kernel)
    Q, single = _query(y, kernel.dim)
    if len(zeta) == 0:
        out = np.zeros(Q.shape)
    else:
        out, sing = cc.radial_grad_points(zeta.points, zeta.amplitudes, Q, *kernel.params())
        if sing.any():
            raise SingularEvaluationError(
                f"{int(sing.sum())} query point(s) within 1e-12 of an atom")
    return out[0] if single else out


def grid_steps(h: float) -> int:
    """Number of nodes per unit length; ``h`` must divide 1."""
    if not h > 0:
        raise InvalidParameterError("grid spacing must be positive")
    m = round(1.0 / h)
    if m < 1 or abs(m * h - 1.0) > 1e-12:
        raise InvalidParameterError(f"grid spacing {h} does not divide 1")
    return int(m)


@dataclass
class FieldGrid:
    """Field values at the centres of an ``h``-grid covering a window fill.

    The array spans the bounding box of the fill; ``mask`` marks nodes that
    lie in the fill.  Node ``(i1, .., id)`` sits at
    ``origin + (i + 1/2) h + jitter``.  With ``supersample > 1`` (token
    fields only) each node holds the average over ``supersample^d`` sample
    points of its cell instead of the centre value.
    """

    window: LatticeWindow
    h: float
    origin: np.ndarray
    values: np.ndarray
    mask: np.ndarray
    gradient: np.ndarray | None = None
    supersample: int = 1
    jitter: tuple = ()

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def axes(self, jittered: bool = True) -> list[np.ndarray]:
        out = []
        for k, n in enumerate(self.values.shape):
            o = self.origin[k] + (self.jitter[k] if jittered and self.jitter else 0.0)
            a = o + (np.arange(n) + 0.5) * self.h
            out.append(a)
        return out

    def node_coords(self) -> np.ndarray:
        """All node coordinates as an ``(N, d)`` array in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_bytes(self) -> bytes:
        """Binary layout: magic, version, d, extents, spacing, origin, values.

        Integers are little-endian uint32 (magic, version, d) and uint64
        (extents); reals are little-endian float64; values are row-major.
        """
        d = self.dim
        head = GRID_MAGIC + struct.pack("<II", GRID_VERSION, d)
        head += struct.pack(f"<{d}Q", *self.values.shape)
        head += struct.pack("<d", self.h)
        head += struct.pack(f"<{d}d", *self.origin)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes(order="C")

    @staticmethod
    def read_bytes(buf: bytes) -> tuple[float, np.ndarray, np.ndarray]:
        """Inverse of ``to_bytes``: returns ``(h, origin, values)``."""
        if buf[:4] != GRID_MAGIC:
            raise InvalidParameterError("not a field grid file")
        version, d = struct.unpack_from("<II", buf, 4)
        if version != GRID_VERSION:
            raise InvalidParameterError(f"unsupported grid version {version}")
        off = 12
        shape = struct.unpack_from(f"<{d}Q", buf, off)
        off += 8 * d
        (h,) = struct.unpack_from("<d", buf, off)
        off += 8
        origin = np.array(struct.unpack_from(f"<{d}d", buf, off))
        off += 8 * d
        vals = np.frombuffer(buf, dtype="<f8", offset=off).reshape(shape).copy()
        return h, origin, vals

    def to_csv(self) -> str:
        """``x1..xd,value,in_window`` rows; meant for small grids."""
        buf = io.StringIO(newline="")
        wr = csv.writer(buf, lineterminator="\r\n")
        wr.writerow([f"x{k + 1}" for k in range(self.dim)] + ["value", "in_window"])
        xs = self.node_coords()
        for x, v, m in zip(xs, self.values.ravel(), self.mask.ravel()):
            wr.writerow([fmt_real(c) for c in x] + [fmt_real(v), int(m)])
        return buf.getvalue()


def _node_mask(w: LatticeWindow, steps: int) -> np.ndarray:
    m = w.mask
    for axis in range(w.dim):
        m = np.repeat(m, steps, axis=axis)
    return m


def build_grid(zeta: MarkedConfiguration, kernel: RadialKernel | TokenKernel,
               w: LatticeWindow, h: float, supersample: int = 1,
               gradient: bool = False) -> FieldGrid:
    """Sample the field on the ``h``-grid of the window's bounding box."""
    steps = grid_steps(h)
    _check_dim(zeta, kernel)
    if w.dim != kernel.dim:
        raise InvalidParameterError("window and kernel dimensions differ")
    if supersample != 1 and not isinstance(kernel, TokenKernel):
        raise InvalidParameterError("supersampling is only offered for token fields")
    if gradient and isinstance(kernel, TokenKernel):
        raise InvalidParameterError("token fields have no gradient density")
    lo, hi = w.bounds
    shape = tuple(int(round((b - a) * steps)) for a, b in zip(lo, hi))
    jit = tuple(GRID_JITTER[k % len(GRID_JITTER)] for k in range(w.dim))
    grid = FieldGrid(w, h, lo.copy(), np.zeros(shape), _node_mask(w, steps),
                     None, int(supersample), jit)
    if len(zeta) == 0:
        if gradient:
            grid.gradient = np.zeros(shape + (w.dim,))
        return grid
    amp = zeta.amplitudes
    if isinstance(kernel, TokenKernel):
        if zeta.mark_kind != "disc":
            raise InvalidParameterError("token kernel needs disc marks")
        x0, y0 = lo[0] + jit[0], lo[1] + jit[1]
        grid.values = cc.token_grid(zeta.points, amp, zeta.radii, x0, y0, h,
                                    shape[0], shape[1], int(supersample))
        return grid
    if w.dim == 2:
        x0, y0 = lo[0] + jit[0], lo[1] + jit[1]
        if gradient:
            v, gx, gy, sing = cc.radial_grid_valgrad(zeta.points, amp, x0, y0, h,
                                                     shape[0], shape[1], *kernel.params())
            if sing.any():
                raise SingularEvaluationError("grid node within 1e-12 of an atom")
            grid.values = v
            grid.gradient = np.stack([gx, gy], axis=-1)
        else:
            v, nsing = cc.radial_grid(zeta.points, amp, x0, y0, h, shape[0], shape[1],
                                      *kernel.params())
            if nsing:
                raise SingularEvaluationError("grid node within 1e-12 of an atom")
            grid.values = v
        return grid
    nodes = grid.node_coords()
    grid.values = np.asarray(eval_field(zeta, kernel, nodes)).reshape(shape)
    if gradient:
        grid.gradient = np.asarray(eval_gradient(zeta, kernel, nodes)).reshape(shape + (w.dim,))
    return grid
