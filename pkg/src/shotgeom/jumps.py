"""Arrangements of token-disc circles: arcs, crossing points, jump values.

Every circle is cut at its crossings with other circles and with the
boundary of the window fill.  Each arc records the field of all *other*
discs at its midpoint (``f_minus``); that value is constant along the arc,
and the field jumps by the disc amplitude across it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _compiled as cc
from .configuration import MarkedConfiguration
from .errors import DegenerateConfigurationError, InvalidParameterError
from .geometry import LatticeWindow

TANGENCY_TOL = 1e-9
TWO_PI = 2 * math.pi


@dataclass
class JumpStructure:
    """Circle arrangement of a token configuration relative to a window.

    Disc arrays are indexed like the configuration.  Arc arrays have one
    entry per arc; ``theta0 < theta1`` are polar angles on circle
    ``arc_circle``, and ``inside`` tells whether the arc midpoint lies in the
    open fill.  Crossing arrays list every circle-circle intersection point.
    """

    centers: np.ndarray
    radii: np.ndarray
    amplitudes: np.ndarray
    window: LatticeWindow
    u: float
    arc_circle: np.ndarray
    theta0: np.ndarray
    theta1: np.ndarray
    f_minus: np.ndarray
    inside: np.ndarray
    cross_i: np.ndarray
    cross_j: np.ndarray
    cross_pos: np.ndarray
    cross_inside: np.ndarray

    @property
    def arc_length(self) -> np.ndarray:
        return self.radii[self.arc_circle] * (self.theta1 - self.theta0)

    @property
    def arc_midpoint(self) -> np.ndarray:
        return self.point_on_arc(0.5 * (self.theta0 + self.theta1))

    @property
    def arc_amplitude(self) -> np.ndarray:
        return self.amplitudes[self.arc_circle]

    @property
    def f_plus(self) -> np.ndarray:
        return self.f_minus + self.arc_amplitude

    def point_on_arc(self, theta, circle=None) -> np.ndarray:
        c = self.arc_circle if circle is None else circle
        theta = np.asarray(theta, dtype=float)
        return self.centers[c] + self.radii[c][..., None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1)

    def excluded_field(self, pts, circle, other=None) -> np.ndarray:
        """Token field at ``pts`` without the discs ``circle`` (and ``other``)."""
        pts = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 2))
        ex1 = np.broadcast_to(np.asarray(circle, dtype=np.int64), (pts.shape[0],)).copy()
        ex2 = (np.full(pts.shape[0], -1, dtype=np.int64) if other is None else
               np.broadcast_to(np.asarray(other, dtype=np.int64), (pts.shape[0],)).copy())
        if self.centers.shape[0] == 0:
            return np.zeros(pts.shape[0])
        return cc.token_points_excluding(self.centers, self.amplitudes, self.radii,
                                         float(self.radii.max()), pts, ex1, ex2)

    def boundary_arcs(self, u: float | None = None) -> np.ndarray:
        """Mask of arcs across which the indicator of ``{f >= u}`` flips."""
        u = self.u if u is None else u
        L = self.arc_amplitude
        f = self.f_minus
        up = (L > 0) & (f >= u - L) & (f < u)
        down = (L < 0) & (f >= u) & (f < u - L)
        return up | down


def _window_edges(w: LatticeWindow):
    """Boundary of the fill as axis-aligned segments ``(axis, c, lo, hi)``."""
    if w.is_box:
        lo, hi = w.bounds
        return [(0, lo[0], lo[1], hi[1]), (0, hi[0], lo[1], hi[1]),
                (1, lo[1], lo[0], hi[0]), (1, hi[1], lo[0], hi[0])]
    return [(axis, c, float(a[0]), float(b[0])) for axis, c, a, b in w.boundary_faces()]


def _edge_cuts(cx, cy, r, edges, tol):
    """Angles where a circle crosses the window boundary."""
    out = []
    for axis, c, lo, hi in edges:
        along, across = (cy, cx) if axis == 0 else (cx, cy)
        dist = c - across
        if abs(abs(dist) - r) < tol and lo - tol <= along <= hi + tol:
            raise DegenerateConfigurationError("circle tangent to the window boundary")
        if abs(dist) >= r:
            continue
        half = math.sqrt(r * r - dist * dist)
        for s in (along - half, along + half):
            if lo <= s <= hi:
                px, py = (c, s) if axis == 0 else (s, c)
                out.append(math.atan2(py - cy, px - cx) % TWO_PI)
    return out


def build_jump_structure(zeta: MarkedConfiguration, w: LatticeWindow, u: float = 0.0,
                         tol: float = TANGENCY_TOL) -> JumpStructure:
    """Cut every relevant circle into arcs and evaluate the jump data."""
    if w.dim != 2:
        raise InvalidParameterError("jump structures are planar")
    if len(zeta) and zeta.mark_kind != "disc":
        raise InvalidParameterError("jump structures need disc marks")
    C = np.ascontiguousarray(zeta.points) if len(zeta) else np.zeros((0, 2))
    R = zeta.radii.copy() if len(zeta) else np.zeros(0)
    L = zeta.amplitudes.copy() if len(zeta) else np.zeros(0)
    n = C.shape[0]
    cuts = [[] for _ in range(n)]
    ci, cj, cpos = [], [], []

    if n > 1:
        tree = cKDTree(C)
        pairs = tree.query_pairs(2 * float(R.max()) + tol, output_type="ndarray")
        if pairs.size:
            i, j = pairs[:, 0], pairs[:, 1]
            dvec = C[j] - C[i]
            d = np.hypot(dvec[:, 0], dvec[:, 1])
            rs, rd = R[i] + R[j], np.abs(R[i] - R[j])
            bad = (np.abs(d - rs) < tol) | (np.abs(d - rd) < tol)
            if bad.any():
                raise DegenerateConfigurationError("tangent or coincident circles")
            hit = (d > rd) & (d < rs)
            i, j, dvec, d = i[hit], j[hit], dvec[hit], d[hit]
            a = (d * d + R[i] ** 2 - R[j] ** 2) / (2 * d)
            hgt = np.sqrt(np.maximum(R[i] ** 2 - a * a, 0.0))
            ex, ey = dvec[:, 0] / d, dvec[:, 1] / d
            bx, by = C[i, 0] + a * ex, C[i, 1] + a * ey
            for sgn in (1.0, -1.0):
                px, py = bx - sgn * hgt * ey, by + sgn * hgt * ex
                ti = np.arctan2(py - C[i, 1], px - C[i, 0]) % TWO_PI
                tj = np.arctan2(py - C[j, 1], px - C[j, 0]) % TWO_PI
                for k in range(i.size):
                    cuts[i[k]].append(ti[k])
                    cuts[j[k]].append(tj[k])
                ci.append(i)
                cj.append(j)
                cpos.append(np.column_stack([px, py]))

    edges = _window_edges(w)
    lo, hi = w.bounds
    near = np.all((C + R[:, None] >= lo - tol) & (C - R[:, None] <= hi + tol), axis=1) \
        if n else np.zeros(0, dtype=bool)
    arc_c, th0, th1 = [], [], []
    for k in range(n):
        if not near[k]:
            continue
        cuts[k].extend(_edge_cuts(C[k, 0], C[k, 1], R[k], edges, tol))
        if not cuts[k]:
            arc_c.append(k)
            th0.append(0.0)
            th1.append(TWO_PI)
            continue
        t = np.sort(np.asarray(cuts[k]))
        t = t[np.concatenate([[True], np.diff(t) > 1e-13])]
        if t[-1] - t[0] > TWO_PI - 1e-13 and t.size > 1:
            t = t[:-1]
        ends = np.append(t[1:], t[0] + TWO_PI)
        arc_c.extend([k] * t.size)
        th0.extend(t.tolist())
        th1.extend(ends.tolist())

    arc_c = np.asarray(arc_c, dtype=np.int64)
    th0 = np.asarray(th0, dtype=float)
    th1 = np.asarray(th1, dtype=float)
    js = JumpStructure(C, R, L, w, float(u), arc_c, th0, th1,
                       np.zeros(arc_c.size), np.zeros(arc_c.size, dtype=bool),
                       np.concatenate(ci) if ci else np.zeros(0, dtype=np.int64),
                       np.concatenate(cj) if cj else np.zeros(0, dtype=np.int64),
                       np.vstack(cpos) if cpos else np.zeros((0, 2)),
                       np.zeros(0, dtype=bool))
    if arc_c.size:
        mid = js.arc_midpoint
        js.f_minus = js.excluded_field(mid, arc_c)
        js.inside = w.interior_contains(mid)
    if js.cross_pos.shape[0]:
        js.cross_inside = w.interior_contains(js.cross_pos)
    return js
