"""Grid-based level-set geometry: contour length and Euler characteristic."""
from __future__ import annotations

import numpy as np


def marching_squares_segments(values: np.ndarray, u: float, xs=None, ys=None,
                              mask: np.ndarray | None = None) -> np.ndarray:
    """Segments of the level-``u`` isoline of a 2-d node array.

    ``values[i, j]`` sits at ``(xs[i], ys[j])``; crossings are placed by
    linear interpolation along cell edges.  A node is inside when its value
    is ``>= u``.  Saddle cells are resolved with the mean of the four
    corners.  Cells with a corner outside ``mask`` are skipped.

    Returns an ``(m, 2, 2)`` array of segment end points.
    """
    v = np.asarray(values, dtype=float)
    nx, ny = v.shape
    xs = np.arange(nx, dtype=float) if xs is None else np.asarray(xs, dtype=float)
    ys = np.arange(ny, dtype=float) if ys is None else np.asarray(ys, dtype=float)
    if nx < 2 or ny < 2:
        return np.zeros((0, 2, 2))
    v00, v10 = v[:-1, :-1], v[1:, :-1]
    v11, v01 = v[1:, 1:], v[:-1, 1:]
    b00, b10, b11, b01 = v00 >= u, v10 >= u, v11 >= u, v01 >= u
    crossed = np.stack([b00 != b10, b10 != b11, b01 != b11, b00 != b01], axis=-1)
    live = crossed.any(axis=-1)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        live &= m[:-1, :-1] & m[1:, :-1] & m[1:, 1:] & m[:-1, 1:]
    ii, jj = np.nonzero(live)
    if ii.size == 0:
        return np.zeros((0, 2, 2))
    a00, a10, a11, a01 = v00[ii, jj], v10[ii, jj], v11[ii, jj], v01[ii, jj]
    x0, x1 = xs[ii], xs[ii + 1]
    y0, y1 = ys[jj], ys[jj + 1]

    def lerp(p, q, vp, vq):
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (u - vp) / (vq - vp)
        return p + np.nan_to_num(t) * (q - p)

    # crossing points on edges: bottom, right, top, left
    P = np.empty((ii.size, 4, 2))
    P[:, 0, 0], P[:, 0, 1] = lerp(x0, x1, a00, a10), y0
    P[:, 1, 0], P[:, 1, 1] = x1, lerp(y0, y1, a10, a11)
    P[:, 2, 0], P[:, 2, 1] = lerp(x0, x1, a01, a11), y1
    P[:, 3, 0], P[:, 3, 1] = x0, lerp(y0, y1, a00, a01)
    cr = crossed[ii, jj]
    n_cr = cr.sum(axis=1)

    two = n_cr == 2
    segs = [P[two][cr[two]].reshape(-1, 2, 2)]
    four = n_cr == 4
    if four.any():
        Q = P[four]
        centre_in = 0.25 * (a00[four] + a10[four] + a11[four] + a01[four]) >= u
        pair_a = (b00[ii, jj][four] == centre_in)[:, None, None]
        s1 = np.where(pair_a, Q[:, [0, 1]], Q[:, [3, 0]])
        s2 = np.where(pair_a, Q[:, [2, 3]], Q[:, [1, 2]])
        segs += [s1, s2]
    return np.concatenate(segs, axis=0)


def contour_length(values, u, xs=None, ys=None, mask=None) -> float:
    s = marching_squares_segments(values, u, xs, ys, mask)
    if s.shape[0] == 0:
        return 0.0
    d = s[:, 1] - s[:, 0]
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def euler_characteristic_2d(binary: np.ndarray) -> int:
    """Euler characteristic of the union of closed pixels marked ``True``.

    Counts the vertices, edges and faces of the cubical complex.
    """
    b = np.pad(np.asarray(binary, dtype=bool), 1)
    faces = int(b.sum())
    verts = int((b[:-1, :-1] | b[1:, :-1] | b[:-1, 1:] | b[1:, 1:]).sum())
    edges = int((b[:-1, 1:-1] | b[1:, 1:-1]).sum() + (b[1:-1, :-1] | b[1:-1, 1:]).sum())
    return verts - edges + faces
