"""Nearest-neighbour structures with lexicographic tie-breaking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .configuration import MarkedConfiguration
from .errors import InvalidParameterError
from .geometry import LatticeWindow, Region, restrict


def _sq_dist(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = P - x
    return np.sum(d * d, axis=1)


def _ranked(P: np.ndarray, x: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """Candidates ordered by distance to ``x``, ties by coordinates."""
    d2 = _sq_dist(P[cand], x)
    keys = [P[cand, k] for k in range(P.shape[1] - 1, -1, -1)] + [d2]
    return cand[np.lexsort(keys)]


@dataclass
class NeighborStructure:
    """``nn[i]`` lists the ``k`` nearest neighbours of point ``i`` in order;
    ``sym[i]`` is the sorted symmetric neighbour set (``i`` excluded)."""

    k: int
    nn: np.ndarray
    sym: list

    def edges(self) -> np.ndarray:
        """Undirected edges ``(i, j)`` with ``i < j``."""
        n = self.nn.shape[0]
        a = np.repeat(np.arange(n), self.k)
        b = self.nn.ravel()
        e = np.column_stack([np.minimum(a, b), np.maximum(a, b)])
        return np.unique(e, axis=0)


def _symmetric(nn: np.ndarray) -> list:
    n = nn.shape[0]
    sets = [set(row.tolist()) for row in nn]
    for i in range(n):
        for j in nn[i]:
            sets[j].add(i)
    return [np.array(sorted(s), dtype=np.int64) for s in sets]


def nn_structure(zeta: MarkedConfiguration | np.ndarray, k: int,
                 method: str = "tree") -> NeighborStructure:
    """Recursive ``k`` nearest neighbours of every point.

    ``NN_1(x)`` is the closest other point; ``NN_i(x)`` is the closest
    point once ``NN_1..NN_{i-1}`` are removed.  Equal distances are broken
    by the lexicographic order of the candidates' coordinates.
    ``method='brute'`` ranks all pairs; ``'tree'`` ranks only the
    candidates a k-d tree returns within the k-th distance.
    """
    P = zeta.points if isinstance(zeta, MarkedConfiguration) else np.asarray(zeta, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    n = P.shape[0]
    if k < 1:
        raise InvalidParameterError("k must be at least 1")
    if n <= k:
        raise InvalidParameterError(f"need more than k={k} points, got {n}")
    nn = np.empty((n, k), dtype=np.int64)
    if method == "brute":
        idx = np.arange(n)
        for i in range(n):
            nn[i] = _ranked(P, P[i], idx[idx != i])[:k]
    elif method == "tree":
        tree = cKDTree(P)
        dk, _ = tree.query(P, k + 1)
        radius = dk[:, -1] * (1 + 1e-9) + 1e-300
        cands = tree.query_ball_point(P, radius)
        for i in range(n):
            c = np.asarray(cands[i], dtype=np.int64)
            nn[i] = _ranked(P, P[i], c[c != i])[:k]
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    return NeighborStructure(k, nn, _symmetric(nn))


def nn_length_functional(zeta: MarkedConfiguration, w: LatticeWindow, k: int) -> float:
    """Total length of the undirected k-NN graph of ``zeta`` restricted to the fill.

    Computed as the sum over points of half the distances to their
    symmetric neighbours; configurations with at most ``k`` points give 0.
    """
    z = restrict(zeta, Region.cells(w)) if len(zeta) else zeta
    if len(z) <= k:
        return 0.0
    ns = nn_structure(z, k)
    P = z.points
    total = 0.0
    for i in range(len(z)):
        total += 0.5 * float(np.sum(np.sqrt(_sq_dist(P[ns.sym[i]], P[i]))))
    return total


def nn_score(k: int):
    """The k-NN score: half the summed distances from the origin atom to its
    symmetric neighbours; zero when there are at most ``k`` atoms."""

    def score(mark, cfg: MarkedConfiguration) -> float:
        if len(cfg) <= k:
            return 0.0
        P = cfg.points
        at0 = np.nonzero(np.all(P == 0.0, axis=1))[0]
        if at0.size != 1:
            raise InvalidParameterError("score needs exactly one atom at the origin")
        i = int(at0[0])
        ns = nn_structure(cfg, k)
        return 0.5 * float(np.sum(np.sqrt(_sq_dist(P[ns.sym[i]], P[i]))))

    return score
