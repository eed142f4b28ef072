"""Nearest-neighbour graphs on Poisson points.

Builds the k-NN graph with the tree search, checks it against the brute
force ranking, then shows how ties between equally distant points are
settled.

    python demos/nearest_neighbours.py
"""
import numpy as np

from shotgeom import Region, SeedStream, make_cube_window, sample_poisson
from shotgeom.neighbors import nn_length_functional, nn_structure

w = make_cube_window(20, 2)
zeta = sample_poisson(Region.cells(w), seed=SeedStream(5))
for k in (1, 2, 3):
    ns = nn_structure(zeta, k)
    same = np.array_equal(ns.nn, nn_structure(zeta, k, "brute").nn)
    length = nn_length_functional(zeta, w, k)
    print(f"k = {k}: {len(ns.edges())} edges, length per point {length / len(zeta):.4f}, "
          f"brute force agrees: {same}")

# four corners of a unit square around a centre point: the first three
# neighbours of the centre are all at distance sqrt(1/2), so the order
# falls back to the coordinates of the candidates
P = np.array([[0.0, 0.0], [0.5, 0.5], [-0.5, 0.5], [0.5, -0.5], [-0.5, -0.5]])
ns = nn_structure(P, 3)
print("\nneighbours of the centre:", P[ns.nn[0]].tolist())
