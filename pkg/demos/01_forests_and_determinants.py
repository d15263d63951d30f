"""Forests, masses and determinants.

A rooted spanning forest picks at most one outgoing edge per vertex, with
no cycles; rootless configurations are weighted by edge conductances and
each root by its vertex mass.  The determinant of the massive Laplacian
(graph Laplacian plus masses on the diagonal) equals the weighted count of
all forests, and minors of the transfer current operator give exact edge
probabilities.  Wilson's algorithm run with a killed walk samples from the
same measure.
"""

from fractions import Fraction

from massiveforests.graphs import (
    enumerate_forests,
    forest_partition_function,
    symmetric_graph,
)
from massiveforests.linalg import (
    assemble_massive_laplacian_exact,
    determinant_exact,
    edge_probability,
)
from massiveforests.walks import rng_stream, wilson_sample

# the two-vertex path with unit conductance and unit masses
g = symmetric_graph(2, [(0, 1, Fraction(1))], [Fraction(1), Fraction(1)])

print("forests of the two-vertex path (vertex -> head, -1 = root):")
for forest, weight in enumerate_forests(g):
    print(f"  {forest.outgoing}   weight {weight}")

z = forest_partition_function(g)
det = determinant_exact(assemble_massive_laplacian_exact(g))
print(f"\npartition function by enumeration: {z}")
print(f"det of the massive Laplacian:      {det}")

p_edge = edge_probability(g, [(0, 1)], exact=True)
print(f"\nP(edge 0->1 in the forest) = {p_edge}  (determinantal formula)")

rng = rng_stream(1)
n = 20000
hits = sum(wilson_sample(g, rng).outgoing[0] == 1 for _ in range(n))
print(f"Wilson estimate over {n} samples: {hits / n:.4f}")
