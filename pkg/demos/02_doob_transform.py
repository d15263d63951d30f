"""Tilting a killed walk into a drifted one.

A positive function lambda with Delta^k lambda = 0 turns the killed walk
into a mass-free walk with conductances c~ = (lambda(y)/lambda(x)) c.  On a
finite window the forest partition function equals the tree partition
function of the collapsed graph with the tilted conductances: the mass is
"sent to the boundary".  Here: the integer line with mass 1/2 everywhere,
where lambda(x) = 2^x is massive harmonic, and the window {0, 1}.
"""

from fractions import Fraction

from massiveforests.doob import (
    check_massive_harmonic,
    doob_conductances,
    verify_partition_equality,
)
from massiveforests.graphs import symmetric_graph

# ambient: integer points -2..3 as a path, c = 1, m = 1/2
n = 6
ambient = symmetric_graph(
    n, [(i, i + 1, Fraction(1)) for i in range(n - 1)],
    [Fraction(1, 2)] * n)
lam = {i: Fraction(2) ** (i - 2) for i in range(n)}  # 2^x at x = i - 2

resid = check_massive_harmonic(ambient, lam, range(1, n - 1))
print(f"harmonicity residual of 2^x on the interior: {resid}")

tilde = doob_conductances(ambient, lam)
i = 2  # the vertex x = 0
print(f"tilted conductances at x = 0: ->  {tilde.edge_conductance(i, i+1)}"
      f",  <- {tilde.edge_conductance(i+1, i)}")

zf, zt, gap, zf_enum, zt_enum = verify_partition_equality(
    ambient, [2, 3], lam, exact=True, enumerate_cap=8)
print(f"\nZ_RSF of the wired window {{0,1}}:        {zf}")
print(f"Z_RST rooted at o with conductances c~:  {zt}")
print(f"enumeration cross-check: forests {zf_enum}, trees {zt_enum}")
print(f"gap: {gap}")
