# %% [markdown]
# # Matchings, couplings and renormalization

# %%
from fractions import Fraction

import numpy as np

from percolab import combinatorics as CB
from percolab import groups as G
from percolab import percolation as P

g = CB.BipartiteGraph(range(3), "xyz", {(0, "x"), (1, "x"), (2, "y"), (2, "z")})
print(CB.hall_matching(g))

# %% [markdown]
# Stochastic domination of two Bernoulli laws as an exact coupling:

# %%
p = {0: Fraction(7, 10), 1: Fraction(3, 10)}
q = {0: Fraction(2, 5), 1: Fraction(3, 5)}
res = CB.strassen_coupling(p, q, lambda u, v: u <= v)
print(res.coupling.weights)

# %% [markdown]
# ### Box tiles
#
# With the cube {-1,0,1}^2 a 10 x 10 box has invariance ratio 0.44.

# %%
z2 = G.int_grid(2)
tile = CB.box(2, 10)
print(CB.invariance_ratio(z2, tile, [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]))

# %% [markdown]
# ### Renormalization on the line
#
# Coarse sites are sent injectively into a 7-separated net. A coarse site is
# open when its block phi(g) + B_3 has an open fine site.

# %%
line = G.int_line()
D = CB.separated_covering_set(G.ball(line, 30), 7)
coarse = G.ball(line, 3).elements
inf = CB.inflation_matching(line, coarse, D)
print("net", D, "displacement", inf.displacement)
region = G.ball(line, 60)
hits = np.zeros(len(coarse))
for s in range(2000):
    z = CB.renormalize(P.sample_sites(0.1, region, s), "zeta", inf.assignment, 3)
    hits += [z[g] for g in coarse]
print("coarse frequencies", (hits / 2000).round(3), "beta'", round(CB.beta_prime(0.1, 7), 4))
