# %% [markdown]
# # Groups, balls and cellular automata
#
# Balls in a Cayley graph come out in BFS order, so a smaller ball is always a
# prefix of a larger one. Everything else in the package leans on that.

# %%
from percolab import ca_core as C
from percolab import groups as G

for spec in [G.int_line(), G.int_grid(2), G.free_group(2), G.lamplighter(), G.heisenberg()]:
    print(f"{str(spec):28s}", [len(G.ball(spec, n)) for n in range(5)])

# %% [markdown]
# ### Exact orbits on a window
#
# `evolve` reads only the dependency cone of the window. The percolated
# additive rule with every bond open is rule 90, and a single 1 draws
# Pascal's triangle mod 2.

# %%
spec = G.int_line()
rule = C.make_percolated_additive(spec)
n = 15
window = G.ball(spec, n).elements
cone = C.dependency_cone(spec, window, rule.memory_set, n)
m = len(rule.alphabet.components) - 1
vals = [((1 << m) - 1) | ((g == 0) << m) for g in cone]
orbit = C.evolve(C.Pattern(spec, cone, vals), rule, window, n)
cols = sorted(range(len(orbit.window)), key=lambda j: orbit.window[j])
for row in orbit.frames:
    print("".join("#" if row[j] >> m else "." for j in cols))

# %% [markdown]
# ### The pine rule
#
# A cell becomes 1 when its two right neighbours are 1. After n steps cell 0
# is the AND of the n + 1 cells n..2n, which fixes its law under a Bernoulli(q)
# start.

# %%
pine = C.make_pine()
x = C.random_pattern(spec, C.BINARY, C.dependency_cone(spec, [0], pine.memory_set, 4), seed=3, marginal=(0.8,))
print("x on 0..8:", [x[j] for j in range(9)])
print("orbit at 0:", C.evolve(x, pine, [0], 4).at(0).tolist())
