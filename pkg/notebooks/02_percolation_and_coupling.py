# %% [markdown]
# # Dependence process, cluster exploration and the coupling
#
# The dependence process keeps the sites reached by an odd number of open
# bond walks. The cluster exploration keeps sites reached by open site
# walks. On a tree, declaring each newly met site by the parity of the bonds
# pointing into it makes the two cumulative sets agree.

# %%
import numpy as np

from percolab import groups as G
from percolab import percolation as P
from percolab import rng

f2 = G.free_group(2)
region = G.ball(f2, 7)
fails = sum(not all(P.coupling_sample(region, 6, rng.trial_seed(1, i)).cumulative_agreement()) for i in range(500))
print("FreeGroup(2): failing samples", fails, "of 500")

z2 = G.ball(G.int_grid(2), 7)
fails = sum(not all(P.coupling_sample(z2, 6, rng.trial_seed(1, i)).cumulative_agreement()) for i in range(500))
print("IntGrid(2):   failing samples", fails, "of 500")

# %% [markdown]
# On the grid, cycles let a walk come back to a site whose state was fixed at
# an earlier stage, so the identity is a tree phenomenon.
#
# ### Survival curves
#
# Site survival to radius R is monotone in p per trial: each trial stores
# the bottleneck value of its best route, so one pass serves every p.

# %%
spec = G.int_line()
R = 64
b = P.site_bottlenecks(spec, R, 5000, 7)
for p in np.linspace(0.96, 0.995, 8):
    e = P.survival_probability("site-cluster", float(p), R, 5000, 7, spec, b)
    print(f"p={p:.4f}  est={e.point:.4f}  exact={P.line_survival_exact(p, R):.4f}")
print("exact p*(64) =", P.line_threshold_exact(R))

# %%
rep = P.threshold_estimate("site-cluster", 64, 4000, 0.004, 3, G.int_grid(2))
print("IntGrid(2) p*(64) ~", rep.p_star, "bracket", rep.bracket)
