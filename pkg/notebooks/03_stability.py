# %% [markdown]
# # Stability estimates
#
# A stability estimate samples configurations, runs both orbits on the
# window and records the first disagreement. One profile gives every horizon
# up to T.

# %%
from percolab import ca_core as C
from percolab import dynamics as D
from percolab import groups as G

spec = G.int_line()
shift = C.make_shift(spec, 1)
x = C.random_pattern(spec, C.BINARY, D.cone_support(shift, [0], 6), seed=1)
q = D.StabilityQuery(shift, x, [0], 6, None, None, 50000, 2)
for T, e in enumerate(D.stability_by_horizon(q)):
    print(T, round(e.point, 5), D.shift_stability_exact(T))

# %% [markdown]
# ### Verdicts at finite scale
#
# The identity keeps every orbit fixed and reads as equicontinuous. The shift
# loses half its agreement per step and reads as sensitive.

# %%
for rule in (C.make_identity(spec), shift):
    rep = D.dichotomy_report(rule, [0], 6, 3, 4, 5000, 9)
    print(rule.name, rep.verdict, rep.to_dict()["summary"])

# %% [markdown]
# ### Percolated additive rule on the grid
#
# Environments whose dependence process leaves B_n give conditional
# stability of about one half or less.

# %%
rep = D.halfbound_experiment(G.int_grid(2), [2, 3, 4, 5], 10, 1000, 4)
for r in rep.records[:8]:
    print(r.environment, r.n, r.T, round(r.estimate.point, 3))
print("escape fraction at n=5:", rep.escape_fraction(5))
