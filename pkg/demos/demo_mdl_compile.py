"""Compile a sector-constrained model written in MDL.

Eight assets with sector sets, a normalization row, sector caps, a food
floor and per-asset liquidity bounds; the compiled blocks feed the
parametric sweep directly.
"""

import numpy as np

from cpoint import MomentSet, build_frontier, select, sweep
from cpoint.mdl import compile_model, parse_source

MODEL = """\
all  = {TEL4,ELE6,PET4,BB4,BBD4,SCO4,CEV4,BRH4};

#sectors
energy  = {ELE6,PET4};
bank = {BB4,BBD4};
food = {SCO4,CEV4,BRH4};
state = {TEL4,ELE6,PET4,BB4};
private = ~state;

# constraints
normal: sum[all] $ ==1;
statelim: sum[state] $ <= 0.5;
statebanks= state & bank;
statebklim:  sum[statebanks] $ <= 0.1;
foodsbound:  sum[food] $ >= 0.2;

liquindex[all] = {1.0@TEL4,0.6@ELE6,0.5@PET4,0.4@BB4,
                  0.4@BBD4,0.2@SCO4,0.2@CEV4,0.3@BRH4};
liqconstr: for[all] $ <= 0.5*liquindex;
"""

names = ["TEL4", "ELE6", "PET4", "BB4", "BBD4", "SCO4", "CEV4", "BRH4"]
er = [4.521883e-03, 9.349340e-02, 1.414101e-01, 4.441184e-02,
      4.125617e-02, 2.153917e-02, -1.467467e-01, 7.254108e-02]
std = [2.105123e-01, 3.214724e-01, 2.988641e-01, 2.952717e-01,
       2.019181e-01, 1.709987e-01, 2.471665e-01, 1.866201e-01]
rng = np.random.default_rng(11)
raw = rng.normal(size=(8, 8))
cov = raw @ raw.T + 8 * np.eye(8)
d = np.sqrt(np.diag(cov))
correl = cov / np.outer(d, d)
np.fill_diagonal(correl, 1.0)

moments = MomentSet(names, er, std, correl)
model, evaluation = compile_model(parse_source(MODEL), moments)

print(f"universe: {model.names}")
print(f"equality block Te {model.te_mat.shape}, rhs {model.te}")
print(f"inequality block Tl {model.tl_mat.shape}")
print("first inequality rows:")
for row, rhs in list(zip(model.tl_mat, model.tl))[:4]:
    print("  ", np.array2string(row, precision=2), "<=", round(rhs, 4))

path = sweep(model)
frontier = build_frontier(path)
print(f"\nswept {len(path.etas)} critical points; "
      f"return range [{frontier.e_min:.4f}, {frontier.e_max:.4f}]")

sel = select(frontier, "e", 0.5 * (frontier.e_min + frontier.e_max))
print(f"mid-return portfolio (e={sel.e:.4f}, s={sel.s:.4f}):")
for nm, w in sorted(sel.composition.items(), key=lambda kv: -kv[1]):
    print(f"  {w:7.4f}  {nm}")
