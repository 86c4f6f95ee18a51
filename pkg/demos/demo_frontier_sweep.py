"""Sweep a three-asset model and walk the efficient frontier.

Builds a positive-definite covariance from volatilities and a
correlation matrix, traces every critical risk-propensity value, then
selects portfolios by eta, by expected return, by deviation and by
tangency rate.
"""

import numpy as np

from cpoint import (
    MomentSet,
    QpModel,
    brennan_frontier,
    build_frontier,
    covariance_from_corr,
    report,
    select,
    sweep,
)

names = ["BLUE", "GROW", "WILD"]
er = np.array([0.05, 0.12, 0.22])
std = np.array([0.15, 0.25, 0.40])
correl = np.array([
    [1.0, 0.2, 0.1],
    [0.2, 1.0, 0.3],
    [0.1, 0.3, 1.0],
])

moments = MomentSet(names, er, std, correl)
q = covariance_from_corr(moments)

# fully invested, long only, nothing above 80%
model = QpModel(
    q, er,
    te_mat=np.ones((1, 3)), te=[1.0],
    tl_mat=np.eye(3), tl=[0.8, 0.8, 0.8],
    names=names,
)

path = sweep(model)
print(f"critical points: {len(path.etas)} (open-ended: {path.open_ended})")
for k, eta in enumerate(path.etas):
    comp = ", ".join(f"{w:.3f} {nm}" for nm, w in zip(names, path.portfolios[k]) if w > 1e-9)
    print(f"  eta={eta:8.4f}  e={path.returns[k]:.4f}  "
          f"s={np.sqrt(path.variances[k]):.4f}  [{comp}]")

frontier = build_frontier(path)

print("\nselections:")
for by, value in [("eta", 0.15), ("e", 0.12), ("s", 0.20), ("r", 0.01)]:
    sel = select(frontier, by, value)
    print(f"  by {by}={value:<5}: eta={sel.eta:.4f} e={sel.e:.4f} s={sel.s:.4f} "
          f"rate={sel.r:.4f} k={sel.k} l={sel.l:.3f} [{sel.status.glyph}]")

print("\nBrennan two-rate composite (lend 1%, borrow 3%):")
curve = brennan_frontier(frontier, 0.01, 0.03)
print(f"  lend tangency at e={curve.lend_point.e:.4f}, s={curve.lend_point.s:.4f}")
print(f"  borrow tangency at e={curve.borrow_point.e:.4f}, s={curve.borrow_point.s:.4f}")
for s in (0.05, 0.25, 0.60):
    print(f"  composite e at s={s}: {curve.e_at_s(s):.4f}")

print("\n" + report([select(frontier, "eta", 0.1), select(frontier, "r", 0.01)]))
