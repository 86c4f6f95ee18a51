"""Standard-form LP solver on a QR-updated basis.

min c x  over  {x >= 0 | A x = d},  A  m x n,  m < n.

Sign conventions follow the text this toolkit implements: the reduced
cost vector is z = c_b B^{-1} R - c_r, a residual column improves the
objective when z_j > 0 and the vertex is optimal when z <= 0.  The
entering choice accepts an optional veto predicate so complementarity
pivoting can forbid tabu columns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .linalg import (
    QrFactors,
    SingularBasis,
    qr_factor,
    qr_replace_column,
    solve_basis,
    solve_basis_t,
)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9        # absolute tolerance on x >= 0 and on z at exit
IMPROVE_TOL = 1e-12    # objective decrease below this counts as degenerate
RATIO_TOL = 1e-11      # direction entries below this cannot leave


class CycleLimit(Exception):
    """Iteration cap hit; the instance is cycling or ill conditioned."""


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


@dataclass
class StandardLp:
    a: np.ndarray
    d: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.d = np.asarray(self.d, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        m, n = self.a.shape
        if self.d.shape != (m,) or self.c.shape != (n,):
            raise ValueError("inconsistent LP dimensions")

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]


@dataclass
class BasisState:
    basic: list[int]
    residual: list[int]
    factors: QrFactors

    def basic_solution(self, lp: StandardLp) -> np.ndarray:
        return solve_basis(self.factors, lp.a, lp.d)

    def full_vector(self, lp: StandardLp) -> np.ndarray:
        x = np.zeros(lp.n)
        x[self.basic] = self.basic_solution(lp)
        return x


def make_basis(lp: StandardLp, basic: Sequence[int]) -> BasisState:
    basic = list(basic)
    residual = [j for j in range(lp.n) if j not in set(basic)]
    return BasisState(basic, residual, qr_factor(lp.a, basic))


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    value: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    basis: BasisState
    iterations: int
    ray: np.ndarray | None = None


VetoFn = Callable[[int, frozenset], bool]


def simplex_solve(
    lp: StandardLp,
    start: BasisState,
    entering_rule: str = "dantzig",
    veto: VetoFn | None = None,
) -> LpSolution:
    """Run the simplex from a feasible start basis.

    entering_rule 'dantzig' picks the largest improving reduced cost,
    'bland' the lowest improving column index.  Whatever the rule, the
    solver switches to Bland's choice after 3(n+m) pivots without
    objective improvement, and gives up with CycleLimit after 50(n+m)
    pivots.  A vetoed column never enters the basis.
    """
    m, n = lp.m, lp.n
    basic = list(start.basic)
    residual = list(start.residual)
    factors = start.factors
    xb = solve_basis(factors, lp.a, lp.d)
    if xb.min(initial=0.0) < -FEAS_TOL * (1.0 + np.abs(lp.d).max(initial=0.0)):
        raise ValueError(f"start basis infeasible: min x_b = {xb.min():.3e}")

    cap = 50 * (n + m)
    bland_after = 3 * (n + m)
    stalled = 0
    use_bland = entering_rule == "bland"
    prev_value = float(lp.c[basic] @ xb)

    for iteration in range(cap + 1):
        y = solve_basis_t(factors, lp.a, lp.c[basic])
        z = y @ lp.a[:, residual] - lp.c[residual]

        basic_set = frozenset(basic)
        candidates = [
            jj for jj, zj in enumerate(z)
            if zj > FEAS_TOL and not (veto is not None and veto(residual[jj], basic_set))
        ]
        if not candidates:
            x = np.zeros(n)
            x[basic] = xb
            return LpSolution(
                LpStatus.OPTIMAL, x, float(lp.c @ x), y,
                z, BasisState(basic, residual, factors), iteration,
            )
        if use_bland:
            jj = min(candidates, key=lambda idx: residual[idx])
        else:
            jj = max(candidates, key=lambda idx: z[idx])
        q = residual[jj]

        w = solve_basis(factors, lp.a, lp.a[:, q])
        ratios = np.full(m, np.inf)
        pos = w > RATIO_TOL
        ratios[pos] = np.maximum(xb[pos], 0.0) / w[pos]
        if not pos.any():
            x = np.zeros(n)
            x[basic] = xb
            ray = np.zeros(n)
            ray[q] = 1.0
            ray[basic] = -w
            return LpSolution(
                LpStatus.UNBOUNDED, x, float(lp.c @ x), y,
                z, BasisState(basic, residual, factors), iteration, ray=ray,
            )
        eps = ratios.min()
        ties = np.flatnonzero(ratios <= eps * (1 + 1e-12) + 1e-15)
        if use_bland and len(ties) > 1:
            i = int(min(ties, key=lambda k: basic[k]))
        else:
            i = int(ties[0])

        leaving = basic[i]
        factors = qr_replace_column(factors, lp.a, i, q)
        # factor update drops position i and appends the entering column
        basic = basic[:i] + basic[i + 1:] + [q]
        residual[jj] = leaving
        xb = solve_basis(factors, lp.a, lp.d)

        value = float(lp.c[basic] @ xb)
        if value < prev_value - IMPROVE_TOL:
            stalled = 0
        else:
            stalled += 1
            if stalled > bland_after and not use_bland:
                log.debug("switching to Bland's rule after %d stalled pivots", stalled)
                use_bland = True
        prev_value = value

    raise CycleLimit(f"no termination after {cap} pivots")


@dataclass
class Phase1Result:
    status: LpStatus
    basis: BasisState | None
    lp: StandardLp
    redundant_rows: list[int]


def phase1(lp: StandardLp) -> Phase1Result:
    """Find a feasible basis via the auxiliary LP with diag(sign(d)) artificials.

    Returns the basis for lp itself (artificial columns never appear in
    it).  Residual artificials stuck in the basis at zero level are
    pivoted out when some original column can replace them; rows where
    none can are redundant, get dropped from the returned LP, and are
    logged as RedundantRow.
    """
    m, n = lp.m, lp.n
    signs = np.where(lp.d >= 0.0, 1.0, -1.0)
    a_aux = np.hstack([lp.a, np.diag(signs)])
    c_aux = np.concatenate([np.zeros(n), np.ones(m)])
    aux = StandardLp(a_aux, lp.d, c_aux)
    start = make_basis(aux, list(range(n, n + m)))
    sol = simplex_solve(aux, start)
    if sol.value > FEAS_TOL:
        return Phase1Result(LpStatus.INFEASIBLE, None, lp, [])

    basic = list(sol.basis.basic)
    xb = dict(zip(basic, sol.basis.basic_solution(aux)))
    drop_rows: list[int] = []
    arts = [j for j in basic if j >= n]
    if arts:
        factors = sol.basis.factors
        residual_orig = [j for j in range(n) if j not in set(basic)]
        for art in arts:
            pos = basic.index(art)
            # row of B^{-1}A in this basis position: e_pos' B^{-1} A
            e = np.zeros(m)
            e[pos] = 1.0
            row = solve_basis_t(factors, a_aux, e) @ lp.a[:, residual_orig]
            good = np.flatnonzero(np.abs(row) > 1e-7)
            if good.size:
                q = residual_orig[int(good[0])]
                factors = qr_replace_column(factors, a_aux, pos, q)
                basic = basic[:pos] + basic[pos + 1:] + [q]
                residual_orig.remove(q)
            else:
                drop_rows.append(art - n)
                log.warning("RedundantRow: constraint row %d is dependent, dropping", art - n)
        basic = [j for j in basic if j < n]

    if drop_rows:
        keep = [i for i in range(m) if i not in drop_rows]
        lp = StandardLp(lp.a[keep], lp.d[keep], lp.c)
    basis = make_basis(lp, basic)
    if basis.basic_solution(lp).min(initial=0.0) < -FEAS_TOL * (1 + np.abs(lp.d).max(initial=0.0)):
        raise SingularBasis("phase-1 produced an infeasible basis")
    return Phase1Result(LpStatus.OPTIMAL, basis, lp, drop_rows)


def solve_lp(lp: StandardLp, entering_rule: str = "dantzig") -> LpSolution:
    """phase1 + simplex_solve convenience wrapper."""
    p1 = phase1(lp)
    if p1.status is LpStatus.INFEASIBLE:
        return LpSolution(
            LpStatus.INFEASIBLE, np.zeros(lp.n), np.nan,
            np.zeros(lp.m), np.zeros(max(lp.n - lp.m, 0)),
            None, 0,
        )
    return simplex_solve(p1.lp, p1.basis, entering_rule)


@dataclass
class RhsRange:
    eta_lo: float
    eta_hi: float
    leaving_lo: int | None
    leaving_hi: int | None


def parametric_rhs_range(
    lp: StandardLp, basis: BasisState, t: np.ndarray, p: np.ndarray
) -> RhsRange:
    """Interval of eta keeping B^{-1}(t + eta p) >= 0 at this basis.

    Critical value at each basic position j is -t~_j / p~_j; the interval
    ends are the tightest of these on either side, +-inf when p~ has no
    entry of the blocking sign.  'leaving' is the basic position that
    blocks at the corresponding end.
    """
    tt = solve_basis(basis.factors, lp.a, np.asarray(t, dtype=float))
    pt = solve_basis(basis.factors, lp.a, np.asarray(p, dtype=float))
    scale = 1.0 + np.abs(tt).max(initial=0.0)
    eta_hi, eta_lo = np.inf, -np.inf
    leave_hi = leave_lo = None
    for j in range(len(tt)):
        if pt[j] < -RATIO_TOL * scale:
            crit = -tt[j] / pt[j]
            if crit < eta_hi:
                eta_hi, leave_hi = crit, j
        elif pt[j] > RATIO_TOL * scale:
            crit = -tt[j] / pt[j]
            if crit > eta_lo:
                eta_lo, leave_lo = crit, j
    return RhsRange(eta_lo, eta_hi, leave_lo, leave_hi)


def build_sharpe_lp(
    moments,
    a: np.ndarray,
    b: np.ndarray,
    a0: float,
    s0: float,
    eta: float,
    diversification_cap: float | None = None,
) -> StandardLp:
    """LP of the diversified index-model portfolio objective.

    max  eta (a + a0 b)' x - s0 b' x   over  {x >= 0, 1'x = 1},
    optionally with per-asset caps x_i <= diversification_cap added as
    slack rows.  `moments` supplies the asset count and names only.
    """
    n = len(moments.names)
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (n,))
    obj = eta * (a + a0 * b) - s0 * b
    if diversification_cap is None:
        return StandardLp(np.ones((1, n)), np.array([1.0]), -obj)
    if n * diversification_cap < 1.0:
        raise ValueError("caps make the normal constraint infeasible")
    top = np.concatenate([np.ones(n), np.zeros(n)])
    caps = np.hstack([np.eye(n), np.eye(n)])
    a_mat = np.vstack([top, caps])
    d = np.concatenate([[1.0], np.full(n, diversification_cap)])
    c = np.concatenate([-obj, np.zeros(n)])
    return StandardLp(a_mat, d, c)
