"""Parametric quadratic programming by complementarity pivoting.

The portfolio problem

    min (1/2) x'Qx - eta p'x   over  {x >= 0, Te x = te, Tl x <= tl}

is solved through its feasibility-and-optimality equations, recast as a
linear program over [x, l, ep, en, s, yl, ye, yq].  A phase-1 pass over
the constraint polytope supplies a feasible vertex; from there the
optimality artificials are driven to zero under the tabu rule: a
variable never enters the basis while its complement (x_i <-> s_i,
yl_k <-> l_k) is basic, so complementarity holds exactly at every vertex
visited.  Sweeping eta then reduces to right-hand-side ranging on the
optimal basis, producing the critical points of the efficient set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import cholesky
from .simplex import (
    BasisState,
    LpStatus,
    StandardLp,
    make_basis,
    parametric_rhs_range,
    phase1,
    simplex_solve,
)

log = logging.getLogger(__name__)

ARTIFICIAL_TOL = 1e-9
KKT_TOL = 1e-7
ETA_MAX_DEFAULT = 1e6
ETA_DEDUP = 1e-9
SWEEP_EPS = 1e-7


class DimensionMismatch(Exception):
    pass


class InfeasibleModel(Exception):
    """No portfolio satisfies the constraint blocks."""


class NumericalBreakdown(Exception):
    """Pivoting could not eliminate the optimality artificials."""


@dataclass
class QpModel:
    """Quadratic utility data plus linear constraint blocks.

    Q must be symmetric positive definite; this is checked at
    construction by Cholesky and never repaired, since a near-singular
    covariance makes the pivoting unstable.
    """

    q: np.ndarray
    p: np.ndarray
    te_mat: np.ndarray
    te: np.ndarray
    tl_mat: np.ndarray
    tl: np.ndarray
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.p = np.asarray(self.p, dtype=float).ravel()
        n = self.p.size
        self.te_mat = np.asarray(self.te_mat, dtype=float).reshape(-1, n)
        self.te = np.asarray(self.te, dtype=float).ravel()
        self.tl_mat = np.asarray(self.tl_mat, dtype=float).reshape(-1, n)
        self.tl = np.asarray(self.tl, dtype=float).ravel()
        if not self.names:
            self.names = [f"x{i + 1}" for i in range(n)]
        if self.q.shape != (n, n):
            raise DimensionMismatch(f"Q must be {n}x{n}, got {self.q.shape}")
        if self.te_mat.shape[0] != self.te.size or self.tl_mat.shape[0] != self.tl.size:
            raise DimensionMismatch("constraint block shapes disagree")
        if len(self.names) != n:
            raise DimensionMismatch("one name per asset required")
        scale = max(1.0, np.abs(self.q).max())
        if np.abs(self.q - self.q.T).max() > 1e-12 * scale:
            raise ValueError("Q must be symmetric")
        cholesky(self.q)  # raises NotPositiveDefinite on bad input

    @property
    def n(self) -> int:
        return self.p.size

    @property
    def me(self) -> int:
        return self.te.size

    @property
    def ml(self) -> int:
        return self.tl.size

    def utility(self, x: np.ndarray, eta: float) -> float:
        x = np.asarray(x, dtype=float)
        return float(eta * self.p @ x - 0.5 * x @ self.q @ x)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if x.min(initial=0.0) < -tol:
            return False
        if self.me and np.abs(self.te_mat @ x - self.te).max() > tol:
            return False
        if self.ml and (self.tl_mat @ x - self.tl).max() > tol:
            return False
        return True


def _sign(v: np.ndarray) -> np.ndarray:
    # sign with 0 -> +1 so diagonal blocks stay invertible
    return np.where(np.asarray(v, dtype=float) >= 0.0, 1.0, -1.0)


@dataclass
class EvoTableau:
    """The complementarity LP.

    Columns: [x(n), l(ml), ep(me), en(me), s(n), yl(ml), ye(me), yq(n)];
    rows: [Tl block (ml), Te block (me), gradient block (n)].
    negative_rows lists inequality rows whose bound is negative: the
    origin then violates them and initial_vertex is infeasible, so the
    solver starts from a phase-1 vertex of the constraint polytope with
    the artificial signs recentered there.
    """

    lp: StandardLp
    tabu_pairs: list[tuple[int, int]]
    n: int
    ml: int
    me: int
    eta: float
    col_x: range
    col_l: range
    col_ep: range
    col_en: range
    col_s: range
    col_yl: range
    col_ye: range
    col_yq: range
    negative_rows: list[int]
    rhs_const: np.ndarray
    rhs_param: np.ndarray

    @property
    def initial_vertex(self) -> np.ndarray:
        v = np.zeros(self.lp.n)
        v[self.col_yl] = np.maximum(self.lp.d[: self.ml], 0.0)
        v[self.col_ye] = np.abs(self.lp.d[self.ml: self.ml + self.me])
        v[self.col_yq] = np.abs(self.lp.d[self.ml + self.me:])
        return v


def assemble_evo(model: QpModel, eta: float) -> EvoTableau:
    """Complementarity tableau with the origin-centered artificial signs.

    Its printed initial vertex [0,0,0,0,0,tl,|te|,|eta p|] is feasible
    whenever tl >= 0; rows violating that are reported in negative_rows.
    """
    return _assemble(model, eta, np.zeros(model.n))


def _assemble(model: QpModel, eta: float, center_x: np.ndarray) -> EvoTableau:
    n, ml, me = model.n, model.ml, model.me
    widths = [n, ml, me, me, n, ml, me, n]
    offs = np.cumsum([0] + widths)
    cols = [range(offs[i], offs[i + 1]) for i in range(8)]
    total = offs[-1]
    rows = ml + me + n

    a = np.zeros((rows, total))
    de = np.diag(_sign(model.te)) if me else np.zeros((0, 0))
    grad_rhs = eta * model.p - model.q @ center_x
    dq = np.diag(_sign(grad_rhs)) if np.any(grad_rhs) else np.eye(n)

    r_tl = slice(0, ml)
    r_te = slice(ml, ml + me)
    r_q = slice(ml + me, rows)
    a[r_tl, cols[0]] = model.tl_mat
    a[r_tl, cols[5]] = np.eye(ml)
    a[r_te, cols[0]] = model.te_mat
    a[r_te, cols[6]] = de
    a[r_q, cols[0]] = model.q
    a[r_q, cols[1]] = model.tl_mat.T
    a[r_q, cols[2]] = model.te_mat.T
    a[r_q, cols[3]] = -model.te_mat.T
    a[r_q, cols[4]] = -np.eye(n)
    a[r_q, cols[7]] = dq

    d = np.concatenate([model.tl, model.te, eta * model.p])
    c = np.zeros(total)
    c[cols[6]] = 1.0
    c[cols[7]] = 1.0
    lp = StandardLp(a, d, c)

    tabu = [(cols[0][i], cols[4][i]) for i in range(n)]
    tabu += [(cols[5][k], cols[1][k]) for k in range(ml)]
    negative = [k for k in range(ml) if model.tl[k] < 0.0]

    rhs_const = np.concatenate([model.tl, model.te, np.zeros(n)])
    rhs_param = np.concatenate([np.zeros(ml + me), model.p])
    return EvoTableau(
        lp, tabu, n, ml, me, eta,
        *cols, negative, rhs_const, rhs_param,
    )


@dataclass
class QpSolution:
    x: np.ndarray
    s: np.ndarray
    l: np.ndarray
    e: np.ndarray
    yl: np.ndarray
    eta: float
    tableau: EvoTableau
    work_lp: StandardLp
    basis: BasisState

    @property
    def duals(self) -> dict:
        return {"s": self.s, "l": self.l, "e": self.e}


def _tabu_veto(tabu: dict[int, int], banned: frozenset):
    def veto(col: int, basic_set: frozenset) -> bool:
        if col in banned:
            return True
        mate = tabu.get(col)
        return mate is not None and mate in basic_set
    return veto


def kkt_residual(model: QpModel, sol: QpSolution) -> float:
    grad = model.q @ sol.x - sol.eta * model.p
    if model.ml:
        grad = grad + model.tl_mat.T @ sol.l
    if model.me:
        grad = grad + model.te_mat.T @ sol.e
    grad = grad - sol.s
    return float(np.abs(grad).max(initial=0.0))


def kkt_scale(model: QpModel, eta: float) -> float:
    return 1.0 + abs(eta) * np.abs(model.p).max(initial=0.0) + np.abs(model.q).max()


def _feasible_vertex(model: QpModel):
    """Vertex of {x >= 0 | Te x = te, Tl x <= tl} with its basic columns.

    The feasibility stage runs on the primal polytope alone, where the
    tabu rule has nothing to veto: dual columns only join in the
    optimality stage, so the stall of a combined phase-1 cannot occur.
    Returns (x_hat, basic_x, basic_yl).
    """
    n, ml, me = model.n, model.ml, model.me
    if ml + me == 0:
        return np.zeros(n), [], []
    a = np.zeros((ml + me, n + ml))
    a[:ml, :n] = model.tl_mat
    a[:ml, n:] = np.eye(ml)
    a[ml:, :n] = model.te_mat
    d = np.concatenate([model.tl, model.te])
    res = phase1(StandardLp(a, d, np.zeros(n + ml)))
    if res.status is LpStatus.INFEASIBLE:
        raise InfeasibleModel("no portfolio satisfies the constraint blocks")
    if res.redundant_rows:
        raise NumericalBreakdown(
            f"constraint rows {res.redundant_rows} are linearly dependent; "
            "remove redundant constraints (ill-posed model)"
        )
    x_full = res.basis.full_vector(res.lp)
    basic_x = [j for j in res.basis.basic if j < n]
    basic_yl = [j - n for j in res.basis.basic if j >= n]
    return x_full[:n], basic_x, basic_yl


def solve_fixed_eta(model: QpModel, eta: float) -> QpSolution:
    """Optimal portfolio and multipliers at one risk-propensity value.

    Stage 1 finds a feasible vertex of the constraint polytope by plain
    phase-1 pivoting; the complementarity tableau is then centered there
    (artificial signs diag(sign(eta p - Q x))) and stage 2 drives the
    optimality artificials to zero under the tabu rule, which keeps
    x's = 0 and yl'l = 0 exact at every visited vertex.
    """
    x_hat, basic_x, basic_yl = _feasible_vertex(model)
    tab = _assemble(model, eta, x_hat)

    basic = [tab.col_x[j] for j in basic_x]
    basic += [tab.col_yl[k] for k in basic_yl]
    basic += list(tab.col_yq)
    start = make_basis(tab.lp, basic)

    tabu = dict(tab.tabu_pairs)
    tabu.update({b: a for a, b in tab.tabu_pairs})
    banned = frozenset(tab.col_ye)

    cost = np.zeros(tab.lp.n)
    cost[tab.col_yq] = 1.0
    work = StandardLp(tab.lp.a, tab.lp.d, cost)
    sol2 = simplex_solve(work, start, veto=_tabu_veto(tabu, banned))
    if sol2.value > ARTIFICIAL_TOL * kkt_scale(model, eta):
        raise NumericalBreakdown(
            f"optimality artificials stuck at {sol2.value:.3e} (eta={eta!r})"
        )

    v = np.zeros(work.n)
    v[sol2.basis.basic] = sol2.basis.basic_solution(work)
    sol = QpSolution(
        x=v[tab.col_x],
        s=v[tab.col_s],
        l=v[tab.col_l],
        e=v[tab.col_ep] - v[tab.col_en],
        yl=v[tab.col_yl],
        eta=eta,
        tableau=tab,
        work_lp=work,
        basis=sol2.basis,
    )
    resid = kkt_residual(model, sol)
    if resid > KKT_TOL * kkt_scale(model, eta):
        raise NumericalBreakdown(f"KKT residual {resid:.3e} at eta={eta!r}")
    return sol


@dataclass
class CriticalPath:
    """Critical risk-propensity values with their optimal portfolios.

    Between consecutive critical etas the optimum is the convex
    combination of the endpoint portfolios; expected return is affine
    and variance quadratic in the interpolation weight.
    """

    etas: np.ndarray
    portfolios: np.ndarray
    returns: np.ndarray
    variances: np.ndarray
    cross: np.ndarray
    open_ended: bool
    eta_cap: float
    names: list[str]
    terminal_dx: np.ndarray | None = None
    terminal_de: float = 0.0
    terminal_cross: float = 0.0
    terminal_quad: float = 0.0

    @property
    def k_max(self) -> int:
        return len(self.etas) - 1

    def portfolio_at(self, eta: float) -> np.ndarray:
        """Piecewise-linear interpolation of the optimal portfolio."""
        etas = self.etas
        if eta <= etas[0]:
            return self.portfolios[0].copy()
        if eta >= etas[-1]:
            x = self.portfolios[-1].copy()
            if self.terminal_dx is not None and eta > etas[-1]:
                x = x + (eta - etas[-1]) * self.terminal_dx
            return x
        k = int(np.searchsorted(etas, eta, side="right") - 1)
        lam = (eta - etas[k]) / (etas[k + 1] - etas[k])
        return (1.0 - lam) * self.portfolios[k] + lam * self.portfolios[k + 1]


def _basis_signature(tab: EvoTableau, basis: BasisState) -> tuple:
    """Structural active set of one sweep segment.

    Which x columns and which slack (yl) columns are basic determines
    the affine map eta -> x on the segment; multiplier-only pivots
    (ep/en swaps, s or l rearrangements) leave it unchanged and do not
    kink the portfolio path.
    """
    basic = set(basis.basic)
    x_on = frozenset(i for i, c in enumerate(tab.col_x) if c in basic)
    slack_on = frozenset(k for k, c in enumerate(tab.col_yl) if c in basic)
    return x_on, slack_on


def sweep(model: QpModel, eta_max: float = ETA_MAX_DEFAULT, max_segments: int = 500) -> CriticalPath:
    """Trace every critical eta from pure risk minimization upward.

    At each optimal basis, right-hand-side ranging over the [tl; te;
    eta p] parametrization yields the next basis change; the solver is
    re-entered just past it and the walk continues until the basis stays
    optimal for all larger eta (open-ended path) or eta_max is hit.
    Basis changes that leave the active-set signature untouched (pure
    multiplier pivots such as an ep/en swap) are not critical points and
    are stepped over silently.
    """
    sol = solve_fixed_eta(model, 0.0)
    etas = [0.0]
    xs = [sol.x]
    last_sig = _basis_signature(sol.tableau, sol.basis)
    open_ended = False
    pending: tuple[float, np.ndarray] | None = None

    guard = 0
    eta_here = 0.0
    while guard < max_segments:
        guard += 1
        tab = sol.tableau
        t = tab.rhs_const
        p = tab.rhs_param
        rng = parametric_rhs_range(sol.work_lp, sol.basis, t, p)
        eta_next = rng.eta_hi
        if not np.isfinite(eta_next) or eta_next >= eta_max:
            open_ended = not np.isfinite(eta_next)
            break
        eta_next = max(eta_next, eta_here)
        # candidate critical point; recorded etas must strictly increase,
        # but a coincident break may still be the one that kinks the path
        if eta_next > etas[-1] + ETA_DEDUP * (1.0 + abs(etas[-1])):
            xb = np.linalg.solve(
                sol.work_lp.a[:, sol.basis.basic], t + eta_next * p
            )
            full = np.zeros(sol.work_lp.n)
            full[sol.basis.basic] = xb
            pending = (float(eta_next), full[tab.col_x])
        else:
            pending = None
        eps = SWEEP_EPS * (1.0 + abs(eta_next))
        while True:
            probe = eta_next + eps
            sol = solve_fixed_eta(model, probe)
            rng2 = parametric_rhs_range(
                sol.work_lp, sol.basis, sol.tableau.rhs_const, sol.tableau.rhs_param
            )
            if rng2.eta_hi > probe + ETA_DEDUP * (1.0 + probe):
                break
            eps *= 10.0
            if eps > 1.0 + abs(eta_next):
                raise NumericalBreakdown(
                    f"cannot advance past critical eta {eta_next!r}"
                )
        # a break point is critical only if the new segment's active set
        # differs from the previous segment's
        sig = _basis_signature(sol.tableau, sol.basis)
        if pending is not None and sig != last_sig:
            etas.append(pending[0])
            xs.append(pending[1])
        last_sig = sig
        eta_here = eta_next
    else:
        log.warning("sweep stopped at segment cap %d", max_segments)

    # derivative of x along the terminal basis; zero for bounded models
    dxb = np.linalg.solve(
        sol.work_lp.a[:, sol.basis.basic], sol.tableau.rhs_param
    )
    full_dx = np.zeros(sol.work_lp.n)
    full_dx[sol.basis.basic] = dxb
    terminal_dx = full_dx[sol.tableau.col_x]
    if np.abs(terminal_dx).max(initial=0.0) < 1e-12:
        terminal_dx = np.zeros(model.n)

    etas_arr = np.array(etas)
    xs_arr = np.array(xs)
    returns = xs_arr @ model.p
    variances = np.einsum("ki,ij,kj->k", xs_arr, model.q, xs_arr)
    cross = np.einsum("ki,ij,kj->k", xs_arr[:-1], model.q, xs_arr[1:]) if len(xs) > 1 else np.zeros(0)
    return CriticalPath(
        etas_arr, xs_arr, returns, variances, cross,
        open_ended, eta_max, list(model.names), terminal_dx,
        terminal_de=float(model.p @ terminal_dx),
        terminal_cross=float(xs_arr[-1] @ model.q @ terminal_dx),
        terminal_quad=float(terminal_dx @ model.q @ terminal_dx),
    )
