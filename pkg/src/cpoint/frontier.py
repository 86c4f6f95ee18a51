"""Efficient frontier evaluation and portfolio selection.

Turns a CriticalPath into an evaluable curve: between critical points k
and k+1 the portfolio is x = (1-l) x_k + l x_{k+1}, expected return is
affine in l and variance is the segment quadratic

    v(l) = (1-l)^2 v00 + 2 l (1-l) v01 + l^2 v11.

Selection inverts the curve by risk propensity, expected return,
standard deviation or tangency rate, reproducing the Numeric-Template
columns; the rate column of any selected point is the riskless rate
whose tangent line touches the frontier there.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .qp import CriticalPath

CONCAVITY_TOL = 1e-9
CRITICAL_SNAP = 1e-9
TANGENCY_TOL = 1e-10


class RateAboveFrontier(Exception):
    """Riskless rate at or above the maximum attainable frontier return."""


class AmbiguousQuery(Exception):
    """Inversion hit the inefficient branch; internal inconsistency."""


class SelectionStatus(str, Enum):
    NOT_COMPUTED = "not_computed"
    CRITICAL_POINT = "critical"
    INTERIOR = "interior"
    OUT_OF_RANGE_HIGH = "out_of_range_high"
    OUT_OF_RANGE_LOW = "out_of_range_low"

    @property
    def glyph(self) -> str:
        return {
            "not_computed": "∅",
            "critical": "+",
            "interior": "√",
            "out_of_range_high": "↑",
            "out_of_range_low": "↓",
        }[self.value]


@dataclass
class FrontierSegment:
    k: int
    eta0: float
    eta1: float
    e0: float
    e1: float
    v00: float
    v01: float
    v11: float
    x0: np.ndarray
    x1: np.ndarray

    def __post_init__(self):
        curvature = self.v00 - 2.0 * self.v01 + self.v11
        if curvature < -1e-12:
            raise ValueError(f"segment {self.k}: variance not convex ({curvature:.3e})")

    def eta_at(self, lam: float) -> float:
        return (1.0 - lam) * self.eta0 + lam * self.eta1

    def e_at(self, lam: float) -> float:
        return (1.0 - lam) * self.e0 + lam * self.e1

    def v_at(self, lam: float) -> float:
        return ((1.0 - lam) ** 2 * self.v00
                + 2.0 * lam * (1.0 - lam) * self.v01
                + lam ** 2 * self.v11)

    def s_at(self, lam: float) -> float:
        return float(np.sqrt(max(self.v_at(lam), 0.0)))

    def dv_dlam(self, lam: float) -> float:
        return 2.0 * ((self.v01 - self.v00) + lam * (self.v00 - 2.0 * self.v01 + self.v11))

    def _dv_floor(self) -> float:
        # dv/dlam is nonnegative on an efficient segment; round-off can
        # leave it at ~-1e-12 near the minimum-variance end, which must
        # read as a vertical e-s slope, not a huge negative one
        return 1e-11 * (abs(self.v00) + abs(self.v11) + 1e-300)

    def x_at(self, lam: float) -> np.ndarray:
        return (1.0 - lam) * self.x0 + lam * self.x1

    def slope_e_s(self, lam: float) -> float:
        """de/ds; +inf where the variance is locally flat."""
        dv = self.dv_dlam(lam)
        if dv <= self._dv_floor():
            return np.inf if self.e1 >= self.e0 else -np.inf
        return (self.e1 - self.e0) * 2.0 * self.s_at(lam) / dv

    def rate_at(self, lam: float) -> float:
        """Riskless rate whose tangent touches the frontier at lam."""
        dv = self.dv_dlam(lam)
        if dv <= self._dv_floor():
            return -np.inf
        return self.e_at(lam) - 2.0 * self.v_at(lam) * (self.e1 - self.e0) / dv


@dataclass
class PortfolioSelection:
    eta: float
    e: float
    v: float
    s: float
    r: float
    k: int
    l: float
    status: SelectionStatus
    composition: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        # the tangency rate is -inf at the minimum-variance endpoint;
        # JSON carries that as null
        rate = self.r if np.isfinite(self.r) else None
        return {
            "eta": self.eta, "e": self.e, "v": self.v, "s": self.s,
            "r": rate, "k": self.k, "l": self.l,
            "status": self.status.value, "glyph": self.status.glyph,
            "composition": dict(self.composition),
        }


@dataclass
class Frontier:
    """Segment list plus the path it came from; indexable like a list."""

    path: CriticalPath
    segments: list[FrontierSegment]
    names: list[str]

    def __len__(self):
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def __getitem__(self, i):
        return self.segments[i]

    @property
    def e_min(self) -> float:
        return float(self.path.returns[0])

    @property
    def e_max(self) -> float:
        return float(self.path.returns[-1])

    @property
    def s_min(self) -> float:
        return float(np.sqrt(self.path.variances[0]))

    @property
    def s_max(self) -> float:
        return float(np.sqrt(self.path.variances[-1]))


def build_frontier(path: CriticalPath) -> Frontier:
    """Assemble contiguous segments and verify overall concavity."""
    segments = []
    for k in range(path.k_max):
        segments.append(FrontierSegment(
            k,
            float(path.etas[k]), float(path.etas[k + 1]),
            float(path.returns[k]), float(path.returns[k + 1]),
            float(path.variances[k]), float(path.cross[k]), float(path.variances[k + 1]),
            path.portfolios[k], path.portfolios[k + 1],
        ))
    prev_slope = np.inf
    for seg in segments:
        s0, s1 = seg.s_at(0.0), seg.s_at(1.0)
        if s1 - s0 < 1e-14:
            continue
        chord = (seg.e1 - seg.e0) / (s1 - s0)
        if chord > prev_slope + CONCAVITY_TOL * (1.0 + abs(prev_slope)):
            raise ValueError(
                f"frontier not concave at segment {seg.k}: chord {chord} after {prev_slope}"
            )
        prev_slope = chord
    return Frontier(path, segments, list(path.names))


def _selection(frontier: Frontier, k: int, lam: float, status: SelectionStatus,
               rate: float | None = None) -> PortfolioSelection:
    path = frontier.path
    if not frontier.segments:
        x = path.portfolios[0]
        e = float(path.returns[0])
        v = float(path.variances[0])
        sel_rate = np.nan if rate is None else rate
        comp = {n: float(w) for n, w in zip(frontier.names, x) if abs(w) > 1e-12}
        return PortfolioSelection(float(path.etas[0]), e, v, float(np.sqrt(v)),
                                  sel_rate, 0, 0.0, status, comp)
    k = min(max(k, 0), len(frontier.segments) - 1)
    seg = frontier.segments[k]
    if lam <= CRITICAL_SNAP:
        lam, status = 0.0, _maybe_critical(status)
    elif lam >= 1.0 - CRITICAL_SNAP:
        lam, status = 1.0, _maybe_critical(status)
    x = seg.x_at(lam)
    v = seg.v_at(lam)
    comp = {n: float(w) for n, w in zip(frontier.names, x) if abs(w) > 1e-12}
    return PortfolioSelection(
        seg.eta_at(lam), seg.e_at(lam), v, float(np.sqrt(max(v, 0.0))),
        seg.rate_at(lam) if rate is None else rate,
        k, lam, status, comp,
    )


def _maybe_critical(status: SelectionStatus) -> SelectionStatus:
    if status is SelectionStatus.INTERIOR:
        return SelectionStatus.CRITICAL_POINT
    return status


def _segment_for_eta(frontier: Frontier, eta: float) -> tuple[int, float]:
    etas = frontier.path.etas
    k = int(np.searchsorted(etas, eta, side="right") - 1)
    k = min(max(k, 0), len(frontier.segments) - 1)
    seg = frontier.segments[k]
    lam = 0.0 if seg.eta1 == seg.eta0 else (eta - seg.eta0) / (seg.eta1 - seg.eta0)
    return k, float(lam)


def _invert_std(seg: FrontierSegment, s: float) -> float:
    """Root of v(lam) = s^2 in [0, 1]; the efficient branch keeps higher e."""
    target = s * s
    a = seg.v00 - 2.0 * seg.v01 + seg.v11
    b = 2.0 * (seg.v01 - seg.v00)
    c = seg.v00 - target
    roots = []
    if abs(a) < 1e-300:
        if abs(b) > 1e-300:
            roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0 and disc > -1e-12 * max(b * b, abs(4 * a * c), 1.0):
            disc = 0.0
        if disc >= 0.0:
            sq = np.sqrt(disc)
            roots = [(-b - sq) / (2 * a), (-b + sq) / (2 * a)]
    good = [r for r in roots if -1e-9 <= r <= 1.0 + 1e-9]
    if not good:
        raise AmbiguousQuery(f"no efficient-branch root for s={s!r} in segment {seg.k}")
    lam = max(good) if seg.e1 >= seg.e0 else min(good)
    return float(min(max(lam, 0.0), 1.0))


def _tangency_point(frontier: Frontier, rate: float) -> tuple[int, float]:
    """Segment and weight of the Tobin tangency for this riskless rate.

    Locates the sign change of h = frontier slope - secant slope across
    segments, bisecting inside one; a sign change astride a critical
    point returns that critical point.  A rate still undercutting the
    whole curve clamps to the maximum-return endpoint.
    """
    segs = frontier.segments
    if not segs:
        return 0, 0.0

    def h(k: int, lam: float) -> float:
        seg = segs[k]
        s = seg.s_at(lam)
        if s <= 0.0:
            return np.inf
        slope = seg.slope_e_s(lam)
        if not np.isfinite(slope):
            return np.inf
        return slope - (seg.e_at(lam) - rate) / s

    if h(0, 0.0) <= 0.0:
        return 0, 0.0
    for k in range(len(segs)):
        h0, h1 = h(k, 0.0), h(k, 1.0)
        if h0 <= 0.0:
            return k, 0.0
        if h1 > 0.0:
            continue
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            hm = h(k, mid)
            if abs(hm) <= TANGENCY_TOL:
                return k, mid
            if hm > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return k, 0.5 * (lo + hi)
    return len(segs) - 1, 1.0


def select(frontier: Frontier, by: str, value: float) -> PortfolioSelection:
    """Numeric-Template selection: one input column fixes all the others.

    by is one of 'eta', 'e', 's', 'r'.  Out-of-range inputs return the
    clamped endpoint with the matching status flag.
    """
    path = frontier.path
    if by == "eta":
        if value < path.etas[0]:
            return _selection(frontier, 0, 0.0, SelectionStatus.OUT_OF_RANGE_LOW)
        if frontier.segments and value > path.etas[-1]:
            return _beyond_last_eta(frontier, value)
        if not frontier.segments:
            return _selection(frontier, 0, 0.0, SelectionStatus.CRITICAL_POINT)
        k, lam = _segment_for_eta(frontier, value)
        return _selection(frontier, k, lam, SelectionStatus.INTERIOR)

    if by == "e":
        if value < frontier.e_min - 1e-12:
            return _selection(frontier, 0, 0.0, SelectionStatus.OUT_OF_RANGE_LOW)
        if value > frontier.e_max + 1e-12:
            return _selection(frontier, len(frontier.segments) - 1, 1.0,
                              SelectionStatus.OUT_OF_RANGE_HIGH)
        if not frontier.segments:
            return _selection(frontier, 0, 0.0, SelectionStatus.CRITICAL_POINT)
        rets = path.returns
        k = int(np.searchsorted(rets, value, side="right") - 1)
        k = min(max(k, 0), len(frontier.segments) - 1)
        seg = frontier.segments[k]
        lam = 0.0 if seg.e1 == seg.e0 else (value - seg.e0) / (seg.e1 - seg.e0)
        return _selection(frontier, k, float(np.clip(lam, 0.0, 1.0)),
                          SelectionStatus.INTERIOR)

    if by == "s":
        if value < frontier.s_min - 1e-12:
            return _selection(frontier, 0, 0.0, SelectionStatus.OUT_OF_RANGE_LOW)
        if value > frontier.s_max + 1e-12:
            return _selection(frontier, len(frontier.segments) - 1, 1.0,
                              SelectionStatus.OUT_OF_RANGE_HIGH)
        if not frontier.segments:
            return _selection(frontier, 0, 0.0, SelectionStatus.CRITICAL_POINT)
        variances = path.variances
        k = int(np.searchsorted(variances, value * value, side="right") - 1)
        k = min(max(k, 0), len(frontier.segments) - 1)
        lam = _invert_std(frontier.segments[k], value)
        return _selection(frontier, k, lam, SelectionStatus.INTERIOR)

    if by == "r":
        k, lam = _tangency_point(frontier, value)
        return _selection(frontier, k, lam, SelectionStatus.INTERIOR, rate=value)

    raise ValueError(f"unknown selection column {by!r} (use eta, e, s or r)")


def _beyond_last_eta(frontier: Frontier, eta: float) -> PortfolioSelection:
    """Extrapolate along the terminal ray; constant for bounded models."""
    path = frontier.path
    if path.terminal_dx is None or not np.any(path.terminal_dx):
        sel = _selection(frontier, len(frontier.segments) - 1, 1.0,
                         SelectionStatus.CRITICAL_POINT)
        return PortfolioSelection(eta, sel.e, sel.v, sel.s, sel.r, sel.k, sel.l,
                                  sel.status, sel.composition)
    dt = eta - float(path.etas[-1])
    x = path.portfolios[-1] + dt * path.terminal_dx
    e = float(path.returns[-1]) + dt * path.terminal_de
    v = (float(path.variances[-1]) + 2.0 * dt * path.terminal_cross
         + dt * dt * path.terminal_quad)
    dv = 2.0 * path.terminal_cross + 2.0 * dt * path.terminal_quad
    rate = e - 2.0 * v * path.terminal_de / dv if abs(dv) > 1e-300 else -np.inf
    comp = {n: float(w) for n, w in zip(frontier.names, x) if abs(w) > 1e-12}
    return PortfolioSelection(eta, e, v, float(np.sqrt(max(v, 0.0))), rate,
                              path.k_max, 0.0, SelectionStatus.INTERIOR, comp)


def tobin_tangency(frontier: Frontier, rate: float) -> PortfolioSelection:
    """Tangency portfolio of the single-riskless-rate market line."""
    return select(frontier, "r", rate)


@dataclass
class BrennanCurve:
    """Three-piece composite: lending ray, frontier arc, borrowing ray."""

    r_lend: float
    r_borrow: float
    lend_point: PortfolioSelection
    borrow_point: PortfolioSelection
    frontier: Frontier

    def e_at_s(self, s: float) -> float:
        if s < 0.0:
            raise ValueError("standard deviation must be nonnegative")
        pl, pb = self.lend_point, self.borrow_point
        if s <= pl.s:
            if pl.s <= 0.0:
                return self.r_lend
            return self.r_lend + s * (pl.e - self.r_lend) / pl.s
        if s >= pb.s:
            if pb.s <= 0.0:
                return self.r_borrow
            return pb.e + (s - pb.s) * (pb.e - self.r_borrow) / pb.s
        return select(self.frontier, "s", s).e


def brennan_frontier(frontier: Frontier, r_lend: float, r_borrow: float) -> BrennanCurve:
    """Two-rate composite frontier; r_lend = r_borrow gives the Tobin line."""
    if r_lend > r_borrow:
        raise ValueError("lending rate must not exceed the borrowing rate")
    if r_borrow >= frontier.e_max:
        raise RateAboveFrontier(
            f"borrowing rate {r_borrow} is not below the maximum frontier return "
            f"{frontier.e_max}"
        )
    lend = select(frontier, "r", r_lend)
    borrow = select(frontier, "r", r_borrow)
    if lend.eta > borrow.eta + 1e-9 * (1.0 + abs(borrow.eta)):
        raise AmbiguousQuery("lending tangency beyond borrowing tangency")
    return BrennanCurve(r_lend, r_borrow, lend, borrow, frontier)


def capm_expected_return(r0: float, market: tuple[float, float],
                         asset_cov_with_market: float) -> float:
    """e_i = r0 + (e_m - r0) * cov(i, m) / var(m)."""
    e_m, v_m = market
    if v_m <= 0.0:
        raise ValueError("market variance must be positive")
    return r0 + (e_m - r0) * asset_cov_with_market / v_m


def apt_expected_returns(loadings: np.ndarray, premia: np.ndarray) -> np.ndarray:
    """E(r) = l0 + B l_{1..k} for factor loadings B and premia [l0..lk]."""
    b = np.atleast_2d(np.asarray(loadings, dtype=float))
    l = np.asarray(premia, dtype=float).ravel()
    if l.size != b.shape[1] + 1:
        raise ValueError(
            f"premia must have {b.shape[1] + 1} entries (constant + one per factor)"
        )
    return l[0] + b @ l[1:]


# --- report rendering -------------------------------------------------------

REPORT_HEADER = "Selected Portfolios: Parameters, Assets and Composition"
_PARAM_COLS = ("eta", "esp", "var", "std", "rate", "k", "l")


def _sci(x: float) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return "nan" if x is None or np.isnan(x) else ("-inf" if x < 0 else "+inf")
    return f"{x:.2E}".replace(".", ",")


def report(selections: list[PortfolioSelection], labels: list[str] | None = None) -> str:
    """ASCII block per selection in the Numeric-Template file format."""
    lines = [REPORT_HEADER, ""]
    for i, sel in enumerate(selections):
        label = labels[i] if labels else chr(ord("A") + i)
        lines.append(f"Parameters of portfolio {label}")
        lines.append("  ".join(f"{c:<9}" for c in _PARAM_COLS).rstrip())
        row = [_sci(sel.eta), _sci(sel.e), _sci(sel.v), _sci(sel.s),
               _sci(sel.r), str(sel.k), _sci(sel.l)]
        lines.append("  ".join(f"{v:<9}" for v in row).rstrip())
        lines.append("")
        lines.append(f"Assets and Composition of portfolio {label}")
        entries = [f"{_sci(w)}@{name}" for name, w in sel.composition.items()]
        for start in range(0, len(entries), 4):
            lines.append("  ".join(entries[start:start + 4]))
        if not entries:
            lines.append("(empty portfolio)")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


_ENTRY_RE = re.compile(r"(-?\d,\d{2}E[+-]\d+)@(\S+)")


def parse_report_compositions(text: str) -> list[dict[str, float]]:
    """Weights per portfolio block, for round-trip checks of the format."""
    blocks = []
    current: dict[str, float] | None = None
    for line in text.splitlines():
        if line.startswith("Assets and Composition"):
            current = {}
            blocks.append(current)
            continue
        if line.startswith("Parameters of portfolio"):
            current = None
            continue
        if current is not None:
            for num, name in _ENTRY_RE.findall(line):
                current[name] = float(num.replace(",", "."))
    return blocks
