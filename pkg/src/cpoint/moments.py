"""Return-moment estimation from price histories.

The filter samples prices on a fixed date grid, estimates logarithmic
return moments, extrapolates them ahead by a number of intervals (the
volatility scaled by extrap^hurst), and converts to simple-return
moments under the lognormal assumption.  Covariance is rebuilt from the
correlation matrix as S(i,j) = s(i) corr(i,j) s(j) after validation;
invalid correlation matrices are rejected, never repaired.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .linalg import NotPositiveDefinite, cholesky

EIGEN_FLOOR = 1e-8
CARRY_FORWARD_INTERVALS = 3


class MissingQuote(Exception):
    def __init__(self, asset: str, when: date):
        self.asset = asset
        self.when = when
        super().__init__(f"no usable quote for {asset} at {when.isoformat()}")


class InsufficientSamples(Exception):
    pass


class InvalidCorrelation(Exception):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(f"{kind}: {msg}" for kind, msg in violations))


def validate_correlation(correl: np.ndarray) -> list[tuple[str, str]]:
    """Check unit diagonal, bounded off-diagonals, symmetry, positivity.

    Returns a list of (kind, message) violations; empty means valid.
    Positivity uses a Cholesky probe on correl + floor*I, accepting
    eigenvalues down to -1e-8.
    """
    c = np.atleast_2d(np.asarray(correl, dtype=float))
    n = c.shape[0]
    out: list[tuple[str, str]] = []
    if c.shape != (n, n):
        return [("shape", f"not square: {c.shape}")]
    bad_diag = np.flatnonzero(np.abs(np.diag(c) - 1.0) > 1e-10)
    if bad_diag.size:
        out.append(("dominance", f"diagonal not 1 at {bad_diag.tolist()}"))
    off = np.abs(c - np.diag(np.diag(c)))
    if off.size and off.max(initial=0.0) >= 1.0:
        i, j = np.unravel_index(np.argmax(off), off.shape)
        out.append(("dominance", f"|corr({i},{j})| = {off[i, j]} >= 1"))
    if np.abs(c - c.T).max(initial=0.0) > 1e-10:
        out.append(("symmetry", "matrix differs from its transpose"))
    else:
        try:
            cholesky(c + EIGEN_FLOOR * np.eye(n))
        except NotPositiveDefinite:
            out.append(("positivity", f"eigenvalue below -{EIGEN_FLOOR}"))
    return out


@dataclass
class MomentSet:
    """Asset names, simple expected returns and deviations, correlation."""

    names: list[str]
    er: np.ndarray
    std: np.ndarray
    correl: np.ndarray

    def __post_init__(self):
        self.names = list(self.names)
        self.er = np.asarray(self.er, dtype=float).ravel()
        self.std = np.asarray(self.std, dtype=float).ravel()
        self.correl = np.atleast_2d(np.asarray(self.correl, dtype=float))
        n = len(self.names)
        if self.er.shape != (n,) or self.std.shape != (n,) or self.correl.shape != (n, n):
            raise ValueError("moment dimensions disagree with the name list")
        violations = validate_correlation(self.correl)
        if violations:
            raise InvalidCorrelation(violations)

    @property
    def n(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def restrict(self, names: list[str]) -> "MomentSet":
        idx = [self.index_of(nm) for nm in names]
        return MomentSet(
            [self.names[i] for i in idx],
            self.er[idx], self.std[idx],
            self.correl[np.ix_(idx, idx)],
        )


def covariance_from_corr(ms: MomentSet) -> np.ndarray:
    """S(i,j) = s(i) corr(i,j) s(j); diagonal is exactly std^2."""
    s = np.outer(ms.std, ms.std) * ms.correl
    np.fill_diagonal(s, ms.std ** 2)
    return s


def to_simple(erl: float, stdl: float) -> tuple[float, float]:
    """Lognormal log-moment to simple-return moment conversion.

    er  = exp(erl + stdl^2/2) - 1
    std = sqrt(exp(2 erl + stdl^2) (exp(stdl^2) - 1))
    """
    er = np.exp(erl + 0.5 * stdl ** 2) - 1.0
    var = np.exp(2.0 * erl + stdl ** 2) * (np.exp(stdl ** 2) - 1.0)
    return float(er), float(np.sqrt(var))


def from_simple(er: float, std: float) -> tuple[float, float]:
    """Inverse of to_simple; requires er > -1."""
    gross = 1.0 + er
    if gross <= 0.0:
        raise ValueError("simple return must exceed -1")
    var_log = np.log1p((std / gross) ** 2)
    return float(np.log(gross) - 0.5 * var_log), float(np.sqrt(var_log))


# --- price series -----------------------------------------------------------

@dataclass
class PriceSeries:
    asset: str
    deflator: str
    shares: float
    observations: list[tuple[date, float]]  # descending by date

    def __post_init__(self):
        if any(p <= 0.0 for _, p in self.observations):
            raise ValueError(f"{self.asset}: prices must be positive")
        dates = [d for d, _ in self.observations]
        if len(set(dates)) != len(dates):
            raise ValueError(f"{self.asset}: duplicate quote dates")
        self.observations = sorted(self.observations, key=lambda t: t[0], reverse=True)

    def quote_on_or_before(self, when: date, max_age_days: int) -> float | None:
        for d, p in self.observations:  # descending
            if d <= when:
                if (when - d).days <= max_age_days:
                    return p
                return None
        return None


_DATE_ROW = re.compile(r"^\s*(\S+)\s+(\S+)\s*$")


def parse_date(token: str) -> date:
    token = token.strip()
    for fmt in ("%d/%m/%y", "%d/%m/%Y", "%Y-%m-%d"):
        try:
            return datetime.strptime(token, fmt).date()
        except ValueError:
            continue
    raise ValueError(f"unrecognized date {token!r} (use dd/mm/yy or ISO)")


def parse_price_series(text: str, name_hint: str = "") -> PriceSeries:
    """Read the three-header quote file: Asset/Deflator/Shares then rows until *."""
    asset = name_hint
    deflator = ""
    shares = 1.0
    obs: list[tuple[date, float]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*"):
            break
        low = line.lower()
        if low.startswith("asset:"):
            asset = line.split(":", 1)[1].strip()
            continue
        if low.startswith("deflator:"):
            deflator = line.split(":", 1)[1].strip()
            continue
        if low.startswith("shares:"):
            shares = float(line.split(":", 1)[1].strip())
            continue
        if low.startswith("date"):
            continue
        m = _DATE_ROW.match(line)
        if m:
            obs.append((parse_date(m.group(1)), float(m.group(2))))
    if not asset:
        raise ValueError("price series without an Asset: header")
    return PriceSeries(asset, deflator, shares, obs)


@dataclass
class FilterResult:
    moments: MomentSet
    meanl: np.ndarray   # per-interval log mean
    sl: np.ndarray      # per-interval log deviation
    erl: np.ndarray     # extrapolated log mean
    stdl: np.ndarray    # extrapolated log deviation
    grid: list[date]


def filter_estimate(
    series: list[PriceSeries],
    final_date: date,
    interval: int,
    samples: int,
    extrap: float,
    hurst: float,
) -> FilterResult:
    """Log-return moments on the sampling grid, extrapolated and converted.

    Grid dates run final_date, final_date - interval, ... back to
    final_date - samples*interval (samples+1 quotes, samples returns).
    Missing quotes carry the last available price forward up to three
    intervals; staler gaps raise MissingQuote.
    """
    if samples < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {samples}")
    if interval < 1:
        raise ValueError("interval must be at least one day")
    grid = [final_date - timedelta(days=interval * j) for j in range(samples + 1)]
    grid.reverse()  # ascending

    n = len(series)
    max_age = CARRY_FORWARD_INTERVALS * interval
    prices = np.empty((n, samples + 1))
    for i, s in enumerate(series):
        for j, day in enumerate(grid):
            q = s.quote_on_or_before(day, max_age)
            if q is None:
                raise MissingQuote(s.asset, day)
            prices[i, j] = q

    rets = np.log(prices[:, 1:] / prices[:, :-1])
    meanl = rets.mean(axis=1)
    centered = rets - meanl[:, None]
    sl_cov = centered @ centered.T / samples
    sl = np.sqrt(np.diag(sl_cov))

    corr = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            if sl[i] > 0.0 and sl[j] > 0.0:
                # clip keeps collinear series inside the open (-1, 1) band
                rho = np.clip(sl_cov[i, j] / (sl[i] * sl[j]), -0.999999, 0.999999)
                corr[i, j] = corr[j, i] = rho

    erl = extrap * meanl
    stdl = extrap ** hurst * sl
    er = np.exp(erl + 0.5 * stdl ** 2) - 1.0
    std = np.sqrt(np.exp(2.0 * erl + stdl ** 2) * (np.exp(stdl ** 2) - 1.0))

    ms = MomentSet([s.asset for s in series], er, std, corr)
    return FilterResult(ms, meanl, sl, erl, stdl, grid)


@dataclass
class IndexModelResult:
    er: np.ndarray
    cov: np.ndarray
    loadings_diag: np.ndarray | None = None


def index_model_moments(
    a_stats: tuple[np.ndarray, np.ndarray],
    loadings: np.ndarray,
    c_stats: tuple[np.ndarray, np.ndarray],
    diagonalize: bool = False,
) -> IndexModelResult:
    """Moments of r = a + B c with independent own-rates a.

    E(r) = E(a) + B E(c);  Cov(r) = diag(Var(a)) + B Cov(c) B'.
    With diagonalize=True the index covariance is Cholesky-factored and
    the equivalent identity-covariance loadings B L are returned; both
    routes give the same Cov(r).
    """
    ea, var_a = (np.asarray(v, dtype=float).ravel() for v in a_stats)
    b = np.atleast_2d(np.asarray(loadings, dtype=float))
    ec, cov_c = c_stats
    ec = np.asarray(ec, dtype=float).ravel()
    cov_c = np.atleast_2d(np.asarray(cov_c, dtype=float))
    n, k = b.shape
    if ea.size != n or var_a.size != n or ec.size != k or cov_c.shape != (k, k):
        raise ValueError("index model dimensions disagree")
    er = ea + b @ ec
    cov = np.diag(var_a) + b @ cov_c @ b.T
    b_diag = None
    if diagonalize:
        low = cholesky(cov_c)
        b_diag = b @ low
    return IndexModelResult(er, cov, b_diag)
