"""Option return moments under joint lognormal prices.

European call and put returns over the contract window,

    r_c = (max(S e^x - K, 0) - C) / C,   r_p = (max(K - S e^x, 0) - P) / P,

with x the log price return, are piecewise affine in e^x on an interval
of x.  Every expectation and same-asset covariance therefore reduces to
partial moments of e^x over an interval, which have normal-CDF closed
forms; cross-asset covariances reduce to a single adaptive quadrature of
the conditional closed form.  Legs with different windows use the
variance-ratio scaling mu_f = f mu, sigma_f^2 = f sigma^2 and the
correlation sqrt(min(f1,f2)/max(f1,f2)) of overlapping log returns.

Gross returns g = r + 1 are used internally: covariances are unchanged
and premium divisions stay explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .moments import InvalidCorrelation, MomentSet, from_simple, validate_correlation

DEGENERATE_SIGMA = 1e-8
QUAD_TOL = 1e-8
QUAD_LIMIT = 10_000
WINDOW_SIGMAS = 40.0
RHO_CAP = 1.0 - 1e-12


class QuadratureFailure(Exception):
    pass


class UnknownUnderlying(Exception):
    pass


@dataclass
class OptionSpec:
    """One European option contract as listed in a derivatives block."""

    kind: str            # 'call' | 'put'
    name: str
    underlying: str
    strike: float
    premium: float
    spot: float
    exdays: int

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be call or put, got {self.kind!r}")
        if min(self.strike, self.premium, self.spot) <= 0.0:
            raise ValueError(f"{self.name}: strike, premium and spot must be positive")
        if self.exdays <= 0:
            raise ValueError(f"{self.name}: exdays must be positive")


@dataclass
class ReturnLeg:
    """Gross return g(x) = (alpha + beta e^x) on lo < x < hi, else 0.

    frac is the leg's window as a fraction of the base horizon the
    (mu, sigma) arguments refer to.
    """

    alpha: float
    beta: float
    lo: float
    hi: float
    frac: float = 1.0


def underlying_leg(frac: float = 1.0) -> ReturnLeg:
    return ReturnLeg(0.0, 1.0, -np.inf, np.inf, frac)


def call_leg(strike: float, premium: float, spot: float, frac: float = 1.0) -> ReturnLeg:
    r = np.log(strike / spot)
    return ReturnLeg(-strike / premium, spot / premium, r, np.inf, frac)


def put_leg(strike: float, premium: float, spot: float, frac: float = 1.0) -> ReturnLeg:
    r = np.log(strike / spot)
    return ReturnLeg(strike / premium, -spot / premium, -np.inf, r, frac)


def leg_of(opt: OptionSpec, frac: float = 1.0) -> ReturnLeg:
    if opt.kind == "call":
        return call_leg(opt.strike, opt.premium, opt.spot, frac)
    return put_leg(opt.strike, opt.premium, opt.spot, frac)


def _scaled(mu: float, sigma: float, frac: float) -> tuple[float, float]:
    return mu * frac, sigma * np.sqrt(frac)


def _partials(mu: float, sigma: float, lo: float, hi: float):
    """(P, M1, M2): integrals of (1, e^x, e^2x) phi(x) over [lo, hi]."""
    if sigma < DEGENERATE_SIGMA:
        inside = 1.0 if lo < mu < hi else 0.0
        return inside, inside * np.exp(mu), inside * np.exp(2.0 * mu)

    def upper(t, shift):
        # integral from t to +inf of e^{shift x} phi(x) dx
        if t == -np.inf:
            z = np.inf
        else:
            z = (mu + shift * sigma ** 2 - t) / sigma
        return np.exp(shift * mu + 0.5 * (shift * sigma) ** 2) * ndtr(z)

    p = upper(lo, 0.0) - upper(hi, 0.0)
    m1 = upper(lo, 1.0) - upper(hi, 1.0)
    m2 = upper(lo, 2.0) - upper(hi, 2.0)
    return p, m1, m2


def leg_mean(leg: ReturnLeg, mu: float, sigma: float) -> float:
    """E[g] with (mu, sigma) over the base window; leg scaled by its frac."""
    m, s = _scaled(mu, sigma, leg.frac)
    p, m1, _ = _partials(m, s, leg.lo, leg.hi)
    return leg.alpha * p + leg.beta * m1


def leg_second_moment(leg: ReturnLeg, mu: float, sigma: float) -> float:
    m, s = _scaled(mu, sigma, leg.frac)
    p, m1, m2 = _partials(m, s, leg.lo, leg.hi)
    return leg.alpha ** 2 * p + 2.0 * leg.alpha * leg.beta * m1 + leg.beta ** 2 * m2


def leg_variance(leg: ReturnLeg, mu: float, sigma: float) -> float:
    mean = leg_mean(leg, mu, sigma)
    return leg_second_moment(leg, mu, sigma) - mean * mean


def option_expected_return(opt: OptionSpec, mu: float, sigma: float) -> float:
    """E[r] for the option with log moments over its own window."""
    return leg_mean(leg_of(opt), mu, sigma) - 1.0


def option_variance(opt: OptionSpec, mu: float, sigma: float) -> float:
    return leg_variance(leg_of(opt), mu, sigma)


def _product_same_x(a: ReturnLeg, b: ReturnLeg, mu: float, sigma: float) -> float:
    """E[gA gB] when both legs share one log return (equal windows)."""
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo >= hi:
        return 0.0
    m, s = _scaled(mu, sigma, a.frac)
    p, m1, m2 = _partials(m, s, lo, hi)
    return (a.alpha * b.alpha * p
            + (a.alpha * b.beta + b.alpha * a.beta) * m1
            + a.beta * b.beta * m2)


def _window(mu: float, sigma: float, leg: ReturnLeg) -> tuple[float, float]:
    """Finite quadrature bounds: leg support trimmed where the tilted
    density e^{2x} phi(x) falls below the 40-sigma tail bound."""
    span = WINDOW_SIGMAS * max(sigma, 1e-6)
    tilt = mu + 2.0 * sigma * sigma
    lo = leg.lo if np.isfinite(leg.lo) else mu - span
    anchor = max(mu, tilt, lo)
    hi = leg.hi if np.isfinite(leg.hi) else anchor + span
    return lo, hi


def _product_bivariate(
    a: ReturnLeg, b: ReturnLeg,
    mu_a: float, sig_a: float, mu_b: float, sig_b: float, rho: float,
) -> float:
    """E[gA(x) gB(y)] over correlated normals by conditional quadrature.

    The moment arguments are already scaled to each leg's window; leg
    fracs are ignored here.
    """
    if abs(rho) >= 1.0:
        raise ValueError("need |rho| < 1 for the bivariate integral")
    if sig_a < DEGENERATE_SIGMA:
        x_fixed = mu_a
        ga = (a.alpha + a.beta * np.exp(x_fixed)) if a.lo < x_fixed < a.hi else 0.0
        return ga * leg_mean(replace(b, frac=1.0), mu_b, sig_b)
    if sig_b < DEGENERATE_SIGMA:
        y_fixed = mu_b
        gb = (b.alpha + b.beta * np.exp(y_fixed)) if b.lo < y_fixed < b.hi else 0.0
        return gb * leg_mean(replace(a, frac=1.0), mu_a, sig_a)

    sig_c = sig_b * np.sqrt(max(1.0 - rho * rho, 1e-30))

    def integrand(x: float) -> float:
        ga = a.alpha + a.beta * np.exp(x)
        mu_c = mu_b + rho * sig_b * (x - mu_a) / sig_a
        p, m1, _ = _partials(mu_c, sig_c, b.lo, b.hi)
        mb = b.alpha * p + b.beta * m1
        z = (x - mu_a) / sig_a
        return ga * mb * np.exp(-0.5 * z * z) / (sig_a * np.sqrt(2.0 * np.pi))

    lo, hi = _window(mu_a, sig_a, a)
    value, err = quad(integrand, lo, hi, epsabs=QUAD_TOL * 1e-2, epsrel=1e-10,
                      limit=QUAD_LIMIT)
    if err > QUAD_TOL:
        raise QuadratureFailure(f"estimated error {err:.2e} above {QUAD_TOL}")
    return value


def cross_window_rho(frac_a: float, frac_b: float) -> float:
    """Correlation of log returns over nested windows of one asset."""
    lo, hi = min(frac_a, frac_b), max(frac_a, frac_b)
    return float(np.sqrt(lo / hi))


def log_rho_from_simple(rho_simple: float, sig_a: float, sig_b: float) -> float:
    """Log-return correlation reproducing a simple-return correlation.

    Inverts cov(e^x, e^y) = E[e^x]E[e^y](exp(rho sig_a sig_b) - 1) so the
    moment engine stays consistent with a correlation matrix stated for
    simple returns.  Deterministic legs give zero.
    """
    if sig_a * sig_b < 1e-12:
        return 0.0
    spread = np.sqrt(np.expm1(sig_a ** 2) * np.expm1(sig_b ** 2))
    inner = 1.0 + rho_simple * spread
    if inner <= 0.0:
        return -RHO_CAP
    return float(np.clip(np.log(inner) / (sig_a * sig_b), -RHO_CAP, RHO_CAP))


def option_cov_same_asset(a: ReturnLeg, b: ReturnLeg, mu: float, sigma: float) -> float:
    """Cov of two return legs on one underlying, windows per leg fracs.

    Equal windows use the interval closed forms (disjoint call/put
    regions give exactly -E[gA]E[gB]); nested windows use the
    variance-ratio correlation and the bivariate route.
    """
    mean_a = leg_mean(a, mu, sigma)
    mean_b = leg_mean(b, mu, sigma)
    if a.frac == b.frac:
        exy = _product_same_x(a, b, mu, sigma)
    else:
        rho = min(cross_window_rho(a.frac, b.frac), RHO_CAP)
        ma, sa = _scaled(mu, sigma, a.frac)
        mb, sb = _scaled(mu, sigma, b.frac)
        exy = _product_bivariate(a, b, ma, sa, mb, sb, rho)
    return exy - mean_a * mean_b


def option_cov_cross_asset(
    a: ReturnLeg, b: ReturnLeg,
    mu_a: float, sig_a: float, mu_b: float, sig_b: float, rho: float,
) -> float:
    """Cov of legs on two underlyings with log-return correlation rho."""
    if abs(rho) >= 1.0:
        raise ValueError("cross-asset correlation must satisfy |rho| < 1")
    eff_rho = rho * cross_window_rho(a.frac, b.frac)
    ma, sa = _scaled(mu_a, sig_a, a.frac)
    mb, sb = _scaled(mu_b, sig_b, b.frac)
    exy = _product_bivariate(a, b, ma, sa, mb, sb, eff_rho)
    return exy - leg_mean(a, mu_a, sig_a) * leg_mean(b, mu_b, sig_b)


def extend_universe(ms: MomentSet, options: list[OptionSpec], horizon: int) -> MomentSet:
    """MomentSet over assets plus options, moments per the lognormal engine.

    ms must describe simple returns over `horizon` days; every option
    expiry must lie within it.  The asset block of the result is copied
    unchanged; option rows get engine means/deviations and correlations
    normalized by the engine's own standard deviations.
    """
    if not options:
        return MomentSet(list(ms.names), ms.er.copy(), ms.std.copy(), ms.correl.copy())
    if len({o.name for o in options}) != len(options):
        raise ValueError("duplicate option names")
    for opt in options:
        if opt.underlying not in ms.names:
            raise UnknownUnderlying(f"{opt.name}: {opt.underlying} not in the universe")
        if opt.exdays > horizon:
            raise ValueError(
                f"{opt.name}: expiry {opt.exdays}d beyond the {horizon}d horizon"
            )

    n = ms.n
    q = len(options)
    log_mu = np.empty(n)
    log_sig = np.empty(n)
    for i in range(n):
        log_mu[i], log_sig[i] = from_simple(ms.er[i], ms.std[i])

    legs = []
    u_idx = []
    for opt in options:
        frac = opt.exdays / horizon
        legs.append(leg_of(opt, frac))
        u_idx.append(ms.index_of(opt.underlying))

    opt_mean = np.array([
        leg_mean(leg, log_mu[u], log_sig[u]) for leg, u in zip(legs, u_idx)
    ])
    opt_var = np.array([
        leg_variance(leg, log_mu[u], log_sig[u]) for leg, u in zip(legs, u_idx)
    ])
    opt_std = np.sqrt(np.maximum(opt_var, 0.0))

    # asset legs for the option-vs-asset block
    asset_legs = [underlying_leg() for _ in range(n)]
    asset_std_engine = np.array([
        np.sqrt(max(leg_variance(asset_legs[i], log_mu[i], log_sig[i]), 0.0))
        for i in range(n)
    ])

    total = n + q
    corr = np.eye(total)
    corr[:n, :n] = ms.correl

    for j, (leg_j, uj) in enumerate(zip(legs, u_idx)):
        if opt_std[j] <= 0.0:
            raise InvalidCorrelation([("degenerate", f"{options[j].name} has zero variance")])
        for i in range(n):
            if i == uj:
                cov = option_cov_same_asset(asset_legs[i], leg_j, log_mu[i], log_sig[i])
            else:
                cov = option_cov_cross_asset(
                    asset_legs[i], leg_j,
                    log_mu[i], log_sig[i], log_mu[uj], log_sig[uj],
                    log_rho_from_simple(float(ms.correl[i, uj]), log_sig[i], log_sig[uj]),
                )
            rho = cov / (asset_std_engine[i] * opt_std[j])
            corr[i, n + j] = corr[n + j, i] = np.clip(rho, -0.999999, 0.999999)
        for jj in range(j):
            leg_i, ui = legs[jj], u_idx[jj]
            if ui == uj:
                cov = option_cov_same_asset(leg_i, leg_j, log_mu[uj], log_sig[uj])
            else:
                cov = option_cov_cross_asset(
                    leg_i, leg_j,
                    log_mu[ui], log_sig[ui], log_mu[uj], log_sig[uj],
                    log_rho_from_simple(float(ms.correl[ui, uj]), log_sig[ui], log_sig[uj]),
                )
            rho = cov / (opt_std[jj] * opt_std[j])
            corr[n + jj, n + j] = corr[n + j, n + jj] = np.clip(rho, -0.999999, 0.999999)

    names = list(ms.names) + [o.name for o in options]
    er = np.concatenate([ms.er, opt_mean - 1.0])
    std = np.concatenate([ms.std, opt_std])
    violations = validate_correlation(corr)
    if violations:
        raise InvalidCorrelation(violations)
    return MomentSet(names, er, std, corr)
