"""Mean-variance portfolio toolkit.

Compiles constraint models (MDL) plus estimated return moments into a
parametric quadratic program, sweeps the Markowitz efficient frontier by
complementarity pivoting, and selects portfolios by risk propensity,
return, deviation or tangency rate.
"""

from .frontier import (
    BrennanCurve,
    Frontier,
    FrontierSegment,
    PortfolioSelection,
    SelectionStatus,
    apt_expected_returns,
    brennan_frontier,
    build_frontier,
    capm_expected_return,
    report,
    select,
    tobin_tangency,
)
from .linalg import NotPositiveDefinite, SingularBasis, cholesky, givens, qr_factor
from .mdl import MdlError, compile_model, evaluate, parse_deriv, parse_source
from .moments import (
    InsufficientSamples,
    InvalidCorrelation,
    MissingQuote,
    MomentSet,
    PriceSeries,
    covariance_from_corr,
    filter_estimate,
    from_simple,
    index_model_moments,
    to_simple,
    validate_correlation,
)
from .options import (
    OptionSpec,
    QuadratureFailure,
    UnknownUnderlying,
    extend_universe,
    option_cov_cross_asset,
    option_cov_same_asset,
    option_expected_return,
)
from .qp import (
    CriticalPath,
    InfeasibleModel,
    NumericalBreakdown,
    QpModel,
    assemble_evo,
    solve_fixed_eta,
    sweep,
)
from .simplex import (
    CycleLimit,
    LpSolution,
    LpStatus,
    StandardLp,
    build_sharpe_lp,
    parametric_rhs_range,
    phase1,
    simplex_solve,
    solve_lp,
)

__version__ = "0.1.0"
