"""End-to-end assembly: input texts -> compiled bundle.

Shared by the command-line driver and the HTTP service so both produce
bit-identical results for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import ModelBundle, make_bundle
from .files import moments_from_files
from .mdl import Evaluation, compile_model, parse_deriv, parse_source
from .moments import MomentSet, from_simple, to_simple
from .options import extend_universe
from .qp import sweep


def rescale_moments(ms: MomentSet, factor: float) -> MomentSet:
    """Stretch the return window by `factor` under Brownian scaling."""
    if factor == 1.0:
        return ms
    er = np.empty(ms.n)
    std = np.empty(ms.n)
    for i in range(ms.n):
        mu, sig = from_simple(ms.er[i], ms.std[i])
        er[i], std[i] = to_simple(mu * factor, sig * np.sqrt(factor))
    return MomentSet(list(ms.names), er, std, ms.correl.copy())


@dataclass
class CompileOutput:
    bundle: ModelBundle
    evaluation: Evaluation
    horizon_days: float


def compile_bundle(
    model_text: str,
    moments_text: str,
    correl_text: str,
    deriv_text: str | None = None,
) -> CompileOutput:
    """moments + correlation + MDL model (+ optional derivatives) -> bundle.

    The moment horizon is extrap*interval days from the moments-file
    parameters (defaults 1); option expiries beyond it stretch the whole
    moment set to the longest expiry before the universe is extended.
    """
    ms, params = moments_from_files(moments_text, correl_text)
    horizon = float(params.get("extrap", 1.0)) * float(params.get("interval", 1.0))
    if deriv_text:
        specs = parse_deriv(deriv_text)
        target = max(horizon, float(max(s.exdays for s in specs)))
        if target > horizon:
            ms = rescale_moments(ms, target / horizon)
            horizon = target
        ms = extend_universe(ms, specs, horizon)
    model, evaluation = compile_model(parse_source(model_text), ms)
    path = sweep(model)
    return CompileOutput(make_bundle(model, path), evaluation, horizon)
