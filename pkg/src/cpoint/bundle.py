"""Compiled-model bundles: canonical serialization, content ids, store.

A bundle holds the quadratic model, its critical path and the frontier
segments.  The id is a SHA-256 over a canonical JSON rendering whose
floats are written with 17 significant digits, so identical inputs give
identical ids across runs and platforms.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frontier import Frontier, build_frontier
from .qp import CriticalPath, QpModel, solve_fixed_eta


def _canon(value) -> str:
    if isinstance(value, float):
        if value != value:
            return '"nan"'
        if value in (float("inf"), float("-inf")):
            return f'"{value}"'
        if value == int(value) and abs(value) < 1e15:
            return format(value, ".1f")
        return format(value, ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        items = value.tolist() if isinstance(value, np.ndarray) else value
        return "[" + ",".join(_canon(v) for v in items) + "]"
    if isinstance(value, dict):
        parts = [f"{json.dumps(str(k))}:{_canon(v)}" for k, v in sorted(value.items())]
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot canonicalize {type(value)}")


def canonical_dumps(obj) -> str:
    return _canon(obj)


def model_payload(model: QpModel) -> dict:
    return {
        "names": model.names,
        "q": model.q, "p": model.p,
        "te_mat": model.te_mat, "te": model.te,
        "tl_mat": model.tl_mat, "tl": model.tl,
    }


def path_payload(path: CriticalPath) -> dict:
    return {
        "etas": path.etas,
        "portfolios": path.portfolios,
        "returns": path.returns,
        "variances": path.variances,
        "cross": path.cross,
        "open_ended": path.open_ended,
        "eta_cap": path.eta_cap,
        "names": path.names,
        "terminal_dx": path.terminal_dx if path.terminal_dx is not None else [],
        "terminal_de": path.terminal_de,
        "terminal_cross": path.terminal_cross,
        "terminal_quad": path.terminal_quad,
    }


def frontier_payload(frontier: Frontier) -> dict:
    return {
        "segments": [
            {
                "k": seg.k, "eta0": seg.eta0, "eta1": seg.eta1,
                "e0": seg.e0, "e1": seg.e1,
                "v00": seg.v00, "v01": seg.v01, "v11": seg.v11,
            }
            for seg in frontier.segments
        ],
        "critical_points": [
            {
                "eta": float(frontier.path.etas[k]),
                "e": float(frontier.path.returns[k]),
                "v": float(frontier.path.variances[k]),
                "s": float(np.sqrt(frontier.path.variances[k])),
                "composition": {
                    nm: float(w)
                    for nm, w in zip(frontier.names, frontier.path.portfolios[k])
                    if abs(w) > 1e-12
                },
            }
            for k in range(len(frontier.path.etas))
        ],
        "open_ended": frontier.path.open_ended,
    }


@dataclass
class ModelBundle:
    id: str
    model: QpModel
    path: CriticalPath
    frontier: Frontier
    created_at: float

    def to_json(self) -> str:
        payload = {
            "id": self.id,
            "created_at": self.created_at,
            "model": model_payload(self.model),
            "path": path_payload(self.path),
            "frontier": frontier_payload(self.frontier),
        }
        return canonical_dumps(payload)


def bundle_id(model: QpModel, path: CriticalPath) -> str:
    blob = canonical_dumps({"model": model_payload(model), "path": path_payload(path)})
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_bundle(model: QpModel, path: CriticalPath) -> ModelBundle:
    frontier = build_frontier(path)
    return ModelBundle(bundle_id(model, path), model, path, frontier, time.time())


def bundle_from_json(text: str, verify: bool = True) -> ModelBundle:
    data = json.loads(text)
    m = data["model"]
    model = QpModel(
        np.array(m["q"]), np.array(m["p"]),
        np.array(m["te_mat"]).reshape(-1, len(m["names"])), np.array(m["te"]),
        np.array(m["tl_mat"]).reshape(-1, len(m["names"])), np.array(m["tl"]),
        list(m["names"]),
    )
    p = data["path"]
    tdx = np.array(p.get("terminal_dx", []))
    path = CriticalPath(
        np.array(p["etas"]), np.array(p["portfolios"]).reshape(len(p["etas"]), -1),
        np.array(p["returns"]), np.array(p["variances"]), np.array(p["cross"]),
        bool(p["open_ended"]), float(p["eta_cap"]), list(p["names"]),
        tdx if tdx.size else None,
        float(p.get("terminal_de", 0.0)), float(p.get("terminal_cross", 0.0)),
        float(p.get("terminal_quad", 0.0)),
    )
    bundle = ModelBundle(data["id"], model, path, build_frontier(path),
                         float(data.get("created_at", 0.0)))
    if verify:
        verify_bundle(bundle)
    return bundle


def verify_bundle(bundle: ModelBundle) -> None:
    """Spot-check that the stored path solves the stored model.

    Re-solves the fixed-eta problem at one midpoint and compares the
    interpolated portfolio; also recomputes the stored moments from the
    portfolios.
    """
    path, model = bundle.path, bundle.model
    rets = path.portfolios @ model.p
    if not np.allclose(rets, path.returns, atol=1e-8):
        raise ValueError("bundle inconsistent: stored returns do not match portfolios")
    var = np.einsum("ki,ij,kj->k", path.portfolios, model.q, path.portfolios)
    if not np.allclose(var, path.variances, atol=1e-8):
        raise ValueError("bundle inconsistent: stored variances do not match portfolios")
    if path.k_max >= 1:
        eta = 0.5 * (path.etas[0] + path.etas[1])
    else:
        eta = float(path.etas[0])
    x = solve_fixed_eta(model, float(eta)).x
    if not np.allclose(x, path.portfolio_at(float(eta)), atol=1e-6):
        raise ValueError("bundle inconsistent: KKT spot check failed")


class ModelStore:
    """In-memory bundles keyed by id, optionally mirrored to a directory."""

    def __init__(self, directory: str | Path | None = None):
        self._bundles: dict[str, ModelBundle] = {}
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)
            for path in self._dir.glob("*.bundle.json"):
                bundle = bundle_from_json(path.read_text(), verify=False)
                self._bundles[bundle.id] = bundle

    def add(self, bundle: ModelBundle) -> None:
        self._bundles[bundle.id] = bundle
        if self._dir:
            (self._dir / f"{bundle.id}.bundle.json").write_text(bundle.to_json())

    def get(self, bundle_id: str) -> ModelBundle | None:
        return self._bundles.get(bundle_id)

    def ids(self) -> list[str]:
        return sorted(self._bundles)
