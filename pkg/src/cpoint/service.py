"""HTTP JSON API over the compile/sweep/select pipeline.

POST /api/models            multipart model, moments, correl[, deriv] -> {id}
GET  /api/models/{id}/frontier            -> segments + critical points
POST /api/models/{id}/select              -> PortfolioSelection JSON
POST /api/models/{id}/report              -> Numeric-Template report text
GET  /healthz                             -> {"status": "ok"}

Errors are structured {code, message, line?}: 400 for validation
problems, 404 for unknown ids, 422 for out-of-range selections when the
request sets strict.
"""

from __future__ import annotations

from fastapi import FastAPI, File, Response, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .bundle import ModelStore, canonical_dumps, frontier_payload
from .frontier import SelectionStatus, report, select
from .mdl import MdlError
from .moments import InsufficientSamples, InvalidCorrelation, MissingQuote
from .pipeline import compile_bundle
from .qp import InfeasibleModel, NumericalBreakdown


class SelectRequest(BaseModel):
    by: str = Field(pattern="^(eta|e|s|r)$")
    value: float
    strict: bool = False


class ReportRequest(BaseModel):
    selections: list[SelectRequest]


def _error(status: int, code: str, message: str, line: int | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if line is not None:
        body["line"] = line
    return JSONResponse(body, status_code=status)


def create_app(store: ModelStore | None = None) -> FastAPI:
    app = FastAPI(title="cpoint", version="0.1.0")
    app.state.store = store if store is not None else ModelStore()

    @app.exception_handler(MdlError)
    async def _mdl_error(_, exc: MdlError):
        return _error(400, type(exc).__name__, str(exc), exc.line)

    @app.exception_handler(InvalidCorrelation)
    async def _corr_error(_, exc):
        return _error(400, "InvalidCorrelation", str(exc))

    @app.exception_handler(InfeasibleModel)
    async def _infeasible(_, exc):
        return _error(400, "InfeasibleModel", str(exc))

    @app.exception_handler(NumericalBreakdown)
    async def _breakdown(_, exc):
        return _error(400, "NumericalBreakdown", str(exc))

    @app.exception_handler(MissingQuote)
    async def _missing_quote(_, exc):
        return _error(400, "MissingQuote", str(exc))

    @app.exception_handler(InsufficientSamples)
    async def _few_samples(_, exc):
        return _error(400, "InsufficientSamples", str(exc))

    @app.exception_handler(ValueError)
    async def _value_error(_, exc):
        return _error(400, "ValueError", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/models")
    def create_model(
        model: UploadFile = File(...),
        moments: UploadFile = File(...),
        correl: UploadFile = File(...),
        deriv: UploadFile | None = File(None),
    ):
        out = compile_bundle(
            model.file.read().decode(),
            moments.file.read().decode(),
            correl.file.read().decode(),
            deriv.file.read().decode() if deriv is not None else None,
        )
        app.state.store.add(out.bundle)
        return {"id": out.bundle.id, "assets": out.bundle.model.names,
                "critical_points": len(out.bundle.path.etas)}

    def _canonical_json(payload) -> Response:
        # the CLI prints the same canonical serialization, so identical
        # inputs give byte-identical JSON bodies on either path
        return Response(canonical_dumps(payload), media_type="application/json")

    @app.get("/api/models/{model_id}/frontier")
    def get_frontier(model_id: str):
        bundle = app.state.store.get(model_id)
        if bundle is None:
            return _error(404, "not_found", f"no model {model_id}")
        return _canonical_json(frontier_payload(bundle.frontier))

    @app.post("/api/models/{model_id}/select")
    def post_select(model_id: str, req: SelectRequest):
        bundle = app.state.store.get(model_id)
        if bundle is None:
            return _error(404, "not_found", f"no model {model_id}")
        sel = select(bundle.frontier, req.by, req.value)
        if req.strict and sel.status in (SelectionStatus.OUT_OF_RANGE_HIGH,
                                         SelectionStatus.OUT_OF_RANGE_LOW):
            return _error(422, "out_of_range",
                          f"{req.by}={req.value} outside the frontier range")
        return _canonical_json(sel.as_dict())

    @app.post("/api/models/{model_id}/report")
    def post_report(model_id: str, req: ReportRequest):
        bundle = app.state.store.get(model_id)
        if bundle is None:
            return _error(404, "not_found", f"no model {model_id}")
        sels = [select(bundle.frontier, r.by, r.value) for r in req.selections]
        return PlainTextResponse(report(sels))

    return app
