"""HTTP ingestion and query gateway.

Endpoints (JSON bodies, ISO-8601 UTC timestamps):
    POST /v1/nodes                        register a node before ingesting
    POST /v1/records                      batch ingest, idempotent on (node, ts)
    GET  /v1/query?nodes=&from=&to=[&metric=]
    GET  /v1/compare?node=&metric=&from=&to=

Error bodies are {"code": <machine-readable>, "message": ...} with codes
unknown-node, conflict, validation, invalid-range, no-data, lone-node.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import (
    ConflictError,
    InvalidRange,
    LoneNode,
    NoData,
    QcError,
    UnknownNode,
    ValidationError,
)
from .records import METRIC_FIELDS, format_ts, parse_ts, record_from_dict, record_to_dict
from .store import RecordStore

MAX_BATCH_RECORDS = 10_000

_STATUS = {
    "validation": 400,
    "invalid-range": 400,
    "parse-error": 400,
    "unknown-node": 404,
    "no-data": 404,
    "conflict": 409,
    "lone-node": 409,
    "out-of-range": 400,
    "invalid-parameter": 400,
}


@dataclass(frozen=True)
class NodeRegistration:
    node_id: str
    lat: float
    lon: float
    placement: str
    elevation_m: float = 0.0
    registered_at: datetime | None = None
    team_id: str | None = None  # field-kit devices ride the same fleet registry

    def __post_init__(self):
        if not self.node_id:
            raise ValidationError("node_id", "node_id must be non-empty")
        if self.placement not in ("roof", "ground", "indoor", "mobile"):
            raise ValidationError("placement", f"unknown placement {self.placement!r}")


@dataclass(frozen=True)
class ComparisonResult:
    node_id: str
    metric: str
    t0: datetime
    t1: datetime
    node_mean: float
    node_count: int
    neighborhood_mean: float | None
    neighborhood_count: int
    ratio: float | None


class Gateway:
    """Transport-free core; the FastAPI app is a thin shell over this."""

    def __init__(self, store: RecordStore):
        self.store = store
        self._registry: dict[str, NodeRegistration] = {}
        self._lock = threading.Lock()

    def register_node(self, reg: NodeRegistration):
        with self._lock:
            if reg.node_id in self._registry:
                raise ConflictError(f"node {reg.node_id!r} already registered")
            if reg.registered_at is None:
                reg = NodeRegistration(
                    node_id=reg.node_id,
                    lat=reg.lat,
                    lon=reg.lon,
                    placement=reg.placement,
                    elevation_m=reg.elevation_m,
                    registered_at=datetime.now(timezone.utc),
                    team_id=reg.team_id,
                )
            self._registry[reg.node_id] = reg
        return reg

    def registrations(self):
        with self._lock:
            return dict(self._registry)

    def is_registered(self, node_id: str) -> bool:
        with self._lock:
            return node_id in self._registry

    def ingest_batch(self, node_id: str, records):
        if not self.is_registered(node_id):
            raise UnknownNode(f"node {node_id!r} is not registered")
        if len(records) > MAX_BATCH_RECORDS:
            raise ValidationError(
                "records", f"batch exceeds {MAX_BATCH_RECORDS} records"
            )
        for rec in records:
            if rec.node_id != node_id:
                raise ValidationError(
                    "node_id", f"batch for {node_id!r} contains record for {rec.node_id!r}"
                )
        return self.store.append(records)

    def query(self, node_ids, t0, t1):
        return self.store.query(node_ids, t0, t1)

    def compare(self, node_id: str, metric: str, t0, t1) -> ComparisonResult:
        if metric not in METRIC_FIELDS:
            raise ValidationError("metric", f"unknown metric {metric!r}")
        if not self.is_registered(node_id):
            raise UnknownNode(f"node {node_id!r} is not registered")
        if t1 <= t0:
            raise InvalidRange(f"empty window [{t0}, {t1})")
        own = [r.value(metric) for r in self.store.query([node_id], t0, t1)]
        if not own:
            raise NoData(f"no records for {node_id!r} in window")
        others = [n for n in self.registrations() if n != node_id]
        node_mean = float(np.mean(own))
        if not others:
            raise LoneNode(f"node {node_id!r} is the only registered node")
        neigh = [r.value(metric) for r in self.store.query(others, t0, t1)]
        neigh_mean = float(np.mean(neigh)) if neigh else None
        ratio = None
        if neigh_mean is not None and neigh_mean != 0.0:
            ratio = node_mean / neigh_mean
        return ComparisonResult(
            node_id=node_id,
            metric=metric,
            t0=t0,
            t1=t1,
            node_mean=node_mean,
            node_count=len(own),
            neighborhood_mean=neigh_mean,
            neighborhood_count=len(neigh),
            ratio=ratio,
        )


def _error_response(exc: QcError) -> JSONResponse:
    status = _STATUS.get(exc.code, 500)
    return JSONResponse(
        status_code=status, content={"code": exc.code, "message": str(exc)}
    )


def _parse_window(params) -> tuple[datetime, datetime]:
    try:
        t0 = parse_ts(params["from"])
        t1 = parse_ts(params["to"])
    except KeyError as e:
        raise ValidationError(str(e.args[0]), f"missing query parameter {e.args[0]}") from e
    except ValueError as e:
        raise ValidationError("from/to", str(e)) from e
    if t1 <= t0:
        raise InvalidRange(f"empty window [{t0}, {t1})")
    return t0, t1


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="qcsense gateway")
    app.state.gateway = gateway

    @app.exception_handler(QcError)
    async def handle_qc_error(request, exc: QcError):
        return _error_response(exc)

    @app.post("/v1/nodes")
    async def register(request: Request):
        body = await request.json()
        try:
            reg = NodeRegistration(
                node_id=str(body.get("node_id", "")),
                lat=float(body["lat"]),
                lon=float(body["lon"]),
                placement=str(body.get("placement", "ground")),
                elevation_m=float(body.get("elevation_m", 0.0)),
                team_id=body.get("team_id"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError("body", f"bad registration body: {e}") from e
        reg = gateway.register_node(reg)
        return {"node_id": reg.node_id, "registered_at": format_ts(reg.registered_at)}

    @app.post("/v1/records")
    async def ingest(request: Request):
        body = await request.json()
        node_id = str(body.get("node_id", ""))
        raw = body.get("records")
        if not isinstance(raw, list):
            raise ValidationError("records", "'records' must be a list")
        if len(raw) > MAX_BATCH_RECORDS:
            return JSONResponse(
                status_code=413,
                content={
                    "code": "validation",
                    "message": f"batch exceeds {MAX_BATCH_RECORDS} records",
                },
            )
        records = [record_from_dict(d) for d in raw]
        result = gateway.ingest_batch(node_id, records)
        return {"accepted": result.added, "duplicates": result.duplicates}

    @app.get("/v1/query")
    async def query(request: Request):
        params = request.query_params
        t0, t1 = _parse_window(params)
        nodes = params.get("nodes")
        node_ids = nodes.split(",") if nodes else None
        metric = params.get("metric")
        records = gateway.query(node_ids, t0, t1)
        if metric is not None:
            if metric not in METRIC_FIELDS:
                raise ValidationError("metric", f"unknown metric {metric!r}")
            return {
                "series": [
                    {"node_id": r.node_id, "ts": format_ts(r.ts), "value": r.value(metric)}
                    for r in records
                ]
            }
        return {"records": [record_to_dict(r) for r in records]}

    @app.get("/v1/compare")
    async def compare(request: Request):
        params = request.query_params
        t0, t1 = _parse_window(params)
        node = params.get("node")
        metric = params.get("metric")
        if not node or not metric:
            raise ValidationError("node/metric", "node and metric are required")
        result = gateway.compare(node, metric, t0, t1)
        return {
            "node_id": result.node_id,
            "metric": result.metric,
            "from": format_ts(result.t0),
            "to": format_ts(result.t1),
            "node_mean": result.node_mean,
            "node_count": result.node_count,
            "neighborhood_mean": result.neighborhood_mean,
            "neighborhood_count": result.neighborhood_count,
            "ratio": result.ratio,
        }

    return app
