"""REST gateway: the single entry point mounting every service interface.

All requests pass the identity middleware first: client-supplied copies of
the identity headers are stripped, the presented token (X-Auth-Token) is
validated, and exactly one ``X-Identity-Status: Confirmed|Invalid`` header
is injected before any handler runs. Handlers echo the status they observed
back as a response header, which doubles as the middleware witness for
tests.

Every route is declared in ``ROUTES`` with the one permission it requires,
so the authorization matrix covers the whole surface by construction; the
only unauthenticated routes are token issuance, token validation, health,
the UI config, and the device channel (which authenticates in-protocol).

Every non-2xx response body is exactly one error envelope
``{"code", "message", "details"}``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Any, Callable

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.exceptions import HTTPException as StarletteHTTPException

from pmaas.authz import (
    PERM_CAPTURE_WRITE,
    PERM_DEVICES_BIND,
    PERM_DEVICES_PROVISION,
    PERM_DEVICES_READ,
    PERM_EVENTS_READ,
    PERM_MEASURES_PUSH,
    PERM_MEASURES_READ,
    PERM_METRICS_WRITE,
    PERM_POLICIES_WRITE,
    PERM_PRINCIPALS_MANAGE,
    PERM_PRODUCTS_READ,
    PERM_PRODUCTS_WRITE,
    PERM_TRACE_READ,
    Role,
    has_permission,
)
from pmaas.clockutil import format_iso8601_ms, parse_iso8601
from pmaas.devices import DeviceRecord, MessageDecoder, ProtocolViolation, encode_message
from pmaas.epc import EpcParseError, IdentificationLevel, parse_epc
from pmaas.epcis import EventKind, event_to_json, from_xml
from pmaas.errors import PlatformError, ValidationError
from pmaas.event_store import EventFilter
from pmaas.identity import (
    AUTH_TOKEN_HEADER,
    IDENTITY_PRINCIPAL_HEADER,
    IDENTITY_ROLE_HEADER,
    IDENTITY_STATUS_HEADER,
    PrincipalSummary,
    StatusValue,
)
from pmaas.journey import journey_to_json
from pmaas.platform import Platform
from pmaas.registry import (
    Bounds,
    GtinBase,
    MonitoredParameter,
    MonitoringSpec,
    Product,
    PublicProductView,
)
from pmaas.timeseries import (
    AGGREGATION_METHODS,
    ArchivePolicy,
    Measurement,
    Parameter,
    PolicyDefinition,
)

Handler = Callable[[Platform, Request, bytes, PrincipalSummary | None], tuple[int, Any]]


@dataclass(frozen=True)
class RouteSpec:
    method: str
    path: str
    name: str
    permission: str | None
    handler: Handler


def _envelope(
    status: int, code: str, message: str, witness: dict[str, str], details: Any = None
) -> JSONResponse:
    body = {"code": code, "message": message}
    if details is not None:
        body["details"] = details
    return JSONResponse(body, status_code=status, headers=witness)


def _json_body(body: bytes) -> dict:
    if not body:
        raise ValidationError("request body must be a JSON object")
    try:
        parsed = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(parsed, (dict, list)):
        raise ValidationError("request body must be a JSON object or array")
    return parsed


def _require(payload: dict, key: str) -> Any:
    if key not in payload or payload[key] in (None, ""):
        raise ValidationError(f"field {key!r} is required")
    return payload[key]


# -- serialization helpers ----------------------------------------------------


def _product_view(product: Product, include_monitoring: bool = True) -> dict:
    view = {
        "id": product.id,
        "owner": product.owner,
        "gtin_base": {
            "company_prefix": product.gtin_base.company_prefix,
            "item_reference": product.gtin_base.item_reference,
        },
        "name": product.name,
        "description": product.description,
        "origin": product.origin,
        "ingredients": product.ingredients,
        "optimum_usage": product.optimum_usage,
    }
    if include_monitoring:
        view["monitoring"] = {
            "parameters": sorted(p.value for p in product.monitoring.parameters),
            "bounds": {
                p.value: {"min": b.min, "max": b.max}
                for p, b in product.monitoring.bounds
            },
        }
    return view


def _device_view(record: DeviceRecord) -> dict:
    return {
        "device_id": record.device_id,
        "label": record.label,
        "owner_id": record.owner_id,
        "sensors": sorted(s.value for s in record.sensors),
        "bound_location": record.bound_location.raw if record.bound_location else None,
        "connection_state": record.connection_state.value,
        "last_seen": format_iso8601_ms(record.last_seen) if record.last_seen else None,
    }


# -- handlers -----------------------------------------------------------------


def _auth_tokens(platform: Platform, request: Request, body: bytes, _p) -> tuple[int, Any]:
    payload = _json_body(body)
    token = platform.identity.authenticate(
        _require(payload, "name"), _require(payload, "password")
    )
    return 201, {
        "token": token.value,
        "expires_at": format_iso8601_ms(token.expires_at),
    }


def _auth_validate(platform: Platform, request: Request, body: bytes, _p) -> tuple[int, Any]:
    status = platform.identity.validate_token(request.headers.get(AUTH_TOKEN_HEADER))
    out: dict[str, Any] = {"status": status.status.value}
    if status.confirmed:
        out["principal"] = {
            "id": status.principal.id,
            "name": status.principal.name,
            "role": status.principal.role.value,
            "kind": status.principal.kind.value,
        }
    return 200, out


def _principals_create(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    try:
        role = Role(_require(payload, "role"))
    except ValueError as exc:
        raise ValidationError(f"unknown role {payload.get('role')!r}") from exc
    created = platform.identity.register_principal(
        request.headers.get(AUTH_TOKEN_HEADER, ""),
        _require(payload, "name"),
        _require(payload, "password"),
        role,
    )
    return 201, {
        "id": created.id,
        "name": created.name,
        "role": created.role.value,
        "kind": created.kind.value,
    }


def _products_create(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    base = _require(payload, "gtin_base")
    product = platform.registry.create_product(
        principal,
        name=payload.get("name", ""),
        gtin_base=GtinBase(
            _require(base, "company_prefix"), _require(base, "item_reference")
        ),
        description=payload.get("description", ""),
        origin=payload.get("origin", ""),
        ingredients=payload.get("ingredients", ""),
        optimum_usage=payload.get("optimum_usage", ""),
    )
    return 201, _product_view(product)


def _products_list(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    found = platform.registry.discover_products(
        principal, request.query_params.get("filter")
    )
    out = []
    for item in found:
        if isinstance(item, PublicProductView):
            out.append(
                {
                    "id": item.id,
                    "name": item.name,
                    "origin": item.origin,
                    "description": item.description,
                }
            )
        else:
            view = _product_view(item)
            view["units"] = [
                {
                    "unit_id": u.unit_id.raw,
                    "level": u.level.value,
                    "lot_or_serial": u.lot_or_serial,
                    "quantity": u.quantity,
                }
                for u in platform.registry.units_of(item.id)
            ]
            out.append(view)
    return 200, {"products": out}


def _units_create(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    level_raw = _require(payload, "level")
    try:
        level = IdentificationLevel(level_raw)
    except ValueError as exc:
        raise ValidationError(f"level must be 'instance' or 'batch', got {level_raw!r}") from exc
    units = platform.registry.create_units(
        principal,
        request.path_params["product_id"],
        level,
        serials=payload.get("serials"),
        lot=payload.get("lot"),
        quantity=payload.get("quantity"),
    )
    return 201, {
        "units": [
            {
                "unit_id": u.unit_id.raw,
                "level": u.level.value,
                "lot_or_serial": u.lot_or_serial,
                "quantity": u.quantity,
                "created_at": format_iso8601_ms(u.created_at),
            }
            for u in units
        ]
    }


def _monitoring_put(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    try:
        parameters = frozenset(
            MonitoredParameter(p) for p in payload.get("parameters", [])
        )
        bounds = tuple(
            (
                MonitoredParameter(name),
                Bounds(min=limits.get("min"), max=limits.get("max")),
            )
            for name, limits in sorted(payload.get("bounds", {}).items())
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    product = platform.registry.set_monitoring(
        principal,
        request.path_params["product_id"],
        MonitoringSpec(parameters=parameters, bounds=bounds),
    )
    return 200, _product_view(product)


def _capture(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    doc = from_xml(body)
    receipt = platform.events.capture(
        principal.id, doc, idempotency_key=request.headers.get("idempotency-key")
    )
    return 200 if receipt.duplicate else 201, {
        "accepted_count": receipt.accepted_count,
        "first_event_id": receipt.first_event_id,
        "duplicate": receipt.duplicate,
    }


def _events_query(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    params = request.query_params
    epc = None
    if params.get("epc"):
        epc = parse_epc(params["epc"])
    kind = None
    if params.get("kind"):
        try:
            kind = EventKind(params["kind"])
        except ValueError as exc:
            raise ValidationError(f"unknown event kind {params['kind']!r}") from exc
    time_range = None
    if params.get("from") or params.get("to"):
        if not (params.get("from") and params.get("to")):
            raise ValidationError("'from' and 'to' must be given together")
        time_range = (parse_iso8601(params["from"]), parse_iso8601(params["to"]))
    try:
        limit = int(params.get("limit", "100"))
    except ValueError as exc:
        raise ValidationError("limit must be an integer") from exc
    page = platform.events.query_events(
        EventFilter(
            epc=epc,
            kind=kind,
            biz_location=params.get("location") or None,
            time_range=time_range,
            capturer=params.get("capturer") or None,
        ),
        after=params.get("page") or None,
        limit=limit,
    )
    return 200, {
        "events": [
            {
                "event_id": s.event_id,
                "record_time": format_iso8601_ms(s.record_time),
                "capturer": s.capturer,
                "event": event_to_json(s.event),
            }
            for s in page.events
        ],
        "next_page": page.next_cursor,
    }


def _policies_create(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    definitions = tuple(
        PolicyDefinition(float(d["granularity"]), int(d["points"]))
        for d in _require(payload, "definitions")
    )
    methods = frozenset(payload.get("aggregation_methods", AGGREGATION_METHODS))
    policy = platform.timeseries.create_archive_policy(
        principal,
        ArchivePolicy(
            name=_require(payload, "name"),
            definitions=definitions,
            aggregation_methods=methods,
        ),
    )
    return 201, {
        "name": policy.name,
        "definitions": [
            {"granularity": d.granularity_s, "points": d.points} for d in policy.definitions
        ],
        "aggregation_methods": sorted(policy.aggregation_methods),
    }


def _metrics_create(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    device_id = _require(payload, "device_id")
    record = platform.devices.get_device(device_id)
    try:
        parameter = Parameter(_require(payload, "parameter"))
    except ValueError as exc:
        raise ValidationError(f"unknown parameter {payload.get('parameter')!r}") from exc
    metric = platform.timeseries.create_metric(
        principal,
        platform.devices.principal_id_of(device_id),
        parameter,
        payload.get("policy", "medium"),
        device_owner_id=record.owner_id,
    )
    return 201, {
        "id": metric.id,
        "device_id": device_id,
        "parameter": metric.parameter.value,
        "policy": metric.policy_name,
    }


def _measures_push(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    if not isinstance(payload, list):
        raise ValidationError("measures body must be a JSON array of [timestamp, value]")
    batch = [Measurement(parse_iso8601(ts), float(value)) for ts, value in payload]
    ack = platform.timeseries.push_measures(
        principal, request.path_params["metric_id"], batch
    )
    return 200, {"ingested": ack.ingested, "deduplicated": ack.deduplicated}


def _measures_get(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    params = request.query_params
    points = platform.timeseries.get_aggregates(
        principal,
        request.path_params["metric_id"],
        parse_iso8601(_require_param(params, "start")),
        parse_iso8601(_require_param(params, "stop")),
        float(_require_param(params, "granularity")),
        params.get("aggregation", "avg"),
    )
    return 200, {
        "measures": [[format_iso8601_ms(p.window_start), p.value] for p in points]
    }


def _require_param(params, key: str) -> str:
    value = params.get(key)
    if not value:
        raise ValidationError(f"query parameter {key!r} is required")
    return value


def _devices_list(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    records = platform.devices.list_devices(principal)
    return 200, {"devices": [_device_view(r) for r in records]}


def _devices_provision(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    try:
        sensors = {Parameter(s) for s in _require(payload, "sensors")}
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    owner_name = _require(payload, "owner")
    owner = platform.identity.find_by_name(owner_name)
    if owner is None:
        raise ValidationError(f"unknown owner principal {owner_name!r}")
    record = platform.devices.provision_device(
        request.headers.get(AUTH_TOKEN_HEADER, ""),
        name=_require(payload, "name"),
        password=_require(payload, "password"),
        label=payload.get("label", payload["name"]),
        sensors=sensors,
        owner_id=owner.id,
        policy_name=payload.get("policy", "medium"),
    )
    return 201, _device_view(record)


def _device_bind(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    payload = _json_body(body)
    location = parse_epc(_require(payload, "location"))
    record = platform.devices.bind_location(
        principal, request.path_params["device_id"], location
    )
    return 200, _device_view(record)


def _trace(
    platform: Platform, request: Request, body: bytes, principal: PrincipalSummary
) -> tuple[int, Any]:
    unit = parse_epc(request.path_params["epc"])
    granularity = float(request.query_params.get("granularity", "60"))
    journey = platform.journey.trace_product(principal, unit, granularity_s=granularity)
    return 200, journey_to_json(journey)


def _health(platform: Platform, request: Request, body: bytes, _p) -> tuple[int, Any]:
    return 200, platform.health()


def _ui_config(platform: Platform, request: Request, body: bytes, _p) -> tuple[int, Any]:
    return 200, {"api_base": "/v1", "poll_interval_s": 30}


ROUTES: tuple[RouteSpec, ...] = (
    RouteSpec("POST", "/v1/auth/tokens", "auth_tokens", None, _auth_tokens),
    RouteSpec("GET", "/v1/auth/validate", "auth_validate", None, _auth_validate),
    RouteSpec("POST", "/v1/principals", "principals_create", PERM_PRINCIPALS_MANAGE, _principals_create),
    RouteSpec("POST", "/v1/products", "products_create", PERM_PRODUCTS_WRITE, _products_create),
    RouteSpec("GET", "/v1/products", "products_list", PERM_PRODUCTS_READ, _products_list),
    RouteSpec("POST", "/v1/products/{product_id}/units", "units_create", PERM_PRODUCTS_WRITE, _units_create),
    RouteSpec("PUT", "/v1/products/{product_id}/monitoring", "monitoring_put", PERM_PRODUCTS_WRITE, _monitoring_put),
    RouteSpec("POST", "/v1/epcis/capture", "capture", PERM_CAPTURE_WRITE, _capture),
    RouteSpec("GET", "/v1/epcis/events", "events_query", PERM_EVENTS_READ, _events_query),
    RouteSpec("POST", "/v1/archive_policies", "policies_create", PERM_POLICIES_WRITE, _policies_create),
    RouteSpec("POST", "/v1/metrics", "metrics_create", PERM_METRICS_WRITE, _metrics_create),
    RouteSpec("POST", "/v1/metrics/{metric_id}/measures", "measures_push", PERM_MEASURES_PUSH, _measures_push),
    RouteSpec("GET", "/v1/metrics/{metric_id}/measures", "measures_get", PERM_MEASURES_READ, _measures_get),
    RouteSpec("GET", "/v1/devices", "devices_list", PERM_DEVICES_READ, _devices_list),
    RouteSpec("POST", "/v1/devices", "devices_provision", PERM_DEVICES_PROVISION, _devices_provision),
    RouteSpec("POST", "/v1/devices/{device_id}/binding", "device_bind", PERM_DEVICES_BIND, _device_bind),
    RouteSpec("GET", "/v1/trace/{epc}", "trace", PERM_TRACE_READ, _trace),
    RouteSpec("GET", "/health", "health", None, _health),
    RouteSpec("GET", "/ui/config.json", "ui_config", None, _ui_config),
)


# -- middleware ---------------------------------------------------------------


class IdentityMiddleware:
    """Strip client-supplied identity headers, validate the token, and
    inject the authoritative annotation before anything else runs."""

    def __init__(self, app, platform: Platform) -> None:
        self._app = app
        self._platform = platform

    async def __call__(self, scope, receive, send) -> None:
        if scope["type"] in ("http", "websocket"):
            headers = [
                (k, v)
                for k, v in scope["headers"]
                if not k.lower().startswith(b"x-identity-")
            ]
            token = None
            for k, v in headers:
                if k.lower() == AUTH_TOKEN_HEADER.encode():
                    token = v.decode("latin-1")
            annotations = self._platform.identity.middleware_annotate(
                {AUTH_TOKEN_HEADER: token} if token else {}
            )
            for key, value in annotations.items():
                headers.append((key.encode(), value.encode()))
            scope = dict(scope)
            scope["headers"] = headers
        await self._app(scope, receive, send)


def _make_endpoint(spec: RouteSpec, platform: Platform):
    async def endpoint(request: Request) -> Response:
        status_seen = request.headers.get(IDENTITY_STATUS_HEADER, StatusValue.INVALID.value)
        witness = {IDENTITY_STATUS_HEADER.title(): status_seen}
        try:
            principal: PrincipalSummary | None = None
            if spec.permission is not None:
                if status_seen != StatusValue.CONFIRMED.value:
                    return _envelope(
                        401, "identity_invalid", "identity not confirmed", witness
                    )
                role = Role(request.headers[IDENTITY_ROLE_HEADER])
                if not has_permission(role, spec.permission):
                    return _envelope(
                        403,
                        "forbidden",
                        f"role {role.value} lacks {spec.permission}",
                        witness,
                    )
                principal = platform.identity.get_principal(
                    request.headers[IDENTITY_PRINCIPAL_HEADER]
                ).summary()
            body = await request.body()
            status_code, payload = spec.handler(platform, request, body, principal)
            return JSONResponse(payload, status_code=status_code, headers=witness)
        except EpcParseError as exc:
            return _envelope(422, "invalid_epc", str(exc), witness)
        except PlatformError as exc:
            details = None
            reports = getattr(exc, "reports", None)
            if reports is not None:
                details = {
                    "events": {
                        str(i): [v.code for v in r.violations]
                        for i, r in sorted(reports.items())
                    }
                }
            return _envelope(exc.http_status, exc.code, str(exc), witness, details)
        except ValueError as exc:
            return _envelope(422, "validation_error", str(exc), witness)

    return endpoint


def build_app(platform: Platform, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pmaas", docs_url=None, redoc_url=None, openapi_url=None)

    for spec in ROUTES:
        app.add_api_route(
            spec.path,
            _make_endpoint(spec, platform),
            methods=[spec.method],
            name=spec.name,
        )

    @app.websocket("/v1/devices/channel")
    async def device_channel(ws: WebSocket) -> None:
        await ws.accept()
        handler = platform.open_channel()
        decoder = MessageDecoder()
        try:
            while not handler.closed:
                data = await ws.receive_bytes()
                for message in decoder.feed(data):
                    reply = handler.handle(message)
                    await ws.send_bytes(encode_message(reply))
        except (WebSocketDisconnect, ProtocolViolation):
            pass
        finally:
            handler.close()

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_envelope(request: Request, exc: StarletteHTTPException):
        codes = {404: "not_found", 405: "method_not_allowed"}
        return JSONResponse(
            {"code": codes.get(exc.status_code, "http_error"), "message": str(exc.detail)},
            status_code=exc.status_code,
        )

    if ui_dir is not None and os.path.isdir(ui_dir):
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    app.state.platform = platform
    app.add_middleware(IdentityMiddleware, platform=platform)
    return app
