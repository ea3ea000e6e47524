"""Role-based authorization matrix.

The platform's user categories (provider admin, producer, end user,
contributor) plus the device-agent role each map to a fixed permission set.
This table is a reasoned reconstruction: the source material describes the
roles but not a per-endpoint matrix, so the assignments below are this
platform's documented policy (see docs/authorization-matrix.md). Gateway
routes declare one required permission each and the matrix drives both
enforcement and the exhaustive (role x route) tests.
"""

from __future__ import annotations

from enum import Enum


class Role(str, Enum):
    PROVIDER_ADMIN = "provider_admin"
    PRODUCER = "producer"
    END_USER = "end_user"
    CONTRIBUTOR = "contributor"
    DEVICE_AGENT = "device_agent"


PERM_PRINCIPALS_MANAGE = "principals:manage"
PERM_PRODUCTS_WRITE = "products:write"
PERM_PRODUCTS_READ = "products:read"
PERM_CAPTURE_WRITE = "capture:write"
PERM_EVENTS_READ = "events:read"
PERM_METRICS_WRITE = "metrics:write"
PERM_MEASURES_PUSH = "measures:push"
PERM_MEASURES_READ = "measures:read"
PERM_POLICIES_WRITE = "policies:write"
PERM_DEVICES_READ = "devices:read"
PERM_DEVICES_BIND = "devices:bind"
PERM_DEVICES_PROVISION = "devices:provision"
PERM_TRACE_READ = "trace:read"

ALL_PERMISSIONS = frozenset(
    {
        PERM_PRINCIPALS_MANAGE,
        PERM_PRODUCTS_WRITE,
        PERM_PRODUCTS_READ,
        PERM_CAPTURE_WRITE,
        PERM_EVENTS_READ,
        PERM_METRICS_WRITE,
        PERM_MEASURES_PUSH,
        PERM_MEASURES_READ,
        PERM_POLICIES_WRITE,
        PERM_DEVICES_READ,
        PERM_DEVICES_BIND,
        PERM_DEVICES_PROVISION,
        PERM_TRACE_READ,
    }
)

PERMISSIONS: dict[Role, frozenset[str]] = {
    Role.PROVIDER_ADMIN: ALL_PERMISSIONS,
    Role.PRODUCER: frozenset(
        {
            PERM_PRODUCTS_WRITE,
            PERM_PRODUCTS_READ,
            PERM_CAPTURE_WRITE,
            PERM_EVENTS_READ,
            PERM_MEASURES_READ,
            PERM_DEVICES_READ,
            PERM_TRACE_READ,
        }
    ),
    Role.CONTRIBUTOR: frozenset(
        {
            PERM_PRODUCTS_READ,
            PERM_CAPTURE_WRITE,
            PERM_EVENTS_READ,
            PERM_METRICS_WRITE,
            PERM_MEASURES_READ,
            PERM_DEVICES_READ,
            PERM_DEVICES_BIND,
            PERM_TRACE_READ,
        }
    ),
    Role.END_USER: frozenset({PERM_PRODUCTS_READ, PERM_TRACE_READ}),
    Role.DEVICE_AGENT: frozenset({PERM_MEASURES_PUSH}),
}


def permissions_for(role: Role) -> frozenset[str]:
    return PERMISSIONS[role]


def has_permission(role: Role, permission: str) -> bool:
    return permission in PERMISSIONS[role]
