"""Shared error taxonomy.

Every service error carries a machine-readable ``code`` and the HTTP status
the gateway maps it to, so the REST layer can produce uniform error
envelopes without per-endpoint translation tables.
"""

from __future__ import annotations


class PlatformError(Exception):
    code = "error"
    http_status = 400


class Unauthorized(PlatformError):
    code = "forbidden"
    http_status = 403


class BadCredentials(PlatformError):
    code = "bad_credentials"
    http_status = 401


class Disabled(PlatformError):
    code = "principal_disabled"
    http_status = 401


class NotFound(PlatformError):
    code = "not_found"
    http_status = 404


class Conflict(PlatformError):
    code = "conflict"
    http_status = 409


class ValidationError(PlatformError):
    code = "validation_error"
    http_status = 422
