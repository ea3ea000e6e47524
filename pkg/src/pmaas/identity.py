"""Identity service: principals, password auth, opaque bearer tokens, and
the header-annotating middleware placed in front of every other service.

Tokens are random 256-bit values validated by server-side lookup (not
self-validating), which keeps revocation and disablement immediate.
Passwords are stored only as salted scrypt records in a portable
``scrypt$N$r$p$salt$digest`` format.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import secrets
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Mapping

from pmaas.authz import Role, permissions_for
from pmaas.clockutil import Clock, SystemClock
from pmaas.errors import BadCredentials, Conflict, Disabled, NotFound, Unauthorized

AUTH_TOKEN_HEADER = "x-auth-token"
IDENTITY_STATUS_HEADER = "x-identity-status"
IDENTITY_PRINCIPAL_HEADER = "x-identity-principal"
IDENTITY_ROLE_HEADER = "x-identity-role"


class PrincipalKind(str, Enum):
    HUMAN = "human"
    DEVICE = "device"


@dataclass(frozen=True)
class PasswordRecord:
    """Salted scrypt hash with its cost parameters; never serialized to
    clients."""

    n: int
    r: int
    p: int
    salt: bytes
    digest: bytes
    algorithm: str = "scrypt"

    @classmethod
    def create(cls, password: str, n: int = 2**14, r: int = 8, p: int = 1) -> "PasswordRecord":
        salt = secrets.token_bytes(16)
        digest = hashlib.scrypt(password.encode(), salt=salt, n=n, r=r, p=p)
        return cls(n=n, r=r, p=p, salt=salt, digest=digest)

    def verify(self, password: str) -> bool:
        candidate = hashlib.scrypt(
            password.encode(), salt=self.salt, n=self.n, r=self.r, p=self.p
        )
        return hmac.compare_digest(candidate, self.digest)

    def encode(self) -> str:
        salt = base64.urlsafe_b64encode(self.salt).decode()
        digest = base64.urlsafe_b64encode(self.digest).decode()
        return f"{self.algorithm}${self.n}${self.r}${self.p}${salt}${digest}"

    @classmethod
    def decode(cls, record: str) -> "PasswordRecord":
        algorithm, n, r, p, salt, digest = record.split("$")
        if algorithm != "scrypt":
            raise ValueError(f"unsupported password hash algorithm {algorithm!r}")
        return cls(
            n=int(n),
            r=int(r),
            p=int(p),
            salt=base64.urlsafe_b64decode(salt),
            digest=base64.urlsafe_b64decode(digest),
        )


@dataclass(frozen=True)
class PrincipalSummary:
    id: str
    name: str
    role: Role
    kind: PrincipalKind


@dataclass
class Principal:
    id: str
    name: str
    kind: PrincipalKind
    role: Role
    password: PasswordRecord
    enabled: bool = True

    def summary(self) -> PrincipalSummary:
        return PrincipalSummary(id=self.id, name=self.name, role=self.role, kind=self.kind)


@dataclass(frozen=True)
class Token:
    value: str
    principal_id: str
    issued_at: datetime
    expires_at: datetime
    scopes: frozenset[str]


class StatusValue(str, Enum):
    CONFIRMED = "Confirmed"
    INVALID = "Invalid"


@dataclass(frozen=True)
class IdentityStatus:
    status: StatusValue
    principal: PrincipalSummary | None = None

    @property
    def confirmed(self) -> bool:
        return self.status is StatusValue.CONFIRMED


_KIND_FOR_ROLE = {
    Role.DEVICE_AGENT: PrincipalKind.DEVICE,
}


class IdentityService:
    """Principal registry and token issuer.

    Writes are serialized behind one lock; validation is a read-only dict
    lookup and safe under concurrent requests.
    """

    def __init__(
        self,
        clock: Clock | None = None,
        token_ttl: timedelta = timedelta(hours=1),
        scrypt_n: int = 2**14,
    ) -> None:
        self._clock = clock or SystemClock()
        self._token_ttl = token_ttl
        self._scrypt_n = scrypt_n
        self._principals: dict[str, Principal] = {}
        self._by_name: dict[str, str] = {}
        self._tokens: dict[str, Token] = {}
        self._lock = threading.Lock()
        # fixed-cost comparison target so unknown names take the same
        # verification work as wrong passwords
        self._dummy = PasswordRecord.create("*", n=scrypt_n)

    # -- provisioning -----------------------------------------------------

    def bootstrap_admin(self, name: str, password: str) -> Principal:
        """Create the first provider-admin account; refuses once one exists."""
        with self._lock:
            if any(p.role is Role.PROVIDER_ADMIN for p in self._principals.values()):
                raise Unauthorized("an admin account already exists")
            return self._create(name, password, Role.PROVIDER_ADMIN)

    def register_principal(
        self,
        admin_token: str,
        name: str,
        password: str,
        role: Role,
        kind: PrincipalKind | None = None,
    ) -> Principal:
        status = self.validate_token(admin_token)
        if not status.confirmed or status.principal.role is not Role.PROVIDER_ADMIN:
            raise Unauthorized("only the provider admin may register principals")
        with self._lock:
            return self._create(name, password, role, kind)

    def _create(
        self, name: str, password: str, role: Role, kind: PrincipalKind | None = None
    ) -> Principal:
        if not name:
            raise Conflict("principal name must be non-empty")
        existing = self._by_name.get(name)
        if existing is not None and self._principals[existing].enabled:
            raise Conflict(f"principal name {name!r} already in use")
        principal = Principal(
            id=uuid.uuid4().hex,
            name=name,
            kind=kind or _KIND_FOR_ROLE.get(role, PrincipalKind.HUMAN),
            role=role,
            password=PasswordRecord.create(password, n=self._scrypt_n),
        )
        self._principals[principal.id] = principal
        self._by_name[name] = principal.id
        return principal

    def disable_principal(self, admin_token: str, principal_id: str) -> None:
        status = self.validate_token(admin_token)
        if not status.confirmed or status.principal.role is not Role.PROVIDER_ADMIN:
            raise Unauthorized("only the provider admin may disable principals")
        with self._lock:
            principal = self._principals.get(principal_id)
            if principal is None:
                raise NotFound(f"no principal {principal_id!r}")
            principal.enabled = False

    def get_principal(self, principal_id: str) -> Principal:
        principal = self._principals.get(principal_id)
        if principal is None:
            raise NotFound(f"no principal {principal_id!r}")
        return principal

    def find_by_name(self, name: str) -> Principal | None:
        pid = self._by_name.get(name)
        return self._principals.get(pid) if pid is not None else None

    # -- authentication ---------------------------------------------------

    def authenticate(self, name: str, password: str) -> Token:
        principal = self.find_by_name(name)
        if principal is None:
            self._dummy.verify(password)
            raise BadCredentials("bad credentials")
        if not principal.password.verify(password):
            raise BadCredentials("bad credentials")
        if not principal.enabled:
            raise Disabled("principal is disabled")
        now = self._clock.now()
        token = Token(
            value=secrets.token_urlsafe(32),
            principal_id=principal.id,
            issued_at=now,
            expires_at=now + self._token_ttl,
            scopes=permissions_for(principal.role),
        )
        with self._lock:
            self._tokens[token.value] = token
        return token

    def validate_token(self, value: str | None) -> IdentityStatus:
        """Confirmed iff the token exists, is unexpired, and its principal
        is still enabled. Total: never raises for arbitrary input."""
        if not value or not isinstance(value, str):
            return IdentityStatus(StatusValue.INVALID)
        token = self._tokens.get(value)
        if token is None:
            return IdentityStatus(StatusValue.INVALID)
        if self._clock.now() >= token.expires_at:
            return IdentityStatus(StatusValue.INVALID)
        principal = self._principals.get(token.principal_id)
        if principal is None or not principal.enabled:
            return IdentityStatus(StatusValue.INVALID)
        return IdentityStatus(StatusValue.CONFIRMED, principal.summary())

    def revoke_token(self, value: str) -> None:
        with self._lock:
            self._tokens.pop(value, None)

    # -- middleware -------------------------------------------------------

    def middleware_annotate(self, headers: Mapping[str, str]) -> dict[str, str]:
        """Return identity annotation headers for a request.

        Client-supplied copies of the identity headers must be discarded by
        the caller before merging these in; the returned mapping always
        contains exactly one X-Identity-Status.
        """
        status = self.validate_token(headers.get(AUTH_TOKEN_HEADER))
        annotations = {IDENTITY_STATUS_HEADER: status.status.value}
        if status.confirmed:
            annotations[IDENTITY_PRINCIPAL_HEADER] = status.principal.id
            annotations[IDENTITY_ROLE_HEADER] = status.principal.role.value
        return annotations

    def health(self) -> str:
        return "up"
