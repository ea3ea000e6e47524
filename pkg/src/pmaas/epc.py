"""GS1 EPC pure-identity URI parsing, formatting, and classification.

Supports the four schemes the platform uses: SGTIN and SSCC and SGLN under
``urn:epc:id:``, and LGTIN under ``urn:epc:class:``. Validation is lenient
by default (component shape only); GS1 digit-count rules are opt-in via
``strict=True`` because real-world tags are not uniformly conformant.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class EpcParseError(ValueError):
    """Base class for EPC URI parse failures."""


class UnknownScheme(EpcParseError):
    """URI prefix is not one of the four supported scheme namespaces."""


class MalformedComponents(EpcParseError):
    """Wrong component count, empty component, or bad characters."""


class DigitCountViolation(EpcParseError):
    """Strict mode only: GS1 combined digit-length rules not met."""


class EpcScheme(str, Enum):
    SGTIN = "sgtin"
    SSCC = "sscc"
    LGTIN = "lgtin"
    SGLN = "sgln"


class IdentificationLevel(str, Enum):
    INSTANCE = "instance"
    BATCH = "batch"


_ID_NS = "urn:epc:id"
_CLASS_NS = "urn:epc:class"

# (namespace, scheme token) -> scheme
_SCHEME_BY_PREFIX = {
    (_ID_NS, "sgtin"): EpcScheme.SGTIN,
    (_ID_NS, "sscc"): EpcScheme.SSCC,
    (_ID_NS, "sgln"): EpcScheme.SGLN,
    (_CLASS_NS, "lgtin"): EpcScheme.LGTIN,
}

_NAMESPACE_OF = {
    EpcScheme.SGTIN: _ID_NS,
    EpcScheme.SSCC: _ID_NS,
    EpcScheme.SGLN: _ID_NS,
    EpcScheme.LGTIN: _CLASS_NS,
}

_DIGITS_RE = re.compile(r"^[0-9]+$")
# Serial / lot / extension: GS1 allows a wider graphic set, but the platform
# mints and accepts the safe alphanumeric subset (plus - _ %) to keep URIs
# unambiguous in dotted form.
_SERIAL_RE = re.compile(r"^[A-Za-z0-9%*_-]+$")

# strict mode: required combined digit count of company_prefix + reference
_STRICT_COMBINED = {
    EpcScheme.SGTIN: 13,
    EpcScheme.LGTIN: 13,
    EpcScheme.SSCC: 17,
    EpcScheme.SGLN: 12,
}
_STRICT_SERIAL_MAX = 20


@dataclass(frozen=True)
class EpcUri:
    """A parsed pure-identity EPC.

    ``reference`` is the scheme's second component (item reference, serial
    reference, or location reference); ``serial_or_lot`` is the SGTIN
    serial, LGTIN lot, or SGLN extension and is absent for SSCC (and for
    SGLN URIs written without an extension). ``raw`` is the canonical URI.
    """

    scheme: EpcScheme
    company_prefix: str
    reference: str
    serial_or_lot: str | None = None
    raw: str = field(default="", compare=True)

    def __post_init__(self) -> None:
        if not _DIGITS_RE.match(self.company_prefix):
            raise MalformedComponents(
                f"company prefix must be digits: {self.company_prefix!r}"
            )
        if not _DIGITS_RE.match(self.reference):
            raise MalformedComponents(f"reference must be digits: {self.reference!r}")
        if self.scheme is EpcScheme.SSCC:
            if self.serial_or_lot is not None:
                raise MalformedComponents("sscc has exactly two components")
        elif self.serial_or_lot is None:
            if self.scheme is not EpcScheme.SGLN:
                raise MalformedComponents(f"{self.scheme.value} requires a third component")
        if self.serial_or_lot is not None and not _SERIAL_RE.match(self.serial_or_lot):
            raise MalformedComponents(
                f"serial/lot has unsupported characters: {self.serial_or_lot!r}"
            )
        object.__setattr__(self, "raw", self._canonical())

    def _canonical(self) -> str:
        body = f"{self.company_prefix}.{self.reference}"
        if self.serial_or_lot is not None:
            body += f".{self.serial_or_lot}"
        return f"{_NAMESPACE_OF[self.scheme]}:{self.scheme.value}:{body}"

    def __str__(self) -> str:
        return self.raw


def sgtin(company_prefix: str, item_reference: str, serial: str) -> EpcUri:
    return EpcUri(EpcScheme.SGTIN, company_prefix, item_reference, serial)


def sscc(company_prefix: str, serial_reference: str) -> EpcUri:
    return EpcUri(EpcScheme.SSCC, company_prefix, serial_reference)


def lgtin(company_prefix: str, item_reference: str, lot: str) -> EpcUri:
    return EpcUri(EpcScheme.LGTIN, company_prefix, item_reference, lot)


def sgln(company_prefix: str, location_reference: str, extension: str | None = None) -> EpcUri:
    return EpcUri(EpcScheme.SGLN, company_prefix, location_reference, extension)


def parse_epc(uri: str | bytes, strict: bool = False) -> EpcUri:
    """Parse a pure-identity EPC URI.

    Raises UnknownScheme for unrecognized namespaces, MalformedComponents
    for structural problems, and (strict mode only) DigitCountViolation
    when GS1 combined digit lengths are not met.
    """
    if isinstance(uri, bytes):
        try:
            uri = uri.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedComponents(f"not valid utf-8: {uri!r}") from exc
    if not isinstance(uri, str):
        raise MalformedComponents(f"expected a string, got {type(uri).__name__}")
    text = uri.strip()
    if not text:
        raise MalformedComponents("empty EPC URI")

    parts = text.split(":", 4)
    if len(parts) != 5:
        raise UnknownScheme(f"not a pure-identity EPC URI: {text!r}")
    namespace = ":".join(parts[:3]).lower()
    scheme_token = parts[3].lower()
    scheme = _SCHEME_BY_PREFIX.get((namespace, scheme_token))
    if scheme is None:
        raise UnknownScheme(f"unrecognized EPC scheme: {namespace}:{scheme_token}")

    components = parts[4].split(".")
    if any(not c for c in components):
        raise MalformedComponents(f"empty component in {text!r}")
    expected = 2 if scheme is EpcScheme.SSCC else 3
    if scheme is EpcScheme.SGLN and len(components) == 2:
        expected = 2  # extension-less SGLN is accepted
    if len(components) != expected:
        raise MalformedComponents(
            f"{scheme.value} expects {expected} dot-separated components, "
            f"got {len(components)}: {text!r}"
        )
    serial = components[2] if len(components) == 3 else None
    epc = EpcUri(scheme, components[0], components[1], serial)
    if strict:
        _check_strict(epc)
    return epc


def _check_strict(epc: EpcUri) -> None:
    combined = len(epc.company_prefix) + len(epc.reference)
    required = _STRICT_COMBINED[epc.scheme]
    if combined != required:
        raise DigitCountViolation(
            f"{epc.scheme.value} requires {required} combined digits, got {combined}"
        )
    if not 6 <= len(epc.company_prefix) <= 12:
        raise DigitCountViolation(
            f"company prefix must be 6-12 digits, got {len(epc.company_prefix)}"
        )
    if epc.serial_or_lot is not None and len(epc.serial_or_lot) > _STRICT_SERIAL_MAX:
        raise DigitCountViolation(
            f"serial/lot longer than {_STRICT_SERIAL_MAX} characters"
        )


def format_epc(epc: EpcUri) -> str:
    """Canonical URI string; ``parse_epc(format_epc(e)) == e``."""
    return epc.raw


def identification_level(epc: EpcUri) -> IdentificationLevel:
    """LGTIN identifies a batch; the other three identify one physical unit."""
    if epc.scheme is EpcScheme.LGTIN:
        return IdentificationLevel.BATCH
    return IdentificationLevel.INSTANCE


def is_epc_uri(value: str) -> bool:
    try:
        parse_epc(value)
    except EpcParseError:
        return False
    return True
