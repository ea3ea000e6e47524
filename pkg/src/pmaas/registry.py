"""Product registry: product definitions, instance/batch unit minting,
monitoring-parameter specs, and role-scoped discovery.

Unit EPCs are minted by the platform from the product's GTIN base plus the
caller's serial or lot, which guarantees that registry units and captured
events stay referentially consistent. Events about EPCs the registry has
never minted are still capturable; journeys for those carry an
"unregistered product" marker instead of failing.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum

from pmaas.authz import Role
from pmaas.clockutil import Clock, SystemClock
from pmaas.epc import EpcParseError, EpcUri, IdentificationLevel, lgtin, sgtin
from pmaas.errors import Conflict, NotFound, Unauthorized, ValidationError
from pmaas.identity import PrincipalSummary


class UnknownProduct(NotFound):
    code = "unknown_product"


class DuplicateGtinBase(Conflict):
    code = "duplicate_gtin_base"


class DuplicateSerial(Conflict):
    code = "duplicate_serial"


class MonitoredParameter(str, Enum):
    """Parameters selectable for monitoring during a product's journey."""

    TEMPERATURE = "temperature"
    HUMIDITY = "humidity"
    AMBIENT_LIGHT = "ambient_light"
    ACCELERATION = "acceleration"
    GEOLOCATION = "geolocation"


@dataclass(frozen=True)
class Bounds:
    min: float | None = None
    max: float | None = None

    def __post_init__(self) -> None:
        if self.min is not None and self.max is not None and self.min >= self.max:
            raise ValidationError(f"bound min {self.min} must be below max {self.max}")


@dataclass(frozen=True)
class MonitoringSpec:
    parameters: frozenset[MonitoredParameter] = frozenset()
    bounds: tuple[tuple[MonitoredParameter, Bounds], ...] = ()

    def __post_init__(self) -> None:
        for parameter, _ in self.bounds:
            if parameter not in self.parameters:
                raise ValidationError(
                    f"bounds given for unmonitored parameter {parameter.value}"
                )

    def bounds_for(self, parameter: MonitoredParameter) -> Bounds | None:
        for p, b in self.bounds:
            if p is parameter:
                return b
        return None


@dataclass(frozen=True)
class GtinBase:
    company_prefix: str
    item_reference: str

    def __post_init__(self) -> None:
        if not self.company_prefix.isdigit() or not self.item_reference.isdigit():
            raise ValidationError("GTIN base components must be digit strings")

    @property
    def key(self) -> str:
        return f"{self.company_prefix}.{self.item_reference}"


@dataclass
class Product:
    id: str
    owner: str
    gtin_base: GtinBase
    name: str
    description: str = ""
    origin: str = ""
    ingredients: str = ""
    optimum_usage: str = ""
    monitoring: MonitoringSpec = field(default_factory=MonitoringSpec)


@dataclass(frozen=True)
class TrackedUnit:
    unit_id: EpcUri
    level: IdentificationLevel
    product_id: str
    created_at: datetime
    lot_or_serial: str
    quantity: int | None = None


@dataclass(frozen=True)
class PublicProductView:
    """What non-owners see: descriptive fields only, no monitoring spec and
    no unit serials."""

    id: str
    name: str
    origin: str
    description: str


class ProductRegistry:
    def __init__(self, clock: Clock | None = None) -> None:
        self._clock = clock or SystemClock()
        self._products: dict[str, Product] = {}
        self._units: dict[str, TrackedUnit] = {}
        self._units_by_product: dict[str, list[str]] = {}
        self._lock = threading.Lock()

    # -- products ----------------------------------------------------------

    def create_product(
        self,
        caller: PrincipalSummary,
        name: str,
        gtin_base: GtinBase,
        description: str = "",
        origin: str = "",
        ingredients: str = "",
        optimum_usage: str = "",
    ) -> Product:
        if caller.role not in (Role.PRODUCER, Role.PROVIDER_ADMIN):
            raise Unauthorized("only producers may register products")
        if not name.strip():
            raise ValidationError("product name is required")
        with self._lock:
            for product in self._products.values():
                if product.owner == caller.id and product.gtin_base == gtin_base:
                    raise DuplicateGtinBase(
                        f"owner already has a product with GTIN base {gtin_base.key}"
                    )
            product = Product(
                id=uuid.uuid4().hex,
                owner=caller.id,
                gtin_base=gtin_base,
                name=name.strip(),
                description=description,
                origin=origin,
                ingredients=ingredients,
                optimum_usage=optimum_usage,
            )
            self._products[product.id] = product
            self._units_by_product[product.id] = []
            return product

    def get_product(self, product_id: str) -> Product:
        product = self._products.get(product_id)
        if product is None:
            raise UnknownProduct(f"no product {product_id!r}")
        return product

    def _require_owner(self, caller: PrincipalSummary, product: Product) -> None:
        if caller.role is Role.PROVIDER_ADMIN:
            return
        if product.owner != caller.id:
            raise Unauthorized("caller does not own this product")

    # -- units -------------------------------------------------------------

    def create_units(
        self,
        caller: PrincipalSummary,
        product_id: str,
        level: IdentificationLevel,
        serials: list[str] | None = None,
        lot: str | None = None,
        quantity: int | None = None,
    ) -> list[TrackedUnit]:
        """Mint tracked units: one SGTIN per serial at instance level, or
        one LGTIN with a quantity at batch level. All minted or none."""
        product = self.get_product(product_id)
        self._require_owner(caller, product)
        created_at = self._clock.now()
        base = product.gtin_base

        minted: list[TrackedUnit] = []
        if level is IdentificationLevel.INSTANCE:
            if not serials:
                raise ValidationError("instance-level creation requires serials")
            if len(set(serials)) != len(serials):
                raise DuplicateSerial("serial list contains duplicates")
            for serial in serials:
                minted.append(
                    TrackedUnit(
                        unit_id=self._mint(sgtin, base, serial),
                        level=level,
                        product_id=product_id,
                        created_at=created_at,
                        lot_or_serial=serial,
                    )
                )
        else:
            if not lot:
                raise ValidationError("batch-level creation requires a lot")
            if quantity is None or quantity < 1:
                raise ValidationError("batch-level creation requires a positive quantity")
            minted.append(
                TrackedUnit(
                    unit_id=self._mint(lgtin, base, lot),
                    level=level,
                    product_id=product_id,
                    created_at=created_at,
                    lot_or_serial=lot,
                    quantity=quantity,
                )
            )

        with self._lock:
            for unit in minted:
                if unit.unit_id.raw in self._units:
                    raise DuplicateSerial(f"unit {unit.unit_id} already exists")
            for unit in minted:
                self._units[unit.unit_id.raw] = unit
                self._units_by_product[product_id].append(unit.unit_id.raw)
        return minted

    @staticmethod
    def _mint(scheme_ctor, base: GtinBase, suffix: str) -> EpcUri:
        try:
            return scheme_ctor(base.company_prefix, base.item_reference, suffix)
        except EpcParseError as exc:
            raise ValidationError(f"cannot mint EPC from {suffix!r}: {exc}") from exc

    def find_unit(self, epc: EpcUri) -> TrackedUnit | None:
        return self._units.get(epc.raw)

    def units_of(self, product_id: str) -> list[TrackedUnit]:
        return [self._units[u] for u in self._units_by_product.get(product_id, [])]

    # -- monitoring --------------------------------------------------------

    def set_monitoring(
        self, caller: PrincipalSummary, product_id: str, spec: MonitoringSpec
    ) -> Product:
        product = self.get_product(product_id)
        self._require_owner(caller, product)
        with self._lock:
            product.monitoring = spec
        return product

    # -- discovery ---------------------------------------------------------

    def discover_products(
        self, caller: PrincipalSummary, name_filter: str | None = None
    ) -> list[Product] | list[PublicProductView]:
        """Admins see everything, producers their own products, and
        everyone else public summaries only."""
        products = sorted(self._products.values(), key=lambda p: (p.name, p.id))
        if name_filter:
            needle = name_filter.lower()
            products = [p for p in products if needle in p.name.lower()]
        if caller.role is Role.PROVIDER_ADMIN:
            return products
        if caller.role is Role.PRODUCER:
            return [p for p in products if p.owner == caller.id]
        return [
            PublicProductView(
                id=p.id, name=p.name, origin=p.origin, description=p.description
            )
            for p in products
        ]

    def product_of_unit(self, epc: EpcUri) -> Product | None:
        unit = self.find_unit(epc)
        return self._products.get(unit.product_id) if unit else None

    def health(self) -> str:
        return "up"
