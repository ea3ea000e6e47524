from __future__ import annotations

import pytest

from pmaas.authz import Role
from pmaas.epc import IdentificationLevel, identification_level, parse_epc
from pmaas.errors import Unauthorized, ValidationError
from pmaas.registry import (
    Bounds,
    DuplicateGtinBase,
    DuplicateSerial,
    GtinBase,
    MonitoredParameter,
    MonitoringSpec,
    PublicProductView,
)

BASE = GtinBase("123456", "7123883")


@pytest.fixture
def producer(principals):
    return principals[Role.PRODUCER]


@pytest.fixture
def product(platform, producer):
    return platform.registry.create_product(
        producer,
        name="Extra Virgin Olive Oil 1L",
        gtin_base=BASE,
        origin="Crete",
        description="Cold-pressed.",
    )


class TestCreateProduct:
    def test_nominal(self, product):
        assert product.name == "Extra Virgin Olive Oil 1L"
        assert product.monitoring.parameters == frozenset()

    def test_role_gate(self, platform, principals):
        with pytest.raises(Unauthorized):
            platform.registry.create_product(
                principals[Role.END_USER], name="x", gtin_base=BASE
            )

    def test_duplicate_gtin_base(self, platform, producer, product):
        with pytest.raises(DuplicateGtinBase):
            platform.registry.create_product(producer, name="again", gtin_base=BASE)

    def test_missing_name(self, platform, producer):
        with pytest.raises(ValidationError):
            platform.registry.create_product(producer, name="  ", gtin_base=BASE)


class TestUnits:
    def test_instance_serials_mint_sgtins(self, platform, producer, product):
        units = platform.registry.create_units(
            producer, product.id, IdentificationLevel.INSTANCE, serials=["111", "222"]
        )
        assert [u.unit_id.raw for u in units] == [
            "urn:epc:id:sgtin:123456.7123883.111",
            "urn:epc:id:sgtin:123456.7123883.222",
        ]
        for unit in units:
            assert identification_level(unit.unit_id) is IdentificationLevel.INSTANCE
            assert parse_epc(unit.unit_id.raw) == unit.unit_id

    def test_batch_lot_mints_lgtin(self, platform, producer, product):
        (unit,) = platform.registry.create_units(
            producer, product.id, IdentificationLevel.BATCH, lot="7ABC", quantity=30
        )
        assert unit.unit_id.raw == "urn:epc:class:lgtin:123456.7123883.7ABC"
        assert unit.quantity == 30
        assert identification_level(unit.unit_id) is IdentificationLevel.BATCH

    def test_zero_quantity(self, platform, producer, product):
        with pytest.raises(ValidationError):
            platform.registry.create_units(
                producer, product.id, IdentificationLevel.BATCH, lot="7ABC", quantity=0
            )

    def test_duplicate_serial_is_atomic(self, platform, producer, product):
        platform.registry.create_units(
            producer, product.id, IdentificationLevel.INSTANCE, serials=["111"]
        )
        with pytest.raises(DuplicateSerial):
            platform.registry.create_units(
                producer, product.id, IdentificationLevel.INSTANCE, serials=["333", "111"]
            )
        # all-or-nothing: 333 must not have been minted
        assert platform.registry.find_unit(parse_epc("urn:epc:id:sgtin:123456.7123883.333")) is None

    def test_ownership(self, platform, principals, product):
        with pytest.raises(Unauthorized):
            platform.registry.create_units(
                principals[Role.CONTRIBUTOR],
                product.id,
                IdentificationLevel.INSTANCE,
                serials=["9"],
            )


class TestMonitoring:
    def test_set_and_replace(self, platform, producer, product):
        spec = MonitoringSpec(
            parameters=frozenset(
                {MonitoredParameter.TEMPERATURE, MonitoredParameter.HUMIDITY}
            ),
            bounds=(
                (MonitoredParameter.TEMPERATURE, Bounds(5.0, 25.0)),
                (MonitoredParameter.HUMIDITY, Bounds(20.0, 60.0)),
            ),
        )
        updated = platform.registry.set_monitoring(producer, product.id, spec)
        assert updated.monitoring is spec
        # empty replacement disables monitoring
        updated = platform.registry.set_monitoring(producer, product.id, MonitoringSpec())
        assert updated.monitoring.parameters == frozenset()

    def test_inverted_bounds(self):
        with pytest.raises(ValidationError):
            Bounds(30.0, 10.0)

    def test_bounds_require_monitored_parameter(self):
        with pytest.raises(ValidationError):
            MonitoringSpec(
                parameters=frozenset({MonitoredParameter.HUMIDITY}),
                bounds=((MonitoredParameter.TEMPERATURE, Bounds(0.0, 1.0)),),
            )


class TestDiscovery:
    def test_producer_sees_own_only(self, platform, principals, producer, product):
        admin = principals[Role.PROVIDER_ADMIN]
        other = platform.registry.create_product(
            admin, name="Someone else's jam", gtin_base=GtinBase("999999", "1")
        )
        mine = platform.registry.discover_products(producer)
        assert [p.id for p in mine] == [product.id]
        everything = platform.registry.discover_products(admin)
        assert {p.id for p in everything} == {product.id, other.id}

    def test_public_summaries_hide_monitoring_and_units(self, platform, principals, producer, product):
        platform.registry.set_monitoring(
            producer,
            product.id,
            MonitoringSpec(parameters=frozenset({MonitoredParameter.TEMPERATURE})),
        )
        views = platform.registry.discover_products(principals[Role.END_USER])
        assert all(isinstance(v, PublicProductView) for v in views)
        fields = set(vars(views[0]))
        assert fields == {"id", "name", "origin", "description"}
