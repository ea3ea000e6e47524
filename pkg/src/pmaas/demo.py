"""Runnable end-to-end reference scenario.

One product unit travels the canonical journey: commissioned at the
production site, stored in a silo under ~15 degC / 35 %RH, trucked under
~18 degC / 55 %RH, and received at a retail store. Two provisioned devices
stream synthetic sensor data over the real channel protocol while capture
flows record the traceability events; the result is the product's journey
with per-segment condition statistics.

Everything runs on a virtual clock, so the whole story takes milliseconds
of wall time; scripts/run_golden_fixture.py wraps this for the terminal.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from pmaas.agent import Agent, InProcessConnector
from pmaas.agent.config import AgentConfig, SensorSpec
from pmaas.agent.generators import SineGenerator
from pmaas.authz import Role
from pmaas.capture import CaptureFlow, FlowKind, compile_flow
from pmaas.clockutil import SimClock
from pmaas.epc import EpcUri, IdentificationLevel, parse_epc, sgln
from pmaas.epcis import EpcisDocument
from pmaas.journey import Journey, journey_to_json
from pmaas.platform import Platform, PlatformConfig
from pmaas.registry import Bounds, GtinBase, MonitoredParameter, MonitoringSpec
from pmaas.timeseries import Parameter

FIXTURE_START = datetime(2025, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

PRODUCT_NAME = "Extra Virgin Olive Oil 1L"
UNIT_SERIAL = "111"
LOCATION_A = sgln("300001", "00001", "0")  # production site
SILO_A = sgln("300001", "00012", "0")
RETAIL = sgln("300002", "00077", "0")
TRUCK = parse_epc("urn:epc:id:sgtin:401111.4444444.5V9K662R66")

SILO_TEMPERATURE_C = 15.0
SILO_HUMIDITY_RH = 35.0
TRUCK_TEMPERATURE_C = 18.0
TRUCK_HUMIDITY_RH = 55.0

# timeline offsets in seconds; segment boundaries sit on 60 s window edges
T_COMMISSION = 0
T_STORE = 120
T_LOAD = 720
T_UNLOAD = 1320
T_RECEIVE = 1330

ADMIN = ("admin", "admin-pw")
PRODUCER = ("oilco", "oilco-pw")
CONTRIBUTOR = ("hauler", "hauler-pw")
END_USER = ("shopper", "shopper-pw")
SILO_DEVICE = ("silo-dev-1", "silo-dev-pw")
TRUCK_DEVICE = ("truck-dev-1", "truck-dev-pw")


@dataclass
class FixtureResult:
    platform: Platform
    unit: EpcUri
    journey: Journey
    journey_json: dict
    emitted: dict[str, list[tuple[str, int, float]]]
    end_user_token: str


def _sensors(mean_temperature: float, mean_humidity: float) -> tuple[SensorSpec, ...]:
    # full sine periods per 60 s window, so window means hit the target
    # values exactly and the reported segment statistics are the targets
    return (
        SensorSpec("temperature", 2.0, SineGenerator(mean_temperature, 0.4, 20.0)),
        SensorSpec("humidity", 2.0, SineGenerator(mean_humidity, 1.0, 20.0)),
    )


def run_reference_scenario(granularity_s: float = 60.0) -> FixtureResult:
    clock = SimClock(FIXTURE_START)
    platform = Platform(
        PlatformConfig(admin_name=ADMIN[0], admin_password=ADMIN[1], scrypt_n=2**12),
        clock=clock,
    )
    identity = platform.identity
    admin_token = identity.authenticate(*ADMIN).value
    identity.register_principal(admin_token, PRODUCER[0], PRODUCER[1], Role.PRODUCER)
    identity.register_principal(admin_token, CONTRIBUTOR[0], CONTRIBUTOR[1], Role.CONTRIBUTOR)
    identity.register_principal(admin_token, END_USER[0], END_USER[1], Role.END_USER)
    producer = identity.validate_token(identity.authenticate(*PRODUCER).value).principal
    contributor = identity.validate_token(identity.authenticate(*CONTRIBUTOR).value).principal

    # product, unit, and what to monitor (bounds wide enough for the
    # journey as scripted; a hotter silo would trip the 25 degC limit)
    product = platform.registry.create_product(
        producer,
        name=PRODUCT_NAME,
        gtin_base=GtinBase("123456", "7123883"),
        origin="Crete",
        description="Cold-pressed, first harvest.",
    )
    (unit,) = platform.registry.create_units(
        producer, product.id, IdentificationLevel.INSTANCE, serials=[UNIT_SERIAL]
    )
    platform.registry.set_monitoring(
        producer,
        product.id,
        MonitoringSpec(
            parameters=frozenset(
                {MonitoredParameter.TEMPERATURE, MonitoredParameter.HUMIDITY}
            ),
            bounds=(
                (MonitoredParameter.HUMIDITY, Bounds(20.0, 60.0)),
                (MonitoredParameter.TEMPERATURE, Bounds(5.0, 25.0)),
            ),
        ),
    )

    # pre-provisioned devices, bound to the silo and the truck
    sensors = {Parameter.TEMPERATURE, Parameter.HUMIDITY}
    platform.devices.provision_device(
        admin_token, SILO_DEVICE[0], SILO_DEVICE[1], "Silo A rack", sensors, contributor.id
    )
    platform.devices.provision_device(
        admin_token, TRUCK_DEVICE[0], TRUCK_DEVICE[1], "Truck A cab", sensors, contributor.id
    )
    platform.devices.bind_location(contributor, SILO_DEVICE[0], SILO_A)
    platform.devices.bind_location(contributor, TRUCK_DEVICE[0], TRUCK)

    def capture(flow: CaptureFlow, at_s: int) -> None:
        clock.advance_to(FIXTURE_START + timedelta(seconds=at_s))
        event = compile_flow(flow, now=clock.now())
        doc = EpcisDocument(creation_date=clock.now(), events=(event,))
        platform.events.capture(contributor.id, doc)

    def stream(device: tuple[str, str], means: tuple[float, float], duration_s: float):
        config = AgentConfig(
            device_id=device[0],
            password=device[1],
            endpoint="inproc",
            sensors=_sensors(*means),
            cache_path=tempfile.mktemp(prefix=f"{device[0]}-cache-", suffix=".jsonl"),
        )
        agent = Agent(config, InProcessConnector(platform.open_channel, clock), clock)
        agent.run(duration_s)
        emitted = list(agent.emitted)
        agent.close()
        return emitted

    emitted: dict[str, list[tuple[str, int, float]]] = {}

    capture(
        CaptureFlow(kind=FlowKind.COMMISSION, location=LOCATION_A, scanned=(unit.unit_id,)),
        T_COMMISSION,
    )
    capture(
        CaptureFlow(kind=FlowKind.CHECK_IN, location=SILO_A, scanned=(unit.unit_id,)),
        T_STORE,
    )
    emitted[SILO_DEVICE[0]] = stream(
        SILO_DEVICE, (SILO_TEMPERATURE_C, SILO_HUMIDITY_RH), T_LOAD - T_STORE
    )
    capture(
        CaptureFlow(
            kind=FlowKind.LOAD_TO_VEHICLE, vehicle_or_parent=TRUCK, scanned=(unit.unit_id,)
        ),
        T_LOAD,
    )
    emitted[TRUCK_DEVICE[0]] = stream(
        TRUCK_DEVICE, (TRUCK_TEMPERATURE_C, TRUCK_HUMIDITY_RH), T_UNLOAD - T_LOAD
    )
    capture(
        CaptureFlow(
            kind=FlowKind.UNLOAD_FROM_VEHICLE, vehicle_or_parent=TRUCK, scanned=(unit.unit_id,)
        ),
        T_UNLOAD,
    )
    capture(
        CaptureFlow(
            kind=FlowKind.CHECK_IN,
            location=RETAIL,
            scanned=(unit.unit_id,),
            check_in_step="receiving",
        ),
        T_RECEIVE,
    )

    end_user_token = identity.authenticate(*END_USER).value
    shopper = identity.validate_token(end_user_token).principal
    journey = platform.journey.trace_product(shopper, unit.unit_id, granularity_s=granularity_s)
    return FixtureResult(
        platform=platform,
        unit=unit.unit_id,
        journey=journey,
        journey_json=journey_to_json(journey),
        emitted=emitted,
        end_user_token=end_user_token,
    )
