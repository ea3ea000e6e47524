from __future__ import annotations

from datetime import datetime, timezone

import pytest
from hypothesis import settings

from pmaas.authz import Role
from pmaas.clockutil import SimClock
from pmaas.platform import Platform, PlatformConfig
from pmaas.timeseries import Parameter

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

START = datetime(2025, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

ADMIN = ("root", "root-pw")
PASSWORDS = {
    Role.PRODUCER: ("oilco", "oilco-pw"),
    Role.END_USER: ("shopper", "shopper-pw"),
    Role.CONTRIBUTOR: ("hauler", "hauler-pw"),
}
DEVICE = ("dev-a", "dev-a-pw")


@pytest.fixture
def clock() -> SimClock:
    return SimClock(START)


@pytest.fixture
def platform(clock: SimClock) -> Platform:
    """Platform on virtual time with one principal per role and one
    provisioned device (owned by the contributor)."""
    p = Platform(
        PlatformConfig(admin_name=ADMIN[0], admin_password=ADMIN[1], scrypt_n=2**12),
        clock=clock,
    )
    admin_token = p.identity.authenticate(*ADMIN).value
    for role, (name, password) in PASSWORDS.items():
        p.identity.register_principal(admin_token, name, password, role)
    contributor = p.identity.find_by_name(PASSWORDS[Role.CONTRIBUTOR][0])
    p.devices.provision_device(
        admin_token,
        DEVICE[0],
        DEVICE[1],
        "test device",
        {Parameter.TEMPERATURE, Parameter.HUMIDITY},
        contributor.id,
        policy_name="medium",
    )
    return p


@pytest.fixture
def tokens(platform: Platform) -> dict[Role, str]:
    out = {Role.PROVIDER_ADMIN: platform.identity.authenticate(*ADMIN).value}
    for role, creds in PASSWORDS.items():
        out[role] = platform.identity.authenticate(*creds).value
    out[Role.DEVICE_AGENT] = platform.identity.authenticate(*DEVICE).value
    return out


@pytest.fixture
def principals(platform: Platform, tokens) -> dict[Role, object]:
    return {
        role: platform.identity.validate_token(token).principal
        for role, token in tokens.items()
    }


@pytest.fixture
def client(platform: Platform):
    from fastapi.testclient import TestClient

    from pmaas.gateway import build_app

    return TestClient(build_app(platform))
