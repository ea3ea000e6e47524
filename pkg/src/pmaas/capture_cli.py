"""``pmaas-capture``: terminal capture client.

Scans are text lines (one EPC URI per line, from a file or stdin) standing
in for NFC/QR/barcode reads; an image-decode hook could be slotted in where
``_read_epcs`` is called, but none is implemented. Flows captured while the
platform is unreachable are queued on disk and replayed with ``drain``.
"""

from __future__ import annotations

import json
import os
import sys

import click
import httpx

from pmaas.capture import (
    CaptureFlow,
    CaptureRejected,
    CaptureSession,
    ConnectivityError,
    FlowKind,
    PlatformClient,
)
from pmaas.epc import EpcParseError, parse_epc
from pmaas.epcis import QuantityElement


def _state_dir(ctx: click.Context) -> str:
    path = ctx.obj["state_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _session(ctx: click.Context) -> CaptureSession:
    state_dir = _state_dir(ctx)
    client = PlatformClient(httpx.Client(base_url=ctx.obj["base_url"], timeout=10))
    session_file = os.path.join(state_dir, "session.json")
    if os.path.exists(session_file):
        with open(session_file, encoding="utf-8") as fh:
            client.set_token(json.load(fh)["token"])
    return CaptureSession(client, os.path.join(state_dir, "queue.jsonl"))


def _read_epcs(source: str) -> list:
    if source == "-":
        lines = sys.stdin.read().splitlines()
    else:
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    epcs = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            epcs.append(parse_epc(line))
        except EpcParseError as exc:
            raise click.ClickException(f"bad EPC {line!r}: {exc}")
    return epcs


def _submit(ctx: click.Context, flow: CaptureFlow) -> None:
    session = _session(ctx)
    try:
        outcome, detail = session.submit_flow(flow)
    except CaptureRejected as exc:
        raise click.ClickException(f"rejected by platform: {exc.envelope}")
    except Exception as exc:
        raise click.ClickException(str(exc))
    if outcome == "sent":
        click.echo(f"sent: {detail}")
    else:
        click.echo(f"platform unreachable; queued with key {detail}")


@click.group()
@click.option("--base-url", default="http://127.0.0.1:8000", envvar="PMAAS_URL")
@click.option(
    "--state-dir",
    default=os.path.expanduser("~/.pmaas-capture"),
    envvar="PMAAS_CAPTURE_STATE",
)
@click.pass_context
def main(ctx: click.Context, base_url: str, state_dir: str) -> None:
    """Capture supply-chain events from scanned EPCs."""
    ctx.obj = {"base_url": base_url, "state_dir": state_dir}


@main.command()
@click.option("--name", prompt=True)
@click.option("--password", prompt=True, hide_input=True)
@click.pass_context
def login(ctx: click.Context, name: str, password: str) -> None:
    """Authenticate and cache the session token."""
    client = PlatformClient(httpx.Client(base_url=ctx.obj["base_url"], timeout=10))
    try:
        token = client.login(name, password)
    except ConnectivityError as exc:
        raise click.ClickException(f"platform unreachable: {exc}")
    except CaptureRejected as exc:
        raise click.ClickException(f"login failed: {exc.envelope}")
    with open(os.path.join(_state_dir(ctx), "session.json"), "w", encoding="utf-8") as fh:
        json.dump({"token": token, "name": name}, fh)
    click.echo("logged in")


def _epc_option(value: str):
    try:
        return parse_epc(value)
    except EpcParseError as exc:
        raise click.BadParameter(str(exc))


def _quantities(lot_class: str | None, quantity: int | None) -> tuple:
    if lot_class is None:
        return ()
    if quantity is None:
        raise click.ClickException("--quantity is required with --lot-class")
    return (QuantityElement(_epc_option(lot_class), quantity),)


def _flow_command(name: str, kind: FlowKind, needs_location: bool, needs_parent: bool, help_text: str):
    @click.option("--epcs", default="-", help="file of EPC lines, or - for stdin")
    @click.option("--lot-class", "lot_class", default=None)
    @click.option("--quantity", type=int, default=None)
    @click.pass_context
    def command(ctx, epcs, lot_class, quantity, **kwargs):
        flow = CaptureFlow(
            kind=kind,
            location=_epc_option(kwargs["location"]) if kwargs.get("location") else None,
            vehicle_or_parent=(
                _epc_option(kwargs["parent"]) if kwargs.get("parent") else None
            ),
            scanned=tuple(_read_epcs(epcs)),
            quantities=_quantities(lot_class, quantity),
            check_in_step=kwargs.get("biz_step", "storing"),
        )
        _submit(ctx, flow)

    command.__doc__ = help_text
    if needs_location:
        command = click.option("--location", required=True, help="location EPC (sgln)")(command)
    if needs_parent:
        option_name = "--vehicle" if "vehicle" in name else "--parent"
        command = click.option(option_name, "parent", required=True)(command)
    if kind is FlowKind.CHECK_IN:
        command = click.option(
            "--biz-step",
            type=click.Choice(["storing", "receiving"]),
            default="storing",
        )(command)
    return main.command(name=name)(command)


_flow_command("checkin", FlowKind.CHECK_IN, True, False, "Check products in at a location.")
_flow_command("checkout", FlowKind.CHECK_OUT, True, False, "Check products out of a location.")
_flow_command("load", FlowKind.LOAD_TO_VEHICLE, False, True, "Load products onto a vehicle.")
_flow_command("unload", FlowKind.UNLOAD_FROM_VEHICLE, False, True, "Unload products from a vehicle.")
_flow_command("aggregate", FlowKind.AGGREGATE, False, True, "Pack products into a parent (pallet).")
_flow_command("disaggregate", FlowKind.DISAGGREGATE, False, True, "Unpack products from a parent.")
_flow_command("commission", FlowKind.COMMISSION, True, False, "Commission new products at a location.")


@main.command()
@click.option("--inputs", required=True, help="file of input EPC lines, or -")
@click.option("--outputs", required=True, help="file of output EPC lines")
@click.option("--location", default=None)
@click.pass_context
def transform(ctx: click.Context, inputs: str, outputs: str, location: str | None) -> None:
    """Record a transformation (inputs consumed, outputs produced)."""
    flow = CaptureFlow(
        kind=FlowKind.TRANSFORM,
        location=_epc_option(location) if location else None,
        scanned=tuple(_read_epcs(inputs)),
        outputs=tuple(_read_epcs(outputs)),
    )
    _submit(ctx, flow)


@main.command()
@click.pass_context
def drain(ctx: click.Context) -> None:
    """Replay the offline queue in capture order."""
    report = _session(ctx).drain()
    click.echo(f"sent={report.sent} remaining={report.remaining}")
    for poison in report.poisoned:
        click.echo(f"dropped rejected entry: {poison}", err=True)


@main.group()
def queue() -> None:
    """Offline queue inspection."""


@queue.command(name="status")
@click.pass_context
def queue_status(ctx: click.Context) -> None:
    """Show how many captures are waiting for connectivity."""
    click.echo(f"pending={_session(ctx).queue_length()}")


if __name__ == "__main__":
    main()
