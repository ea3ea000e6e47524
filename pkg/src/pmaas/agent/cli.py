"""Agent command line: ``pmaas-agent run`` and ``pmaas-agent fault``.

``run`` drives a real-time agent against a tcp:// or ws:// platform
endpoint; ``fault`` talks to a running agent's control socket to arm one
fault for the next channel interaction.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading

import click

from pmaas.agent.channel import FaultInjector, UnknownFault, connector_for
from pmaas.agent.config import load_agent_config
from pmaas.agent.runner import Agent
from pmaas.clockutil import SystemClock


def _control_server(port: int, faults: FaultInjector) -> socketserver.TCPServer:
    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            line = self.rfile.readline()
            try:
                command = json.loads(line)
                faults.inject(command["fault"], float(command.get("delay_s", 5.0)))
                self.wfile.write(b'{"ok": true}\n')
            except (UnknownFault, ValueError, KeyError) as exc:
                self.wfile.write(
                    json.dumps({"ok": False, "error": str(exc)}).encode() + b"\n"
                )

    server = socketserver.TCPServer(("127.0.0.1", port), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


@click.group()
def main() -> None:
    """IoT device agent."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--duration", type=float, default=None, help="seconds to run (default: forever)")
def run(config_path: str, duration: float | None) -> None:
    """Run the agent: sample sensors, cache, and stream to the platform."""
    config = load_agent_config(config_path)
    clock = SystemClock()
    faults = FaultInjector()
    connector = connector_for(config.endpoint, clock, faults)
    agent = Agent(config, connector, clock)
    server = None
    if config.control_port:
        server = _control_server(config.control_port, faults)
        click.echo(f"control socket on 127.0.0.1:{config.control_port}")
    try:
        stats = agent.run(duration if duration is not None else float(10**9))
        click.echo(
            f"samples={stats.samples_emitted} batches={stats.batches_sent} "
            f"ingested={stats.ingested} deduplicated={stats.deduplicated}"
        )
    finally:
        if server is not None:
            server.shutdown()
        agent.close()


@main.command()
@click.argument("kind")
@click.option("--port", type=int, required=True, help="agent control socket port")
@click.option("--delay", "delay_s", type=float, default=5.0)
def fault(kind: str, port: int, delay_s: float) -> None:
    """Arm a fault (drop_connection, delay, duplicate_batch) on a running agent."""
    with socket.create_connection(("127.0.0.1", port), timeout=5) as sock:
        sock.sendall(json.dumps({"fault": kind, "delay_s": delay_s}).encode() + b"\n")
        reply = sock.recv(4096)
    click.echo(reply.decode().strip())


if __name__ == "__main__":
    main()
