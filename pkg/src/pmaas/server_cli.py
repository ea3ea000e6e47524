"""``pmaas-server``: run the whole platform in one process.

Serves the REST API (and the WebSocket device channel) via uvicorn, plus an
optional raw-TCP device channel listener speaking the same length-prefixed
message format. TLS is deployment configuration: pass certificate/key paths
and uvicorn terminates TLS; there is no custom crypto here.
"""

from __future__ import annotations

import json
import socketserver
import threading

import click
import uvicorn

from pmaas.devices import MessageDecoder, ProtocolViolation, encode_message
from pmaas.gateway import build_app
from pmaas.platform import Platform, PlatformConfig


def _tcp_channel_server(platform: Platform, port: int) -> socketserver.ThreadingTCPServer:
    class Handler(socketserver.BaseRequestHandler):
        def handle(self) -> None:
            channel = platform.open_channel()
            decoder = MessageDecoder()
            try:
                while not channel.closed:
                    data = self.request.recv(65536)
                    if not data:
                        break
                    for message in decoder.feed(data):
                        self.request.sendall(encode_message(channel.handle(message)))
            except (ProtocolViolation, OSError):
                pass
            finally:
                channel.close()

    server = socketserver.ThreadingTCPServer(("0.0.0.0", port), Handler)
    server.daemon_threads = True
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", envvar="PMAAS_HOST")
@click.option("--port", type=int, default=8000, envvar="PMAAS_PORT")
@click.option("--data-dir", default="./pmaas-data", envvar="PMAAS_DATA_DIR")
@click.option("--admin-name", default="admin", envvar="PMAAS_ADMIN_NAME")
@click.option("--admin-password", default=None, envvar="PMAAS_ADMIN_PASSWORD")
@click.option("--channel-tcp-port", type=int, default=None, help="also listen for raw-TCP device channels")
@click.option("--ui-dir", default="frontend/dist", help="static frontend bundle to serve under /ui")
@click.option("--tls-cert", default=None, envvar="PMAAS_TLS_CERT")
@click.option("--tls-key", default=None, envvar="PMAAS_TLS_KEY")
def main(
    config_path: str | None,
    host: str,
    port: int,
    data_dir: str,
    admin_name: str,
    admin_password: str | None,
    channel_tcp_port: int | None,
    ui_dir: str,
    tls_cert: str | None,
    tls_key: str | None,
) -> None:
    """Start the product-monitoring platform."""
    overrides = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            overrides = json.load(fh)
    host = overrides.get("host", host)
    port = overrides.get("port", port)
    if admin_password is None and "admin_password" not in overrides:
        raise click.ClickException(
            "an initial admin password is required (--admin-password or PMAAS_ADMIN_PASSWORD)"
        )
    platform = Platform(
        PlatformConfig(
            data_dir=overrides.get("data_dir", data_dir),
            token_ttl_s=float(overrides.get("token_ttl_s", 3600)),
            admin_name=overrides.get("admin_name", admin_name),
            admin_password=overrides.get("admin_password", admin_password),
        )
    )
    app = build_app(platform, ui_dir=overrides.get("ui_dir", ui_dir))

    tcp_port = overrides.get("channel_tcp_port", channel_tcp_port)
    if tcp_port:
        _tcp_channel_server(platform, int(tcp_port))
        click.echo(f"device channel (tcp) on :{tcp_port}")

    uvicorn.run(
        app,
        host=host,
        port=port,
        ssl_certfile=overrides.get("tls_cert", tls_cert),
        ssl_keyfile=overrides.get("tls_key", tls_key),
        log_level="info",
    )


if __name__ == "__main__":
    main()
