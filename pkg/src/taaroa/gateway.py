"""HTTP/JSON facade so a browser can drive the middleware.

Endpoints (all JSON):
    GET  /api/services               -> LISTSERV
    GET  /api/machines               -> LISTPHYMACHSTATUS
    GET  /api/vms[?service=SID]      -> LISTVM (all services when omitted)
    GET  /api/vms/{id}               -> GETVM
    POST /api/services/{id}/submit   -> SUBMITSERV
    POST /api/vms/{id}/stop          -> STOPSERV

Wire error codes map onto HTTP statuses by their hundred: 1xx -> 400,
2xx -> 404, 3xx -> 409, 400 -> 502, 500 -> 500; the code itself is echoed
as ``{"error": code}``.  Everything else is a stateless pass-through;
static portal assets are served under ``/``.
"""

from __future__ import annotations

import json
import mimetypes
import os
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from taaroa.net import TransportError, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    GetVm,
    ListPhyMachStatus,
    ListServ,
    ListVm,
    StopServ,
    SubmitServ,
)


@dataclass(frozen=True)
class GatewayConfig:
    port: int = 8080
    host: str = "127.0.0.1"
    is_addr: tuple[str, int] = ("127.0.0.1", 7070)
    sc_addr: tuple[str, int] = ("127.0.0.1", 7072)
    assets_dir: str | None = None


def http_status_for(code: int) -> int:
    if code == ErrorCode.UPSTREAM_FAILURE:
        return 502
    if code >= 500:
        return 500
    return {1: 400, 2: 404, 3: 409}.get(code // 100, 500)


def _service_json(entry) -> dict:
    return {"s_id": entry["s_id"], "name": entry["name"],
            "rm_id": entry["rm_id"], "rm_ip": entry["rm_ip"],
            "rm_port": entry["rm_port"]}


def _machine_json(entry) -> dict:
    return {"phy_id": entry["phy_id"], "avail_cpu": entry["avail_cpu"],
            "avail_ram": entry["avail_ram"],
            "avail_disk": entry["avail_disk"],
            "netspeed": str(entry["netspeed"])}


def _vm_json(entry, s_id: int) -> dict:
    return {"vm_id": entry["vm_id"], "s_id": s_id,
            "phy_id": entry["phy_id"],
            "vm_local_id": entry["vm_local_id"],
            "virt_ip": entry["virt_ip"],
            "status": entry["status"].name}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def config(self) -> GatewayConfig:
        return self.server.config  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        pass

    # --- plumbing --------------------------------------------------------

    def _send_json(self, status: int, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_wire_error(self, code: int):
        self._send_json(http_status_for(code), {"error": int(code)})

    def _backend(self, addr, request):
        """Call a backend; None means the error reply was already sent."""
        try:
            reply = call(addr, request)
        except TransportError:
            self._send_json(502, {"error": int(ErrorCode.UPSTREAM_FAILURE)})
            return None
        if isinstance(reply, Err):
            self._send_wire_error(reply.code)
            return None
        return reply

    # --- routes --------------------------------------------------------------

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/api/services":
            reply = self._backend(self.config.is_addr, ListServ())
            if reply is not None:
                self._send_json(200, [_service_json(e) for e in reply.entries])
            return
        if url.path == "/api/machines":
            reply = self._backend(self.config.is_addr, ListPhyMachStatus())
            if reply is not None:
                self._send_json(200, [_machine_json(e) for e in reply.entries])
            return
        match = re.fullmatch(r"/api/vms/(\d+)", url.path)
        if match:
            reply = self._backend(self.config.is_addr,
                                  GetVm(vm_id=int(match.group(1))))
            if reply is not None:
                self._send_json(200, {
                    "vm_id": int(match.group(1)),
                    "s_id": reply["s_id"],
                    "phy_id": reply["phy_id"],
                    "vm_local_id": reply["vm_local_id"],
                    "virt_ip": reply["virt_ip"],
                    "status": reply["status"].name,
                })
            return
        if url.path == "/api/vms":
            query = parse_qs(url.query)
            if "service" in query:
                try:
                    s_id = int(query["service"][0])
                except ValueError:
                    self._send_wire_error(ErrorCode.MALFORMED_REQUEST)
                    return
                reply = self._backend(self.config.is_addr, ListVm(s_id=s_id))
                if reply is not None:
                    self._send_json(
                        200, [_vm_json(e, s_id) for e in reply.entries]
                    )
                return
            services = self._backend(self.config.is_addr, ListServ())
            if services is None:
                return
            vms = []
            for service in services.entries:
                listed = self._backend(self.config.is_addr,
                                       ListVm(s_id=service["s_id"]))
                if listed is None:
                    return
                vms.extend(_vm_json(e, service["s_id"]) for e in listed.entries)
            self._send_json(200, vms)
            return
        self._serve_static(url.path)

    def do_POST(self):
        match = re.fullmatch(r"/api/services/(\d+)/submit", self.path)
        if match:
            reply = self._backend(self.config.sc_addr,
                                  SubmitServ(s_id=int(match.group(1))))
            if reply is not None:
                self._send_json(200, {"vm_id": reply["vm_id"]})
            return
        match = re.fullmatch(r"/api/vms/(\d+)/stop", self.path)
        if match:
            reply = self._backend(self.config.sc_addr,
                                  StopServ(vm_id=int(match.group(1))))
            if reply is not None:
                self._send_json(200, {"vm_id": reply["vm_id"]})
            return
        self._send_json(404, {"error": "unknown route"})

    # --- static portal assets ----------------------------------------------------

    def _serve_static(self, path: str):
        root = self.config.assets_dir
        if root is None or path.startswith("/api/"):
            self._send_json(404, {"error": "unknown route"})
            return
        rel = path.lstrip("/") or "index.html"
        full = os.path.normpath(os.path.join(root, rel))
        if not full.startswith(os.path.abspath(root)):
            self._send_json(404, {"error": "unknown route"})
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            self._send_json(404, {"error": "unknown route"})
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as handle:
            body = handle.read()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class Gateway:
    """Threaded HTTP server translating portal requests into wire messages."""

    def __init__(self, config: GatewayConfig):
        self._server = ThreadingHTTPServer((config.host, config.port), _Handler)
        self._server.config = config  # type: ignore[attr-defined]
        self.host, self.port = self._server.server_address[:2]
        self._thread = threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.05),
            name=f"gw:{self.port}", daemon=True,
        )

    @property
    def address(self) -> tuple[str, int]:
        return (self.host, self.port)

    def start(self) -> "Gateway":
        self._thread.start()
        return self

    def wait(self):
        self._thread.join()

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "Gateway":
        return self.start()

    def __exit__(self, *exc):
        self.close()


def main(argv=None):
    """Run the gateway: ``python -m taaroa.gateway [config-file]``.

    Config keys: GW_PORT (default 8080), IS_ADDR, SC_ADDR, GW_ASSETS_DIR.
    """
    import sys

    from taaroa.config import load_config, parse_addr

    argv = sys.argv[1:] if argv is None else argv
    config = load_config(
        argv[0] if argv else None,
        defaults={"GW_PORT": "8080", "IS_ADDR": "127.0.0.1:7070",
                  "SC_ADDR": "127.0.0.1:7072", "GW_ASSETS_DIR": ""},
        env_keys=("GW_PORT", "IS_ADDR", "SC_ADDR", "GW_ASSETS_DIR"),
    )
    gateway = Gateway(GatewayConfig(
        port=int(config["GW_PORT"]),
        host="0.0.0.0",
        is_addr=parse_addr(config["IS_ADDR"]),
        sc_addr=parse_addr(config["SC_ADDR"]),
        assets_dir=config["GW_ASSETS_DIR"] or None,
    ))
    print(f"gateway listening on {gateway.port}", flush=True)
    with gateway:
        gateway.wait()


if __name__ == "__main__":
    main()
