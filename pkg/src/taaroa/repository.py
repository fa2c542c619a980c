"""Repository Manager: the image store and staging to machine managers.

Store layout: one directory per service under the store root.  The
directory name is the service name; a ``manifest`` file inside names the
VM configuration file; every other regular file belongs to the image.
The service-id-to-path map persists as one textual record per entry in
``vmlist.db`` at the store root.
"""

from __future__ import annotations

import io
import logging
import math
import os
import tarfile
import threading
from dataclasses import dataclass

from taaroa import PROTOCOL_VERSION
from taaroa.net import TransportError, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    ExecStatus,
    GetPhyMach,
    GetVmMachMngr,
    MEMORY,
    MmStopVm,
    Ok,
    Quantity,
    RegRepo,
    RegServ,
    RmStopVm,
    SrvProtoVer,
    StartVm,
    SubmitVm,
    UpdateVmStatus,
)
from taaroa.protocol.codec import Reply
from taaroa.protocol.messages import Request

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest"


@dataclass(frozen=True)
class ImageBundle:
    """Ordered file contents of one service's VM image."""

    service_name: str
    files: tuple[tuple[str, bytes], ...]
    config_file: str

    @property
    def total_bytes(self) -> int:
        return sum(len(content) for _, content in self.files)

    def pack(self) -> bytes:
        """Uncompressed tar archive, members in stable name order."""
        buffer = io.BytesIO()
        with tarfile.open(fileobj=buffer, mode="w") as archive:
            for name, content in self.files:
                info = tarfile.TarInfo(name=name)
                info.size = len(content)
                info.mtime = 0
                archive.addfile(info, io.BytesIO(content))
        return buffer.getvalue()

    @classmethod
    def unpack(cls, service_name: str, data: bytes) -> "ImageBundle":
        files = []
        config_file = ""
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:") as archive:
            for member in archive.getmembers():
                if not member.isfile():
                    continue
                content = archive.extractfile(member).read()
                files.append((member.name, content))
                if member.name == MANIFEST_NAME:
                    config_file = content.decode("utf-8").strip()
        return cls(service_name, tuple(files), config_file)


def load_bundle(path: str) -> ImageBundle:
    """Read one service directory; raises ValueError when incomplete."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise ValueError(f"{path}: missing {MANIFEST_NAME}")
    with open(manifest_path, encoding="utf-8") as handle:
        config_file = handle.read().strip()
    files = []
    for root, _, names in os.walk(path):
        for name in sorted(names):
            full = os.path.join(root, name)
            rel = os.path.relpath(full, path)
            with open(full, "rb") as handle:
                files.append((rel, handle.read()))
    names = {name for name, _ in files}
    if config_file not in names:
        raise ValueError(f"{path}: manifest names missing config {config_file!r}")
    if not names - {MANIFEST_NAME, config_file}:
        raise ValueError(f"{path}: no image file beside the configuration")
    return ImageBundle(os.path.basename(path), tuple(sorted(files)), config_file)


def required_disk(bundle: ImageBundle) -> Quantity:
    """Bundle size rounded up to whole kilobytes."""
    return Quantity(math.ceil(bundle.total_bytes / 1000), "KB", MEMORY)


class RepositoryManager:
    """The RM server component."""

    SERVER_KIND = "RM"

    def __init__(self, store_dir: str, advertise_addr: tuple[str, int],
                 is_addr: tuple[str, int], user_name: str = "rmadmin",
                 passwd: str = "rmsecret"):
        self.store_dir = store_dir
        self.advertise_addr = advertise_addr
        self.is_addr = is_addr
        self.user_name = user_name
        self.passwd = passwd
        self.rm_id: int | None = None
        self.vmlist: dict[int, str] = {}  # service id -> image directory
        self._staging_locks: dict[int, threading.Lock] = {}
        self._lock = threading.Lock()

    # --- startup -----------------------------------------------------------

    def register_self_and_services(self) -> int:
        """Register with the IS, then one REGSERV per image directory.

        Raises RuntimeError on any IS failure; the RM must not serve
        without its registrations.
        """
        reply = call(self.is_addr, RegRepo(
            ip_addr=self.advertise_addr[0], port=self.advertise_addr[1],
            user_name=self.user_name, passwd=self.passwd,
        ))
        if not isinstance(reply, Ok):
            raise RuntimeError(f"REGREPO failed: {reply}")
        self.rm_id = reply["rm_id"]
        for entry in sorted(os.scandir(self.store_dir), key=lambda e: e.name):
            if not entry.is_dir():
                continue
            bundle = load_bundle(entry.path)
            reply = call(self.is_addr, RegServ(
                rm_id=self.rm_id, name=bundle.service_name,
                req_disk=required_disk(bundle),
            ))
            if not isinstance(reply, Ok):
                raise RuntimeError(f"REGSERV {bundle.service_name} failed: {reply}")
            self.vmlist[reply["s_id"]] = entry.path
        self._save_vmlist()
        return self.rm_id

    def _save_vmlist(self):
        path = os.path.join(self.store_dir, "vmlist.db")
        with open(path, "w", encoding="utf-8") as handle:
            for sid in sorted(self.vmlist):
                handle.write(f"{sid} {self.vmlist[sid]}\n")

    def _staging_lock(self, s_id: int) -> threading.Lock:
        with self._lock:
            return self._staging_locks.setdefault(s_id, threading.Lock())

    # --- request handling -----------------------------------------------------

    def handle(self, request: Request) -> Reply:
        if isinstance(request, SubmitVm):
            return self._submit(request.s_id, request.phy_id)
        if isinstance(request, RmStopVm):
            return self._stop(request.vm_id)
        if isinstance(request, SrvProtoVer):
            return Ok({"version": PROTOCOL_VERSION})
        return Err(ErrorCode.UNKNOWN_COMMAND)

    def _submit(self, s_id: int, phy_id: int) -> Reply:
        path = self.vmlist.get(s_id)
        if path is None:
            return Err(ErrorCode.UNKNOWN_SERVICE)
        try:
            machine = call(self.is_addr, GetPhyMach(phy_id=phy_id))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(machine, Err):
            return machine
        mm_addr = (machine["phy_ip"], machine["mm_port"])
        with self._staging_lock(s_id):
            image = load_bundle(path).pack()
            try:
                started = call(mm_addr, StartVm(s_id=s_id, image=image))
            except TransportError:
                return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(started, Err):
            # Nothing to roll back: the MM registers nothing on failure.
            return Err(ErrorCode.UPSTREAM_FAILURE)
        vm_id = started["vm_id"]
        try:
            updated = call(self.is_addr, UpdateVmStatus(
                vm_id=vm_id, status=ExecStatus.RUNNING,
            ))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(updated, Err):
            return Err(ErrorCode.UPSTREAM_FAILURE)
        return Ok({"vm_id": vm_id})

    def _stop(self, vm_id: int) -> Reply:
        try:
            info = call(self.is_addr, GetVmMachMngr(vm_id=vm_id))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(info, Err):
            return info
        mm_addr = (info["phy_ip"], info["mm_port"])
        try:
            stopped = call(mm_addr, MmStopVm(vm_local_id=info["vm_local_id"]))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(stopped, Err):
            return Err(ErrorCode.UPSTREAM_FAILURE)
        try:
            updated = call(self.is_addr, UpdateVmStatus(
                vm_id=vm_id, status=ExecStatus.STOPPED,
            ))
        except TransportError:
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(updated, Err):
            return Err(ErrorCode.UPSTREAM_FAILURE)
        return Ok({"vm_id": vm_id})


def main(argv=None):
    """Run the Repository Manager: ``python -m taaroa.repository [config-file]``.

    Config keys: RM_PORT (default 7071), RM_STORE_DIR, IS_ADDR, RM_USER,
    RM_PASSWD, RM_ADVERTISE_IP (defaults to 127.0.0.1).
    """
    import sys

    from taaroa.config import load_config, parse_addr
    from taaroa.net import ProtocolServer

    argv = sys.argv[1:] if argv is None else argv
    config = load_config(
        argv[0] if argv else None,
        defaults={
            "RM_PORT": "7071", "RM_STORE_DIR": "./store",
            "IS_ADDR": "127.0.0.1:7070", "RM_USER": "rmadmin",
            "RM_PASSWD": "rmsecret", "RM_ADVERTISE_IP": "127.0.0.1",
        },
        env_keys=("RM_PORT", "RM_STORE_DIR", "IS_ADDR", "RM_USER",
                  "RM_PASSWD", "RM_ADVERTISE_IP"),
    )
    port = int(config["RM_PORT"])
    component = RepositoryManager(
        store_dir=config["RM_STORE_DIR"],
        advertise_addr=(config["RM_ADVERTISE_IP"], port),
        is_addr=parse_addr(config["IS_ADDR"]),
        user_name=config["RM_USER"],
        passwd=config["RM_PASSWD"],
    )
    try:
        component.register_self_and_services()
    except (RuntimeError, TransportError) as exc:
        print(f"repository manager startup failed: {exc}", file=sys.stderr)
        raise SystemExit(1)
    server = ProtocolServer(component, host="0.0.0.0", port=port)
    print(f"repository manager listening on {server.port}", flush=True)
    with server:
        server.wait()


if __name__ == "__main__":
    main()
