"""Machine Manager: the per-host agent and its mock hypervisor.

The hypervisor is a mock: "starting" a VM unpacks the image bundle into
a per-VM work directory, records a digest and fabricates a virtual IP of
the form ``10.0.<phy_id>.<n>``.  Every observable contract (registration
with the Information Service, the local-id map, capacity accounting and
the lifecycle transitions) is real.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
import shutil
import tarfile
import threading
from dataclasses import dataclass, field

from taaroa import PROTOCOL_VERSION, lifecycle
from taaroa.net import TransportError, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    ExecStatus,
    MmStopVm,
    Ok,
    Quantity,
    RegPhyMach,
    RegVm,
    SrvProtoVer,
    StartVm,
    UnregVm,
)
from taaroa.protocol.codec import Reply
from taaroa.protocol.messages import Request

log = logging.getLogger(__name__)


class NoCapacity(Exception):
    """Host cannot take the requested allocation."""


@dataclass(frozen=True)
class MachineSpec:
    """Hardware characteristics advertised at registration."""

    address: str
    cpu_type: str
    n_cpu: int
    cpu_clock: Quantity
    ram_size: Quantity
    disk_size: Quantity
    net_speed: Quantity
    max_vm_number: int
    mach_username: str
    mach_password: str
    xm_username: str
    xm_password: str
    mm_port: int


def allocate(spec: MachineSpec, req_disk_bytes: int,
             used: tuple[float, float, float]) -> tuple[float, float, float]:
    """Pick (cpu, ram, disk) allocations for a new VM.

    Default policy: one full core; RAM split 1/max(4, max_vm_number) (a
    flat quarter when the host is unlimited); disk proportional to the
    bundle size.  Raises :class:`NoCapacity` when the remainder does not
    cover the request.
    """
    used_cpu, used_ram, used_disk = used
    cpu = 1.0
    denominator = spec.max_vm_number if spec.max_vm_number > 0 else 4
    ram = 1.0 / max(4, denominator)
    disk = req_disk_bytes / spec.disk_size.canonical()
    if (cpu > spec.n_cpu - used_cpu or ram > 1.0 - used_ram
            or disk > 1.0 - used_disk):
        raise NoCapacity()
    return cpu, ram, disk


@dataclass
class LocalVm:
    localid: str
    s_id: int
    digest: str
    virt_ip: str
    status: ExecStatus
    allocated: tuple[float, float, float]
    workdir: str


class MockVmm:
    """Mock virtualization layer: a table of local VMs, nothing more."""

    def __init__(self, spec: MachineSpec, work_root: str):
        self.spec = spec
        self.work_root = work_root
        self.vms: dict[str, LocalVm] = {}
        self._counter = 0
        os.makedirs(work_root, exist_ok=True)

    def live(self) -> list[LocalVm]:
        return [vm for vm in self.vms.values() if not vm.status.is_final]

    def used(self) -> tuple[float, float, float]:
        cpu = ram = disk = 0.0
        for vm in self.live():
            cpu += vm.allocated[0]
            ram += vm.allocated[1]
            disk += vm.allocated[2]
        return cpu, ram, disk

    def create(self, s_id: int, image: bytes, phy_id: int) -> LocalVm:
        """Unpack and start a VM; raises NoCapacity or ValueError (bad tar)."""
        live = self.live()
        if (self.spec.max_vm_number != -1
                and len(live) >= self.spec.max_vm_number):
            raise NoCapacity()
        try:
            archive = tarfile.open(fileobj=io.BytesIO(image), mode="r:")
        except tarfile.TarError as exc:
            raise ValueError(f"image is not an uncompressed tar: {exc}") from exc
        with archive:
            members = [m for m in archive.getmembers() if m.isfile()]
            if not members:
                raise ValueError("image archive holds no files")
            content_bytes = sum(m.size for m in members)
            allocation = allocate(self.spec, content_bytes, self.used())
            self._counter += 1
            localid = f"vm-{self._counter}"
            workdir = os.path.join(self.work_root, localid)
            os.makedirs(workdir)
            for member in members:
                target = os.path.normpath(os.path.join(workdir, member.name))
                if not target.startswith(os.path.abspath(workdir) + os.sep) \
                        and target != os.path.abspath(workdir):
                    target = os.path.join(workdir, os.path.basename(member.name))
                os.makedirs(os.path.dirname(target) or workdir, exist_ok=True)
                with open(target, "wb") as out:
                    out.write(archive.extractfile(member).read())
        vm = LocalVm(
            localid=localid,
            s_id=s_id,
            digest=hashlib.sha256(image).hexdigest(),
            virt_ip=f"10.0.{phy_id}.{self._counter}",
            status=ExecStatus.UNSTARTED,
            allocated=allocation,
            workdir=workdir,
        )
        vm.status = lifecycle.apply_event(vm.status, lifecycle.SELECT_FOR_EXECUTION)
        vm.status = lifecycle.apply_event(vm.status, lifecycle.STAGE_IN_COMPLETE)
        self.vms[localid] = vm
        return vm

    def shutdown(self, localid: str):
        vm = self.vms[localid]
        vm.status = lifecycle.apply_event(vm.status, lifecycle.SHUTDOWN)

    def destroy(self, localid: str):
        vm = self.vms.pop(localid, None)
        if vm is not None:
            shutil.rmtree(vm.workdir, ignore_errors=True)

    def inject_event(self, localid: str, event: str) -> ExecStatus:
        """Test-only fault hook: suspend/resume/fail/abort a local VM."""
        vm = self.vms[localid]
        vm.status = lifecycle.apply_event(vm.status, event)
        return vm.status


@dataclass
class VmIdMapEntry:
    id: int
    vmid: int  # global id assigned by the IS
    localid: str


class MachineManager:
    """The MM server component."""

    SERVER_KIND = "MM"

    def __init__(self, spec: MachineSpec, is_addr: tuple[str, int],
                 data_dir: str):
        self.spec = spec
        self.is_addr = is_addr
        self.data_dir = data_dir
        self.phy_id: int | None = None
        self.vmm = MockVmm(spec, os.path.join(data_dir, "vms"))
        self.vmidlist: dict[str, VmIdMapEntry] = {}  # keyed by localid
        self._next_row = 1
        self._lock = threading.Lock()

    # --- startup ------------------------------------------------------------

    def startup_register(self) -> int:
        """REGPHYMACH with the host characteristics; raises on failure."""
        spec = self.spec
        reply = call(self.is_addr, RegPhyMach(
            phy_ip=spec.address, cpu_type=spec.cpu_type, n_cpu=spec.n_cpu,
            cpu_clock=spec.cpu_clock, ram_size=spec.ram_size,
            disk_size=spec.disk_size, net_speed=spec.net_speed,
            max_vm_number=spec.max_vm_number,
            mach_username=spec.mach_username,
            mach_password=spec.mach_password,
            xm_username=spec.xm_username, xm_password=spec.xm_password,
            mm_port=spec.mm_port,
        ))
        if not isinstance(reply, Ok):
            raise RuntimeError(f"REGPHYMACH failed: {reply}")
        self.phy_id = reply["phy_id"]
        return self.phy_id

    def _save_vmidlist(self):
        path = os.path.join(self.data_dir, "vmidlist.db")
        with open(path, "w", encoding="utf-8") as handle:
            for entry in sorted(self.vmidlist.values(), key=lambda e: e.id):
                handle.write(f"{entry.id} {entry.vmid} {entry.localid}\n")

    # --- request handling ------------------------------------------------------

    def handle(self, request: Request) -> Reply:
        if isinstance(request, StartVm):
            with self._lock:
                return self._start(request.s_id, request.image)
        if isinstance(request, MmStopVm):
            with self._lock:
                return self._stop(request.vm_local_id)
        if isinstance(request, SrvProtoVer):
            return Ok({"version": PROTOCOL_VERSION})
        return Err(ErrorCode.UNKNOWN_COMMAND)

    def _start(self, s_id: int, image: bytes) -> Reply:
        try:
            vm = self.vmm.create(s_id, image, self.phy_id)
        except NoCapacity:
            return Err(ErrorCode.NO_CAPACITY)
        except ValueError:
            return Err(ErrorCode.MALFORMED_REQUEST)
        cpu, ram, disk = vm.allocated
        try:
            reply = call(self.is_addr, RegVm(
                s_id=s_id, phy_id=self.phy_id, vm_local_id=vm.localid,
                virt_ip=vm.virt_ip, allocated_cpu=cpu, allocated_ram=ram,
                allocated_disk=disk,
            ))
        except TransportError:
            self.vmm.destroy(vm.localid)
            return Err(ErrorCode.UPSTREAM_FAILURE)
        if isinstance(reply, Err):
            self.vmm.destroy(vm.localid)
            return Err(ErrorCode.UPSTREAM_FAILURE)
        entry = VmIdMapEntry(id=self._next_row, vmid=reply["vm_id"],
                             localid=vm.localid)
        self._next_row += 1
        self.vmidlist[vm.localid] = entry
        self._save_vmidlist()
        return Ok({"vm_id": entry.vmid})

    def _stop(self, vm_local_id: str) -> Reply:
        entry = self.vmidlist.get(vm_local_id)
        if entry is None:
            return Err(ErrorCode.UNKNOWN_VM)
        try:
            self.vmm.shutdown(vm_local_id)
        except lifecycle.InvalidTransition:
            return Err(ErrorCode.INVALID_STATE_TRANSITION)
        del self.vmidlist[vm_local_id]
        self._save_vmidlist()
        unreg = UnregVm(vm_id=entry.vmid)
        for attempt in (1, 2):  # retirement retried once on IS failure
            try:
                reply = call(self.is_addr, unreg)
                break
            except TransportError:
                reply = None
        if reply is None or isinstance(reply, Err):
            return Err(ErrorCode.UPSTREAM_FAILURE)
        return Ok({"result": 0})


def build_spec(config: dict[str, str]) -> MachineSpec:
    """Assemble a MachineSpec from MM_* config keys."""
    from taaroa.protocol import FREQUENCY, MEMORY, NETSPEED
    from taaroa.protocol.units import parse_quantity

    return MachineSpec(
        address=config["MM_IP"],
        cpu_type=config["MM_CPU_TYPE"],
        n_cpu=int(config["MM_NCPU"]),
        cpu_clock=parse_quantity(config["MM_CPU_CLOCK"], FREQUENCY, "MHz"),
        ram_size=parse_quantity(config["MM_RAM_MB"], MEMORY, "MB"),
        disk_size=parse_quantity(config["MM_DISK_MB"], MEMORY, "MB"),
        net_speed=parse_quantity(config["MM_NET_MBPS"], NETSPEED, "Mbps"),
        max_vm_number=int(config["MM_MAX_VM"]),
        mach_username=config["MM_USER"],
        mach_password=config["MM_PASSWD"],
        xm_username=config["MM_XM_USER"],
        xm_password=config["MM_XM_PASSWD"],
        mm_port=int(config["MM_PORT"]),
    )


def main(argv=None):
    """Run the Machine Manager: ``python -m taaroa.machine [config-file]``.

    Config keys: MM_PORT (default 7073), MM_DATA_DIR, IS_ADDR and the
    MachineSpec fields (MM_IP, MM_CPU_TYPE, MM_NCPU, MM_CPU_CLOCK,
    MM_RAM_MB, MM_DISK_MB, MM_NET_MBPS, MM_MAX_VM, MM_USER, MM_PASSWD,
    MM_XM_USER, MM_XM_PASSWD).
    """
    import sys

    from taaroa.config import load_config, parse_addr
    from taaroa.net import ProtocolServer

    argv = sys.argv[1:] if argv is None else argv
    keys = ("MM_PORT", "MM_DATA_DIR", "IS_ADDR", "MM_IP", "MM_CPU_TYPE",
            "MM_NCPU", "MM_CPU_CLOCK", "MM_RAM_MB", "MM_DISK_MB",
            "MM_NET_MBPS", "MM_MAX_VM", "MM_USER", "MM_PASSWD",
            "MM_XM_USER", "MM_XM_PASSWD")
    config = load_config(
        argv[0] if argv else None,
        defaults={
            "MM_PORT": "7073", "MM_DATA_DIR": "./mm-data",
            "IS_ADDR": "127.0.0.1:7070", "MM_IP": "127.0.0.1",
            "MM_CPU_TYPE": "generic-x86", "MM_NCPU": "4",
            "MM_CPU_CLOCK": "2000", "MM_RAM_MB": "4096",
            "MM_DISK_MB": "100000", "MM_NET_MBPS": "1000",
            "MM_MAX_VM": "-1", "MM_USER": "root", "MM_PASSWD": "root",
            "MM_XM_USER": "xen", "MM_XM_PASSWD": "xen",
        },
        env_keys=keys,
    )
    os.makedirs(config["MM_DATA_DIR"], exist_ok=True)
    component = MachineManager(
        spec=build_spec(config),
        is_addr=parse_addr(config["IS_ADDR"]),
        data_dir=config["MM_DATA_DIR"],
    )
    try:
        component.startup_register()
    except (RuntimeError, TransportError) as exc:
        print(f"machine manager startup failed: {exc}", file=sys.stderr)
        raise SystemExit(1)
    server = ProtocolServer(component, host="0.0.0.0",
                            port=int(config["MM_PORT"]))
    print(f"machine manager listening on {server.port}", flush=True)
    with server:
        server.wait()


if __name__ == "__main__":
    main()
