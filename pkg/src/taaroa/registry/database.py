"""Registry tables and the handlers for every Information Service message.

The in-memory database is authoritative.  Identifiers are allocated from
per-table counters starting at 1 and are never reused.  Unregistering a
machine, repository or service hard-deletes the dependent rows;
unregistering a VM is a soft removal: the row is kept (so status queries
keep answering) but it stops counting in availability sums and listings.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Optional

from taaroa import PROTOCOL_VERSION, lifecycle
from taaroa.protocol import (
    Err,
    ErrorCode,
    ExecStatus,
    GetPhyMach,
    GetVm,
    GetVmMachMngr,
    GetVmServ,
    GetVmStatus,
    ListPhyMach,
    ListPhyMachStatus,
    ListRepo,
    ListServ,
    ListVm,
    Ok,
    OkList,
    Quantity,
    RegPhyMach,
    RegRepo,
    RegServ,
    RegVm,
    SrvProtoVer,
    UnregPhyMach,
    UnregRepo,
    UnregServ,
    UnregVm,
    UpdateVmStatus,
    render_request,
)
from taaroa.protocol.codec import Reply
from taaroa.protocol.messages import Request


@dataclass
class PhysicalMachineRecord:
    id: int
    address: str
    cpu_type: str
    n_cpu: int
    cpu_clock: Quantity
    ram_size: Quantity
    disk_size: Quantity
    net_speed: Quantity
    max_vm_number: int  # -1 means unlimited
    user_name: str
    user_password: str
    vmm_user_name: str
    vmm_user_password: str
    mach_mngr_port: int


@dataclass
class RepositoryRecord:
    id: int
    address: str
    port: int
    user_name: str
    user_passwd: str


@dataclass
class ServiceRecord:
    id: int
    repository_id: int
    name: str
    req_disk: Quantity


@dataclass
class VirtualMachineRecord:
    id: int
    service_id: int
    phy_mach_id: int
    vm_local_id: str
    virt_ip: str
    allocated_cpu: float
    allocated_ram: float
    allocated_disk: float
    status: ExecStatus
    unregistered: bool = False


@dataclass
class IsDatabase:
    machines: dict[int, PhysicalMachineRecord] = field(default_factory=dict)
    repositories: dict[int, RepositoryRecord] = field(default_factory=dict)
    services: dict[int, ServiceRecord] = field(default_factory=dict)
    vms: dict[int, VirtualMachineRecord] = field(default_factory=dict)
    next_machine_id: int = 1
    next_repository_id: int = 1
    next_service_id: int = 1
    next_vm_id: int = 1

    # --- derived views ---------------------------------------------------

    def live_vms_on(self, phy_id: int) -> list[VirtualMachineRecord]:
        """VMs currently consuming resources on a machine, in id order."""
        return [
            vm for vm in sorted(self.vms.values(), key=lambda v: v.id)
            if vm.phy_mach_id == phy_id and not vm.status.is_final
            and not vm.unregistered
        ]

    def availability(self, phy_id: int) -> tuple[float, float, float]:
        """(avail_cpu, avail_ram, avail_disk) for one machine.

        CPU is in cores; RAM and disk are fractions of the host totals.
        Results are clamped to their admissible ranges so that float
        rounding can never leak an out-of-bounds value onto the wire.
        """
        machine = self.machines[phy_id]
        used_cpu = used_ram = used_disk = 0.0
        for vm in self.live_vms_on(phy_id):
            used_cpu += vm.allocated_cpu
            used_ram += vm.allocated_ram
            used_disk += vm.allocated_disk
        clamp = lambda v, hi: min(max(v, 0.0), hi)
        return (
            clamp(machine.n_cpu - used_cpu, float(machine.n_cpu)),
            clamp(1.0 - used_ram, 1.0),
            clamp(1.0 - used_disk, 1.0),
        )

    def audit(self):
        """Raise AssertionError on any referential-integrity violation."""
        for service in self.services.values():
            assert service.repository_id in self.repositories, (
                f"service {service.id} references missing repository "
                f"{service.repository_id}"
            )
        for vm in self.vms.values():
            assert vm.service_id in self.services, (
                f"vm {vm.id} references missing service {vm.service_id}"
            )
            assert vm.phy_mach_id in self.machines, (
                f"vm {vm.id} references missing machine {vm.phy_mach_id}"
            )

    # --- registrations ----------------------------------------------------

    def handle_regphymach(self, req: RegPhyMach) -> Reply:
        for machine in self.machines.values():
            if (machine.address, machine.mach_mngr_port) == (req.phy_ip, req.mm_port):
                return Err(ErrorCode.DUPLICATE_REGISTRATION)
        if req.n_cpu < 1 or not 1 <= req.mm_port <= 65535:
            return Err(ErrorCode.MALFORMED_REQUEST)
        machine = PhysicalMachineRecord(
            id=self.next_machine_id,
            address=req.phy_ip,
            cpu_type=req.cpu_type,
            n_cpu=req.n_cpu,
            cpu_clock=req.cpu_clock,
            ram_size=req.ram_size,
            disk_size=req.disk_size,
            net_speed=req.net_speed,
            max_vm_number=req.max_vm_number,
            user_name=req.mach_username,
            user_password=req.mach_password,
            vmm_user_name=req.xm_username,
            vmm_user_password=req.xm_password,
            mach_mngr_port=req.mm_port,
        )
        self.next_machine_id += 1
        self.machines[machine.id] = machine
        return Ok({"phy_id": machine.id})

    def handle_regrepo(self, req: RegRepo) -> Reply:
        if not 1 <= req.port <= 65535:
            return Err(ErrorCode.MALFORMED_REQUEST)
        repo = RepositoryRecord(
            id=self.next_repository_id,
            address=req.ip_addr,
            port=req.port,
            user_name=req.user_name,
            user_passwd=req.passwd,
        )
        self.next_repository_id += 1
        self.repositories[repo.id] = repo
        return Ok({"rm_id": repo.id})

    def handle_regserv(self, req: RegServ) -> Reply:
        if req.rm_id not in self.repositories:
            return Err(ErrorCode.UNKNOWN_REPOSITORY)
        service = ServiceRecord(
            id=self.next_service_id,
            repository_id=req.rm_id,
            name=req.name,
            req_disk=req.req_disk,
        )
        self.next_service_id += 1
        self.services[service.id] = service
        return Ok({"s_id": service.id})

    def handle_regvm(self, req: RegVm) -> Reply:
        if req.s_id not in self.services:
            return Err(ErrorCode.UNKNOWN_SERVICE)
        machine = self.machines.get(req.phy_id)
        if machine is None:
            return Err(ErrorCode.UNKNOWN_PHYSICAL_MACHINE)
        live = self.live_vms_on(req.phy_id)
        if machine.max_vm_number != -1 and len(live) >= machine.max_vm_number:
            return Err(ErrorCode.NO_CAPACITY)
        avail_cpu, avail_ram, avail_disk = self.availability(req.phy_id)
        if (req.allocated_cpu > avail_cpu or req.allocated_ram > avail_ram
                or req.allocated_disk > avail_disk):
            return Err(ErrorCode.NO_CAPACITY)
        vm = VirtualMachineRecord(
            id=self.next_vm_id,
            service_id=req.s_id,
            phy_mach_id=req.phy_id,
            vm_local_id=req.vm_local_id,
            virt_ip=req.virt_ip,
            allocated_cpu=req.allocated_cpu,
            allocated_ram=req.allocated_ram,
            allocated_disk=req.allocated_disk,
            status=ExecStatus.RUNNING,  # registered after the VM starts
        )
        self.next_vm_id += 1
        self.vms[vm.id] = vm
        return Ok({"vm_id": vm.id})

    # --- point queries -----------------------------------------------------

    def handle_getphymach(self, req: GetPhyMach) -> Reply:
        machine = self.machines.get(req.phy_id)
        if machine is None:
            return Err(ErrorCode.UNKNOWN_PHYSICAL_MACHINE)
        return Ok({"phy_ip": machine.address, "mm_port": machine.mach_mngr_port})

    def handle_getvm(self, req: GetVm) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None:
            return Err(ErrorCode.UNKNOWN_VM)
        return Ok({
            "s_id": vm.service_id,
            "phy_id": vm.phy_mach_id,
            "vm_local_id": vm.vm_local_id,
            "virt_ip": vm.virt_ip,
            "status": vm.status,
        })

    def handle_getvmmachmngr(self, req: GetVmMachMngr) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None:
            return Err(ErrorCode.UNKNOWN_VM)
        machine = self.machines[vm.phy_mach_id]
        return Ok({
            "phy_id": machine.id,
            "phy_ip": machine.address,
            "mm_port": machine.mach_mngr_port,
            "vm_local_id": vm.vm_local_id,
        })

    def handle_getvmserv(self, req: GetVmServ) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None:
            return Err(ErrorCode.UNKNOWN_VM)
        service = self.services[vm.service_id]
        repo = self.repositories[service.repository_id]
        return Ok({
            "s_id": service.id,
            "name": service.name,
            "rm_id": repo.id,
            "rm_ip": repo.address,
            "rm_port": repo.port,
        })

    def handle_getvmstatus(self, req: GetVmStatus) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None:
            return Err(ErrorCode.UNKNOWN_VM)
        return Ok({"status": vm.status})

    # --- listings ------------------------------------------------------------

    def handle_listphymach(self, req: ListPhyMach) -> Reply:
        return OkList(tuple(
            {"phy_id": m.id, "phy_ip": m.address, "mm_port": m.mach_mngr_port}
            for m in sorted(self.machines.values(), key=lambda m: m.id)
        ))

    def handle_listphymachstatus(self, req: ListPhyMachStatus) -> Reply:
        entries = []
        for machine in sorted(self.machines.values(), key=lambda m: m.id):
            avail_cpu, avail_ram, avail_disk = self.availability(machine.id)
            entries.append({
                "phy_id": machine.id,
                "avail_cpu": avail_cpu,
                "avail_ram": avail_ram,
                "avail_disk": avail_disk,
                "netspeed": machine.net_speed,
            })
        return OkList(tuple(entries))

    def handle_listrepo(self, req: ListRepo) -> Reply:
        return OkList(tuple(
            {"repo_id": r.id, "ip_addr": r.address, "port": r.port,
             "user_name": r.user_name, "passwd": r.user_passwd}
            for r in sorted(self.repositories.values(), key=lambda r: r.id)
        ))

    def handle_listserv(self, req: ListServ) -> Reply:
        entries = []
        for service in sorted(self.services.values(), key=lambda s: s.id):
            repo = self.repositories[service.repository_id]
            entries.append({
                "s_id": service.id,
                "name": service.name,
                "rm_id": repo.id,
                "rm_ip": repo.address,
                "rm_port": repo.port,
            })
        return OkList(tuple(entries))

    def handle_listvm(self, req: ListVm) -> Reply:
        # Unknown service ids yield an empty list, not an error.
        return OkList(tuple(
            {"vm_id": vm.id, "phy_id": vm.phy_mach_id,
             "vm_local_id": vm.vm_local_id, "virt_ip": vm.virt_ip,
             "status": vm.status}
            for vm in sorted(self.vms.values(), key=lambda v: v.id)
            if vm.service_id == req.s_id and not vm.unregistered
        ))

    # --- unregistrations --------------------------------------------------------

    def handle_unregphymach(self, req: UnregPhyMach) -> Reply:
        if req.phy_id not in self.machines:
            return Err(ErrorCode.UNKNOWN_PHYSICAL_MACHINE)
        del self.machines[req.phy_id]
        self.vms = {
            vid: vm for vid, vm in self.vms.items() if vm.phy_mach_id != req.phy_id
        }
        return Ok({"phy_id": req.phy_id})

    def handle_unregrepo(self, req: UnregRepo) -> Reply:
        if req.rm_id not in self.repositories:
            return Err(ErrorCode.UNKNOWN_REPOSITORY)
        del self.repositories[req.rm_id]
        doomed = {
            sid for sid, s in self.services.items() if s.repository_id == req.rm_id
        }
        self.services = {
            sid: s for sid, s in self.services.items() if sid not in doomed
        }
        self.vms = {
            vid: vm for vid, vm in self.vms.items() if vm.service_id not in doomed
        }
        return Ok({"rm_id": req.rm_id})

    def handle_unregserv(self, req: UnregServ) -> Reply:
        if req.s_id not in self.services:
            return Err(ErrorCode.UNKNOWN_SERVICE)
        del self.services[req.s_id]
        self.vms = {
            vid: vm for vid, vm in self.vms.items() if vm.service_id != req.s_id
        }
        return Ok({"s_id": req.s_id})

    def handle_unregvm(self, req: UnregVm) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None or vm.unregistered:
            return Err(ErrorCode.UNKNOWN_VM)
        if not vm.status.is_final:
            vm.status = ExecStatus.STOPPED
        vm.unregistered = True
        return Ok({"vm_id": req.vm_id})

    # --- status update ----------------------------------------------------------

    def handle_updatevmstatus(self, req: UpdateVmStatus) -> Reply:
        vm = self.vms.get(req.vm_id)
        if vm is None:
            return Err(ErrorCode.UNKNOWN_VM)
        if not lifecycle.can_change(vm.status, req.status):
            return Err(ErrorCode.INVALID_STATE_TRANSITION)
        vm.status = ExecStatus(req.status)
        return Ok({"status": vm.status})

    def handle_srvprotover(self, req: SrvProtoVer) -> Reply:
        return Ok({"version": PROTOCOL_VERSION})

    _DISPATCH = {
        RegPhyMach: handle_regphymach,
        RegRepo: handle_regrepo,
        RegServ: handle_regserv,
        RegVm: handle_regvm,
        GetPhyMach: handle_getphymach,
        GetVm: handle_getvm,
        GetVmMachMngr: handle_getvmmachmngr,
        GetVmServ: handle_getvmserv,
        GetVmStatus: handle_getvmstatus,
        ListPhyMach: handle_listphymach,
        ListPhyMachStatus: handle_listphymachstatus,
        ListRepo: handle_listrepo,
        ListServ: handle_listserv,
        ListVm: handle_listvm,
        UnregPhyMach: handle_unregphymach,
        UnregRepo: handle_unregrepo,
        UnregServ: handle_unregserv,
        UnregVm: handle_unregvm,
        UpdateVmStatus: handle_updatevmstatus,
        SrvProtoVer: handle_srvprotover,
    }

    MUTATING = (RegPhyMach, RegRepo, RegServ, RegVm, UnregPhyMach, UnregRepo,
                UnregServ, UnregVm, UpdateVmStatus)

    def handle(self, request: Request) -> Reply:
        handler = self._DISPATCH.get(type(request))
        if handler is None:
            return Err(ErrorCode.UNKNOWN_COMMAND)
        return handler(self, request)


class InformationService:
    """The IS server component: a database behind a single-writer lock,
    with an optional write-ahead log under ``data_dir``."""

    SERVER_KIND = "IS"

    def __init__(self, data_dir: Optional[str] = None,
                 database: Optional[IsDatabase] = None):
        self.db = database if database is not None else IsDatabase()
        self._lock = threading.Lock()
        self._wal = None
        if data_dir is not None:
            import os

            os.makedirs(data_dir, exist_ok=True)
            self._wal = open(os.path.join(data_dir, "is.wal"), "ab")

    def handle(self, request: Request) -> Reply:
        with self._lock:
            reply = self.db.handle(request)
            if (self._wal is not None and isinstance(reply, Ok)
                    and isinstance(request, IsDatabase.MUTATING)):
                self._wal.write(render_request(request))
                self._wal.flush()
            return reply

    def close(self):
        if self._wal is not None:
            self._wal.close()
            self._wal = None
