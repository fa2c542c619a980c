"""Typed message definitions.

Every request is a frozen dataclass whose declared field order matches
the wire order.  Class attributes drive the generic codec:

    KEYWORD -- first token on the wire
    FIELDS  -- request field schema, one ``FieldSpec`` per token
    REPLY   -- schema of the OK reply payload
    ENTRY   -- schema of one list-reply entry (list replies only)

Field kinds: ``int`` (non-negative), ``neg1int`` (non-negative or the
literal -1), ``real``, ``str`` (opaque non-blank token), ``b64``
(base64-shielded string), ``status`` (execution-status code) and
``quantity`` (magnitude + unit, with a per-field family/default).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, ClassVar, Optional

from taaroa.protocol.status import ExecStatus
from taaroa.protocol.units import FREQUENCY, MEMORY, NETSPEED, Quantity


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str
    family: Optional[str] = None
    default_unit: Optional[str] = None


def _f(name: str, kind: str = "int", family: str | None = None,
       default: str | None = None) -> FieldSpec:
    return FieldSpec(name, kind, family, default)


@dataclass(frozen=True)
class Request:
    KEYWORD: ClassVar[str]
    FIELDS: ClassVar[tuple[FieldSpec, ...]] = ()
    REPLY: ClassVar[tuple[FieldSpec, ...]] = ()
    ENTRY: ClassVar[Optional[tuple[FieldSpec, ...]]] = None


# --- replies -----------------------------------------------------------

@dataclass(frozen=True)
class Ok:
    """Single-line OK reply; ``values`` is keyed by the REPLY schema."""

    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Any:
        return self.values[name]


@dataclass(frozen=True)
class OkList:
    """List reply; each entry is keyed by the ENTRY schema."""

    entries: tuple[dict[str, Any], ...] = ()


@dataclass(frozen=True)
class Err:
    code: int


# --- requests to the Information Service -------------------------------

@dataclass(frozen=True)
class GetPhyMach(Request):
    phy_id: int
    KEYWORD = "GETPHYMACH"
    FIELDS = (_f("phy_id"),)
    REPLY = (_f("phy_ip", "str"), _f("mm_port"))


@dataclass(frozen=True)
class GetVm(Request):
    vm_id: int
    KEYWORD = "GETVM"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("s_id"), _f("phy_id"), _f("vm_local_id", "str"),
             _f("virt_ip", "str"), _f("status", "status"))


@dataclass(frozen=True)
class GetVmMachMngr(Request):
    vm_id: int
    KEYWORD = "GETVMMACHMNGR"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("phy_id"), _f("phy_ip", "str"), _f("mm_port"),
             _f("vm_local_id", "str"))


@dataclass(frozen=True)
class GetVmServ(Request):
    vm_id: int
    KEYWORD = "GETVMSERV"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("s_id"), _f("name", "b64"), _f("rm_id"),
             _f("rm_ip", "str"), _f("rm_port"))


@dataclass(frozen=True)
class GetVmStatus(Request):
    vm_id: int
    KEYWORD = "GETVMSTATUS"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("status", "status"),)


@dataclass(frozen=True)
class ListPhyMach(Request):
    KEYWORD = "LISTPHYMACH"
    ENTRY = (_f("phy_id"), _f("phy_ip", "str"), _f("mm_port"))


@dataclass(frozen=True)
class ListPhyMachStatus(Request):
    KEYWORD = "LISTPHYMACHSTATUS"
    ENTRY = (_f("phy_id"), _f("avail_cpu", "real"), _f("avail_ram", "real"),
             _f("avail_disk", "real"),
             _f("netspeed", "quantity", NETSPEED, "Mbps"))


@dataclass(frozen=True)
class ListRepo(Request):
    KEYWORD = "LISTREPO"
    ENTRY = (_f("repo_id"), _f("ip_addr", "str"), _f("port"),
             _f("user_name", "b64"), _f("passwd", "b64"))


@dataclass(frozen=True)
class ListServ(Request):
    KEYWORD = "LISTSERV"
    ENTRY = (_f("s_id"), _f("name", "b64"), _f("rm_id"),
             _f("rm_ip", "str"), _f("rm_port"))


@dataclass(frozen=True)
class ListVm(Request):
    s_id: int
    KEYWORD = "LISTVM"
    FIELDS = (_f("s_id"),)
    ENTRY = (_f("vm_id"), _f("phy_id"), _f("vm_local_id", "str"),
             _f("virt_ip", "str"), _f("status", "status"))


@dataclass(frozen=True)
class RegPhyMach(Request):
    phy_ip: str
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
    KEYWORD = "REGPHYMACH"
    FIELDS = (
        _f("phy_ip", "str"),
        _f("cpu_type", "b64"),
        _f("n_cpu"),
        _f("cpu_clock", "quantity", FREQUENCY, "MHz"),
        _f("ram_size", "quantity", MEMORY, "MB"),
        _f("disk_size", "quantity", MEMORY, "MB"),
        _f("net_speed", "quantity", NETSPEED, "Mbps"),
        _f("max_vm_number", "neg1int"),
        _f("mach_username", "b64"),
        _f("mach_password", "b64"),
        _f("xm_username", "b64"),
        _f("xm_password", "b64"),
        _f("mm_port"),
    )
    REPLY = (_f("phy_id"),)


@dataclass(frozen=True)
class RegRepo(Request):
    ip_addr: str
    port: int
    user_name: str
    passwd: str
    KEYWORD = "REGREPO"
    FIELDS = (_f("ip_addr", "str"), _f("port"),
              _f("user_name", "b64"), _f("passwd", "b64"))
    REPLY = (_f("rm_id"),)


@dataclass(frozen=True)
class RegServ(Request):
    rm_id: int
    name: str
    req_disk: Quantity
    KEYWORD = "REGSERV"
    FIELDS = (_f("rm_id"), _f("name", "b64"),
              _f("req_disk", "quantity", MEMORY, "KB"))
    REPLY = (_f("s_id"),)


@dataclass(frozen=True)
class RegVm(Request):
    s_id: int
    phy_id: int
    vm_local_id: str
    virt_ip: str
    allocated_cpu: float
    allocated_ram: float
    allocated_disk: float
    KEYWORD = "REGVM"
    FIELDS = (_f("s_id"), _f("phy_id"), _f("vm_local_id", "str"),
              _f("virt_ip", "str"), _f("allocated_cpu", "real"),
              _f("allocated_ram", "real"), _f("allocated_disk", "real"))
    REPLY = (_f("vm_id"),)


@dataclass(frozen=True)
class SrvProtoVer(Request):
    KEYWORD = "SRVPROTOVER"
    REPLY = (_f("version", "str"),)


@dataclass(frozen=True)
class UnregPhyMach(Request):
    phy_id: int
    KEYWORD = "UNREGPHYMACH"
    FIELDS = (_f("phy_id"),)
    REPLY = (_f("phy_id"),)


@dataclass(frozen=True)
class UnregRepo(Request):
    rm_id: int
    KEYWORD = "UNREGREPO"
    FIELDS = (_f("rm_id"),)
    REPLY = (_f("rm_id"),)


@dataclass(frozen=True)
class UnregServ(Request):
    s_id: int
    KEYWORD = "UNREGSERV"
    FIELDS = (_f("s_id"),)
    REPLY = (_f("s_id"),)


@dataclass(frozen=True)
class UnregVm(Request):
    vm_id: int
    KEYWORD = "UNREGVM"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("vm_id"),)


@dataclass(frozen=True)
class UpdateVmStatus(Request):
    vm_id: int
    status: ExecStatus
    KEYWORD = "UPDATEVMSTATUS"
    FIELDS = (_f("vm_id"), _f("status", "status"))
    REPLY = (_f("status", "status"),)


# --- requests to the Repository Manager --------------------------------

@dataclass(frozen=True)
class RmStopVm(Request):
    vm_id: int
    KEYWORD = "STOPVM"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("vm_id"),)


@dataclass(frozen=True)
class SubmitVm(Request):
    s_id: int
    phy_id: int
    KEYWORD = "SUBMITVM"
    FIELDS = (_f("s_id"), _f("phy_id"))
    REPLY = (_f("vm_id"),)


# --- requests to the Scheduler ------------------------------------------

@dataclass(frozen=True)
class StopServ(Request):
    vm_id: int
    KEYWORD = "STOPSERV"
    FIELDS = (_f("vm_id"),)
    REPLY = (_f("vm_id"),)


@dataclass(frozen=True)
class SubmitServ(Request):
    s_id: int
    KEYWORD = "SUBMITSERV"
    FIELDS = (_f("s_id"),)
    REPLY = (_f("vm_id"),)


# --- requests to the Machine Manager ------------------------------------

@dataclass(frozen=True)
class StartVm(Request):
    """Header line carries the service id and the byte count of the
    uncompressed tar archive that follows as the message body."""

    s_id: int
    image: bytes
    KEYWORD = "STARTVM"
    FIELDS = (_f("s_id"),)  # body length handled by the codec
    REPLY = (_f("vm_id"),)


@dataclass(frozen=True)
class MmStopVm(Request):
    vm_local_id: str
    KEYWORD = "STOPVM"
    FIELDS = (_f("vm_local_id", "str"),)
    REPLY = (_f("result"),)  # the literal 0 on success


# --- per-server keyword namespaces --------------------------------------

IS_REQUESTS: dict[str, type[Request]] = {
    cls.KEYWORD: cls
    for cls in (
        GetPhyMach, GetVm, GetVmMachMngr, GetVmServ, GetVmStatus,
        ListPhyMach, ListPhyMachStatus, ListRepo, ListServ, ListVm,
        RegPhyMach, RegRepo, RegServ, RegVm, SrvProtoVer,
        UnregPhyMach, UnregRepo, UnregServ, UnregVm, UpdateVmStatus,
    )
}
RM_REQUESTS: dict[str, type[Request]] = {
    "SRVPROTOVER": SrvProtoVer, "STOPVM": RmStopVm, "SUBMITVM": SubmitVm,
}
SC_REQUESTS: dict[str, type[Request]] = {
    "SRVPROTOVER": SrvProtoVer, "STOPSERV": StopServ, "SUBMITSERV": SubmitServ,
}
MM_REQUESTS: dict[str, type[Request]] = {
    "SRVPROTOVER": SrvProtoVer, "STARTVM": StartVm, "STOPVM": MmStopVm,
}

SERVER_REQUESTS: dict[str, dict[str, type[Request]]] = {
    "IS": IS_REQUESTS,
    "RM": RM_REQUESTS,
    "SC": SC_REQUESTS,
    "MM": MM_REQUESTS,
}
