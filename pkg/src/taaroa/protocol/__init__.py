"""Wire protocol: message types, value grammars and the line codec."""

from taaroa.protocol.errors import (
    ErrorCode,
    MalformedNumber,
    MalformedQuantity,
    MalformedReply,
    MalformedRequest,
    ProtocolError,
    UnknownStatusCode,
)
from taaroa.protocol.status import ExecStatus, exec_status_of
from taaroa.protocol.units import (
    FREQUENCY,
    MEMORY,
    NETSPEED,
    Quantity,
    parse_int,
    parse_quantity,
    parse_real,
)
from taaroa.protocol.messages import (
    Err,
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
    MmStopVm,
    Ok,
    OkList,
    RegPhyMach,
    RegRepo,
    RegServ,
    RegVm,
    Request,
    RmStopVm,
    SERVER_REQUESTS,
    SrvProtoVer,
    StartVm,
    StopServ,
    SubmitServ,
    SubmitVm,
    UnregPhyMach,
    UnregRepo,
    UnregServ,
    UnregVm,
    UpdateVmStatus,
)
from taaroa.protocol.codec import (
    parse_reply,
    parse_request,
    render_reply,
    render_request,
)

__all__ = [
    "ErrorCode",
    "MalformedNumber",
    "MalformedQuantity",
    "MalformedReply",
    "MalformedRequest",
    "ProtocolError",
    "UnknownStatusCode",
    "ExecStatus",
    "exec_status_of",
    "FREQUENCY",
    "MEMORY",
    "NETSPEED",
    "Quantity",
    "parse_int",
    "parse_quantity",
    "parse_real",
    "Err",
    "Ok",
    "OkList",
    "Request",
    "SERVER_REQUESTS",
    "GetPhyMach",
    "GetVm",
    "GetVmMachMngr",
    "GetVmServ",
    "GetVmStatus",
    "ListPhyMach",
    "ListPhyMachStatus",
    "ListRepo",
    "ListServ",
    "ListVm",
    "RegPhyMach",
    "RegRepo",
    "RegServ",
    "RegVm",
    "SrvProtoVer",
    "UnregPhyMach",
    "UnregRepo",
    "UnregServ",
    "UnregVm",
    "UpdateVmStatus",
    "RmStopVm",
    "SubmitVm",
    "StopServ",
    "SubmitServ",
    "StartVm",
    "MmStopVm",
    "parse_reply",
    "parse_request",
    "render_reply",
    "render_request",
]
