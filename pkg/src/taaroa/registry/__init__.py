"""Information Service: the central registry of machines, repositories,
services and virtual machines."""

from taaroa.registry.database import (
    InformationService,
    IsDatabase,
    PhysicalMachineRecord,
    RepositoryRecord,
    ServiceRecord,
    VirtualMachineRecord,
)

__all__ = [
    "InformationService",
    "IsDatabase",
    "PhysicalMachineRecord",
    "RepositoryRecord",
    "ServiceRecord",
    "VirtualMachineRecord",
]
