"""Repository Manager tests: store layout, staging and the submit/stop flows."""

import math
import os

import pytest

from taaroa.net import ProtocolServer, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    ExecStatus,
    GetVmStatus,
    ListServ,
    MEMORY,
    Ok,
    Quantity,
    RmStopVm,
    SrvProtoVer,
    SubmitVm,
)
from taaroa.registry import InformationService
from taaroa.repository import (
    ImageBundle,
    MANIFEST_NAME,
    RepositoryManager,
    load_bundle,
    required_disk,
)
from taaroa.harness import boot_cluster, default_machine_spec, write_service_fixture


def make_store(tmp_path, names=("web",)):
    store = tmp_path / "store"
    store.mkdir()
    for name in names:
        write_service_fixture(str(store), name)
    return str(store)


class TestBundle:
    def test_load_bundle(self, tmp_path):
        path = write_service_fixture(str(tmp_path), "web",
                                     files={"disk.img": b"x" * 100},
                                     config_file="vm.cfg")
        bundle = load_bundle(path)
        assert bundle.service_name == "web"
        assert bundle.config_file == "vm.cfg"
        assert dict(bundle.files)["disk.img"] == b"x" * 100

    def test_missing_manifest(self, tmp_path):
        path = tmp_path / "svc"
        path.mkdir()
        (path / "disk.img").write_bytes(b"x")
        with pytest.raises(ValueError):
            load_bundle(str(path))

    def test_manifest_names_missing_config(self, tmp_path):
        path = tmp_path / "svc"
        path.mkdir()
        (path / MANIFEST_NAME).write_text("nope.cfg\n")
        (path / "disk.img").write_bytes(b"x")
        with pytest.raises(ValueError):
            load_bundle(str(path))

    def test_no_image_file(self, tmp_path):
        path = tmp_path / "svc"
        path.mkdir()
        (path / MANIFEST_NAME).write_text("vm.cfg\n")
        (path / "vm.cfg").write_text("memory=1\n")
        with pytest.raises(ValueError):
            load_bundle(str(path))

    def test_pack_is_deterministic(self, tmp_path):
        path = write_service_fixture(str(tmp_path), "web")
        bundle = load_bundle(path)
        assert bundle.pack() == bundle.pack()
        assert ImageBundle.unpack("web", bundle.pack()) == bundle

    def test_required_disk_rounds_up_to_kilobytes(self, tmp_path):
        path = write_service_fixture(
            str(tmp_path), "web",
            files={"disk.img": b"y" * 2490, "vm.cfg": b"m=1\n"})
        bundle = load_bundle(path)
        # Independent oracle: sum the file sizes on disk.
        total = sum(
            os.path.getsize(os.path.join(path, f)) for f in os.listdir(path)
        )
        assert bundle.total_bytes == total
        assert required_disk(bundle) == Quantity(
            math.ceil(total / 1000), "KB", MEMORY)


class TestStartup:
    def test_two_dirs_register_one_repo_two_services(self, tmp_path):
        store = make_store(tmp_path, names=("alpha", "beta"))
        with ProtocolServer(InformationService()) as is_server:
            rm = RepositoryManager(store_dir=store,
                                   advertise_addr=("127.0.0.1", 7071),
                                   is_addr=is_server.address)
            assert rm.register_self_and_services() == 1
            services = call(is_server.address, ListServ())
            assert [e["name"] for e in services.entries] == ["alpha", "beta"]
            assert sorted(rm.vmlist) == [1, 2]
            lines = (tmp_path / "store" / "vmlist.db").read_text().splitlines()
            assert lines == [f"1 {os.path.join(store, 'alpha')}",
                             f"2 {os.path.join(store, 'beta')}"]

    def test_empty_store_registers_repo_only(self, tmp_path):
        store = tmp_path / "store"
        store.mkdir()
        with ProtocolServer(InformationService()) as is_server:
            rm = RepositoryManager(store_dir=str(store),
                                   advertise_addr=("127.0.0.1", 7071),
                                   is_addr=is_server.address)
            rm.register_self_and_services()
            assert rm.vmlist == {}
            assert call(is_server.address, ListServ()).entries == ()

    def test_is_down_raises(self, tmp_path):
        from taaroa.net import TransportError
        store = make_store(tmp_path)
        rm = RepositoryManager(store_dir=store,
                               advertise_addr=("127.0.0.1", 7071),
                               is_addr=("127.0.0.1", 9))
        with pytest.raises((RuntimeError, TransportError)):
            rm.register_self_and_services()


class _StubMm:
    """A machine manager that refuses every start with one error code."""

    SERVER_KIND = "MM"

    def __init__(self, code):
        self.code = code

    def handle(self, request):
        return Err(self.code)


class TestSubmitFlow:
    def test_happy_path_updates_status(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            rm_server = c.rm_server
            reply = call(rm_server.address, SubmitVm(s_id=1, phy_id=1))
            assert reply == Ok({"vm_id": 1})
            assert call(c.is_addr, GetVmStatus(vm_id=1)) == Ok(
                {"status": ExecStatus.RUNNING})

    def test_unknown_service(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            reply = call(c.rm_server.address, SubmitVm(s_id=77, phy_id=1))
            assert reply == Err(ErrorCode.UNKNOWN_SERVICE)

    def test_unknown_machine_relays_is_error(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            reply = call(c.rm_server.address, SubmitVm(s_id=1, phy_id=9))
            assert reply == Err(ErrorCode.UNKNOWN_PHYSICAL_MACHINE)

    def test_mm_error_maps_to_400_and_registers_nothing(self, tmp_path):
        store = make_store(tmp_path)
        registry = InformationService()
        with ProtocolServer(registry) as is_server, \
                ProtocolServer(_StubMm(ErrorCode.NO_CAPACITY)) as mm_server:
            from taaroa.protocol import RegPhyMach
            from taaroa.protocol import FREQUENCY, NETSPEED
            call(is_server.address, RegPhyMach(
                phy_ip="127.0.0.1", cpu_type="x", n_cpu=4,
                cpu_clock=Quantity(1, "GHz", FREQUENCY),
                ram_size=Quantity(1, "GB", MEMORY),
                disk_size=Quantity(1, "TB", MEMORY),
                net_speed=Quantity(1, "Gbps", NETSPEED),
                max_vm_number=-1, mach_username="r", mach_password="r",
                xm_username="x", xm_password="x",
                mm_port=mm_server.port))
            rm = RepositoryManager(store_dir=store,
                                   advertise_addr=("127.0.0.1", 7071),
                                   is_addr=is_server.address)
            rm.register_self_and_services()
            reply = rm.handle(SubmitVm(s_id=1, phy_id=1))
            assert reply == Err(ErrorCode.UPSTREAM_FAILURE)
            assert registry.db.vms == {}


class TestStopFlow:
    def test_stop_updates_status_to_stopped(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            vm_id = c.submit(c.service_ids[0])["vm_id"]
            reply = call(c.rm_server.address, RmStopVm(vm_id=vm_id))
            assert reply == Ok({"vm_id": vm_id})
            assert call(c.is_addr, GetVmStatus(vm_id=vm_id)) == Ok(
                {"status": ExecStatus.STOPPED})

    def test_stop_unknown_vm_relays_203(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            assert call(c.rm_server.address, RmStopVm(vm_id=404)) == Err(
                ErrorCode.UNKNOWN_VM)

    def test_srvprotover(self, tmp_path):
        with boot_cluster(str(tmp_path), [default_machine_spec()],
                          services=["web"]) as c:
            assert call(c.rm_server.address, SrvProtoVer()) == Ok(
                {"version": "1.0"})
