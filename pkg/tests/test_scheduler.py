"""Scheduler tests: machine selection, FCFS dispatch and error relay."""

import itertools
import threading

import pytest

from taaroa.harness import boot_cluster, default_machine_spec
from taaroa.net import ProtocolServer, call
from taaroa.protocol import (
    Err,
    ErrorCode,
    MEMORY,
    Ok,
    Quantity,
    RegPhyMach,
    RegRepo,
    RegServ,
    SrvProtoVer,
    StopServ,
    SubmitServ,
)
from taaroa.registry import InformationService
from taaroa.scheduler import NoCandidate, Scheduler, select_machine


def entry(phy_id, cpu=1.0, ram=1.0, disk=1.0):
    return {"phy_id": phy_id, "avail_cpu": cpu, "avail_ram": ram,
            "avail_disk": disk}


class TestSelectMachine:
    def test_lowest_id_wins(self):
        assert select_machine([entry(3), entry(1), entry(2)]) == 1

    def test_zero_ram_excluded(self):
        with pytest.raises(NoCandidate):
            select_machine([entry(1, ram=0.0)])

    def test_empty_set(self):
        with pytest.raises(NoCandidate):
            select_machine([])

    def test_first_exhausted_disk_skipped(self):
        assert select_machine([entry(1, disk=0.0), entry(2)]) == 2

    def test_pure_under_permutation(self):
        entries = [entry(5), entry(2), entry(9, cpu=0.0), entry(3)]
        for perm in itertools.permutations(entries):
            assert select_machine(list(perm)) == 2


@pytest.fixture
def cluster(tmp_path):
    with boot_cluster(str(tmp_path), [default_machine_spec()],
                      services=["web"]) as c:
        yield c


class TestSubmission:
    def test_happy_path(self, cluster):
        reply = cluster.submit(cluster.service_ids[0])
        assert reply == Ok({"vm_id": 1})

    def test_unknown_service(self, cluster):
        assert cluster.submit(999) == Err(ErrorCode.UNKNOWN_SERVICE)

    def test_no_machines_means_no_capacity(self, tmp_path):
        with boot_cluster(str(tmp_path), [], services=["web"]) as c:
            assert c.submit(c.service_ids[0]) == Err(ErrorCode.NO_CAPACITY)

    def test_exhausted_first_machine_falls_over(self, tmp_path):
        # One VM saturates the single CPU of machine 1; its availability
        # drops to zero and the next submission lands on machine 2.
        specs = [default_machine_spec(n_cpu=1), default_machine_spec()]
        with boot_cluster(str(tmp_path), specs, services=["web"]) as c:
            s_id = c.service_ids[0]
            assert isinstance(c.submit(s_id), Ok)
            assert isinstance(c.submit(s_id), Ok)
            machines = {vm.manager.phy_id: len(vm.manager.vmm.live())
                        for vm in c.machines}
            assert machines == {1: 1, 2: 1}

    def test_mm_capacity_error_surfaces_as_400(self, tmp_path):
        # The hypervisor refuses (local max_vm reached) while the registry
        # still shows availability: the failure crosses the repository
        # manager as an upstream error and no VM is registered.
        specs = [default_machine_spec(max_vm_number=1)]
        with boot_cluster(str(tmp_path), specs, services=["web"]) as c:
            s_id = c.service_ids[0]
            assert isinstance(c.submit(s_id), Ok)
            assert c.submit(s_id) == Err(ErrorCode.UPSTREAM_FAILURE)
            vms = c.information_service.db.vms
            assert len(vms) == 1  # the failed start registered nothing
            c.audit()

    def test_three_concurrent_submissions_fcfs(self, tmp_path):
        spec = default_machine_spec(n_cpu=16, max_vm_number=16)
        with boot_cluster(str(tmp_path), [spec],
                          services=["a", "b", "c"]) as c:
            threads = [
                threading.Thread(target=c.submit, args=(s_id,))
                for s_id in c.service_ids
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            arrival = [s for _, s in c.scheduler.submission_log]
            emitted = [
                int(e.detail.split()[1]) for e in c.trace.snapshot()
                if e.edge == ("SC", "RM", "SUBMITVM")
            ]
            assert emitted == arrival and len(emitted) == 3


class TestStop:
    def test_stop_running_vm(self, cluster):
        vm_id = cluster.submit(cluster.service_ids[0])["vm_id"]
        assert cluster.stop(vm_id) == Ok({"vm_id": vm_id})
        from taaroa.protocol import ExecStatus, GetVmStatus
        status = call(cluster.is_addr, GetVmStatus(vm_id=vm_id))
        assert status == Ok({"status": ExecStatus.STOPPED})

    def test_stop_unknown_vm(self, cluster):
        assert cluster.stop(404) == Err(ErrorCode.UNKNOWN_VM)

    def test_stop_relays_rm_error(self, cluster):
        vm_id = cluster.submit(cluster.service_ids[0])["vm_id"]
        cluster.stop(vm_id)
        # Second stop: the MM no longer knows the VM; the RM maps the MM
        # failure to an upstream error, relayed unchanged by the scheduler.
        assert cluster.stop(vm_id) == Err(ErrorCode.UPSTREAM_FAILURE)


class TestErrorPaths:
    def test_rm_unreachable_maps_to_400(self, tmp_path):
        # A service whose repository address answers nothing.
        registry = InformationService()
        with ProtocolServer(registry) as is_server:
            call(is_server.address, RegRepo(ip_addr="127.0.0.1", port=9,
                                            user_name="u", passwd="p"))
            call(is_server.address, RegServ(
                rm_id=1, name="web", req_disk=Quantity(1, "KB", MEMORY)))
            call(is_server.address, RegPhyMach(
                phy_ip="127.0.0.1", cpu_type="x", n_cpu=4,
                cpu_clock=Quantity(1, "GHz", "frequency"),
                ram_size=Quantity(1, "GB", "memory"),
                disk_size=Quantity(1, "TB", "memory"),
                net_speed=Quantity(1, "Gbps", "netspeed"),
                max_vm_number=-1, mach_username="r", mach_password="r",
                xm_username="x", xm_password="x", mm_port=9))
            scheduler = Scheduler(is_addr=is_server.address)
            try:
                with ProtocolServer(scheduler) as sc_server:
                    reply = call(sc_server.address, SubmitServ(s_id=1))
                    assert reply == Err(ErrorCode.UPSTREAM_FAILURE)
            finally:
                scheduler.close()

    def test_is_unreachable_maps_to_400(self):
        scheduler = Scheduler(is_addr=("127.0.0.1", 9))
        try:
            with ProtocolServer(scheduler) as server:
                assert call(server.address, SubmitServ(s_id=1)) == Err(
                    ErrorCode.UPSTREAM_FAILURE)
                assert call(server.address, StopServ(vm_id=1)) == Err(
                    ErrorCode.UPSTREAM_FAILURE)
        finally:
            scheduler.close()

    def test_srvprotover(self):
        scheduler = Scheduler(is_addr=("127.0.0.1", 9))
        try:
            with ProtocolServer(scheduler) as server:
                assert call(server.address, SrvProtoVer()) == Ok(
                    {"version": "1.0"})
        finally:
            scheduler.close()
