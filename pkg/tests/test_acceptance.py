"""Acceptance suite: the binding end-to-end criteria for this package.

Each test pins one system-level guarantee at its stated tolerance.  The
fuzz budget honours TAAROA_FUZZ_SECONDS (default 300 seconds).
"""

import math
import os
import random
import threading
import time

import pytest

from taaroa.harness import (
    assert_stop_conformance,
    assert_submission_conformance,
    boot_cluster,
    default_machine_spec,
)
from taaroa.lifecycle import EVENTS, InvalidTransition, apply_event
from taaroa.net import ProtocolServer
from taaroa.protocol import (
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
    MEMORY,
    MalformedReply,
    MalformedRequest,
    Ok,
    Quantity,
    RegRepo,
    RegServ,
    RegVm,
    SrvProtoVer,
    UnregPhyMach,
    UnregRepo,
    UnregServ,
    UnregVm,
    UpdateVmStatus,
    parse_reply,
    parse_request,
    render_reply,
    render_request,
)
from taaroa.registry import InformationService, IsDatabase
from taaroa.registry.persist import load_snapshot, save_snapshot

from conftest import ALL_REQUEST_KINDS, random_reply, random_request, raw_call
from test_lifecycle import EXPECTED as LIFECYCLE_ORACLE
from test_registry import mk_machine, mk_vm


# --- 1. codec round-trip -------------------------------------------------

def test_codec_round_trip_10000_under_30s():
    rng = random.Random(0x7AA40A)
    started = time.monotonic()
    for i in range(10_000):
        server, cls = ALL_REQUEST_KINDS[i % len(ALL_REQUEST_KINDS)]
        msg = random_request(rng, cls)
        assert parse_request(render_request(msg), server) == msg
        reply = random_reply(rng, cls)
        assert parse_reply(render_reply(reply, cls), cls) == reply
    assert time.monotonic() - started < 30.0


# --- 2. parser totality under fuzz --------------------------------------------

def _mutate(rng: random.Random, data: bytes) -> bytes:
    data = bytearray(data)
    for _ in range(rng.randint(1, 4)):
        op = rng.randrange(3)
        if op == 0 and data:
            data[rng.randrange(len(data))] = rng.randrange(256)
        elif op == 1:
            data.insert(rng.randrange(len(data) + 1), rng.randrange(256))
        elif op == 2 and data:
            del data[rng.randrange(len(data))]
    return bytes(data)


def test_parser_totality_fuzz():
    budget = float(os.environ.get("TAAROA_FUZZ_SECONDS", "300"))
    rng = random.Random(0xF022)
    deadline = time.monotonic() + budget
    servers = ("IS", "RM", "SC", "MM")
    iterations = 0
    while time.monotonic() < deadline:
        iterations += 1
        shape = rng.randrange(3)
        if shape == 0:
            data = rng.randbytes(rng.randint(0, 200))
        else:
            _, cls = rng.choice(ALL_REQUEST_KINDS)
            if shape == 1:
                data = _mutate(rng, render_request(random_request(rng, cls)))
            else:
                data = _mutate(rng, render_reply(random_reply(rng, cls), cls))
        server = rng.choice(servers)
        # Totality: the parser either raises its declared error or yields
        # a message that survives a render/parse cycle unchanged.
        try:
            parsed = parse_request(data, server)
        except MalformedRequest:
            pass
        else:
            assert parse_request(render_request(parsed), server) == parsed
        _, kind = rng.choice(ALL_REQUEST_KINDS)
        try:
            reply = parse_reply(data, kind)
        except MalformedReply:
            pass
        else:
            assert parse_reply(render_reply(reply, kind), kind) == reply
    assert iterations > 100  # the loop really ran


# --- 3. state machine -------------------------------------------------------------

def test_state_machine_exactly_the_documented_relation():
    finals = {s for s in ExecStatus if s.is_final}
    for state in ExecStatus:
        for event in EVENTS:
            expected = LIFECYCLE_ORACLE.get((state, event))
            if expected is None:
                with pytest.raises(InvalidTransition):
                    apply_event(state, event)
            else:
                assert state not in finals  # finals are absorbing
                assert apply_event(state, event) is expected


# --- 4. availability formulas -----------------------------------------------------

def _random_registry(rng: random.Random) -> IsDatabase:
    db = IsDatabase()
    n_machines = rng.randint(1, 10)
    for i in range(n_machines):
        db.handle(mk_machine(phy_ip=f"10.1.0.{i}", mm_port=7000 + i,
                             n_cpu=rng.randint(1, 32),
                             max_vm_number=-1))
    db.handle(RegRepo(ip_addr="r", port=1, user_name="u", passwd="p"))
    db.handle(RegServ(rm_id=1, name="s", req_disk=Quantity(1, "KB", MEMORY)))
    for n in range(rng.randint(0, 20)):
        machine = rng.randint(1, n_machines)
        vm_id = db.next_vm_id
        # insert bypassing admission so over-committed hosts occur too
        from taaroa.registry.database import VirtualMachineRecord
        db.vms[vm_id] = VirtualMachineRecord(
            id=vm_id, service_id=1, phy_mach_id=machine,
            vm_local_id=f"vm-{n}", virt_ip=f"10.2.0.{n}",
            allocated_cpu=rng.uniform(0, 4), allocated_ram=rng.uniform(0, 0.6),
            allocated_disk=rng.uniform(0, 0.6),
            status=rng.choice(list(ExecStatus)),
            unregistered=rng.random() < 0.2,
        )
        db.next_vm_id += 1
    return db


def _brute_force_availability(db: IsDatabase, phy_id: int):
    """Independent evaluation: exact sums over live VMs, then clamping."""
    machine = db.machines[phy_id]
    live = [vm for vm in db.vms.values()
            if vm.phy_mach_id == phy_id and not vm.unregistered
            and vm.status not in (ExecStatus.STOPPED, ExecStatus.CANCELLED,
                                  ExecStatus.FAILED, ExecStatus.ABORTED)]
    cpu = machine.n_cpu - math.fsum(vm.allocated_cpu for vm in live)
    ram = 1.0 - math.fsum(vm.allocated_ram for vm in live)
    disk = 1.0 - math.fsum(vm.allocated_disk for vm in live)
    clamp = lambda v, hi: min(max(v, 0.0), hi)
    return (clamp(cpu, float(machine.n_cpu)), clamp(ram, 1.0), clamp(disk, 1.0))


def test_availability_matches_brute_force_on_1000_registries():
    rng = random.Random(0xA0A1)
    for _ in range(1000):
        db = _random_registry(rng)
        reply = db.handle(ListPhyMachStatus())
        assert [e["phy_id"] for e in reply.entries] == sorted(db.machines)
        for entry in reply.entries:
            machine = db.machines[entry["phy_id"]]
            expect = _brute_force_availability(db, entry["phy_id"])
            got = (entry["avail_cpu"], entry["avail_ram"], entry["avail_disk"])
            for value, reference in zip(got, expect):
                assert abs(value - reference) <= 1e-9
            assert 0.0 <= entry["avail_cpu"] <= machine.n_cpu
            assert 0.0 <= entry["avail_ram"] <= 1.0
            assert 0.0 <= entry["avail_disk"] <= 1.0


# --- 5. cascade invariants ----------------------------------------------------------

def test_cascades_hold_over_1000_random_sequences():
    rng = random.Random(0xCA5CADE5 % 2**32)
    for _ in range(1000):
        db = IsDatabase()
        for _ in range(rng.randint(10, 40)):
            _cascade_op(rng, db)
        db.audit()


def _cascade_op(rng: random.Random, db: IsDatabase):
    choice = rng.randrange(9)
    if choice == 0:
        db.handle(mk_machine(phy_ip=f"10.3.0.{rng.randrange(4)}",
                             mm_port=7000 + rng.randrange(4),
                             max_vm_number=rng.choice([-1, 2])))
    elif choice == 1:
        db.handle(RegRepo(ip_addr="r", port=1 + rng.randrange(4),
                          user_name="u", passwd="p"))
    elif choice == 2:
        db.handle(RegServ(rm_id=rng.randrange(1, 5), name="s",
                          req_disk=Quantity(1, "KB", MEMORY)))
    elif choice == 3:
        db.handle(mk_vm(s_id=rng.randrange(1, 5), phy_id=rng.randrange(1, 5),
                        cpu=rng.uniform(0, 1), ram=rng.uniform(0, 0.3),
                        disk=rng.uniform(0, 0.3), n=rng.randrange(1, 9)))
    elif choice == 4:
        db.handle(UpdateVmStatus(vm_id=rng.randrange(1, 9),
                                 status=rng.choice(list(ExecStatus))))
    elif choice == 5:
        target = rng.randrange(1, 5)
        db.handle(UnregPhyMach(phy_id=target))
        assert not [v for v in db.vms.values() if v.phy_mach_id == target]
    elif choice == 6:
        target = rng.randrange(1, 5)
        services_of = {s.id for s in db.services.values()
                       if s.repository_id == target}
        db.handle(UnregRepo(rm_id=target))
        assert not services_of & set(db.services)
        assert not [v for v in db.vms.values() if v.service_id in services_of]
    elif choice == 7:
        target = rng.randrange(1, 5)
        db.handle(UnregServ(s_id=target))
        assert not [v for v in db.vms.values() if v.service_id == target]
    else:
        target = rng.randrange(1, 9)
        reply = db.handle(UnregVm(vm_id=target))
        if isinstance(reply, Ok):
            vm = db.vms[target]
            assert vm.unregistered and vm.status is ExecStatus.STOPPED \
                or vm.status.is_final


# --- 6. FCFS -------------------------------------------------------------------------

def test_fcfs_50_concurrent_submissions_20_repetitions(tmp_path):
    spec = default_machine_spec(n_cpu=100, max_vm_number=200)
    for rep in range(20):
        services = [f"svc{j:02d}" for j in range(50)]
        work = tmp_path / f"rep{rep}"
        work.mkdir()
        with boot_cluster(str(work), [spec], services=services) as c:
            order = list(c.service_ids)
            random.Random(rep).shuffle(order)
            replies = {}

            def submit(s_id):
                replies[s_id] = c.submit(s_id)

            threads = [threading.Thread(target=submit, args=(s,))
                       for s in order]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert all(isinstance(r, Ok) for r in replies.values())
            arrival = [s for _, s in c.scheduler.submission_log]
            emitted = [int(e.detail.split()[1]) for e in c.trace.snapshot()
                       if e.edge == ("SC", "RM", "SUBMITVM")]
            assert len(arrival) == 50
            assert emitted == arrival, f"repetition {rep} violated FCFS"


# --- 7. workflow conformance -----------------------------------------------------------

def test_two_machine_workflow_conformance_under_60s(tmp_path):
    started = time.monotonic()
    specs = [default_machine_spec(n_cpu=16, max_vm_number=16)] * 2
    with boot_cluster(str(tmp_path), specs, services=["web"]) as c:
        from taaroa.net import call
        baseline = call(c.is_addr, ListPhyMachStatus())
        s_id = c.service_ids[0]
        vm_ids = []
        for _ in range(10):
            mark = c.trace.mark()
            reply = c.submit(s_id)
            assert isinstance(reply, Ok)
            assert_submission_conformance(c.trace.since(mark))
            vm_ids.append(reply["vm_id"])
        for vm_id in vm_ids:
            mark = c.trace.mark()
            assert isinstance(c.stop(vm_id), Ok)
            assert_stop_conformance(c.trace.since(mark))
        # End state: ten VMs in status 6 and availability fully restored.
        assert len(vm_ids) == 10
        for vm_id in vm_ids:
            status = call(c.is_addr, GetVmStatus(vm_id=vm_id))
            assert status == Ok({"status": ExecStatus.STOPPED})
            assert int(status["status"]) == 6
        assert call(c.is_addr, ListPhyMachStatus()) == baseline
        c.audit()
    assert time.monotonic() - started < 60.0


# --- 8. statelessness ---------------------------------------------------------------------

def _fixture_requests():
    """A request per registry message kind, plus a few error paths."""
    quantity = Quantity(500, "KB", MEMORY)
    return [
        mk_machine(),
        mk_machine(phy_ip="10.0.0.2", mm_port=7075, max_vm_number=2),
        RegRepo(ip_addr="10.0.0.9", port=7071, user_name="rm", passwd="pw"),
        RegServ(rm_id=1, name="web", req_disk=quantity),
        RegServ(rm_id=7, name="ghost", req_disk=quantity),  # error path
        mk_vm(n=1),
        mk_vm(n=2, phy_id=2, ram=0.4),
        GetPhyMach(phy_id=1),
        GetPhyMach(phy_id=99),
        GetVm(vm_id=1),
        GetVmMachMngr(vm_id=2),
        GetVmServ(vm_id=1),
        GetVmStatus(vm_id=2),
        ListPhyMach(),
        ListPhyMachStatus(),
        ListRepo(),
        ListServ(),
        ListVm(s_id=1),
        UpdateVmStatus(vm_id=1, status=ExecStatus.SUSPENDED),
        UpdateVmStatus(vm_id=1, status=ExecStatus.UNSTARTED),  # 301 path
        UnregVm(vm_id=2),
        UnregServ(s_id=1),
        UnregPhyMach(phy_id=2),
        UnregRepo(rm_id=1),
        SrvProtoVer(),
    ]


def test_statelessness_byte_identical_replay(tmp_path):
    rng = random.Random(0x57A7E)
    requests = _fixture_requests()
    # plus a random tail over the registry namespace
    is_kinds = [cls for server, cls in ALL_REQUEST_KINDS if server == "IS"]
    requests += [random_request(rng, rng.choice(is_kinds)) for _ in range(75)]

    captured = []  # (snapshot path, raw request, list reply?, reply bytes)
    service = InformationService()
    with ProtocolServer(service) as server:
        for index, request in enumerate(requests):
            snap = tmp_path / f"state-{index}.db"
            save_snapshot(service.db, str(snap))
            raw = render_request(request)
            reply = raw_call(server.address, raw,
                             type(request).ENTRY is not None)
            captured.append((snap, raw, type(request).ENTRY is not None, reply))

    # Replay each request alone, on a fresh connection, against a fresh
    # server restored to the pre-request state.
    for snap, raw, list_reply, expected in captured:
        restored = InformationService(database=load_snapshot(str(snap)))
        with ProtocolServer(restored) as server:
            assert raw_call(server.address, raw, list_reply) == expected
