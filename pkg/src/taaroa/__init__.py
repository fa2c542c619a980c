"""TAAROA middleware: run services as virtual machines on a pool of hosts.

Subpackages and modules:
    protocol    -- wire codec for the text protocol spoken by every component
    lifecycle   -- the VM execution-state machine
    registry    -- the Information Service (central registry server)
    scheduler   -- the Scheduler (FCFS submission queue)
    repository  -- the Repository Manager (image store + staging)
    machine     -- the Machine Manager with a mock hypervisor
    client      -- command-line client
    gateway     -- HTTP/JSON facade for the browser portal
    harness     -- in-process cluster orchestration for tests
"""

PROTOCOL_VERSION = "1.0"
