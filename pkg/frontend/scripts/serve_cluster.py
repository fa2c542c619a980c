"""Boot an in-process cluster plus gateway for the portal's e2e test.

Prints "PORT <n>" (the gateway's HTTP port) on stdout once everything is
up, then runs until stdin closes.
"""

import pathlib
import sys
import tempfile

from taaroa.gateway import Gateway, GatewayConfig
from taaroa.harness import boot_cluster, default_machine_spec


def main() -> None:
    assets = pathlib.Path(__file__).resolve().parents[1] / "dist"
    with tempfile.TemporaryDirectory() as work_dir:
        with boot_cluster(
            work_dir,
            [default_machine_spec(), default_machine_spec()],
            services=["web", "db"],
        ) as cluster:
            config = GatewayConfig(
                port=0,
                is_addr=cluster.is_addr,
                sc_addr=cluster.sc_addr,
                assets_dir=str(assets) if assets.is_dir() else None,
            )
            with Gateway(config) as gateway:
                print(f"PORT {gateway.port}", flush=True)
                sys.stdin.read()  # hold until the test closes our stdin


if __name__ == "__main__":
    main()
