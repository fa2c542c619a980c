"""Run the Information Service: ``python -m taaroa.registry [config-file]``.

Config keys (file or environment): IS_PORT (default 7070), IS_DATA_DIR.
"""

import sys

from taaroa.config import load_config
from taaroa.net import ProtocolServer
from taaroa.registry import InformationService


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    config = load_config(
        argv[0] if argv else None,
        defaults={"IS_PORT": "7070", "IS_DATA_DIR": ""},
        env_keys=("IS_PORT", "IS_DATA_DIR"),
    )
    component = InformationService(data_dir=config["IS_DATA_DIR"] or None)
    server = ProtocolServer(component, host="0.0.0.0", port=int(config["IS_PORT"]))
    print(f"information service listening on {server.port}", flush=True)
    with server:
        server.wait()


if __name__ == "__main__":
    main()
