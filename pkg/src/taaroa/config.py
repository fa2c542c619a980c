"""Flat key=value configuration files with environment-variable overrides."""

from __future__ import annotations

import os


def load_config(path: str | None = None, defaults: dict[str, str] | None = None,
                env_keys: tuple[str, ...] = ()) -> dict[str, str]:
    """Merge defaults, a key=value file and the environment, in that order.

    The file format is one ``KEY=VALUE`` per line; blank lines and lines
    starting with ``#`` are ignored.  Only keys named in ``env_keys`` are
    read from the environment.
    """
    config = dict(defaults or {})
    if path:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected KEY=VALUE")
                key, _, value = line.partition("=")
                config[key.strip()] = value.strip()
    for key in env_keys:
        if key in os.environ:
            config[key] = os.environ[key]
    return config


def parse_addr(text: str) -> tuple[str, int]:
    """Split ``host:port`` into its parts."""
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)
