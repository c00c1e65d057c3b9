"""Profile resolution for the command line.

A profile is a directory holding one graph store plus engine state.
The command line accepts either a filesystem path or the name of an
entry in the per-user config file:

    # ~/.config/provflow/config.yaml
    default: main
    profiles:
      main:
        path: /home/me/provflow/main
        rest_port: 5000
        workers: 4
        cache:
          default: false

Resolution order: --profile flag, then the PROFILE environment
variable, then the config default. Exactly one profile wins.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

CONFIG_DIR_NAME = "provflow"
CONFIG_FILE_NAME = "config.yaml"


@dataclass(frozen=True)
class Profile:
    name: str
    path: Path
    rest_port: int = 5000
    workers: Optional[int] = None
    cache: dict = field(default_factory=dict)


def config_path() -> Path:
    base = os.environ.get("XDG_CONFIG_HOME")
    if not base:
        base = os.path.join(os.path.expanduser("~"), ".config")
    return Path(base) / CONFIG_DIR_NAME / CONFIG_FILE_NAME


def load_user_config() -> dict:
    path = config_path()
    if not path.exists():
        return {}
    doc = yaml.safe_load(path.read_text()) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path} must hold a mapping")
    return doc


def resolve_profile(ref: Optional[str]) -> Profile:
    """Turn a flag/env/config reference into a concrete Profile."""
    config = load_user_config()
    ref = ref or os.environ.get("PROFILE") or config.get("default")
    if not ref:
        raise LookupError(
            "no profile: pass --profile, set PROFILE, or put a "
            f"'default' entry in {config_path()}"
        )
    entry = (config.get("profiles") or {}).get(ref)
    if entry is not None:
        if "path" not in entry:
            raise LookupError(f"profile {ref!r} in {config_path()} has no path")
        return Profile(
            name=ref,
            path=Path(entry["path"]).expanduser(),
            rest_port=int(entry.get("rest_port", 5000)),
            workers=entry.get("workers"),
            cache=entry.get("cache") or {},
        )
    # not a configured name: accept it as a directory path, but only
    # when it actually looks like one, so a typo'd name cannot
    # silently create a fresh store in the working directory
    path = Path(ref).expanduser()
    looks_like_path = (
        os.sep in ref or ref.startswith((".", "~")) or path.is_absolute()
    )
    if looks_like_path or path.is_dir():
        return Profile(name=path.name or str(path), path=path)
    raise LookupError(
        f"no profile named {ref!r} in {config_path()} and no such directory"
    )
