from provflow.cli.config import Profile, config_path, load_user_config, resolve_profile
from provflow.cli.main import cli

__all__ = [
    "Profile",
    "cli",
    "config_path",
    "load_user_config",
    "resolve_profile",
]
