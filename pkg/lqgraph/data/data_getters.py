"""
Assists in grabbing the committed example systems
"""

import glob
import os

from ..cli.cli_utils import read_config_file
from ..cli.description import parse_description

__all__ = ["list_systems", "get_system_path", "get_system_description", "get_system"]

_data_dir = os.path.dirname(__file__)
_systems_dir = os.path.join(_data_dir, "systems")


def list_systems():
    """
    List the names of all committed systems.
    """
    return sorted(os.path.splitext(os.path.basename(x))[0] for x in glob.glob(os.path.join(_systems_dir, "*.json")))


def get_system_path(name):
    if not name.endswith(".json"):
        name += ".json"

    filename = os.path.join(_systems_dir, name)
    if not os.path.isfile(filename):
        raise OSError("Path '{}' not found.".format(filename))

    return filename


def get_system_description(name):
    """
    Returns the raw description mapping of a committed system.
    """
    return read_config_file(get_system_path(name))


def get_system(name):
    """
    Returns the (BlockSystem, SystemDescription) pair of a committed system.
    """
    return parse_description(get_system_description(name))
