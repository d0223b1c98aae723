"""
Utilities for CLI programs
"""

import copy
import json
from functools import partial

import yaml

from ..exceptions import DescriptionParseError


def read_config_file(fname):
    """Reads a JSON or YAML file.

    Syntax errors are raised as ``DescriptionParseError`` carrying the one-based line and column of the failure.
    """
    if fname.endswith(".yaml") or fname.endswith(".yml"):
        rfunc = partial(yaml.load, Loader=yaml.SafeLoader)
    elif fname.endswith(".json"):
        rfunc = json.load
    else:
        raise DescriptionParseError("Did not understand file type {}.".format(fname))

    try:
        with open(fname, "r") as handle:
            ret = rfunc(handle)
    except FileNotFoundError:
        raise FileNotFoundError("No config file found at {}.".format(fname))
    except json.JSONDecodeError as exc:
        raise DescriptionParseError("Invalid JSON in {}: {}".format(fname, exc.msg), exc.lineno, exc.colno)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line, column = (None, None) if mark is None else (mark.line + 1, mark.column + 1)
        raise DescriptionParseError("Invalid YAML in {}: {}".format(fname, exc.problem), line, column)
    except yaml.YAMLError as exc:
        raise DescriptionParseError("Invalid YAML in {}: {}".format(fname, exc))

    if not isinstance(ret, dict):
        raise DescriptionParseError("Top level of {} must be a mapping.".format(fname))

    return ret


def argparse_config_merge(parsed_options, config_options, fields):
    """Merges options between a configuration file and a parser

    Command-line values win over the configuration file; options left unset on the command line (``None``) keep
    the file value. Only keys in ``fields`` are taken from the parsed options.

    Parameters
    ----------
    parsed_options : dict
    config_options : dict
    fields : Iterable[str]
    """
    config_options = copy.deepcopy(config_options)

    for k in fields:
        v = parsed_options.get(k, None)
        if v is not None:
            config_options[k] = v

    return config_options
