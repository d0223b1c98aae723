"""
Misc information and runtime information.
"""

import platform
import numpy as np

__all__ = ["get_information", "provenance_stamp"]

__info = {"version": "0.1.0", "python": platform.python_version(), "numpy": np.__version__}


def get_information(key):
    """
    Obtains a variety of runtime information about lqgraph.
    """
    key = key.lower()
    if key not in __info:
        raise KeyError("Information key '{}' not understood.".format(key))

    return __info[key]


def provenance_stamp(routine):
    """Return a provenance dictionary for run manifests,
    generating routine's name is passed in through `routine`.
    """
    return {
        'creator': 'lqgraph',
        'version': get_information('version'),
        'routine': routine,
        'python': get_information('python'),
        'numpy': get_information('numpy'),
    }
