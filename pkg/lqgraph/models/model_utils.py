import hashlib
import json
from typing import Annotated, Any, Dict, Tuple

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def frozen_array(value: Any, dtype=float) -> np.ndarray:
    """
    Copies ``value`` into a read-only numpy array of the requested dtype.
    """
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _float_array(value: Any) -> np.ndarray:
    return frozen_array(value, dtype=float)


def _int_array(value: Any) -> np.ndarray:
    arr = np.asarray(value)
    if arr.size and np.issubdtype(arr.dtype, np.floating) and not np.all(np.mod(arr, 1) == 0):
        raise ValueError("Integer array expected, found fractional entries.")
    return frozen_array(arr, dtype=np.int64)


def _to_list(value: np.ndarray) -> Any:
    return value.tolist()


# Numpy arrays travel through pydantic models as immutable copies and serialize as nested lists.
FloatArray = Annotated[np.ndarray, BeforeValidator(_float_array), PlainSerializer(_to_list, when_used="json")]
IntArray = Annotated[np.ndarray, BeforeValidator(_int_array), PlainSerializer(_to_list, when_used="json")]


def recursive_normalizer(value: Any, **kwargs: Dict[str, Any]) -> Any:
    """
    Prepare a structure for hashing or JSON output by converting arrays to lists and rounding all floats
    """
    digits = kwargs.get("digits", 10)

    if isinstance(value, (bool, int, str, type(None))):
        pass

    elif isinstance(value, (list, tuple)):
        value = [recursive_normalizer(x, **kwargs) for x in value]

    elif isinstance(value, dict):
        value = {str(k): recursive_normalizer(v, **kwargs) for k, v in value.items()}

    elif isinstance(value, np.ndarray):
        value = recursive_normalizer(value.tolist(), **kwargs)

    elif isinstance(value, (np.integer, np.bool_)):
        value = value.item()

    elif isinstance(value, (float, np.floating)):
        value = float(value)
        if digits and np.isfinite(value):
            value = round(value, digits)
            if value == 0.0:
                value = 0.0

    else:
        raise TypeError("Invalid type in structure ({}), only simple Python types and arrays are allowed.".format(
            type(value)))

    return value


def hash_dictionary(data: Dict[str, Any]) -> str:
    m = hashlib.sha1()
    m.update(json.dumps(recursive_normalizer(data), sort_keys=True).encode("UTF-8"))
    return m.hexdigest()


def _dims(value: Any) -> Any:
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(int(x) for x in value)
    return value


# Block partitions; numpy integers are accepted and stored as plain ints.
Dims = Annotated[Tuple[int, ...], BeforeValidator(_dims)]
