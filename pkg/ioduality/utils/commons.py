from typing import Any
from typing import Mapping
from typing import Union

import os
import hashlib
import json

import fsspec
import numpy as np


def sha256sum(filepath: Union[str, os.PathLike]) -> str:
    """Return the sha256 hash of a file, local or remote

    Args:
        filepath: path to the file
    """
    file_hash = hashlib.sha256()
    with fsspec.open(filepath, "rb") as f:
        file_hash.update(f.read())  # type: ignore
    return file_hash.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _canonical_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical_value(v) for v in value) + "]"
    if isinstance(value, np.generic):
        return _canonical_value(value.item())
    return json.dumps(value)


def canonical_text(flat: Mapping[str, Any]) -> str:
    """Sorted `key=value` lines of a flat mapping with exact float spelling"""
    return "\n".join(f"{key}={_canonical_value(flat[key])}" for key in sorted(flat)) + "\n"


def flatten_dict(nested: Mapping[str, Any], prefix: str = "") -> dict:
    """Flatten nested mappings into dotted keys"""
    flat = {}
    for key, value in nested.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten_dict(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def unflatten_dict(flat: Mapping[str, Any]) -> dict:
    """Inverse of `flatten_dict`"""
    nested: dict = {}
    for key, value in flat.items():
        node = nested
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"Key {key!r} conflicts with a scalar entry")
        node[leaf] = value
    return nested
