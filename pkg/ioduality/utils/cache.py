"""On-disk cache of near field cores keyed by configuration and spectral parameter."""
from typing import Dict
from typing import Optional
from typing import Tuple
from typing import Union

import os
import pathlib
import struct
import tempfile

import filelock
import fsspec
import numpy as np
import platformdirs

from loguru import logger

from ioduality.utils import commons

MAGIC = b"NFD1"
_HEADER = struct.Struct("<4sIIdB")


def default_cache_dir() -> pathlib.Path:
    return pathlib.Path(platformdirs.user_cache_dir(appname="ioduality")) / "nearfield"


def encode_nearfield(entries: np.ndarray, lam: float, route_tag: int) -> bytes:
    """Binary record: magic, rows, cols, lambda, route tag, then row-major complex128 entries"""
    entries = np.ascontiguousarray(entries, dtype="<c16")
    rows, cols = entries.shape
    return _HEADER.pack(MAGIC, rows, cols, float(lam), int(route_tag)) + entries.tobytes()


def decode_nearfield(payload: bytes) -> Tuple[np.ndarray, float, int]:
    """Inverse of `encode_nearfield`

    Raises:
        ValueError: for a payload with a bad magic number or truncated entries
    """
    if len(payload) < _HEADER.size:
        raise ValueError("Near field record is shorter than its header")
    magic, rows, cols, lam, route_tag = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ValueError(f"Bad near field record magic {magic!r}")
    body = payload[_HEADER.size :]
    if len(body) != 16 * rows * cols:
        raise ValueError(f"Near field record holds {len(body)} bytes, expected {16 * rows * cols}")
    entries = np.frombuffer(body, dtype="<c16").reshape(rows, cols).astype(complex)
    return entries, lam, route_tag


class NearFieldCache:
    """Near field cores stored one file per spectral parameter

    A record is identified by the configuration hash, the node counts, the route tag and
    the exact spectral parameter. Route tags from 8 up mark cores in outgoing wave
    coordinates, lower tags full near field matrices. Writes go through a temporary file
    and an atomic rename under a file lock, so concurrent workers never read half-written
    records.

    Args:
        cache_dir: cache location, defaults to the user cache directory
        config_hash: hash of the run configuration the records belong to
        in_memory: also keep loaded records in a dictionary
    """

    def __init__(
        self,
        cache_dir: Optional[Union[str, os.PathLike]] = None,
        config_hash: str = "",
        in_memory: bool = False,
    ):
        self.cache_dir = pathlib.Path(cache_dir) if cache_dir is not None else default_cache_dir()
        self.config_hash = config_hash
        self.in_memory = in_memory
        self._memory: Dict[str, Tuple[np.ndarray, float, int]] = {}

    def key(self, lam: float, shape: Tuple[int, int], route_tag: int) -> str:
        text = f"{self.config_hash}|{shape[0]}x{shape[1]}|{route_tag}|{float(lam).hex()}"
        return commons.sha256_text(text)

    def path(self, key: str) -> pathlib.Path:
        return self.cache_dir / key[:2] / f"{key}.nfd"

    def _lock(self, key: str) -> filelock.FileLock:
        lock_path = self.cache_dir / "_lock_files" / f"{key}.lock"
        lock_path.parent.mkdir(parents=True, exist_ok=True)
        return filelock.FileLock(str(lock_path))

    def __contains__(self, key: str) -> bool:
        return key in self._memory or self.path(key).exists()

    def get(self, key: str) -> Optional[Tuple[np.ndarray, float, int]]:
        """Load a record, None when absent or unreadable"""
        if key in self._memory:
            return self._memory[key]
        path = self.path(key)
        if not path.exists():
            return None
        try:
            with fsspec.open(str(path), "rb") as IN:
                record = decode_nearfield(IN.read())
        except ValueError as e:
            logger.warning(f"Ignoring corrupt cache record {path}: {e}")
            return None
        if self.in_memory:
            self._memory[key] = record
        return record

    def put(self, key: str, entries: np.ndarray, lam: float, route_tag: int):
        path = self.path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = encode_nearfield(entries, lam, route_tag)
        with self._lock(key):
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as OUT:
                    OUT.write(payload)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.remove(tmp)
                raise
        if self.in_memory:
            self._memory[key] = (np.array(entries, dtype=complex), float(lam), int(route_tag))

    def clear(self):
        """Remove every record of this cache directory"""
        self._memory = {}
        for path in self.cache_dir.glob("*/*.nfd"):
            path.unlink()

    def __len__(self):
        return len(list(self.cache_dir.glob("*/*.nfd")))

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_memory"] = {}
        return state
