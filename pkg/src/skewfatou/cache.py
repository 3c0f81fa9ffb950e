"""On-disk cache of escape-time rasters.

File layout: ``b"SKFR1"``, width and height as little-endian uint32, then
``width * height`` little-endian uint32 escape times in row-major order.
Anything that does not match is a miss and gets overwritten.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"SKFR1"
_HEADER = len(MAGIC) + 8


def cache_dir():
    env = os.environ.get("SKEWFATOU_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "skewfatou"


def cache_key(map_string, bounds, resolution, cap):
    text = "|".join([str(map_string), ",".join(repr(float(b)) for b in bounds), str(int(resolution)), str(int(cap))])
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]


def _path(key, directory=None):
    return Path(directory or cache_dir()) / f"{key}.skfr"


def encode(values):
    v = np.ascontiguousarray(values, dtype="<u4")
    h, w = v.shape
    return MAGIC + np.array([w, h], dtype="<u4").tobytes() + v.tobytes()


def decode(blob):
    """The raster as a ``(height, width)`` uint32 array, or None if malformed."""
    if len(blob) < _HEADER or blob[: len(MAGIC)] != MAGIC:
        return None
    w, h = np.frombuffer(blob[len(MAGIC): _HEADER], dtype="<u4")
    if len(blob) != _HEADER + 4 * int(w) * int(h):
        return None
    return np.frombuffer(blob[_HEADER:], dtype="<u4").reshape(int(h), int(w)).astype(np.uint32)


def cache_get(key, directory=None):
    try:
        blob = _path(key, directory).read_bytes()
    except OSError:
        return None
    return decode(blob)


def cache_put(key, values, directory=None):
    """Write atomically; I/O errors are swallowed (the caller recomputes)."""
    path = _path(key, directory)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(encode(values))
        os.replace(tmp, path)
        return True
    except OSError:
        return False
