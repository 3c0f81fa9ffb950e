"""Files written by the command line: CSV tables, PNG diagnostics,
run manifests and the seed streams."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError

# ---------------------------------------------------------------------------
# CSV


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ValidationError("refusing to write a non-finite number")
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    """UTF-8, LF line endings, shortest round-trip float formatting.
    Non-finite numbers raise instead of reaching the file."""
    path = Path(path)
    if path.parent != Path():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValidationError(f"row of length {len(row)} under a {len(header)}-column header")
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# PNG


def palette():
    """Fixed 256-entry RGB palette (index 0 is reserved for black)."""
    t = np.arange(256) / 255.0
    r = 0.5 + 0.5 * np.cos(2 * np.pi * (3 * t + 0.0))
    g = 0.5 + 0.5 * np.cos(2 * np.pi * (3 * t + 0.33))
    b = 0.5 + 0.5 * np.cos(2 * np.pi * (3 * t + 0.67))
    pal = (np.stack([r, g, b], axis=1) * 255).round().astype(np.uint8)
    pal[0] = 0
    return pal


def escape_image(values, not_escaped=0xFFFFFFFF):
    """RGB array: escape time through the palette, never-escaping pixels black.
    Row 0 of the raster (lowest imaginary part) ends up at the bottom."""
    v = np.asarray(values)
    idx = (v.astype(np.int64) % 255) + 1
    rgb = palette()[idx]
    rgb[v == not_escaped] = 0
    return rgb[::-1]


def write_png(path, rgb):
    from PIL import Image

    path = Path(path)
    if path.parent != Path():
        path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(rgb, dtype=np.uint8), "RGB").save(path, format="PNG")
    return path


# ---------------------------------------------------------------------------
# seeds and manifests


def stream(root_seed, label):
    """Generator for one named stream under a 64-bit root seed."""
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(root_seed) & (2 ** 64 - 1), key]))


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """Collects stage timings and outputs; written as ``manifest.json``."""

    def __init__(self, command, config):
        self.command = command
        self.config = dict(config)
        self.stages = []
        self.outputs = []

    def stage(self, name, seconds):
        self.stages.append({"stage": name, "seconds": round(float(seconds), 6)})

    def output(self, path):
        if path is not None:
            self.outputs.append(str(path))

    def as_dict(self):
        return {
            "command": self.command,
            "version": __version__,
            "config_hash": config_hash(self.config),
            "config": self.config,
            "stages": self.stages,
            "outputs": [{"path": p, "sha256": file_hash(p)} for p in self.outputs if os.path.exists(p)],
        }

    def write(self, directory):
        path = Path(directory) / "manifest.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2, default=str) + "\n", encoding="utf-8")
        return path
