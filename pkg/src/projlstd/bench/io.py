"""CSV and sidecar writers.

Floats are written with ``repr`` (shortest round-trip form), so the bytes
of a file depend only on the values.  Every table starts with a
``schema_version`` column and every output directory gets a
``config.json`` sidecar holding the resolved configuration.
"""

import csv
import json
import math
import os
from importlib import resources

from .config import SCHEMA_VERSION


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if hasattr(value, "item"):  # numpy scalar
        return _cell(value.item())
    return str(value)


def write_csv(path, columns, rows):
    """Write ``rows`` (dicts) under ``columns``, prefixed by ``schema_version``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    header = ["schema_version"] + list(columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([SCHEMA_VERSION] + [_cell(row.get(c, "")) for c in columns])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_sidecar(out_dir, cfg, command):
    os.makedirs(out_dir, exist_ok=True)
    payload = {"command": command, "config_hash": cfg.config_hash, "config": cfg.resolved()}
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schema():
    text = resources.files("projlstd.bench").joinpath("schema.json").read_text()
    return json.loads(text)
