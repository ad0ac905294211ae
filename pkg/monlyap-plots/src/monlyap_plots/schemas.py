"""Readers for the simulator's artifact formats, with schema validation.

The simulator writes CSV tables ('# key = value' metadata lines, then a
header row) and JSON documents with a "kind" field. Readers here validate
the columns/keys a panel needs and refuse anything else with SchemaError;
when a manifest.json sits next to an input, the file hash is checked first.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np


class SchemaError(ValueError):
    """Input file does not match the documented artifact schema."""


class ManifestMismatchError(ValueError):
    """Input file hash disagrees with the manifest covering its directory."""


def _parse_meta_value(raw: str):
    if raw == "true":
        return True
    if raw == "false":
        return False
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def read_csv(path, required_columns=()):
    meta = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, raw = line[1:].partition("=")
            meta[key.strip()] = _parse_meta_value(raw.strip())
        elif line:
            body.append(line)
    if not body:
        raise SchemaError(f"{path}: empty table, expected a header row with "
                          f"columns {sorted(required_columns)}")
    reader = csv.reader(body)
    names = next(reader)
    missing = set(required_columns) - set(names)
    if missing:
        raise SchemaError(
            f"{path}: missing columns {sorted(missing)}; expected at least "
            f"{sorted(required_columns)}, found {names}")
    raw_cols = {n: [] for n in names}
    for row in reader:
        if len(row) != len(names):
            raise SchemaError(f"{path}: ragged row {row!r}")
        for n, v in zip(names, row):
            raw_cols[n].append(v)
    if not next(iter(raw_cols.values()), None):
        raise SchemaError(f"{path}: table has a header but no data rows")
    columns = {}
    for n, vals in raw_cols.items():
        try:
            columns[n] = np.array([float(v) for v in vals])
        except ValueError as exc:
            raise SchemaError(f"{path}: column {n!r} is not numeric: {exc}")
    return columns, meta


def read_json(path, kind=None, required_keys=()):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}")
    if kind is not None and payload.get("kind") != kind:
        raise SchemaError(f"{path}: expected kind {kind!r}, "
                          f"found {payload.get('kind')!r}")
    missing = set(required_keys) - set(payload)
    if missing:
        raise SchemaError(f"{path}: missing keys {sorted(missing)}; "
                          f"expected at least {sorted(required_keys)}")
    return payload


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def verify_against_manifest(path) -> bool:
    """Check ``path`` against a manifest.json in its directory, if present.

    Returns True when a manifest covered the file, False when there was
    nothing to check against; raises ManifestMismatchError on a bad hash.
    """
    directory = os.path.dirname(os.path.abspath(path))
    manifest_path = os.path.join(directory, "manifest.json")
    if not os.path.exists(manifest_path):
        return False
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    rel = os.path.basename(path)
    for artifact in manifest.get("artifacts", []):
        if artifact["path"] == rel:
            if _sha256(path) != artifact["sha256"]:
                raise ManifestMismatchError(
                    f"{path}: sha256 does not match the manifest entry; "
                    "refusing a modified artifact")
            return True
    return False
