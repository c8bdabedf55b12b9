"""File formats: point CSV, dataset manifest, CVRP JSON, embedding CSV with its sidecar."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .exceptions import InvalidInputError
from .geometry import CvrpInstance, PointCloud

COORD_NAMES = ("x", "y", "z")


def _fmt(v):
    return format(float(v), ".17g")


def read_points_csv(path):
    """Read a ``x,y[,z][,label]`` CSV into a :class:`PointCloud`.

    Errors name the offending line (the header is line 1).
    """
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInputError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: file is empty") from None
        has_label = bool(header) and header[-1] == "label"
        coords = header[:-1] if has_label else header
        if tuple(coords) not in (COORD_NAMES[:2], COORD_NAMES[:3]):
            raise InvalidInputError(f"{path}: line 1: header must be x,y[,z][,label], got {','.join(header)}")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row[:len(coords)]]
            except ValueError:
                raise InvalidInputError(f"{path}: line {lineno}: non-numeric coordinate in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise InvalidInputError(f"{path}: line {lineno}: coordinate is not finite")
            rows.append(vals)
            if has_label:
                try:
                    labels.append(int(row[-1]))
                except ValueError:
                    raise InvalidInputError(f"{path}: line {lineno}: label {row[-1]!r} is not an integer") from None
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    return PointCloud(np.array(rows), np.array(labels) if has_label else None)


def write_points_csv(cloud, path):
    X = np.asarray(getattr(cloud, "coords", cloud), dtype=np.float64)
    if X.ndim != 2 or X.shape[1] not in (2, 3):
        raise InvalidInputError("point CSV holds 2-D or 3-D coordinates only")
    labels = getattr(cloud, "point_labels", None)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(COORD_NAMES[:X.shape[1]]) + (["label"] if labels is not None else []))
        for i, row in enumerate(X):
            w.writerow([_fmt(v) for v in row] + ([int(labels[i])] if labels is not None else []))


def read_manifest(path):
    """Load every cloud listed in a manifest; relative paths resolve against the manifest's folder."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("clouds"), list):
        raise InvalidInputError(f"{path}: manifest needs a 'clouds' list")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for i, entry in enumerate(obj["clouds"]):
        if not isinstance(entry, dict) or "path" not in entry:
            raise InvalidInputError(f"{path}: clouds[{i}] needs a 'path'")
        cloud = read_points_csv(os.path.join(base, entry["path"]))
        label = entry.get("cloud_label")
        out.append(PointCloud(cloud.coords, cloud.point_labels, None if label is None else int(label)))
    return out


def write_manifest(entries, path):
    """``entries`` are ``(relative_path, cloud_label)`` pairs."""
    obj = {"clouds": [{"path": p, "cloud_label": int(l)} for p, l in entries]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def cvrp_to_dict(instance):
    return {
        "depot": [float(v) for v in instance.depot],
        "points": [[float(v) for v in row] for row in instance.points.coords],
        "demands": [float(v) for v in instance.demands],
        "capacity": float(instance.capacity),
    }


def read_cvrp_json(path):
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    missing = {"depot", "points", "demands"} - set(obj)
    if missing:
        raise InvalidInputError(f"{path}: missing keys {sorted(missing)}")
    return CvrpInstance(np.array(obj["points"], dtype=np.float64), obj["depot"], obj["demands"],
                        obj.get("capacity", 1.0))


def write_cvrp_json(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cvrp_to_dict(instance), fh, indent=2)
        fh.write("\n")


def write_embedding(E, csv_path, sidecar_path=None):
    """Write ``h1..hk`` rows and, next to them, the JSON sidecar (``<csv>.json`` by default)."""
    H = np.asarray(E.H)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"h{j + 1}" for j in range(H.shape[1])])
        for row in H:
            w.writerow([_fmt(v) for v in row])
    sidecar_path = sidecar_path or sidecar_path_for(csv_path)
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(E.sidecar(), fh, indent=2)
        fh.write("\n")
    return sidecar_path


def sidecar_path_for(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def read_embedding_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [f"h{j + 1}" for j in range(len(header))]:
            raise InvalidInputError(f"{path}: line 1: header must be h1,...,hk")
        rows = [[float(v) for v in r] for r in reader if r]
    return np.array(rows)
