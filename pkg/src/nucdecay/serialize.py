"""CSV and JSON emitters for all pipeline outputs.

Every file starts with '#'-prefixed metadata lines that always include
the resolved-config hash and the coupling convention factor, so any
artifact can be traced back to the exact run that produced it.  Floats
are written with 17 significant digits (full double precision) and no
timestamps, keeping fixed-step runs byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

CSV_FORMAT_TAG = "nucdecay-csv v1"
JSON_FORMAT_TAG = "nucdecay-json v1"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns: Mapping[str, Iterable], metadata: Mapping[str, object]) -> Path:
    """Write named columns with a metadata header block.

    `metadata` must carry 'config_hash' and 'coupling_convention_factor';
    they are part of the file contract consumed downstream.
    """
    for required in ("config_hash", "coupling_convention_factor"):
        if required not in metadata:
            raise ValueError(f"output metadata must include {required!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns.keys())
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    length = arrays[0].shape[0]
    if any(a.shape[0] != length for a in arrays):
        raise ValueError("CSV columns must have equal length")
    lines = [f"# {CSV_FORMAT_TAG}"]
    for key in sorted(metadata):
        lines.append(f"# {key}: {_fmt(metadata[key])}")
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(_fmt(a[i]) for a in arrays))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path):
    """Inverse of write_csv: (metadata dict, {name: array})."""
    meta = {}
    names = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    meta[key.strip()] = val.strip()
                continue
            if names is None:
                names = line.split(",")
            else:
                rows.append(line.split(","))
    if names is None:
        raise ValueError(f"no column header in {path}")
    cols = {}
    for j, name in enumerate(names):
        raw_col = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(x) for x in raw_col])
        except ValueError:
            cols[name] = np.array(raw_col)
    return meta, cols


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"real": obj.real.tolist(), "imag": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, payload: dict, metadata: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"format": JSON_FORMAT_TAG, **{k: _jsonable(v) for k, v in metadata.items()},
           **_jsonable(payload)}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def trajectory_columns(traj, site=None, include_correlators: bool = True) -> dict:
    """Standard observable columns of a trajectory (reduced values, or
    one site of an ensemble run; site None = central).  Two-site
    correlators recorded on the trajectory become extra column pairs
    correlator_{n,m}_{real,imag}."""
    columns = {
        "t_over_Gamma": traj.times,
        "coherence_abs": traj.series("coherence_abs", site=site),
        "phase_rad_unwrapped": traj.series("phase", site=site),
        "population": traj.series("population", site=site),
    }
    if include_correlators and traj.correlators:
        for pair, values in sorted(traj.correlators.items()):
            tag = pair.replace(",", "_")
            columns[f"correlator_{tag}_real"] = np.real(values)
            columns[f"correlator_{tag}_imag"] = np.imag(values)
    return columns
