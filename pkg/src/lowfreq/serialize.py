"""
JSON / CSV encodings of systems, low-order models and step responses.

Every float is written with 17 significant digits and object keys are
sorted, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

import numpy as np
import scipy.sparse as sp

from .core import (DimensionError, InvalidInputError, LowOrderModel, Route,
                    SecondOrderSystem, StepResponse)

SCHEMA = 1


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError(f"non-finite value {x!r} cannot be serialized")
    return format(x, ".17g")


def _encode(obj: Any, out: list[str]) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _encode(obj[key], out)
        out.append("}")
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), out)
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _encode(item, out)
        out.append("]")
    elif isinstance(obj, (bool, np.bool_)) or obj is None:
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(fmt(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Deterministic JSON text with 17-significant-digit floats."""
    out: list[str] = []
    _encode(obj, out)
    out.append("\n")
    return "".join(out)


def _float_rows(a: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(a)]


def _matrix_to_json(a, storage: str):
    if storage == "csr":
        a = sp.csr_matrix(a)
        a.sort_indices()
        return {"indptr": a.indptr.tolist(), "indices": a.indices.tolist(),
                "values": [float(v) for v in a.data]}
    return _float_rows(np.asarray(a))


def _matrix_from_json(obj, n: int, storage: str, name: str):
    try:
        if storage == "csr":
            return sp.csr_matrix(
                (np.asarray(obj["values"], dtype=float),
                 np.asarray(obj["indices"], dtype=np.int64),
                 np.asarray(obj["indptr"], dtype=np.int64)), shape=(n, n))
        a = np.asarray(obj, dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed matrix {name}: {exc}") from None
    if a.shape != (n, n):
        raise DimensionError(f"{name} has shape {a.shape}, expected ({n}, {n})")
    return a


def system_to_dict(sys: SecondOrderSystem) -> dict:
    doc = {
        "schema": SCHEMA,
        "n_dof": sys.n_dof,
        "format": sys.storage,
        "M": _matrix_to_json(sys.M, sys.storage),
        "D": _matrix_to_json(sys.D, sys.storage),
        "K": _matrix_to_json(sys.K, sys.storage),
        "b0": _float_rows(sys.b0),
        "b1": _float_rows(sys.b1),
    }
    if sys.name:
        doc["name"] = sys.name
    if sys.dof_labels is not None:
        doc["dof_labels"] = [{"kind": lab.kind, "coords": [float(c) for c in lab.coords]}
                             for lab in sys.dof_labels]
    return doc


def system_from_dict(doc: dict, validate: bool = True) -> SecondOrderSystem:
    try:
        n = int(doc["n_dof"])
        storage = doc.get("format", "dense")
        if storage not in ("dense", "csr"):
            raise InvalidInputError(f"unknown format {storage!r}")
        mats = {k: _matrix_from_json(doc[k], n, storage, k) for k in ("M", "D", "K")}
        b0 = np.asarray(doc["b0"], dtype=float)
        b1 = np.asarray(doc.get("b1", np.zeros_like(b0)), dtype=float)
    except KeyError as exc:
        raise InvalidInputError(f"system JSON is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed system JSON: {exc}") from None
    labels = doc.get("dof_labels")
    if labels is not None:
        labels = [(lab["kind"], lab.get("coords", [])) for lab in labels]
    return SecondOrderSystem(mats["M"], mats["D"], mats["K"], b0, b1,
                             dof_labels=labels, storage=storage,
                             name=doc.get("name", ""), validate=validate)


def dump_system(sys: SecondOrderSystem) -> str:
    return dumps(system_to_dict(sys))


def load_system(text: str, validate: bool = True) -> SecondOrderSystem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"invalid JSON: {exc}") from None
    return system_from_dict(doc, validate=validate)


def lom_to_dict(lom: LowOrderModel, extra: dict | None = None) -> dict:
    doc = {
        "schema": SCHEMA,
        "route": lom.route.value,
        "w2": _float_rows(lom.w2),
        "w1": _float_rows(lom.w1),
        "w0": _float_rows(lom.w0),
        "residuals": {k: float(v) for k, v in lom.residuals.items()},
    }
    if lom.channels is not None:
        doc["channels"] = list(lom.channels)
    if extra:
        doc.update(extra)
    return doc


def lom_from_dict(doc: dict) -> LowOrderModel:
    try:
        return LowOrderModel(np.asarray(doc["w2"], dtype=float),
                             np.asarray(doc["w1"], dtype=float),
                             np.asarray(doc["w0"], dtype=float),
                             Route(doc["route"]),
                             dict(doc.get("residuals", {})),
                             tuple(doc["channels"]) if "channels" in doc else None)
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidInputError(f"malformed low-order model JSON: {exc}") from None


def dump_lom(lom: LowOrderModel, extra: dict | None = None) -> str:
    return dumps(lom_to_dict(lom, extra))


def load_lom(text: str) -> LowOrderModel:
    return lom_from_dict(json.loads(text))


def dump_response_csv(resp: StepResponse) -> str:
    """CSV with header ``t,dof_0,...,dof_{n-1}``, one row per sample time."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"dof_{i}" for i in range(resp.n_dof)])
    for k, t in enumerate(resp.times):
        writer.writerow([fmt(t)] + [fmt(v) for v in resp.snapshots[:, k]])
    return buf.getvalue()


def load_response_csv(text: str, u0=1.0, dt: float = float("nan")) -> StepResponse:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise InvalidInputError("response CSV must start with a 't,dof_0,...' header")
    n = len(rows[0]) - 1
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"malformed response CSV: {exc}") from None
    if data.size == 0:
        raise InvalidInputError("response CSV has no samples")
    if data.shape[1] != n + 1:
        raise DimensionError("ragged response CSV")
    return StepResponse(data[:, 0], data[:, 1:].T, np.full(n, np.nan), u0, dt)


def dump_grid_csv(sys: SecondOrderSystem, lom: LowOrderModel, channel: int = 0) -> str:
    """Displacement-DOF fields ``x,y,w2,w1,w0`` for labelled 2-D models."""
    if sys.dof_labels is None:
        raise InvalidInputError("grid export needs dof_labels")
    idx = sys.displacement_dofs()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    ndim = len(sys.dof_labels[idx[0]].coords)
    writer.writerow(["x", "y", "z"][:ndim] + ["w2", "w1", "w0"])
    for i in idx:
        writer.writerow([fmt(c) for c in sys.dof_labels[i].coords]
                        + [fmt(lom.w2[i, channel]), fmt(lom.w1[i, channel]),
                           fmt(lom.w0[i, channel])])
    return buf.getvalue()
