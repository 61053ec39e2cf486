"""JSON exchange formats for matrices, tuples, presentations and rank data.

A matrix is ``{"dim": n, "entries": [[re, im], ...]}`` in row-major order.
Floats are written with Python's shortest round-trip repr, so reading back
gives the identical doubles.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from hsstab.presentations import GroupPresentation, UnitaryTuple, parse_preset
from hsstab.projections import LinearProjectionSystem, RankVector


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    flat = m.reshape(-1)
    return {"dim": int(m.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        n = int(obj["dim"])
        entries = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if entries.shape != (n * n, 2):
        raise ValueError(f"matrix of dim {n} needs {n * n} [re, im] pairs, got shape {entries.shape}")
    return (entries[:, 0] + 1j * entries[:, 1]).reshape(n, n)


def tuple_to_json(t: UnitaryTuple, presentation: GroupPresentation | None = None) -> dict:
    out: dict[str, Any] = {"matrices": [matrix_to_json(m) for m in t]}
    if presentation is not None:
        out["presentation"] = presentation.describe()
    return out


def tuple_from_json(obj) -> tuple[UnitaryTuple, GroupPresentation | None]:
    """Accepts ``{"matrices": [...], "presentation": ...}`` or a bare list.

    The presentation may be a preset string or a presentation object.
    """
    if isinstance(obj, list):
        mats, pres = obj, None
    else:
        mats, pres = obj["matrices"], obj.get("presentation")
    t = UnitaryTuple(tuple(matrix_from_json(m) for m in mats))
    if isinstance(pres, str):
        pres = parse_preset(pres)
    elif isinstance(pres, dict):
        pres = GroupPresentation.from_json(pres)
    return t, pres


def ranks_to_json(sys: LinearProjectionSystem, ranks: RankVector, dim: int) -> dict:
    return {"system": sys.to_json(), "dim": dim, "ranks": ranks.to_json()}


def ranks_from_json(obj: dict) -> tuple[LinearProjectionSystem, RankVector, int]:
    return LinearProjectionSystem.from_json(obj["system"]), RankVector(obj["ranks"]), int(obj["dim"])


def read_json(path) -> Any:
    with open(Path(path), encoding="utf-8") as fh:
        return json.load(fh)


def write_json(path, obj) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def write_jsonl(stream, records) -> None:
    for r in records:
        stream.write(json.dumps(r.to_json() if hasattr(r, "to_json") else r))
        stream.write("\n")
