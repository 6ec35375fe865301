"""Serialization: spaces, ensembles, knot functions, factorization results.

Every file is written to a temporary sibling and renamed into place, so a
failed run never leaves a partial output behind. CSV floats use 17
significant digits; JSON floats use Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .fields import FieldEnsemble
from .knots import KnotFunction
from .metric import DiscreteMeasure, DiscreteMetricSpace

FLOAT_FMT = ".17g"
BIN_MAGIC = b"FENS0001"


def fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def atomic_write(path, data, mode: str = "w"):
    """Write ``data`` (str or bytes) via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode + ("b" if isinstance(data, bytes) else "")) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# spaces and measures
# ---------------------------------------------------------------------------


def _label(p):
    if isinstance(p, float) and math.isinf(p):
        return "inf"
    return p


def space_to_dict(space: DiscreteMetricSpace, measure: DiscreteMeasure = None) -> dict:
    doc = {"points": [_label(p) for p in space.points], "dist": space.dist}
    if measure is not None:
        doc["weights"] = measure.weights
    return doc


def space_from_dict(doc: dict):
    unknown = set(doc) - {"points", "dist", "weights"}
    if unknown:
        raise ValueError(f"unknown space keys: {sorted(unknown)}")
    points = tuple(math.inf if p == "inf" else p for p in doc.get("points", []))
    space = DiscreteMetricSpace.from_matrix(np.array(doc["dist"], dtype=float),
                                            points or None)
    measure = DiscreteMeasure(doc["weights"]) if "weights" in doc else None
    return space, measure


def write_space_edges(path, space: DiscreteMetricSpace):
    iu, ju = np.triu_indices(space.n, 1)
    write_csv(path, ["point_i", "point_j", "distance"],
              ((int(i), int(j), float(space.dist[i, j])) for i, j in zip(iu, ju)))


def read_space_edges(path) -> DiscreteMetricSpace:
    _, rows = read_csv(path)
    ij = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=int)
    n = int(ij.max()) + 1 if ij.size else 1
    d = np.zeros((n, n))
    for (i, j), r in zip(ij, rows):
        d[i, j] = d[j, i] = float(r[2])
    return DiscreteMetricSpace.from_matrix(d)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------


def write_ensemble(out_dir, ensemble: FieldEnsemble, stem: str = "ensemble"):
    """Little-endian float64 matrix with a small header plus a JSON sidecar."""
    out_dir = Path(out_dir)
    v = np.ascontiguousarray(ensemble.values, dtype="<f8")
    header = BIN_MAGIC + np.array(v.shape, dtype="<u8").tobytes()
    atomic_write(out_dir / f"{stem}.bin", header + v.tobytes())
    meta = {
        "generator": ensemble.generator,
        "seed": ensemble.seed,
        "params": ensemble.params,
        "shape": list(v.shape),
        "dtype": "float64-le",
    }
    if ensemble.space is not None and ensemble.space.coords is not None:
        meta["grid"] = np.asarray(ensemble.space.coords)
    if ensemble.axes is not None:
        meta["axes"] = [a for a in ensemble.axes]
    write_json(out_dir / f"{stem}.meta.json", meta)


def read_ensemble(out_dir, stem: str = "ensemble") -> FieldEnsemble:
    out_dir = Path(out_dir)
    raw = (out_dir / f"{stem}.bin").read_bytes()
    if raw[:8] != BIN_MAGIC:
        raise ValueError("not an ensemble container")
    M, n = np.frombuffer(raw[8:24], dtype="<u8")
    values = np.frombuffer(raw[24:], dtype="<f8").reshape(int(M), int(n))
    meta = json.loads((out_dir / f"{stem}.meta.json").read_text())
    space = None
    if "grid" in meta:
        space = DiscreteMetricSpace.from_coordinates(np.array(meta["grid"], dtype=float))
    axes = tuple(np.array(a) for a in meta["axes"]) if "axes" in meta else None
    return FieldEnsemble(values.copy(), space, meta["generator"], meta["seed"],
                         meta.get("params", {}), axes)


def ensemble_rows(ensemble: FieldEnsemble):
    for i in range(ensemble.M):
        for j in range(ensemble.n):
            yield i, j, float(ensemble.values[i, j])


def write_ensemble_csv(path, ensemble: FieldEnsemble, max_cells: int = 1_000_000):
    if ensemble.M * ensemble.n > max_cells:
        raise ValueError(f"ensemble too large for CSV export ({ensemble.M * ensemble.n} cells)")
    write_csv(path, ["realization", "point", "value"], ensemble_rows(ensemble))


# ---------------------------------------------------------------------------
# knot functions and results
# ---------------------------------------------------------------------------


def write_knots_csv(path, f: KnotFunction, header=("delta", "value")):
    write_csv(path, list(header), zip(map(float, f.x), map(float, f.y)))


def knots_to_dict(f: KnotFunction) -> dict:
    return {"x": f.x, "y": f.y}


def factorization_to_dict(res) -> dict:
    return {
        **res.summary(),
        "plan": res.plan.to_config(),
        "knots": {"n": res.n_index, "delta": res.deltas, "a": res.a, "b": res.b},
        "g": knots_to_dict(res.g),
        "g1": knots_to_dict(res.g1),
        "theta": knots_to_dict(res.theta),
        "meta": res.meta,
    }


def write_factorization(out_dir, res, prefix: str = ""):
    out_dir = Path(out_dir)
    write_knots_csv(out_dir / f"{prefix}g_knots.csv", res.g, ("delta", "g"))
    write_csv(out_dir / f"{prefix}tau_samples.csv", ["realization", "tau", "tau0"],
              ((i, float(t), float(t0)) for i, (t, t0) in enumerate(zip(res.tau, res.tau0))))


def write_bounds_csv(path, deltas, empirical, bound):
    write_csv(path, ["delta", "empirical", "bound"],
              ((float(d), float(e), float(b)) for d, e, b in zip(deltas, empirical, bound)))
