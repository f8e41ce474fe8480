"""CSV/JSON writers.  Floats use 17 significant digits so values round-trip exactly."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .lattice import LatticeKernel, LatticeVector

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    return FLOAT_FMT % float(x)


def write_kernel_csv(path, K) -> None:
    vals = np.asarray(K, dtype=complex)
    N = vals.shape[0]
    n, m = np.meshgrid(np.arange(1, N + 1), np.arange(1, N + 1), indexing="ij")
    table = np.column_stack([n.ravel(), m.ravel(), vals.real.ravel(), vals.imag.ravel()])
    with open(path, "w", newline="") as fh:
        fh.write("n,m,re,im\n")
        np.savetxt(fh, table, fmt=["%d", "%d", FLOAT_FMT, FLOAT_FMT], delimiter=",")


def read_kernel_csv(path) -> LatticeKernel:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    N = int(data[:, 0].max())
    out = np.zeros((N, N), dtype=complex)
    out[data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1] = data[:, 2] + 1j * data[:, 3]
    return LatticeKernel(out)


def write_vectors_csv(path, columns: Dict[str, LatticeVector]) -> None:
    names = list(columns)
    N = max((len(v) for v in columns.values()), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n"] + [f"{k}_{part}" for k in names for part in ("re", "im")])
        for i in range(N):
            row = [i + 1]
            for k in names:
                x = columns[k].values
                z = x[i] if i < x.size else 0.0
                row += [fmt(np.real(z)), fmt(np.imag(z))]
            w.writerow(row)


def write_rows_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(np.real(x)), "im": float(np.imag(x))}
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        x = x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2) + "\n")
