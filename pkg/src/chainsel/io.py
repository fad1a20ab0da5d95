"""CSV/JSON artifacts. Every file carries the resolved config and is written
atomically (temporary file in the target directory, then rename)."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .value import ValueGrid, estimate_c_star

GRID_HEADER = "z,u,u_prime,theta_star"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: str, columns, config: dict | None = None) -> str:
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    lines.append(header)
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: str, columns, config: dict | None = None) -> None:
    atomic_write(path, csv_text(header, columns, config))


def json_text(payload: dict) -> str:
    # repr-based floats round-trip exactly (at most 17 significant digits)
    return json.dumps(_plain(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload: dict) -> None:
    atomic_write(path, json_text(payload))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_grid(path, grid: ValueGrid, config: dict | None = None) -> None:
    write_csv(path, GRID_HEADER, (grid.z, grid.u, grid.u_prime, grid.theta_star), config)


def read_grid(path) -> ValueGrid:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            if line.strip() == GRID_HEADER:
                continue
            rows.append(line)
    data = np.loadtxt(rows, delimiter=",", ndmin=2)
    z, u, up, th = data.T
    h = float(z[1] - z[0])
    n = z.size - 1
    grid = ValueGrid(float(n * h), h, u, up, th)
    if not np.allclose(z, np.arange(n + 1) * h, rtol=0, atol=1e-9 * max(1.0, z[-1])):
        raise ValueError(f"{path} is not a uniform grid starting at 0")
    grid.c_star_estimate = estimate_c_star(grid)
    return grid
