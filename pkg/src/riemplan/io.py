"""CSV trajectory tables (17 significant digits, stable headers)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

COORD_NAMES = {"se2": ["x", "y", "theta"], "sphere2": ["theta", "phi"]}


def coord_names(manifold_name: str, dim: int) -> list:
    return COORD_NAMES.get(manifold_name, [f"x{k}" for k in range(dim)])


def trajectory_header(manifold_name: str, n: int, dim: int) -> list:
    names = coord_names(manifold_name, dim)
    cols = ["t"]
    for i in range(1, n + 1):
        cols += [f"a{i}_{c}" for c in names]
        cols += [f"a{i}_d{c}" for c in names]
    return cols


def jets_header(manifold_name: str, n: int, dim: int) -> list:
    names = coord_names(manifold_name, dim)
    cols = ["t"]
    for i in range(1, n + 1):
        for prefix in ("", "d", "dd", "ddd"):
            cols += [f"a{i}_{prefix}{c}" for c in names]
    return cols


def _write(path: Path, header: list, table: np.ndarray):
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def write_trajectory(path, manifold_name: str, times, jets):
    """t plus position and velocity of every agent, one row per grid sample."""
    jets = np.asarray(jets)
    N, n, _, dim = jets.shape
    table = np.column_stack([times, jets[:, :, :2, :].reshape(N, n * 2 * dim)])
    _write(Path(path), trajectory_header(manifold_name, n, dim), table)


def write_jets(path, manifold_name: str, times, jets):
    """t plus (x, x', x'', x''') of every agent."""
    jets = np.asarray(jets)
    N, n, _, dim = jets.shape
    table = np.column_stack([times, jets.reshape(N, n * 4 * dim)])
    _write(Path(path), jets_header(manifold_name, n, dim), table)


def read_table(path):
    """(header list, data array) of a CSV written by this module."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def read_jets(path, n: int, dim: int):
    _, data = read_table(path)
    return data[:, 0], data[:, 1:].reshape(len(data), n, 4, dim)
