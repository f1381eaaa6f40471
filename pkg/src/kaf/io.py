"""File formats: headered text matrices, multi-array containers, CSV tables.

Text matrices carry a one-line header `# kaf.matrix/1 {json meta}` followed by
whitespace-delimited rows printed with 17 significant digits, which round-trips
float64 bit-exactly.  Containers hold named .npy blocks after a similar header
line and are byte-deterministic (no timestamps).
"""

import io as _io
import json

import numpy as np

from .errors import InvalidInputError

MATRIX_MAGIC = "# kaf.matrix/1"
CONTAINER_MAGIC = "kaf.container/1"

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_container",
    "load_container",
    "save_trajectory",
    "load_trajectory",
    "write_csv",
    "read_csv",
    "dump_json",
]


def _json_compact(meta):
    return json.dumps(meta, sort_keys=True, separators=(",", ":"))


def save_matrix(path, array, meta=None):
    """Write a 1-D or 2-D float array as headered delimited text."""
    array = np.atleast_2d(np.asarray(array, dtype=float))
    if array.ndim != 2:
        raise InvalidInputError("save_matrix handles 1-D or 2-D arrays only")
    with open(path, "w") as fh:
        fh.write(f"{MATRIX_MAGIC} {_json_compact(meta or {})}\n")
        for row in array:
            fh.write(" ".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_matrix(path):
    """Read a headered text matrix; returns (array, meta)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(MATRIX_MAGIC + " "):
            raise InvalidInputError(f"{path}: not a kaf.matrix/1 file")
        meta = json.loads(header[len(MATRIX_MAGIC) + 1 :])
        data = np.loadtxt(fh, ndmin=2)
    return data, meta


def save_container(path, kind, meta, arrays):
    """Write named arrays into one versioned binary file.

    `arrays` is a dict name -> ndarray; insertion order is preserved and
    recorded in the header, so the output bytes are deterministic.
    """
    header = dict(meta or {})
    header["kind"] = kind
    header["arrays"] = list(arrays.keys())
    with open(path, "wb") as fh:
        fh.write(f"{CONTAINER_MAGIC} {_json_compact(header)}\n".encode())
        for name in header["arrays"]:
            np.save(fh, np.ascontiguousarray(arrays[name]), allow_pickle=False)


def load_container(path, expect_kind=None):
    """Read a container written by save_container; returns (meta, arrays)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode().rstrip("\n")
        if not header.startswith(CONTAINER_MAGIC + " "):
            raise InvalidInputError(f"{path}: not a {CONTAINER_MAGIC} file")
        meta = json.loads(header[len(CONTAINER_MAGIC) + 1 :])
        if expect_kind is not None and meta.get("kind") != expect_kind:
            raise InvalidInputError(
                f"{path}: container kind {meta.get('kind')!r}, expected {expect_kind!r}"
            )
        arrays = {}
        for name in meta["arrays"]:
            arrays[name] = np.load(fh, allow_pickle=False)
    return meta, arrays


def save_trajectory(path, traj):
    from .dynamics import Trajectory  # local import to avoid a cycle

    assert isinstance(traj, Trajectory)
    meta = {"t0": traj.t0, "obs_dt": traj.obs_dt}
    meta.update(traj.meta)
    save_matrix(path, traj.states, meta)


def load_trajectory(path):
    from .dynamics import Trajectory

    states, meta = load_matrix(path)
    t0 = meta.pop("t0", 0.0)
    obs_dt = meta.pop("obs_dt", 1.0)
    return Trajectory(states, t0=t0, obs_dt=obs_dt, meta=meta)


def _format_cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns, rows):
    """Write a column-labeled CSV with shortest-round-trip float formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv; returns (columns, list of row lists).

    Cells are parsed as floats where possible, otherwise kept as strings.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise InvalidInputError(f"{path}: empty table")
    columns = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        row = []
        for cell in ln.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return columns, rows


def dump_json(path, obj):
    """Deterministic JSON dump (sorted keys, newline-terminated)."""
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
