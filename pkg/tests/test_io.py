import numpy as np
import pytest

from kaf.dynamics import Trajectory, integrate, lorenz63_spec
from kaf.errors import InvalidInputError
from kaf.io import (
    load_container,
    load_matrix,
    load_trajectory,
    read_csv,
    save_container,
    save_matrix,
    save_trajectory,
    write_csv,
)


def test_matrix_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((17, 5))
    data[0, :] = [0.1, 1e-300, -0.0, 1e308, np.pi]
    path = tmp_path / "m.txt"
    save_matrix(path, data, {"tag": "x"})
    back, meta = load_matrix(path)
    assert meta == {"tag": "x"}
    np.testing.assert_array_equal(back, data)


def test_matrix_header_required(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2 3\n")
    with pytest.raises(InvalidInputError):
        load_matrix(path)


def test_container_round_trip(tmp_path):
    arrays = {
        "a": np.arange(5),
        "b": np.random.default_rng(1).standard_normal((3, 4)),
    }
    path = tmp_path / "c.bin"
    save_container(path, "test-kind", {"version": 1}, arrays)
    meta, back = load_container(path, expect_kind="test-kind")
    assert meta["version"] == 1
    for k in arrays:
        np.testing.assert_array_equal(back[k], arrays[k])
    with pytest.raises(InvalidInputError):
        load_container(path, expect_kind="other-kind")


def test_container_bytes_deterministic(tmp_path):
    arrays = {"a": np.linspace(0, 1, 11)}
    p1, p2 = tmp_path / "1.bin", tmp_path / "2.bin"
    save_container(p1, "k", {}, arrays)
    save_container(p2, "k", {}, arrays)
    assert p1.read_bytes() == p2.read_bytes()


def test_trajectory_round_trip(tmp_path):
    traj = integrate(lorenz63_spec(), [1.0, 1.0, 1.0], 50, t0=2.5, meta={"system": "lorenz63"})
    path = tmp_path / "traj.txt"
    save_trajectory(path, traj)
    back = load_trajectory(path)
    assert isinstance(back, Trajectory)
    assert back.t0 == 2.5
    assert back.obs_dt == traj.obs_dt
    assert back.meta["system"] == "lorenz63"
    np.testing.assert_array_equal(back.states, traj.states)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["name", "value"], [["a", 0.1], ["b", 2]])
    cols, rows = read_csv(path)
    assert cols == ["name", "value"]
    assert rows == [["a", 0.1], ["b", 2.0]]
