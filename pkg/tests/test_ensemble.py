from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cpodnb.ensemble import (DimensionError, Ensemble, FormatError, RandomInput, SpatialGrid,
                             TimeGrid, Trajectory, export_trajectory_csv, inner_product,
                             load_ensemble, save_ensemble, trajectory_sq_norm)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def toy_ensemble(n=3, M=6, J=4, p=5, seed=0):
    rng = np.random.default_rng(seed)
    grid = SpatialGrid.uniform(M)
    trajs = [Trajectory(RandomInput(rng.normal(size=p), "trig", int(rng.integers(2**63))),
                        rng.normal(size=(J, M))) for _ in range(n)]
    return Ensemble(grid, TimeGrid(0.25, J), trajs)


def test_uniform_grid_weights():
    g = SpatialGrid.uniform(5)
    np.testing.assert_array_equal(g.weights, [0.125, 0.25, 0.25, 0.25, 0.125])
    assert abs(g.weights.sum() - 1) <= 1e-12


def test_grid_invariants_rejected():
    with pytest.raises(ValueError):
        SpatialGrid(np.array([0.0, 0.6, 0.5, 1.0]), np.full(4, 0.25))
    with pytest.raises(ValueError):
        SpatialGrid(np.array([0.0, 1.0]), np.array([0.4, 0.4]))


def test_inner_product_of_ones_is_domain_length():
    g = SpatialGrid.uniform(17)
    assert inner_product(np.ones(17), np.ones(17), g) == pytest.approx(1.0, abs=1e-14)


def test_disjoint_supports_are_orthogonal():
    g = SpatialGrid.uniform(9)
    a = np.zeros(9); a[:4] = 1.0
    b = np.zeros(9); b[5:] = 3.0
    assert inner_product(a, b, g) == 0.0


def test_inner_product_matches_rational_arithmetic():
    g = SpatialGrid.uniform(5)
    a = [3, -1, 4, 1, -5]
    b = [2, 7, -1, 8, 2]
    w = [Fraction(1, 8), Fraction(1, 4), Fraction(1, 4), Fraction(1, 4), Fraction(1, 8)]
    expected = sum(wi * ai * bi for wi, ai, bi in zip(w, a, b))
    assert inner_product(np.array(a, float), np.array(b, float), g) == float(expected)


def test_inner_product_length_mismatch():
    with pytest.raises(DimensionError):
        inner_product(np.ones(4), np.ones(5), SpatialGrid.uniform(5))


@given(arrays(np.float64, 7, elements=finite), arrays(np.float64, 7, elements=finite))
def test_inner_product_symmetric(a, b):
    g = SpatialGrid.uniform(7)
    ab, ba = inner_product(a, b, g), inner_product(b, a, g)
    assert ab == pytest.approx(ba, rel=1e-14, abs=1e-9)


@given(arrays(np.float64, 7, elements=st.one_of(st.just(0.0), st.floats(1e-100, 1e3), st.floats(-1e3, -1e-100))))
def test_inner_product_positive_definite(a):
    g = SpatialGrid.uniform(7)
    if np.any(a != 0):
        assert inner_product(a, a, g) > 0


def test_trajectory_norm_zero_and_constant():
    g = SpatialGrid.uniform(5)
    inp = RandomInput(np.zeros(3))
    assert trajectory_sq_norm(Trajectory(inp, np.zeros((4, 5))), g, TimeGrid(0.5, 4)) == 0.0
    # constant one on a unit domain over T = 2
    norm = trajectory_sq_norm(Trajectory(inp, np.ones((4, 5))), g, TimeGrid(0.5, 4))
    assert norm == pytest.approx(2.0, abs=1e-14)


def test_trajectory_norm_hand_quadrature():
    g = SpatialGrid.uniform(3)  # weights 1/4, 1/2, 1/4
    snaps = np.array([[1, 2, 3], [0, -1, 2], [4, 0, 0]], float)
    w = [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
    dt = Fraction(1, 3)
    expected = dt * sum(wi * int(v) ** 2 for row in snaps for wi, v in zip(w, row))
    tr = Trajectory(RandomInput(np.zeros(4)), snaps)
    got = trajectory_sq_norm(tr, g, TimeGrid(1 / 3, 3))
    assert got == pytest.approx(float(expected), rel=1e-15)
    assert got == pytest.approx(
        (1 / 3) * sum(inner_product(s, s, g) for s in snaps), rel=1e-15)


def test_time_grid_horizon():
    tg = TimeGrid(1 / 200, 400)
    assert abs(tg.T - 2.0) <= 1e-12
    assert abs(tg.instants[-1] - 2.0) <= 1e-12


def test_ensemble_shape_checks():
    g = SpatialGrid.uniform(4)
    good = Trajectory(RandomInput(np.zeros(2)), np.zeros((3, 4)))
    bad = Trajectory(RandomInput(np.zeros(2)), np.zeros((2, 4)))
    with pytest.raises(DimensionError):
        Ensemble(g, TimeGrid(0.1, 3), [good, bad])
    with pytest.raises(ValueError):
        Ensemble(g, TimeGrid(0.1, 3), [])


def test_save_load_round_trip_is_bit_exact(tmp_path):
    e = toy_ensemble()
    path = tmp_path / "e.cpod"
    save_ensemble(e, path)
    back = load_ensemble(path)
    assert back.time == e.time
    assert back.grid.nodes.tobytes() == e.grid.nodes.tobytes()
    assert back.grid.weights.tobytes() == e.grid.weights.tobytes()
    for a, b in zip(e.trajectories, back.trajectories):
        assert a.snaps.tobytes() == b.snaps.tobytes()
        assert a.input.strength.tobytes() == b.input.strength.tobytes()
        assert (a.input.seed, a.input.generator) == (b.input.seed, b.input.generator)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(2, 6), st.integers(1, 5), st.integers(0, 2**32))
def test_round_trip_property(n, M, J, seed):
    import tempfile
    from pathlib import Path
    e = toy_ensemble(n, M, J, 3, seed)
    with tempfile.TemporaryDirectory() as d:
        save_ensemble(e, Path(d) / "x.cpod")
        back = load_ensemble(Path(d) / "x.cpod")
    assert back.snapshot_array().tobytes() == e.snapshot_array().tobytes()


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "e.cpod"
    save_ensemble(toy_ensemble(), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-9])
    with pytest.raises(FormatError, match="length"):
        load_ensemble(path)


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "e.cpod"
    save_ensemble(toy_ensemble(), path)
    path.write_bytes(b"XPOD" + path.read_bytes()[4:])
    with pytest.raises(FormatError, match="magic"):
        load_ensemble(path)


def test_corrupted_payload_fails_checksum(tmp_path):
    path = tmp_path / "e.cpod"
    save_ensemble(toy_ensemble(), path)
    raw = bytearray(path.read_bytes())
    raw[100] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="checksum"):
        load_ensemble(path)


def test_trajectory_csv(tmp_path):
    e = toy_ensemble(n=1, M=3, J=2)
    export_trajectory_csv(e[0], e.grid, e.time, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x,value"
    assert len(lines) == 1 + 2 * 3
