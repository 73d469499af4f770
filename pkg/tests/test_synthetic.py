import json

import numpy as np
import pytest
from scipy.stats import spearmanr

from twomanifold.exceptions import InvalidInputError, ParameterError
from twomanifold.graph import le_embed
from twomanifold.synthetic import (
    CHANNELS,
    LinearLatentModel,
    LoopTrajectorySpec,
    SwissRollSpec,
    gen_linear,
    gen_loop_trajectory,
    gen_swiss_roll_pair,
    random_linear_model,
    read_dataset_csv,
    roll_maps,
    write_dataset_csv,
    write_spec_json,
)


class TestLinearModel:
    def test_noiseless_in_range(self):
        model = random_linear_model(6, 5, 2, noise=0.0, seed=1)
        x, y, z = gen_linear(model, 200)
        q, _ = np.linalg.qr(model.m_map)
        assert np.abs(x - x @ q @ q.T).max() <= 1e-10
        np.testing.assert_allclose(x, z @ model.m_map.T, atol=1e-12)

    def test_cross_covariance_converges(self):
        model = random_linear_model(5, 4, 2, noise=1.0, seed=3)
        x, y, _ = gen_linear(model, 50000)
        xc, yc = x - x.mean(0), y - y.mean(0)
        emp = xc.T @ yc / 50000
        true = model.m_map @ model.latent_cov @ model.n_map.T
        assert np.linalg.norm(emp - true) / np.linalg.norm(true) <= 0.05

    def test_noises_independent(self):
        model = LinearLatentModel(np.eye(3)[:, :2], np.eye(3)[:, :2], np.eye(2), np.eye(3), np.eye(3), seed=5)
        x, y, z = gen_linear(model, 50000)
        eps = x - z @ model.m_map.T
        zeta = y - z @ model.n_map.T
        cross = (eps - eps.mean(0)).T @ (zeta - zeta.mean(0)) / 50000
        assert np.abs(cross).max() <= 0.05

    def test_deterministic(self):
        model = random_linear_model(4, 4, 2, seed=9)
        a = gen_linear(model, 100)
        b = gen_linear(model, 100)
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)
        c = gen_linear(random_linear_model(4, 4, 2, seed=10), 100)
        assert not np.allclose(a[0], c[0])

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            LinearLatentModel(np.ones((3, 2)), np.eye(3)[:, :2], np.eye(2), np.eye(3), np.eye(3))
        with pytest.raises(InvalidInputError):
            LinearLatentModel(np.eye(3)[:, :2], np.eye(3)[:, :2], np.diag([1.0, 0.0]), np.eye(3), np.eye(3))
        with pytest.raises(InvalidInputError):
            LinearLatentModel(np.eye(3)[:, :2], np.eye(3)[:, :2], np.eye(2), -np.eye(3), np.eye(3))
        with pytest.raises(ParameterError):
            gen_linear(random_linear_model(3, 3, 1), 0)


class TestSwissRoll:
    def test_noiseless_reproduces_maps(self):
        spec = SwissRollSpec(n=300, seed=2).with_noise(0.0)
        x, y, z = gen_swiss_roll_pair(spec)
        f, g = roll_maps(spec, z)
        np.testing.assert_array_equal(x, f)
        np.testing.assert_array_equal(y, g)
        t = z[:, 0]
        np.testing.assert_allclose(x, np.c_[t * np.cos(t), z[:, 1], t * np.sin(t)])

    def test_contract(self):
        spec = SwissRollSpec(n=500, seed=4)
        x, y, z = gen_swiss_roll_pair(spec)
        assert x.shape == y.shape == (500, 3) and z.shape == (500, 2)
        assert np.all((z[:, 0] >= spec.t_range[0]) & (z[:, 0] <= spec.t_range[1]))
        assert np.all((z[:, 1] >= spec.height_range[0]) & (z[:, 1] <= spec.height_range[1]))

    def test_views_roll_different_axes(self):
        spec = SwissRollSpec(n=400).with_noise(0.0)
        x, y, z = gen_swiss_roll_pair(spec)
        # x keeps z2 as a straight axis, y keeps an affine image of z1
        np.testing.assert_allclose(x[:, 1], z[:, 1])
        t0, t1 = spec.t_range
        np.testing.assert_allclose(y[:, 0], (z[:, 0] - t0) / (t1 - t0) * 20.0, atol=1e-12)

    def test_noise_scale(self):
        spec = SwissRollSpec(n=20000, noise_x=(0.5, 1.0, 2.0), noise_y=(0, 0, 0), seed=1)
        x, y, z = gen_swiss_roll_pair(spec)
        f, g = roll_maps(spec, z)
        np.testing.assert_allclose((x - f).std(0), [0.5, 1.0, 2.0], rtol=0.03)
        np.testing.assert_array_equal(y, g)

    def test_determinism(self):
        a = gen_swiss_roll_pair(SwissRollSpec(n=50, seed=8))
        b = gen_swiss_roll_pair(SwissRollSpec(n=50, seed=8))
        for u, v in zip(a, b):
            np.testing.assert_array_equal(u, v)

    def test_spec_validation_and_round_trip(self, tmp_path):
        with pytest.raises(ParameterError):
            SwissRollSpec(t_range=(2.0, 1.0))
        with pytest.raises(ParameterError):
            SwissRollSpec(noise_x=(-1.0, 0.0, 0.0))
        spec = SwissRollSpec(n=10, noise_x=0.5, seed=3)
        assert spec.noise_x == (0.5, 0.5, 0.5)
        assert SwissRollSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
        write_spec_json(tmp_path / "s.json", spec)
        assert json.loads((tmp_path / "s.json").read_text())["n"] == 10

    def test_noiseless_le_orders_rolled_axis(self):
        x, _, z = gen_swiss_roll_pair(SwissRollSpec(n=2000, seed=0).with_noise(0.0))
        e = le_embed(x, 10, 2, scaling="classic").coords_x
        assert abs(spearmanr(e[:, 0], z[:, 0]).statistic) >= 0.99

    @pytest.mark.xfail(
        strict=True,
        reason="the second Laplacian eigenfunction on this roll is a harmonic of the rolled "
        "axis (its unrolled length is ~4x the height), so the height is not among the top two",
    )
    def test_noiseless_le_orders_height_axis(self):
        x, _, z = gen_swiss_roll_pair(SwissRollSpec(n=2000, seed=0).with_noise(0.0))
        e = le_embed(x, 10, 2).coords_x
        rho = max(abs(spearmanr(e[:, j], z[:, 1]).statistic) for j in range(2))
        assert rho >= 0.99


class TestLoop:
    def test_smooth_without_noise(self):
        # second differences are bounded by sup|c''| dt^2; sup|c''| is
        # estimated on a 10x finer sampling of the same continuous trajectory
        coarse = gen_loop_trajectory(LoopTrajectorySpec(T=600, dt=0.1, noise=0.0, seed=2))
        fine = gen_loop_trajectory(LoopTrajectorySpec(T=6000, dt=0.01, noise=0.0, seed=2))
        np.testing.assert_array_equal(coarse.observations, coarse.clean)
        sup_c2 = np.abs(np.diff(fine.clean, 2, axis=0)).max(axis=0) / 0.01**2
        d2 = np.abs(np.diff(coarse.clean, 2, axis=0)).max(axis=0)
        assert np.all(d2 <= 1.05 * sup_c2 * 0.1**2)
        # and the bound is not vacuous: noise breaks it
        noisy = gen_loop_trajectory(LoopTrajectorySpec(T=600, dt=0.1, noise=0.1, seed=2))
        assert np.any(np.abs(np.diff(noisy.observations, 2, axis=0)).max(axis=0) > 1.05 * sup_c2 * 0.1**2)

    def test_closed_track(self):
        traj = gen_loop_trajectory(LoopTrajectorySpec(T=400, seed=1))
        steps = np.linalg.norm(np.diff(traj.positions, axis=0), axis=1)
        lap = int(np.argmax(traj.phase >= 2 * np.pi))
        assert lap > 0
        assert np.linalg.norm(traj.positions[lap] - traj.positions[0]) <= steps.max()

    def test_phase_increases(self):
        traj = gen_loop_trajectory(LoopTrajectorySpec(T=500, seed=3))
        assert np.all(np.diff(traj.phase) > 0)
        a, b = 3.0, 2.0
        np.testing.assert_allclose(traj.positions, np.c_[a * np.sin(traj.phase), b * np.sin(traj.phase) * np.cos(traj.phase)], atol=1e-12)

    def test_shapes_and_determinism(self):
        spec = LoopTrajectorySpec(T=300, seed=4)
        a = gen_loop_trajectory(spec)
        b = gen_loop_trajectory(spec)
        assert a.observations.shape == (300, len(CHANNELS)) and a.T == 300
        np.testing.assert_array_equal(a.observations, b.observations)
        c = gen_loop_trajectory(LoopTrajectorySpec(T=300, seed=5))
        assert not np.allclose(a.observations, c.observations)

    def test_validation(self):
        with pytest.raises(ParameterError):
            LoopTrajectorySpec(speed_var=1.2)
        with pytest.raises(ParameterError):
            LoopTrajectorySpec(noise=-0.1)


def test_dataset_csv_round_trip(tmp_path, rng):
    data = rng.standard_normal((7, 3))
    write_dataset_csv(tmp_path / "d.csv", data, ["a", "b", "c"])
    back, cols = read_dataset_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back, data)
    assert cols == ["a", "b", "c"]
    with pytest.raises(InvalidInputError):
        write_dataset_csv(tmp_path / "e.csv", data, ["a"])
