"""Synthetic data with known ground truth.

* :class:`LinearLatentModel` -- two noisy linear views of a Gaussian latent.
* :class:`SwissRollSpec` -- two differently rolled noisy copies of a 2-d
  latent rectangle.
* :class:`LoopTrajectorySpec` -- a vehicle lapping a figure-eight track,
  observed through six noisy inertial-style channels.

Every generator draws from independent ``numpy.random.SeedSequence``
children of its seed, so outputs are bit-for-bit reproducible and the
noise of one view never shares a stream with the other.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import InvalidInputError, ParameterError

__all__ = [
    "LinearLatentModel",
    "random_linear_model",
    "gen_linear",
    "SwissRollSpec",
    "gen_swiss_roll_pair",
    "roll_maps",
    "LoopTrajectorySpec",
    "LoopTrajectory",
    "gen_loop_trajectory",
    "write_dataset_csv",
    "read_dataset_csv",
]

_FULL_RANK_TOL = 1e-8


def _rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# linear latent model


@dataclass(frozen=True)
class LinearLatentModel:
    """``x = M z + eps``, ``y = N z + zeta`` with ``z ~ N(0, latent_cov)``."""

    m_map: np.ndarray
    n_map: np.ndarray
    latent_cov: np.ndarray
    noise_cov_x: np.ndarray
    noise_cov_y: np.ndarray
    seed: int = 0

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.m_map, dtype=float))
        nmap = np.atleast_2d(np.asarray(self.n_map, dtype=float))
        k = m.shape[1]
        if nmap.shape[1] != k:
            raise InvalidInputError("M and N must have the same number of columns (latent dimension)")
        lc = np.atleast_2d(np.asarray(self.latent_cov, dtype=float))
        ncx = np.atleast_2d(np.asarray(self.noise_cov_x, dtype=float))
        ncy = np.atleast_2d(np.asarray(self.noise_cov_y, dtype=float))
        if lc.shape != (k, k) or ncx.shape != (m.shape[0],) * 2 or ncy.shape != (nmap.shape[0],) * 2:
            raise InvalidInputError("covariance shapes do not match the maps")
        for name, a in (("M", m), ("N", nmap)):
            if np.linalg.svd(a, compute_uv=False).min() <= _FULL_RANK_TOL:
                raise InvalidInputError(f"{name} must have full column rank")
        if np.linalg.eigvalsh(0.5 * (lc + lc.T)).min() <= _FULL_RANK_TOL:
            raise InvalidInputError("latent covariance must be positive definite")
        for name, a in (("noise_cov_x", ncx), ("noise_cov_y", ncy)):
            if not np.allclose(a, a.T) or np.linalg.eigvalsh(0.5 * (a + a.T)).min() < -1e-10:
                raise InvalidInputError(f"{name} must be symmetric positive semidefinite")
        for name, a in (("m_map", m), ("n_map", nmap), ("latent_cov", lc), ("noise_cov_x", ncx), ("noise_cov_y", ncy)):
            object.__setattr__(self, name, a)

    @property
    def k(self) -> int:
        return self.m_map.shape[1]


def random_linear_model(d_x: int, d_y: int, k: int, noise: float = 1.0, seed: int = 0, signal: float = 1.0) -> LinearLatentModel:
    """Gaussian random maps, identity latent covariance, isotropic noise ``noise**2``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4D]))
    return LinearLatentModel(
        m_map=signal * rng.standard_normal((d_x, k)),
        n_map=signal * rng.standard_normal((d_y, k)),
        latent_cov=np.eye(k),
        noise_cov_x=noise**2 * np.eye(d_x),
        noise_cov_y=noise**2 * np.eye(d_y),
        seed=seed,
    )


def _gaussian(rng, cov: np.ndarray, n: int) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    root = v * np.sqrt(np.maximum(w, 0.0))
    return rng.standard_normal((n, cov.shape[0])) @ root.T


def gen_linear(model: LinearLatentModel, n: int):
    """Draw ``n`` paired samples ``(x, y, z)`` from a linear latent model."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rz, rx, ry = _rngs(model.seed, 3)
    z = _gaussian(rz, model.latent_cov, n)
    x = z @ model.m_map.T + _gaussian(rx, model.noise_cov_x, n)
    y = z @ model.n_map.T + _gaussian(ry, model.noise_cov_y, n)
    return x, y, z


# ---------------------------------------------------------------------------
# swiss rolls


@dataclass(frozen=True)
class SwissRollSpec:
    """Paired noisy swiss rolls over the latent rectangle ``t_range x height_range``.

    ``z = (z1, z2)`` is uniform on the rectangle. The ``x`` view rolls
    ``z1`` (the roll angle ``t = z1``) and lays ``z2`` along the height:
    ``f(z) = (t cos t, z2, t sin t)``. The ``y`` view swaps the roles of the
    two latent coordinates: ``z2`` is mapped affinely onto the angle range
    and ``z1`` onto the height range, and the roll is laid in a permuted
    set of axes, ``g(z) = (h, u sin u, u cos u)``.
    """

    n: int = 5000
    t_range: tuple[float, float] = (1.5 * np.pi, 4.5 * np.pi)
    height_range: tuple[float, float] = (0.0, 20.0)
    noise_x: tuple[float, float, float] = (1.0, 1.0, 1.0)
    noise_y: tuple[float, float, float] = (1.0, 1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        for name in ("t_range", "height_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ParameterError(f"{name} must be an increasing pair, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name in ("noise_x", "noise_y"):
            s = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (3,))
            if np.any(s < 0) or not np.all(np.isfinite(s)):
                raise ParameterError(f"{name} must be non-negative and finite")
            object.__setattr__(self, name, tuple(float(v) for v in s))

    def with_noise(self, sigma: float) -> "SwissRollSpec":
        return SwissRollSpec(self.n, self.t_range, self.height_range, (sigma,) * 3, (sigma,) * 3, self.seed)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SwissRollSpec":
        d = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**d)


def roll_maps(spec: SwissRollSpec, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free embeddings ``f(z)`` and ``g(z)`` of latent points."""
    (t0, t1), (h0, h1) = spec.t_range, spec.height_range
    t, h = z[:, 0], z[:, 1]
    f = np.column_stack([t * np.cos(t), h, t * np.sin(t)])
    u = t0 + (h - h0) * (t1 - t0) / (h1 - h0)
    hy = h0 + (t - t0) * (h1 - h0) / (t1 - t0)
    g = np.column_stack([hy, u * np.sin(u), u * np.cos(u)])
    return f, g


def gen_swiss_roll_pair(spec: SwissRollSpec):
    """Sample ``(x, y, z)``: two noisy, differently rolled views of ``z``."""
    rz, rx, ry = _rngs(spec.seed, 3)
    n = int(spec.n)
    z = np.column_stack([rz.uniform(*spec.t_range, size=n), rz.uniform(*spec.height_range, size=n)])
    f, g = roll_maps(spec, z)
    x = f + rx.standard_normal((n, 3)) * np.asarray(spec.noise_x)
    y = g + ry.standard_normal((n, 3)) * np.asarray(spec.noise_y)
    return x, y, z


# ---------------------------------------------------------------------------
# loop trajectories


@dataclass(frozen=True)
class LoopTrajectorySpec:
    """A car lapping a figure-eight track, sampled every ``dt`` seconds.

    The track is ``p(phi) = (a sin phi, b sin phi cos phi)``. The phase
    rate is ``omega (1 + speed_var cos 2 phi) (1 + drift * m(t))`` where
    ``m`` is a smooth random modulation (a few seeded sinusoids), so the
    car slows in the bends and no two laps are identical.
    """

    T: int = 2500
    dt: float = 0.1
    a: float = 3.0
    b: float = 2.0
    omega: float = 0.5
    speed_var: float = 0.3
    drift: float = 0.15
    elevation: float = 0.3
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if int(self.T) < 2:
            raise ParameterError(f"T must be >= 2, got {self.T}")
        if not (self.dt > 0 and self.omega > 0 and self.a > 0 and self.b > 0):
            raise ParameterError("dt, omega, a and b must be positive")
        if not 0 <= self.speed_var < 1 or not 0 <= self.drift < 1:
            raise ParameterError("speed_var and drift must lie in [0, 1) to keep the car moving forward")
        if self.noise < 0:
            raise ParameterError("noise must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


CHANNELS = ("accel_tangential", "accel_lateral", "accel_vertical", "yaw_rate", "roll", "pitch")


@dataclass(frozen=True)
class LoopTrajectory:
    observations: np.ndarray
    positions: np.ndarray
    phase: np.ndarray
    clean: np.ndarray = field(repr=False)

    @property
    def T(self) -> int:
        return self.positions.shape[0]


def _modulation(seed: int):
    rng = _rngs(seed, 2)[0]
    freq = rng.uniform(0.02, 0.12, size=3) * 2 * np.pi
    phase = rng.uniform(0, 2 * np.pi, size=3)
    amp = rng.uniform(0.5, 1.0, size=3)
    amp /= amp.sum()

    def m(t):
        return np.sum(amp * np.sin(np.multiply.outer(t, freq) + phase), axis=-1)

    def dm(t):
        return np.sum(amp * freq * np.cos(np.multiply.outer(t, freq) + phase), axis=-1)

    return m, dm


def _loop_kinematics(spec: LoopTrajectorySpec, t: np.ndarray, phi: np.ndarray, m, dm):
    """Positions and the six clean channels from the phase trajectory."""
    a, b = spec.a, spec.b
    rate_shape = 1 + spec.speed_var * np.cos(2 * phi)
    mod = 1 + spec.drift * m(t)
    dphi = spec.omega * rate_shape * mod
    ddphi = spec.omega * (-2 * spec.speed_var * np.sin(2 * phi) * dphi * mod + rate_shape * spec.drift * dm(t))

    pos = np.column_stack([a * np.sin(phi), 0.5 * b * np.sin(2 * phi)])
    d1 = np.column_stack([a * np.cos(phi), b * np.cos(2 * phi)])  # dp/dphi
    d2 = np.column_stack([-a * np.sin(phi), -2 * b * np.sin(2 * phi)])  # d2p/dphi2
    acc = d2 * dphi[:, None] ** 2 + d1 * ddphi[:, None]
    speed_phi = np.linalg.norm(d1, axis=1)
    tangent = d1 / speed_phi[:, None]
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    a_t = np.einsum("ij,ij->i", acc, tangent)
    a_n = np.einsum("ij,ij->i", acc, normal)
    curvature_phi = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed_phi**2
    yaw = curvature_phi * dphi
    # track elevation e(phi) = elevation * sin(phi + 0.5): vertical acceleration and slope
    e1 = spec.elevation * np.cos(phi + 0.5)
    e2 = -spec.elevation * np.sin(phi + 0.5)
    vert = e2 * dphi**2 + e1 * ddphi
    roll = 0.2 * a_n
    pitch = 0.2 * a_t + e1 / speed_phi
    clean = np.column_stack([a_t, a_n, vert, yaw, roll, pitch])
    return pos, clean


def gen_loop_trajectory(spec: LoopTrajectorySpec) -> LoopTrajectory:
    """Simulate the track; return noisy channels, true positions and phase."""
    m, dm = _modulation(spec.seed)
    t = np.arange(int(spec.T)) * spec.dt

    def rhs(tt, phi):
        return spec.omega * (1 + spec.speed_var * np.cos(2 * phi)) * (1 + spec.drift * m(tt))

    sol = solve_ivp(rhs, (0.0, t[-1]), [0.0], t_eval=t, rtol=1e-10, atol=1e-12, method="DOP853")
    phi = sol.y[0]
    pos, clean = _loop_kinematics(spec, t, phi, m, dm)
    noise_rng = _rngs(spec.seed, 2)[1]
    obs = clean + spec.noise * noise_rng.standard_normal(clean.shape)
    return LoopTrajectory(obs, pos, phi, clean)


# ---------------------------------------------------------------------------
# CSV / JSON export


def write_dataset_csv(path, data: np.ndarray, columns) -> None:
    """One row per sample, with a header of column names."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    columns = list(columns)
    if len(columns) != data.shape[1]:
        raise InvalidInputError(f"{len(columns)} column names for {data.shape[1]} columns")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def read_dataset_csv(path) -> tuple[np.ndarray, list[str]]:
    with Path(path).open(newline="") as fh:
        header = next(csv.reader(fh))
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), header


def write_spec_json(path, spec) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
