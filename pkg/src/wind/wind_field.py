"""
Stochastic wind-error field.

Horizontal wind error on a small 3-D grid, spatially correlated through a
separable exponential covariance and evolved in time as an AR(1) process:

    W(0)   = L_R v(0)
    W(k+1) = a W(k) + L_Q v(k+1),    a = exp(-dt / G_t),  L_Q = sqrt(1 - a^2) L_R

so the stationary distribution stays N(0, R). The x and y components are
independent draws sharing the same factor. Point values are trilinear
interpolations of the node values plus the nominal (forecast) wind.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from errors import ConfigError
from log_utils import log

JITTER_SCALE = 1e-8


@dataclass(frozen=True)
class WindConfig:
    nx: int = 2
    ny: int = 2
    nz: int = 2
    extent: tuple = ((-30000.0, 30000.0), (-30000.0, 30000.0), (0.0, 12000.0))
    sigma_profile: tuple = ((0.0, 1.5), (12000.0, 4.0))
    lambda_per_s: float = 6e-6
    beta_per_m: float = 1.6e-6
    gamma_per_m: float = 1.5e-5
    g_t_s: float = 3600.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 2:
            raise ConfigError("Wind grid needs at least 2 nodes per axis", source="wind")
        for lo, hi in self.extent:
            if not lo < hi:
                raise ConfigError(f"Wind grid extent ({lo}, {hi}) is empty", source="wind")
        altitudes = [z for z, _ in self.sigma_profile]
        if not altitudes or any(b <= a for a, b in zip(altitudes, altitudes[1:])):
            raise ConfigError("Wind sigma profile altitudes must be strictly increasing", source="wind")
        if any(s < 0 for _, s in self.sigma_profile):
            raise ConfigError("Wind sigma profile values must be non-negative", source="wind")
        if self.g_t_s <= 0:
            raise ConfigError("Wind temporal constant g_t_s must be positive", source="wind")

    @staticmethod
    def from_dict(data: dict, tma_radius_m: float = 30000.0) -> 'WindConfig':
        default_extent = ((-tma_radius_m, tma_radius_m), (-tma_radius_m, tma_radius_m), (0.0, 12000.0))
        defaults = WindConfig()
        try:
            return WindConfig(
                nx=int(data.get("nx", defaults.nx)),
                ny=int(data.get("ny", defaults.ny)),
                nz=int(data.get("nz", defaults.nz)),
                extent=tuple(tuple(float(v) for v in pair) for pair in data.get("extent", default_extent)),
                sigma_profile=tuple(tuple(float(v) for v in pair)
                                    for pair in data.get("sigma_profile", defaults.sigma_profile)),
                lambda_per_s=float(data.get("lambda_per_s", defaults.lambda_per_s)),
                beta_per_m=float(data.get("beta_per_m", defaults.beta_per_m)),
                gamma_per_m=float(data.get("gamma_per_m", defaults.gamma_per_m)),
                g_t_s=float(data.get("g_t_s", defaults.g_t_s)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid wind block: {e}", source="wind")


@dataclass(frozen=True)
class NominalWind:
    """Forecast wind; bearing is the direction the wind blows toward, state frame."""
    times_s: tuple = ()
    speeds_mps: tuple = ()
    bearings_rad: tuple = ()

    def __post_init__(self):
        if not len(self.times_s) == len(self.speeds_mps) == len(self.bearings_rad):
            raise ConfigError("Nominal wind timeline columns differ in length", source="wind.nominal")
        if any(b <= a for a, b in zip(self.times_s, self.times_s[1:])):
            raise ConfigError("Nominal wind times must be strictly increasing", source="wind.nominal")

    @staticmethod
    def from_dict(entries: list) -> 'NominalWind':
        try:
            return NominalWind(
                times_s=tuple(float(e["time_s"]) for e in entries),
                speeds_mps=tuple(float(e["speed_mps"]) for e in entries),
                bearings_rad=tuple(math.radians(float(e["bearing_deg"])) for e in entries),
            )
        except KeyError as e:
            raise ConfigError(f"Nominal wind entry missing {e}", source="wind.nominal")

    def at(self, t_s: float) -> tuple[float, float]:
        if not self.times_s:
            return 0.0, 0.0
        speed = np.interp(t_s, self.times_s, self.speeds_mps)
        bearing = np.interp(t_s, self.times_s, np.unwrap(self.bearings_rad))
        return float(speed * np.cos(bearing)), float(speed * np.sin(bearing))


@dataclass
class WindGrid:
    config: WindConfig
    axes: tuple
    points: np.ndarray
    a: float
    covariance_matrix: np.ndarray
    chol_R: np.ndarray
    chol_Q: np.ndarray
    w_x: np.ndarray = field(default=None)
    w_y: np.ndarray = field(default=None)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def sigma_at(self, z_m):
        z_nodes, sigmas = zip(*self.config.sigma_profile)
        return np.interp(z_m, z_nodes, sigmas)


def build_grid(config: WindConfig, dt_s: float) -> WindGrid:
    """Nodes, same-time covariance and both Cholesky factors; no field values yet."""
    if dt_s <= 0:
        raise ConfigError("Wind step dt must be positive", source="wind")
    axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in
                 zip(config.extent, (config.nx, config.ny, config.nz)))
    gx, gy, gz = np.meshgrid(*axes, indexing='ij')
    points = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    z_nodes, sigmas = zip(*config.sigma_profile)
    sigma = np.interp(points[:, 2], z_nodes, sigmas)
    horizontal = np.hypot(points[:, None, 0] - points[None, :, 0], points[:, None, 1] - points[None, :, 1])
    vertical = np.abs(points[:, None, 2] - points[None, :, 2])
    r_hat = np.outer(sigma, sigma) * np.exp(-config.beta_per_m * horizontal) * np.exp(-config.gamma_per_m * vertical)

    chol_r, r_hat = _factorise(r_hat)
    a = math.exp(-dt_s / config.g_t_s)
    chol_q = math.sqrt(1.0 - a * a) * chol_r
    return WindGrid(config=config, axes=axes, points=points, a=a,
                    covariance_matrix=r_hat, chol_R=chol_r, chol_Q=chol_q)


def _factorise(r_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scale = float(np.max(np.diag(r_hat)))
    if scale == 0.0:
        return np.zeros_like(r_hat), r_hat
    try:
        return cholesky(r_hat, lower=True), r_hat
    except LinAlgError:
        jittered = r_hat + JITTER_SCALE * scale * np.eye(r_hat.shape[0])
        log(f"Wind covariance not positive definite, adding jitter {JITTER_SCALE * scale:.3e}", "WARNING")
        try:
            return cholesky(jittered, lower=True), jittered
        except LinAlgError:
            raise ConfigError("Wind covariance is not positive definite even after jitter", source="wind")


def covariance(t1_s: float, p1, t2_s: float, p2, grid: WindGrid) -> float:
    """Space-time covariance between two points, sigma(z) interpolated from the profile."""
    cfg = grid.config
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    sigma_product = grid.sigma_at(p1[2]) * grid.sigma_at(p2[2])
    return float(sigma_product
                 * math.exp(-cfg.lambda_per_s * abs(t1_s - t2_s))
                 * math.exp(-cfg.beta_per_m * math.hypot(p1[0] - p2[0], p1[1] - p2[1]))
                 * math.exp(-cfg.gamma_per_m * abs(p1[2] - p2[2])))


def init_field(config: WindConfig, dt_s: float, rng: np.random.Generator) -> WindGrid:
    grid = build_grid(config, dt_s)
    grid.w_x = grid.chol_R @ rng.standard_normal(grid.size)
    grid.w_y = grid.chol_R @ rng.standard_normal(grid.size)
    return grid


def step_field(grid: WindGrid, rng: Optional[np.random.Generator]) -> WindGrid:
    """One AR(1) update of both components. rng=None applies zero innovation."""
    if rng is None:
        v_x = v_y = np.zeros(grid.size)
    else:
        v_x = rng.standard_normal(grid.size)
        v_y = rng.standard_normal(grid.size)
    return replace(grid, w_x=grid.a * grid.w_x + grid.chol_Q @ v_x,
                   w_y=grid.a * grid.w_y + grid.chol_Q @ v_y)


def ar_step_arrays(w, a: float, chol_q: np.ndarray, normals):
    """Batched AR(1) update; w and normals have the node index last."""
    # broadcast sum rather than a BLAS product, so each row is independent of the batch size
    return a * w + np.sum(normals[..., None, :] * chol_q, axis=-1)


def corner_weights(axes: tuple, x, y, z) -> tuple[np.ndarray, np.ndarray]:
    """Flat node indices and trilinear weights, shape (..., 8). Points are clamped to the grid."""
    cells, fracs = [], []
    for axis, c in zip(axes, (x, y, z)):
        c = np.clip(np.asarray(c, dtype=float), axis[0], axis[-1])
        i = np.clip(np.searchsorted(axis, c, side='right') - 1, 0, len(axis) - 2)
        cells.append(i)
        fracs.append((c - axis[i]) / (axis[i + 1] - axis[i]))
    ny, nz = len(axes[1]), len(axes[2])
    indices, weights = [], []
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                indices.append(((cells[0] + dx) * ny + (cells[1] + dy)) * nz + (cells[2] + dz))
                weights.append((fracs[0] if dx else 1.0 - fracs[0])
                               * (fracs[1] if dy else 1.0 - fracs[1])
                               * (fracs[2] if dz else 1.0 - fracs[2]))
    return np.stack(indices, axis=-1), np.stack(weights, axis=-1)


def interpolate_arrays(values, indices, weights):
    """Trilinear values for node vectors (B, n_nodes) at corner sets (B, k, 8)."""
    batch = values.shape[:-1]
    flat = indices.reshape(*batch, -1)
    gathered = np.take_along_axis(values, flat, axis=-1).reshape(indices.shape)
    return np.sum(gathered * weights, axis=-1)


def sample_at(grid: WindGrid, nominal: NominalWind, x_m, y_m, z_m, t_s: float) -> tuple:
    """Wind (w_x, w_y) at a point: interpolated error plus nominal."""
    indices, weights = corner_weights(grid.axes, x_m, y_m, z_m)
    nom_x, nom_y = nominal.at(t_s)
    w_x = np.sum(grid.w_x[indices] * weights, axis=-1) + nom_x
    w_y = np.sum(grid.w_y[indices] * weights, axis=-1) + nom_y
    if np.ndim(w_x) == 0:
        return float(w_x), float(w_y)
    return w_x, w_y
