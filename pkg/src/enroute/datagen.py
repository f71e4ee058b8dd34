"""Correlated 2D test fields from a separable second-order AR model."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidArgument

__all__ = [
    "ArFieldSpec",
    "CORRELATIONS",
    "ar2_coefficients",
    "ar2_series",
    "ar2_field",
    "ar2_autocorrelation",
    "ar2_variance",
    "field_covariance",
    "sample_field",
    "grid_cells",
    "to_fixed_point",
    "epoch_seeds",
    "save_grid",
    "load_grid",
]

# (rho, omega0 in degrees)
CORRELATIONS = {"high": (0.99, 359.0), "low": (0.99, 99.0)}

_MAGIC = b"ENRGRID1"


@dataclass(frozen=True)
class ArFieldSpec:
    rho: float
    omega0: float  # degrees
    size: int = 600
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidArgument("rho must lie in (0, 1)")
        if self.size < 1:
            raise InvalidArgument("size must be at least 1")


def ar2_coefficients(rho: float, omega0: float) -> tuple[float, float]:
    """``(a1, a2)`` of ``y[t] = a1 y[t-1] + a2 y[t-2] + w[t]``."""
    return 2.0 * rho * math.cos(math.radians(omega0)), -rho * rho


def _warmup(rho: float) -> int:
    return int(math.ceil(4.0 / (1.0 - rho)))


def _filter(w: np.ndarray, rho: float, omega0: float, axis: int) -> np.ndarray:
    a1, a2 = ar2_coefficients(rho, omega0)
    return lfilter([1.0], [1.0, -a1, -a2], w, axis=axis)


def ar2_series(length: int, rho: float, omega0: float, seed: int = 0) -> np.ndarray:
    """A 1D realisation with the warm-up transient removed."""
    warm = _warmup(rho)
    w = np.random.default_rng(seed).standard_normal(length + warm)
    return _filter(w, rho, omega0, 0)[warm:]


def ar2_field(spec: ArFieldSpec) -> np.ndarray:
    """``size x size`` field: filter every row, then every column."""
    warm = _warmup(spec.rho)
    n = spec.size + warm
    w = np.random.default_rng(spec.seed).standard_normal((n, n))
    rows = _filter(w, spec.rho, spec.omega0, 1)[:, warm:]
    return _filter(rows, spec.rho, spec.omega0, 0)[warm:, :]


def ar2_autocorrelation(rho: float, omega0: float, lags: int) -> np.ndarray:
    """Normalised autocorrelation ``r(0..lags)`` of the stationary process."""
    a1, a2 = ar2_coefficients(rho, omega0)
    r = np.empty(lags + 1)
    r[0] = 1.0
    if lags >= 1:
        r[1] = a1 / (1.0 - a2)
    for k in range(2, lags + 1):
        r[k] = a1 * r[k - 1] + a2 * r[k - 2]
    return r


def ar2_variance(rho: float, omega0: float) -> float:
    """Stationary variance of the 1D process driven by unit-variance noise."""
    a1, a2 = ar2_coefficients(rho, omega0)
    return (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) ** 2 - a1 * a1))


def grid_cells(positions, size: int, extent: float) -> np.ndarray:
    """Nearest-cell ``(row, col)`` indices; ``x`` selects the column."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if np.any(pos < 0) or np.any(pos > extent):
        raise InvalidArgument("positions must lie inside the field extent")
    cells = np.minimum(np.floor(pos / extent * size).astype(int), size - 1)
    return cells[:, ::-1]


def sample_field(grid: np.ndarray, positions, extent: float | None = None) -> np.ndarray:
    """Field values at the grid cells containing each position.

    ``extent`` defaults to the grid size (one metre per cell).
    """
    g = np.asarray(grid)
    extent = float(g.shape[0]) if extent is None else extent
    rc = grid_cells(positions, g.shape[0], extent)
    return g[rc[:, 0], rc[:, 1]]


def field_covariance(positions, rho: float, omega0: float, size: int = 600, extent: float = 600.0) -> np.ndarray:
    """Model correlation between sampled cells, ``r(|drow|) r(|dcol|)``."""
    rc = grid_cells(positions, size, extent)
    r = ar2_autocorrelation(rho, omega0, size)
    dr = np.abs(rc[:, None, 0] - rc[None, :, 0])
    dc = np.abs(rc[:, None, 1] - rc[None, :, 1])
    return r[dr] * r[dc]


def to_fixed_point(values, sigma: float, bits: int = 12, span: float = 4.0) -> np.ndarray:
    """Map reals to ``bits``-bit integers, ``±span·sigma`` onto the full range."""
    top = (1 << bits) - 1
    mid = 1 << (bits - 1)
    q = np.rint(mid + np.asarray(values, dtype=float) * (mid / (span * sigma)))
    return np.clip(q, 0, top)


def epoch_seeds(master: int, epochs: int, *keys: int) -> list[int]:
    """Independent per-epoch seeds derived from a master seed."""
    ss = np.random.SeedSequence([int(master), *map(int, keys)])
    return [int(s) for s in ss.generate_state(epochs, dtype=np.uint32)]


def save_grid(grid: np.ndarray, path) -> None:
    """Flat little-endian float64 dump behind a 16-byte header."""
    g = np.asarray(grid, dtype="<f8")
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidArgument("grid must be square")
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<Q", g.shape[0]))
        fh.write(g.tobytes())


def load_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != _MAGIC:
        raise InvalidArgument("not a grid file")
    (size,) = struct.unpack("<Q", data[8:16])
    body = np.frombuffer(data[16:], dtype="<f8")
    if body.size != size * size:
        raise InvalidArgument("grid file is truncated")
    return body.reshape(size, size).copy()
