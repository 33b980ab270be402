"""Receiver grid, per-transmitter field sweeps and multi-site field assembly."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.constants

from . import tracer
from .antenna import AntennaConfig, Orientation

K_BOLTZMANN = scipy.constants.k


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Transmitter:
    site_id: str
    position: np.ndarray
    power_dbm: float = 30.0
    carrier_hz: float = 10e9
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    orientation: Orientation = field(default_factory=Orientation)
    index: int = 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            raise ValueError(f"transmitter {self.site_id!r}: position must be a finite 3-vector")
        if not math.isfinite(self.power_dbm):
            raise ValueError(f"transmitter {self.site_id!r}: power must be finite")
        if not self.carrier_hz > 0:
            raise ValueError(f"transmitter {self.site_id!r}: carrier must be positive")
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class RadioGrid:
    origin: np.ndarray
    nx: int
    ny: int
    spacing: float
    rx_height: float
    valid: np.ndarray  # (ny, nx) bool

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def xs(self):
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self):
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def centers(self):
        """Cell centres as an (ny, nx, 3) array; row j is y, column i is x."""
        xx, yy = np.meshgrid(self.xs, self.ys)
        zz = np.full(xx.shape, self.origin[2] + self.rx_height)
        return np.stack([xx, yy, zz], axis=-1)


def build_grid(region, spacing, rx_height, scene, valid=None):
    """Regular grid of cell centres over ``region = (xmin, ymin, xmax, ymax)``.

    Cells whose centre lies inside a building (odd number of faces crossed by
    an upward vertical ray) are marked invalid.
    """
    xmin, ymin, xmax, ymax = (float(v) for v in region)
    if not spacing > 0:
        raise GridError("grid spacing must be positive")
    if xmax <= xmin or ymax <= ymin:
        raise GridError("grid region must have xmax > xmin and ymax > ymin")
    if scene.bounds is not None:
        lo, hi = scene.bounds
        tol = 1e-9
        if xmin < lo[0] - tol or ymin < lo[1] - tol or xmax > hi[0] + tol or ymax > hi[1] + tol:
            raise GridError(f"grid region {region} extends beyond scene bounds "
                            f"[{lo[0]}, {lo[1]}, {hi[0]}, {hi[1]}]")
    nx = int(math.floor((xmax - xmin) / spacing + 1e-9))
    ny = int(math.floor((ymax - ymin) / spacing + 1e-9))
    if nx < 1 or ny < 1:
        raise GridError(f"grid region {region} holds no cells at spacing {spacing} m")
    origin = np.array([xmin + spacing / 2.0, ymin + spacing / 2.0, 0.0])
    grid = RadioGrid(origin, nx, ny, float(spacing), float(rx_height), np.ones((ny, nx), bool))
    if valid is None:
        pts = grid.centers().reshape(-1, 3)
        up = np.broadcast_to(np.array([0.0, 0.0, 1.0]), pts.shape)
        hits = scene.accel.face_hits(pts, up, np.inf)
        valid = (hits % 2 == 0).reshape(ny, nx)
    return RadioGrid(origin, nx, ny, float(spacing), float(rx_height), np.asarray(valid, bool))


def noise_power_dbm(bandwidth, noise_figure=7.0, temperature=290.0):
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    return (10.0 * math.log10(K_BOLTZMANN * temperature * 1000.0) + 10.0 * math.log10(bandwidth)
            + noise_figure)


def _safe_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


@dataclass
class TxField:
    site_id: str
    power_dbm: float
    path_gain_db: np.ndarray  # (ny, nx); NaN on invalid cells, -inf without paths
    n_paths: np.ndarray
    truncated_cells: int = 0

    @property
    def rss_dbm(self):
        return self.power_dbm + self.path_gain_db


def compute_tx_field(tx, grid, scene, cfg=None, combining="coherent", threads=None, backend=None):
    cfg = cfg or tracer.TracerConfig()
    pts = grid.centers()[grid.valid]
    res = tracer.sweep_points(tx, pts, scene, cfg, threads=threads, backend=backend)
    pg = np.full(grid.shape, np.nan)
    pg[grid.valid] = _safe_db(res.gain(combining))
    n = np.zeros(grid.shape, dtype=np.int64)
    n[grid.valid] = res.n_paths
    return TxField(tx.site_id, float(tx.power_dbm), pg, n, int(res.truncated.sum()))


@dataclass
class CoverageFields:
    path_gain_db: np.ndarray  # (T, ny, nx)
    rss_dbm: np.ndarray
    sinr_db: np.ndarray
    best_tx: np.ndarray  # (ny, nx), -1 on invalid cells
    second_tx: np.ndarray  # -1 where undefined
    valid: np.ndarray
    noise_dbm: float
    site_ids: tuple = ()

    @property
    def n_tx(self):
        return self.rss_dbm.shape[0]

    @property
    def max_rss(self):
        return _nanmax0(self.rss_dbm, self.valid)

    @property
    def max_path_gain(self):
        return _nanmax0(self.path_gain_db, self.valid)

    @property
    def max_sinr(self):
        return _nanmax0(self.sinr_db, self.valid)

    def _pick(self, idx):
        out = np.full(self.valid.shape, np.nan)
        ok = idx >= 0
        jj, ii = np.nonzero(ok)
        out[ok] = self.sinr_db[idx[ok], jj, ii]
        return out

    @property
    def sinr_best_db(self):
        return self._pick(self.best_tx)

    @property
    def sinr_second_db(self):
        return self._pick(self.second_tx)


def _nanmax0(a, valid):
    out = np.full(valid.shape, np.nan)
    out[valid] = a[:, valid].max(axis=0)
    return out


def assemble_fields(per_tx_fields, noise_dbm, valid=None):
    """Per-cell SINR for every site with best and second-best server association."""
    fields = list(per_tx_fields)
    if not fields:
        raise ValueError("at least one transmitter field is required")
    pg = np.stack([np.asarray(f.path_gain_db, dtype=np.float64) for f in fields])
    rss = np.stack([np.asarray(f.rss_dbm, dtype=np.float64) for f in fields])
    if valid is None:
        valid = ~np.isnan(rss).any(axis=0)
    valid = np.asarray(valid, bool)
    t = rss.shape[0]
    noise_lin = 10.0 ** (noise_dbm / 10.0)
    lin = np.where(valid, 10.0 ** (np.where(valid, rss, -np.inf) / 10.0), 0.0)
    sinr_lin = np.empty_like(lin)
    for i in range(t):
        interf = np.zeros(valid.shape)
        for j in range(t):  # fixed accumulation order
            if j != i:
                interf = interf + lin[j]
        sinr_lin[i] = lin[i] / (interf + noise_lin)
    best = np.argmax(sinr_lin, axis=0)
    if t > 1:
        masked = sinr_lin.copy()
        np.put_along_axis(masked, best[None], -1.0, axis=0)
        second = np.argmax(masked, axis=0)
    else:
        second = np.full(valid.shape, -1)
    sinr_db = np.where(valid, _safe_db(sinr_lin), np.nan)
    best = np.where(valid, best, -1)
    second = np.where(valid, second, -1)
    rss = np.where(valid, rss, np.nan)
    pg = np.where(valid, pg, np.nan)
    ids = tuple(getattr(f, "site_id", str(i)) for i, f in enumerate(fields))
    return CoverageFields(pg, rss, sinr_db, best, second, valid, float(noise_dbm), ids)
