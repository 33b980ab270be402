"""3GPP TR 38.901 element pattern, uniform planar array factor, site orientation.

Local antenna frame: +x is boresight, +z is the array "up" axis, +y completes a
right-handed frame. Array columns run along local y, rows along local z.
"""

import math
from dataclasses import dataclass

import numpy as np

POLARIZATIONS = ("vertical", "horizontal")
PATTERNS = ("3gpp", "isotropic")


@dataclass(frozen=True)
class AntennaConfig:
    element_gain_max: float = 8.0  # dBi
    theta_3db: float = 65.0
    phi_3db: float = 65.0
    sla_v: float = 30.0
    a_max: float = 30.0
    rows: int = 8
    cols: int = 8
    spacing: float = 0.5  # wavelengths
    polarization: str = "vertical"
    pattern: str = "3gpp"

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array rows and cols must be >= 1")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        if not (0 < self.theta_3db < 180 and 0 < self.phi_3db < 180):
            raise ValueError("3 dB beamwidths must lie in (0, 180) degrees")
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be one of {POLARIZATIONS}")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")

    @classmethod
    def isotropic(cls, gain_dbi=0.0, polarization="vertical"):
        return cls(element_gain_max=gain_dbi, rows=1, cols=1, pattern="isotropic",
                   polarization=polarization)

    @property
    def n_elements(self):
        return self.rows * self.cols


@dataclass(frozen=True)
class Orientation:
    bearing: float = 0.0  # degrees clockwise from north (+y)
    downtilt: float = 6.0  # degrees below horizontal

    def __post_init__(self):
        if not 0.0 <= self.bearing < 360.0:
            raise ValueError("bearing must lie in [0, 360)")
        if not -90.0 <= self.downtilt <= 90.0:
            raise ValueError("downtilt must lie in [-90, 90]")


def orientation_frame(orient):
    """Rows are the local x (boresight), y and z axes expressed globally."""
    br = math.radians(orient.bearing)
    tl = math.radians(orient.downtilt)
    sb, cb = math.sin(br), math.cos(br)
    st, ct = math.sin(tl), math.cos(tl)
    x = np.array([sb * ct, cb * ct, -st])
    z = np.array([sb * st, cb * st, ct])
    y = np.cross(z, x)
    return np.stack([x, y, z])


def to_local(direction_global, orient):
    return np.asarray(direction_global, dtype=np.float64) @ orientation_frame(orient).T


def element_pattern_db(theta, phi, cfg):
    """Relative element attenuation in dB (<= 0); theta zenith, phi azimuth, degrees."""
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if cfg.pattern == "isotropic":
        return np.zeros(np.broadcast(theta, phi).shape)[()]
    a_v = -np.minimum(12.0 * ((theta - 90.0) / cfg.theta_3db) ** 2, cfg.sla_v)
    a_h = -np.minimum(12.0 * (phi / cfg.phi_3db) ** 2, cfg.a_max)
    return -np.minimum(-(a_v + a_h), cfg.a_max)


def local_angles(direction_local):
    d = np.asarray(direction_local, dtype=np.float64)
    theta = np.degrees(np.arccos(np.clip(d[..., 2], -1.0, 1.0)))
    phi = np.degrees(np.arctan2(d[..., 1], d[..., 0]))
    return theta, phi


def _axis_sum(count, spacing, u):
    # phasor sum over elements centred on the array axis
    offsets = np.arange(count) - (count - 1) / 2.0
    phase = 2.0 * np.pi * spacing * np.multiply.outer(u, offsets)
    return np.exp(1j * phase).sum(axis=-1)


def array_factor(direction_local, cfg):
    """Broadside-steered uniform planar array factor (unnormalised)."""
    d = np.asarray(direction_local, dtype=np.float64)
    af = _axis_sum(cfg.cols, cfg.spacing, d[..., 1]) * _axis_sum(cfg.rows, cfg.spacing, d[..., 2])
    return complex(af) if np.ndim(af) == 0 else af


def tx_directional_amplitude(direction_global, cfg, orient):
    """Complex field gain of the transmit array towards ``direction_global``."""
    local = to_local(direction_global, orient)
    theta, phi = local_angles(local)
    g_db = cfg.element_gain_max + element_pattern_db(theta, phi, cfg)
    af = array_factor(local, cfg) / math.sqrt(cfg.n_elements)
    out = 10.0 ** (g_db / 20.0) * af
    return complex(out) if np.ndim(out) == 0 else out
