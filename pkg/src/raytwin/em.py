"""Electromagnetic primitives: materials, Fresnel reflection, spreading, edge diffraction.

Time convention is exp(+jwt); a travelling wave carries exp(-jkr) and lossy
permittivities have a negative imaginary part.
"""

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import scipy.special

EPS0 = 8.8542e-12
C0 = 2.99792458e8

FREQ_MIN_GHZ = 1.0
FREQ_MAX_GHZ = 100.0


class MaterialError(ValueError):
    pass


class FrequencyRangeError(ValueError):
    pass


class DiffractionGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Power-law material fit: eps_r = a f^b and sigma = c f^d with f in GHz."""

    name: str
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(float(v)) for v in vals):
            raise MaterialError(f"material {self.name!r}: parameters must be finite")
        if self.a <= 0:
            raise MaterialError(f"material {self.name!r}: a must be > 0, got {self.a}")
        if self.c < 0:
            raise MaterialError(f"material {self.name!r}: c must be >= 0, got {self.c}")


@dataclass(frozen=True)
class ComplexPermittivity:
    real: float
    imag: float  # loss magnitude, value is real - j*imag

    @property
    def value(self):
        return complex(self.real, -self.imag)


@dataclass(frozen=True)
class WedgeGeometry:
    """Straight wedge edge.

    ``face0_tangent`` lies in face 0, perpendicular to the edge, pointing from
    the edge into the face. Angles are measured from face 0 through free space
    towards face 1, which sits at ``exterior_angle``.
    """

    edge_origin: np.ndarray
    edge_direction: np.ndarray
    face0_normal: np.ndarray
    face1_normal: np.ndarray
    face0_tangent: np.ndarray
    exterior_angle: float

    @property
    def n(self):
        return self.exterior_angle / math.pi


def load_default_materials():
    """Built-in material table keyed by name."""
    text = resources.files("raytwin.data").joinpath("materials.json").read_text()
    doc = json.loads(text)
    return {
        name: MaterialParams(name, p["a"], p["b"], p["c"], p["d"])
        for name, p in doc["materials"].items()
    }


def eval_material(m, f_ghz):
    """Return ``(eps_r, sigma)`` for material ``m`` at ``f_ghz``."""
    if not FREQ_MIN_GHZ <= f_ghz <= FREQ_MAX_GHZ:
        raise FrequencyRangeError(
            f"frequency {f_ghz} GHz outside power-law validity [{FREQ_MIN_GHZ}, {FREQ_MAX_GHZ}] GHz"
        )
    eps_r = m.a * f_ghz**m.b
    sigma = m.c * f_ghz**m.d
    return eps_r, sigma


def complex_permittivity(eps_r, sigma, f_hz):
    if f_hz <= 0:
        raise ValueError("frequency must be positive")
    return ComplexPermittivity(float(eps_r), float(sigma) / (2.0 * math.pi * f_hz * EPS0))


def material_permittivity(m, f_hz):
    """Complex relative permittivity of ``m`` at ``f_hz`` as a python complex."""
    eps_r, sigma = eval_material(m, f_hz / 1e9)
    return complex_permittivity(eps_r, sigma, f_hz).value


def fresnel_coeffs(eta, cos_theta_i):
    """TE and TM reflection coefficients for incidence from free space.

    ``eta`` is a ComplexPermittivity or a complex value/array (real - j*loss).
    Returns ``(gamma_te, gamma_tm)``.
    """
    if isinstance(eta, ComplexPermittivity):
        eta = eta.value
    eta = np.asarray(eta, dtype=np.complex128)
    c = np.asarray(cos_theta_i, dtype=np.float64)
    if np.any((c < 0) | (c > 1)):
        raise ValueError("cos_theta_i must lie in [0, 1]")
    sin2 = 1.0 - c * c
    root = np.sqrt(eta - sin2)
    gte = (c - root) / (c + root)
    gtm = (eta * c - root) / (eta * c + root)
    if gte.ndim == 0:
        return complex(gte), complex(gtm)
    return gte, gtm


def wavelength(f_hz):
    return C0 / f_hz


def free_space_amplitude(f_hz, d):
    """Complex Friis field factor lambda/(4 pi d) exp(-j 2 pi d / lambda)."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    lam = C0 / f_hz
    amp = lam / (4.0 * np.pi * d) * np.exp(-2j * np.pi * d / lam)
    return complex(amp) if amp.ndim == 0 else amp


def fresnel_tail(u):
    """Integral of exp(-j t^2) from ``u`` to infinity, for real ``u``."""
    u = np.asarray(u, dtype=np.float64)
    s, c = scipy.special.fresnel(u * math.sqrt(2.0 / math.pi))
    head = math.sqrt(math.pi / 2.0) * (c - 1j * s)
    full = math.sqrt(math.pi / 2.0) * (0.5 - 0.5j)
    return full - head


def transition_function(x):
    """Kouyoumjian-Pathak transition function F(x), x >= 0."""
    x = np.asarray(x, dtype=np.float64)
    sx = np.sqrt(x)
    return 2j * sx * np.exp(1j * x) * fresnel_tail(sx)


def knife_edge_field(nu):
    """Fresnel-Kirchhoff knife-edge field relative to free space, F(nu)."""
    nu = np.asarray(nu, dtype=np.float64)
    return (0.5 + 0.5j) * math.sqrt(2.0 / math.pi) * fresnel_tail(nu * math.sqrt(math.pi / 2.0))


_SMALL_EPS = 1e-9


def _utd_term(n, beta, sign, kl):
    # cot((pi + sign*beta)/(2n)) * F(kL a(beta)) with the boundary limit
    two_pi_n = 2.0 * np.pi * n
    N = np.floor((beta + sign * np.pi) / two_pi_n + 0.5)
    eps = np.pi + sign * (beta - two_pi_n * N)
    a = 2.0 * np.cos((two_pi_n * N - beta) / 2.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        regular = transition_function(kl * a) / np.tan((np.pi + sign * beta) / (2.0 * n))
    e4 = np.exp(0.25j * np.pi)
    sgn = np.where(eps >= 0.0, 1.0, -1.0)
    limit = n * (sgn * np.sqrt(2.0 * np.pi * kl) - 2.0 * kl * eps * e4) * e4
    return np.where(np.abs(eps) < _SMALL_EPS, limit, regular)


def utd_coefficient(n, phi, phi_p, sin_beta0, dist_param, k):
    """Diffraction coefficient of a perfectly absorbing wedge (incident terms only).

    ``dist_param`` is the UTD distance parameter L; all arguments broadcast.
    """
    n = np.asarray(n, dtype=np.float64)
    beta = np.asarray(phi, dtype=np.float64) - np.asarray(phi_p, dtype=np.float64)
    kl = k * np.asarray(dist_param, dtype=np.float64)
    pref = -np.exp(-0.25j * np.pi) / (2.0 * n * np.sqrt(2.0 * np.pi * k) * sin_beta0)
    d = pref * (_utd_term(n, beta, 1.0, kl) + _utd_term(n, beta, -1.0, kl))
    return d


def knife_edge_coefficient(phi, phi_p, s_in, s_out, direct, clearance, k):
    """Coefficient that makes the diffracted ray reproduce the knife-edge field.

    The diffracted path amplitude is assembled as
    ``E_i(Q) * D * sqrt(s_in/(s_out (s_in+s_out))) * exp(-j k s_out)``; this
    chooses D so the sum with the direct ray equals ``F(nu)`` times free space.
    ``direct`` is the source-observer distance and ``clearance`` the distance of
    the edge point from the direct line.
    """
    phi = np.asarray(phi, dtype=np.float64)
    phi_p = np.asarray(phi_p, dtype=np.float64)
    s_in = np.asarray(s_in, dtype=np.float64)
    s_out = np.asarray(s_out, dtype=np.float64)
    direct = np.asarray(direct, dtype=np.float64)
    lam = 2.0 * np.pi / k
    shadow = np.abs(phi - phi_p) > np.pi
    d1 = np.clip(np.sqrt(np.maximum(s_in**2 - clearance**2, 0.0)), 1e-12, None)
    d2 = np.clip(direct - d1, 1e-12, None)
    nu = np.where(shadow, 1.0, -1.0) * clearance * np.sqrt(2.0 / lam * (1.0 / d1 + 1.0 / d2))
    target = knife_edge_field(nu) - np.where(shadow, 0.0, 1.0)
    fs_direct = np.exp(-1j * k * direct) / direct
    fs_path = np.exp(-1j * k * (s_in + s_out)) / s_in * np.sqrt(s_in / (s_out * (s_in + s_out)))
    return target * fs_direct / fs_path


def wedge_angle(wedge, v):
    """Angle of vector ``v`` (perpendicular part) measured from face 0, in [0, 2 pi)."""
    e = np.asarray(wedge.edge_direction, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    vp = v - np.dot(v, e) * e
    ang = math.atan2(float(np.dot(vp, wedge.face0_normal)), float(np.dot(vp, wedge.face0_tangent)))
    return ang % (2.0 * math.pi)


KELLER_TOLERANCE = 1e-3


def diffraction_coeff(wedge, incident_dir, diffracted_dir, f_hz, s_in, s_out, model="utd"):
    """Scalar diffraction coefficient for one edge interaction.

    ``incident_dir`` points from the source to the edge point, ``diffracted_dir``
    from the edge point to the observer; ``s_in``/``s_out`` are the two segment
    lengths in metres.
    """
    e = np.asarray(wedge.edge_direction, dtype=np.float64)
    si = np.asarray(incident_dir, dtype=np.float64)
    sd = np.asarray(diffracted_dir, dtype=np.float64)
    si = si / np.linalg.norm(si)
    sd = sd / np.linalg.norm(sd)
    b_in = math.acos(max(-1.0, min(1.0, float(np.dot(si, e)))))
    b_out = math.acos(max(-1.0, min(1.0, float(np.dot(sd, e)))))
    if abs(b_in - b_out) > KELLER_TOLERANCE:
        raise DiffractionGeometryError(
            f"diffracted direction off the Keller cone by {abs(b_in - b_out):.3e} rad"
        )
    sin_b0 = math.sin(b_in)
    if sin_b0 < 1e-12:
        raise DiffractionGeometryError("incidence parallel to the edge")
    k = 2.0 * math.pi * f_hz / C0
    phi_p = wedge_angle(wedge, -si)
    phi = wedge_angle(wedge, sd)
    n = wedge.n
    if not (0.0 < phi_p < n * math.pi and 0.0 < phi < n * math.pi):
        raise DiffractionGeometryError("source or observer inside the wedge")
    if model == "utd":
        L = s_in * s_out * sin_b0**2 / (s_in + s_out)
        return complex(utd_coefficient(n, phi, phi_p, sin_b0, L, k))
    if model == "knife_edge":
        direct_vec = s_in * si + s_out * sd
        direct = float(np.linalg.norm(direct_vec))
        u = direct_vec / direct
        qs = s_in * si  # edge point relative to source
        clearance = float(np.linalg.norm(qs - np.dot(qs, u) * u))
        return complex(knife_edge_coefficient(phi, phi_p, s_in, s_out, direct, clearance, k))
    raise ValueError(f"unknown diffraction model {model!r}")
