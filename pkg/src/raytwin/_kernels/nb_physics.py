"""Scalar physics kernels for the compiled sweep.

These mirror the vectorised numpy implementations in ``em`` and ``antenna``
but are written independently (closed-form array factor, continued-fraction
Fresnel tail) so the two backends cross-check each other.
"""

import math

import numpy as np

from .._backend import njit

TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)
E4 = complex(math.cos(math.pi / 4.0), math.sin(math.pi / 4.0))  # exp(j pi/4)
E4C = complex(math.cos(math.pi / 4.0), -math.sin(math.pi / 4.0))
FULL_TAIL = 0.5 * SQRT_PI * E4C  # integral of exp(-j t^2) over [0, inf)
SERIES_SWITCH = 2.5
SMALL_EPS = 1e-9
FRONT_TOL = 1e-9
FACE_TOL = 1e-9


@njit(cache=True)
def dot(ax, ay, az, bx, by, bz):
    return ax * bx + ay * by + az * bz


@njit(cache=True)
def cross(ax, ay, az, bx, by, bz):
    return ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx


@njit(cache=True)
def unit(x, y, z):
    n = math.sqrt(x * x + y * y + z * z)
    return x / n, y / n, z / n


@njit(cache=True)
def _dirichlet(count, spacing, u):
    # sum over centred elements of exp(j m x); real by symmetry
    x = TWO_PI * spacing * u
    s = math.sin(0.5 * x)
    if abs(s) < 1e-6:
        acc = 0.0
        for m in range(count):
            acc += math.cos((m - (count - 1) / 2.0) * x)
        return acc
    return math.sin(0.5 * count * x) / s


@njit(cache=True)
def antenna_amp(kx, ky, kz, frame, ant):
    """Transmit field gain; ``ant`` = [gmax, th3, ph3, sla_v, a_max, rows, cols, spacing, iso]."""
    lx = frame[0, 0] * kx + frame[0, 1] * ky + frame[0, 2] * kz
    ly = frame[1, 0] * kx + frame[1, 1] * ky + frame[1, 2] * kz
    lz = frame[2, 0] * kx + frame[2, 1] * ky + frame[2, 2] * kz
    if ant[8] > 0.5:
        att = 0.0
    else:
        theta = math.degrees(math.acos(min(1.0, max(-1.0, lz))))
        phi = math.degrees(math.atan2(ly, lx))
        a_v = -min(12.0 * ((theta - 90.0) / ant[1]) ** 2, ant[3])
        a_h = -min(12.0 * (phi / ant[2]) ** 2, ant[4])
        att = -min(-(a_v + a_h), ant[4])
    rows = int(ant[5])
    cols = int(ant[6])
    af = _dirichlet(cols, ant[7], ly) * _dirichlet(rows, ant[7], lz) / math.sqrt(rows * cols)
    return 10.0 ** ((ant[0] + att) / 20.0) * af


@njit(cache=True)
def pol_vector(kx, ky, kz, horizontal):
    """Unit polarisation transverse to k: vertical-projected or horizontal."""
    if horizontal:
        x, y, z = -ky, kx, 0.0
    else:
        x, y, z = -kz * kx, -kz * ky, 1.0 - kz * kz
    n = math.sqrt(x * x + y * y + z * z)
    if n < 1e-12:
        x, y, z = 1.0 - kx * kx, -kx * ky, -kx * kz
        n = math.sqrt(x * x + y * y + z * z)
    return x / n, y / n, z / n


@njit(cache=True)
def fresnel(eta, c):
    root = np.sqrt(eta - (1.0 - c * c))
    gte = (c - root) / (c + root)
    gtm = (eta * c - root) / (eta * c + root)
    return gte, gtm


@njit(cache=True)
def reflect_pol(ex, ey, ez, kix, kiy, kiz, krx, kry, krz, nx, ny, nz, gte, gtm):
    """Transport a complex field vector through one specular bounce."""
    sx, sy, sz = cross(kix, kiy, kiz, nx, ny, nz)
    sn = math.sqrt(sx * sx + sy * sy + sz * sz)
    if sn < 1e-12:
        # normal incidence: any transverse basis gives gamma_te * e
        return gte * ex, gte * ey, gte * ez
    sx, sy, sz = sx / sn, sy / sn, sz / sn
    pix, piy, piz = cross(sx, sy, sz, kix, kiy, kiz)
    prx, pry, prz = cross(sx, sy, sz, krx, kry, krz)
    es = ex * sx + ey * sy + ez * sz
    ep = ex * pix + ey * piy + ez * piz
    a = gte * es
    b = gtm * ep
    return a * sx + b * prx, a * sy + b * pry, a * sz + b * prz


@njit(cache=True)
def fresnel_tail(u):
    """Integral of exp(-j t^2) from u to infinity."""
    if u < 0.0:
        return 2.0 * FULL_TAIL - fresnel_tail(-u)
    if u < SERIES_SWITCH:
        # head integral by its power series
        u2 = u * u
        term = complex(u, 0.0)
        acc = term
        m = 0
        while True:
            m += 1
            term = term * (-1j) * u2 / m
            inc = term / (2 * m + 1)
            acc += inc
            if abs(inc) < 1e-17 * abs(acc) and m > 4:
                break
            if m > 200:
                break
        return FULL_TAIL - acc
    # erfc continued fraction (modified Lentz) at z = u exp(j pi/4)
    z = u * E4
    tiny = 1e-300
    f = z
    c = z
    d = 0.0j
    for m in range(1, 500):
        a = 0.5 * m
        d = z + a * d
        if abs(d) < tiny:
            d = tiny
        c = z + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f = f * delta
        if abs(delta - 1.0) < 1e-16:
            break
    k = 1.0 / f
    ph = complex(math.cos(u * u), -math.sin(u * u))
    return 0.5 * E4C * ph * k


@njit(cache=True)
def transition(x):
    if x <= 0.0:
        return 0.0j
    return 2j * math.sqrt(x) * complex(math.cos(x), math.sin(x)) * fresnel_tail(math.sqrt(x))


@njit(cache=True)
def knife_edge_field(nu):
    return (0.5 + 0.5j) * math.sqrt(2.0 / math.pi) * fresnel_tail(nu * math.sqrt(math.pi / 2.0))


@njit(cache=True)
def _utd_term(n, beta, sign, kl):
    two_pi_n = TWO_PI * n
    big_n = math.floor((beta + sign * math.pi) / two_pi_n + 0.5)
    eps = math.pi + sign * (beta - two_pi_n * big_n)
    if abs(eps) < SMALL_EPS:
        sgn = 1.0 if eps >= 0.0 else -1.0
        return n * (sgn * math.sqrt(TWO_PI * kl) - 2.0 * kl * eps * E4) * E4
    a = 2.0 * math.cos((two_pi_n * big_n - beta) / 2.0) ** 2
    return transition(kl * a) / math.tan((math.pi + sign * beta) / (2.0 * n))


@njit(cache=True)
def utd_coefficient(n, phi, phi_p, sin_beta0, dist_param, k):
    beta = phi - phi_p
    kl = k * dist_param
    pref = -E4C / (2.0 * n * math.sqrt(TWO_PI * k) * sin_beta0)
    return pref * (_utd_term(n, beta, 1.0, kl) + _utd_term(n, beta, -1.0, kl))


@njit(cache=True)
def knife_edge_coefficient(phi, phi_p, s_in, s_out, direct, clearance, k):
    lam = TWO_PI / k
    shadow = abs(phi - phi_p) > math.pi
    d1 = max(math.sqrt(max(s_in * s_in - clearance * clearance, 0.0)), 1e-12)
    d2 = max(direct - d1, 1e-12)
    sgn = 1.0 if shadow else -1.0
    nu = sgn * clearance * math.sqrt(2.0 / lam * (1.0 / d1 + 1.0 / d2))
    target = knife_edge_field(nu)
    if not shadow:
        target -= 1.0
    fs_direct = complex(math.cos(k * direct), -math.sin(k * direct)) / direct
    ph = k * (s_in + s_out)
    fs_path = complex(math.cos(ph), -math.sin(ph)) / s_in * math.sqrt(s_in / (s_out * (s_in + s_out)))
    return target * fs_direct / fs_path


@njit(cache=True)
def wedge_angle(vx, vy, vz, n0, t0):
    a = math.atan2(vx * n0[0] + vy * n0[1] + vz * n0[2], vx * t0[0] + vy * t0[1] + vz * t0[2])
    if a < 0.0:
        a += TWO_PI
    return a


@njit(cache=True)
def in_face(f, px, py, pz, face_tri, face_ntri):
    """Point (already on the plane) inside any source triangle of face f."""
    for j in range(face_ntri[f]):
        v0 = face_tri[f, j, 0]
        e1 = face_tri[f, j, 1]
        e2 = face_tri[f, j, 2]
        wx, wy, wz = px - v0[0], py - v0[1], pz - v0[2]
        d00 = e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]
        d01 = e1[0] * e2[0] + e1[1] * e2[1] + e1[2] * e2[2]
        d11 = e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2]
        d20 = wx * e1[0] + wy * e1[1] + wz * e1[2]
        d21 = wx * e2[0] + wy * e2[1] + wz * e2[2]
        den = d00 * d11 - d01 * d01
        v = (d11 * d20 - d01 * d21) / den
        w = (d00 * d21 - d01 * d20) / den
        if v >= -FACE_TOL and w >= -FACE_TOL and v + w <= 1.0 + FACE_TOL:
            return True
    return False
