"""Per-cell path enumeration and amplitude accumulation, parallel over cells.

Each cell walks the same contributions in the same order as the numpy
engine: line of sight, reflection sequences in key order, then edges in
index order. One cell never touches another's accumulators.
"""

import math

import numpy as np

from .._backend import njit, prange
from . import nb_geom
from .nb_physics import (FRONT_TOL, antenna_amp, cross, fresnel, in_face, knife_edge_coefficient,
                         pol_vector, reflect_pol, unit, utd_coefficient, wedge_angle)

EDGE_TOL = 1e-9


@njit(cache=True)
def _accept(amp, floor_lin, max_paths, state):
    # state: [count, truncated]; returns True if the path was added
    p = amp.real * amp.real + amp.imag * amp.imag
    if p < floor_lin:
        return False
    if state[0] >= max_paths:
        state[1] = 1
        return False
    state[0] += 1
    return True


@njit(cache=True)
def _reflection(c_pt, tx, s, seq_f, seq_len, seq_img, face_n, face_d, face_tri, face_ntri,
                face_eta, frame, ant, horizontal, k, lam, eps, bvh_args, pts_buf):
    """(valid, amplitude, unfolded length) of one reflection sequence at one cell."""
    bmin, bmax, left, right, start, count, order, v0, e1, e2 = bvh_args
    nb = seq_len[s]
    cx, cy, cz = c_pt[0], c_pt[1], c_pt[2]
    for lvl in range(nb - 1, -1, -1):
        f = seq_f[s, lvl]
        nx, ny, nz = face_n[f, 0], face_n[f, 1], face_n[f, 2]
        dc = cx * nx + cy * ny + cz * nz - face_d[f]
        if dc <= FRONT_TOL:
            return False, 0.0j, 0.0
        ix, iy, iz = seq_img[s, lvl, 0], seq_img[s, lvl, 1], seq_img[s, lvl, 2]
        di = ix * nx + iy * ny + iz * nz - face_d[f]
        t = dc / (dc - di)
        px = cx + t * (ix - cx)
        py = cy + t * (iy - cy)
        pz = cz + t * (iz - cz)
        if not in_face(f, px, py, pz, face_tri, face_ntri):
            return False, 0.0j, 0.0
        pts_buf[lvl, 0] = px
        pts_buf[lvl, 1] = py
        pts_buf[lvl, 2] = pz
        cx, cy, cz = px, py, pz
    # occlusion of every leg
    if nb_geom.segment_blocked(tx, pts_buf[0], eps, bmin, bmax, left, right, start, count, order,
                               v0, e1, e2):
        return False, 0.0j, 0.0
    for lvl in range(1, nb):
        if nb_geom.segment_blocked(pts_buf[lvl - 1], pts_buf[lvl], eps, bmin, bmax, left, right,
                                   start, count, order, v0, e1, e2):
            return False, 0.0j, 0.0
    if nb_geom.segment_blocked(pts_buf[nb - 1], c_pt, eps, bmin, bmax, left, right, start, count,
                               order, v0, e1, e2):
        return False, 0.0j, 0.0

    last = seq_img[s, nb - 1]
    lx, ly, lz = c_pt[0] - last[0], c_pt[1] - last[1], c_pt[2] - last[2]
    length = math.sqrt(lx * lx + ly * ly + lz * lz)
    kix, kiy, kiz = unit(pts_buf[0, 0] - tx[0], pts_buf[0, 1] - tx[1], pts_buf[0, 2] - tx[2])
    g = antenna_amp(kix, kiy, kiz, frame, ant)
    px, py, pz = pol_vector(kix, kiy, kiz, horizontal)
    ex, ey, ez = complex(px), complex(py), complex(pz)
    for lvl in range(nb):
        f = seq_f[s, lvl]
        if lvl + 1 < nb:
            qx, qy, qz = pts_buf[lvl + 1, 0], pts_buf[lvl + 1, 1], pts_buf[lvl + 1, 2]
        else:
            qx, qy, qz = c_pt[0], c_pt[1], c_pt[2]
        krx, kry, krz = unit(qx - pts_buf[lvl, 0], qy - pts_buf[lvl, 1], qz - pts_buf[lvl, 2])
        nx, ny, nz = face_n[f, 0], face_n[f, 1], face_n[f, 2]
        cos_i = min(1.0, abs(kix * nx + kiy * ny + kiz * nz))
        gte, gtm = fresnel(face_eta[f], cos_i)
        ex, ey, ez = reflect_pol(ex, ey, ez, kix, kiy, kiz, krx, kry, krz, nx, ny, nz, gte, gtm)
        kix, kiy, kiz = krx, kry, krz
    rx_, ry_, rz_ = pol_vector(kix, kiy, kiz, horizontal)
    proj = ex * rx_ + ey * ry_ + ez * rz_
    spread = lam / (4.0 * math.pi * length)
    ph = k * length
    amp = g * spread * complex(math.cos(ph), -math.sin(ph)) * proj
    return True, amp, length


@njit(cache=True)
def _diffraction(c_pt, tx, e, e_o, e_d, e_len, e_n0, e_t0, e_nw, frame, ant, horizontal, k, lam,
                 eps, model, bvh_args):
    bmin, bmax, left, right, start, count, order, v0, e1, e2 = bvh_args
    ox, oy, oz = e_o[e, 0], e_o[e, 1], e_o[e, 2]
    dx, dy, dz = e_d[e, 0], e_d[e, 1], e_d[e, 2]
    wtx, wty, wtz = tx[0] - ox, tx[1] - oy, tx[2] - oz
    at = wtx * dx + wty * dy + wtz * dz
    qx_, qy_, qz_ = wtx - at * dx, wty - at * dy, wtz - at * dz
    rho_t = math.sqrt(qx_ * qx_ + qy_ * qy_ + qz_ * qz_)
    wrx, wry, wrz = c_pt[0] - ox, c_pt[1] - oy, c_pt[2] - oz
    ar = wrx * dx + wry * dy + wrz * dz
    qx_, qy_, qz_ = wrx - ar * dx, wry - ar * dy, wrz - ar * dz
    rho_r = math.sqrt(qx_ * qx_ + qy_ * qy_ + qz_ * qz_)
    if rho_t + rho_r <= 0.0:
        return False, 0.0j
    t = at + (ar - at) * rho_t / (rho_t + rho_r)
    if t <= EDGE_TOL or t >= e_len[e] - EDGE_TOL:
        return False, 0.0j
    qx, qy, qz = ox + t * dx, oy + t * dy, oz + t * dz
    nw = e_nw[e]
    phi_p = wedge_angle(tx[0] - qx, tx[1] - qy, tx[2] - qz, e_n0[e], e_t0[e])
    phi = wedge_angle(c_pt[0] - qx, c_pt[1] - qy, c_pt[2] - qz, e_n0[e], e_t0[e])
    if not (0.0 < phi_p < nw * math.pi and 0.0 < phi < nw * math.pi):
        return False, 0.0j
    q = np.empty(3)
    q[0] = qx
    q[1] = qy
    q[2] = qz
    if nb_geom.segment_blocked(tx, q, eps, bmin, bmax, left, right, start, count, order, v0, e1,
                               e2):
        return False, 0.0j
    if nb_geom.segment_blocked(q, c_pt, eps, bmin, bmax, left, right, start, count, order, v0, e1,
                               e2):
        return False, 0.0j
    six, siy, siz = qx - tx[0], qy - tx[1], qz - tx[2]
    s_in = math.sqrt(six * six + siy * siy + siz * siz)
    six, siy, siz = six / s_in, siy / s_in, siz / s_in
    sox, soy, soz = c_pt[0] - qx, c_pt[1] - qy, c_pt[2] - qz
    s_out = math.sqrt(sox * sox + soy * soy + soz * soz)
    sox, soy, soz = sox / s_out, soy / s_out, soz / s_out
    cb = six * dx + siy * dy + siz * dz
    sin_b0 = math.sqrt(max(0.0, 1.0 - cb * cb))
    if sin_b0 < 1e-12:
        return False, 0.0j
    g = antenna_amp(six, siy, siz, frame, ant)
    if model == 0:
        dist = s_in * s_out * sin_b0 * sin_b0 / (s_in + s_out)
        dcoef = utd_coefficient(nw, phi, phi_p, sin_b0, dist, k)
        eix, eiy, eiz = pol_vector(six, siy, siz, horizontal)
        fx, fy, fz = cross(dx, dy, dz, six, siy, siz)
        fpx, fpy, fpz = unit(-fx, -fy, -fz)
        bpx, bpy, bpz = cross(fpx, fpy, fpz, six, siy, siz)
        fx, fy, fz = cross(dx, dy, dz, sox, soy, soz)
        fx, fy, fz = unit(fx, fy, fz)
        bx, by, bz = cross(fx, fy, fz, sox, soy, soz)
        prx, pry, prz = pol_vector(sox, soy, soz, horizontal)
        proj = -((eix * bpx + eiy * bpy + eiz * bpz) * (bx * prx + by * pry + bz * prz)
                 + (eix * fpx + eiy * fpy + eiz * fpz) * (fx * prx + fy * pry + fz * prz))
    else:
        dvx = c_pt[0] - tx[0]
        dvy = c_pt[1] - tx[1]
        dvz = c_pt[2] - tx[2]
        direct = math.sqrt(dvx * dvx + dvy * dvy + dvz * dvz)
        ux, uy, uz = dvx / direct, dvy / direct, dvz / direct
        wx, wy, wz = qx - tx[0], qy - tx[1], qz - tx[2]
        along = wx * ux + wy * uy + wz * uz
        cx_, cy_, cz_ = wx - along * ux, wy - along * uy, wz - along * uz
        clearance = math.sqrt(cx_ * cx_ + cy_ * cy_ + cz_ * cz_)
        dcoef = knife_edge_coefficient(phi, phi_p, s_in, s_out, direct, clearance, k)
        proj = 1.0 + 0.0j
    ph_in = k * s_in
    ph_out = k * s_out
    e_in = g * lam / (4.0 * math.pi * s_in) * complex(math.cos(ph_in), -math.sin(ph_in))
    spread = math.sqrt(s_in / (s_out * (s_in + s_out)))
    amp = e_in * dcoef * spread * complex(math.cos(ph_out), -math.sin(ph_out)) * proj
    return True, amp


@njit(parallel=True, cache=True)
def sweep(pts, tx, frame, ant, horizontal, k, lam,
          face_n, face_d, face_tri, face_ntri, face_eta,
          seq_f, seq_len, seq_img,
          e_o, e_d, e_len, e_n0, e_t0, e_nw, diffraction_on, model,
          bmin, bmax, left, right, start, count, order, v0, e1, e2,
          eps, floor_lin, max_paths):
    m = pts.shape[0]
    coh = np.zeros(m, dtype=np.complex128)
    inc = np.zeros(m)
    npath = np.zeros(m, dtype=np.int64)
    trunc = np.zeros(m, dtype=np.bool_)
    bvh_args = (bmin, bmax, left, right, start, count, order, v0, e1, e2)
    n_seq = seq_len.shape[0]
    n_edge = e_len.shape[0]
    for ci in prange(m):
        c_pt = pts[ci]
        state = np.zeros(2, dtype=np.int64)
        pts_buf = np.empty((3, 3))
        acc = 0.0j
        accp = 0.0
        # line of sight
        dx, dy, dz = c_pt[0] - tx[0], c_pt[1] - tx[1], c_pt[2] - tx[2]
        d = math.sqrt(dx * dx + dy * dy + dz * dz)
        if d > 0.0 and not nb_geom.segment_blocked(tx, c_pt, eps, bmin, bmax, left, right, start,
                                                   count, order, v0, e1, e2):
            g = antenna_amp(dx / d, dy / d, dz / d, frame, ant)
            ph = k * d
            amp = g * (lam / (4.0 * math.pi * d)) * complex(math.cos(ph), -math.sin(ph))
            if _accept(amp, floor_lin, max_paths, state):
                acc += amp
                accp += amp.real * amp.real + amp.imag * amp.imag
        for s in range(n_seq):
            ok, amp, _ = _reflection(c_pt, tx, s, seq_f, seq_len, seq_img, face_n, face_d,
                                     face_tri, face_ntri, face_eta, frame, ant, horizontal, k, lam,
                                     eps, bvh_args, pts_buf)
            if ok and _accept(amp, floor_lin, max_paths, state):
                acc += amp
                accp += amp.real * amp.real + amp.imag * amp.imag
        if diffraction_on:
            for e in range(n_edge):
                ok, amp = _diffraction(c_pt, tx, e, e_o, e_d, e_len, e_n0, e_t0, e_nw, frame, ant,
                                       horizontal, k, lam, eps, model, bvh_args)
                if ok and _accept(amp, floor_lin, max_paths, state):
                    acc += amp
                    accp += amp.real * amp.real + amp.imag * amp.imag
        coh[ci] = acc
        inc[ci] = accp
        npath[ci] = state[0]
        trunc[ci] = state[1] != 0
    return coh, inc, npath, trunc
