"""The frozen oracle outputs are re-derived from scratch."""

import cmath
import math

import numpy as np
import pytest

import oracles as o

F = o.FROZEN


def test_friis_frozen():
    assert o.friis_gain_db(10e9, 100.0) == pytest.approx(F["friis_100m_10ghz_db"], abs=1e-9)
    assert 30.0 + o.friis_gain_db(10e9, 100.0) == pytest.approx(F["friis_rss_100m_dbm"], abs=1e-9)


def test_material_frozen():
    assert 0.0462 * 10**0.7822 == pytest.approx(F["concrete_sigma_10ghz"], rel=1e-12)
    assert 0.0462 * 28**0.7822 == pytest.approx(F["concrete_sigma_28ghz"], rel=1e-12)
    im = F["concrete_sigma_10ghz"] / (2 * math.pi * 10e9 * o.EPS0)
    assert im == pytest.approx(F["concrete_eta_imag_10ghz"], rel=1e-12)
    r = cmath.sqrt(5.24 - 1j * im)
    assert abs((1 - r) / (1 + r)) == pytest.approx(F["concrete_normal_gamma_abs"], rel=1e-12)


def test_pattern_and_gain_frozen():
    assert o.pattern_db(90, 65) == F["pattern_phi65_db"]
    assert o.pattern_db(90, 180) == F["pattern_phi180_db"]
    assert 10**0.8 == pytest.approx(F["boresight_gain_lin"], rel=1e-12)


def test_noise_frozen():
    assert o.noise_dbm(400e6, 7.0) == pytest.approx(F["noise_400mhz_nf7_dbm"], abs=1e-9)
    assert o.noise_dbm(1.0, 0.0) == pytest.approx(F["noise_1hz_dbm"], abs=1e-9)


def test_rate_inversions_frozen():
    assert 2**0.25 - 1 == pytest.approx(F["urllc_sinr_400mhz"], rel=1e-14)
    assert math.log2(1 + F["sinr_for_4p25"]) == pytest.approx(4.25, rel=1e-14)


def test_toy_sinr_frozen():
    got = o.toy_sinr_db([-60, -70, -80], -81)
    assert got == pytest.approx(list(F["toy_sinr_db"]), abs=1e-9)
    assert got[0] - got[1] == pytest.approx(F["toy_margin_db"], abs=1e-9)


def test_knife_edge_oracle_known_points():
    # grazing incidence halves the field; deep shadow follows 0.225/nu
    assert abs(o.knife_edge_loss(0.0)) == pytest.approx(0.5, abs=1e-12)
    assert 20 * math.log10(abs(o.knife_edge_loss(5.0))) == pytest.approx(
        20 * math.log10(0.225 / 5.0), abs=0.1)


def test_two_ray_oracle_far_field_slope():
    # beyond the breakpoint the two-ray gain falls at 40 dB/decade
    g1 = 10 * math.log10(o.two_ray_gain(10e9, 10, 1.5, 1e5))
    g2 = 10 * math.log10(o.two_ray_gain(10e9, 10, 1.5, 1e6))
    assert g1 - g2 == pytest.approx(40.0, abs=0.01)


def test_fibonacci_directions_unit():
    d = o.fibonacci_directions(1000)
    assert np.allclose(np.linalg.norm(d, axis=1), 1.0)
