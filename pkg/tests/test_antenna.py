import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from raytwin import antenna
from raytwin.antenna import AntennaConfig, Orientation

F = o.FROZEN
CFG = AntennaConfig()


def test_pattern_examples():
    assert antenna.element_pattern_db(90.0, 0.0, CFG) == 0.0
    assert antenna.element_pattern_db(90.0, 65.0, CFG) == pytest.approx(F["pattern_phi65_db"])
    assert antenna.element_pattern_db(90.0, 180.0, CFG) == pytest.approx(F["pattern_phi180_db"])


@given(st.floats(0, 180), st.floats(-179.999, 180))
def test_pattern_bounds_and_symmetry(theta, phi):
    a = antenna.element_pattern_db(theta, phi, CFG)
    assert -CFG.a_max - CFG.sla_v <= a <= 0
    assert a == pytest.approx(antenna.element_pattern_db(theta, -phi, CFG))
    assert a == pytest.approx(o.pattern_db(theta, phi))


def test_array_factor_examples():
    one = AntennaConfig(rows=1, cols=1)
    assert antenna.array_factor(np.array([0.3, 0.5, 0.81]), one) == pytest.approx(1.0)
    assert abs(antenna.array_factor(np.array([1.0, 0, 0]), CFG)) == pytest.approx(64.0)
    col = AntennaConfig(rows=8, cols=1)
    d = np.array([math.cos(math.radians(30)), 0.0, math.sin(math.radians(30))])
    ref = o.phasor_sum(8, 0.5, math.sin(math.radians(30)))
    assert abs(antenna.array_factor(d, col) - ref) < 1e-9


@given(st.floats(-1, 1), st.floats(0, 2 * math.pi))
def test_array_factor_bounded(z, az):
    r = math.sqrt(1 - z * z)
    d = np.array([r * math.cos(az), r * math.sin(az), z])
    assert abs(antenna.array_factor(d, CFG)) <= CFG.n_elements + 1e-9


def test_boresight_gain():
    cfg = AntennaConfig(rows=1, cols=1)
    a = antenna.tx_directional_amplitude(np.array([0.0, 1.0, 0.0]), cfg, Orientation(0.0, 0.0))
    assert abs(a) ** 2 == pytest.approx(F["boresight_gain_lin"], rel=1e-12)


def test_identity_orientation_is_boresight():
    local = antenna.to_local(np.array([0.0, 1.0, 0.0]), Orientation(0.0, 0.0))
    assert np.allclose(local, [1, 0, 0])


def _unit(x, y, z):
    v = np.array([x, y, z])
    n = np.linalg.norm(v)
    return v / n if n > 1e-6 else None


def _rz(deg):
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 60), st.floats(0, 359))
def test_rotation_equivariance(x, y, z, tilt, bearing):
    from hypothesis import assume

    d = _unit(x, y, z)
    assume(d is not None)
    # turning the site clockwise by b is the same as turning the direction anticlockwise by b
    a = antenna.tx_directional_amplitude(d, CFG, Orientation(bearing, tilt))
    b = antenna.tx_directional_amplitude(_rz(bearing) @ d, CFG, Orientation(0.0, tilt))
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-90, 90))
def test_gain_upper_bound(x, y, z, tilt):
    from hypothesis import assume

    d = _unit(x, y, z)
    assume(d is not None)
    a = antenna.tx_directional_amplitude(d, CFG, Orientation(0.0, tilt))
    assert abs(a) ** 2 <= 10 ** (CFG.element_gain_max / 10) * CFG.n_elements * (1 + 1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        AntennaConfig(rows=0)
    with pytest.raises(ValueError):
        AntennaConfig(spacing=0)
    with pytest.raises(ValueError):
        AntennaConfig(theta_3db=180)
    with pytest.raises(ValueError):
        Orientation(bearing=360)
    with pytest.raises(ValueError):
        Orientation(downtilt=91)
