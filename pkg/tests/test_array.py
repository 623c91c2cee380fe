import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lbbnet.array import (SPEED_OF_LIGHT, ArrayConfig, Direction, element_positions,
                          steering_vector, steering_vectors)

azimuths = st.floats(-np.pi, np.pi, exclude_min=True)
elevations = st.floats(-np.pi / 2, np.pi / 2)


def test_single_element_at_origin():
    assert np.array_equal(element_positions(ArrayConfig(1, 3.5e9)), [[0, 0, 0]])


def test_two_by_two_grid():
    cfg = ArrayConfig(2, SPEED_OF_LIGHT / 2.0)  # wavelength 2 m, spacing 1 m
    assert cfg.wavelength == pytest.approx(2.0)
    pts = {tuple(np.round(p, 12)) for p in element_positions(cfg)}
    assert pts == {(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 1, 1)}


def test_row_major_order():
    pos = element_positions(ArrayConfig(3, 1e9, 0.1))
    assert np.allclose(pos[1], [0, 0, 0.1])
    assert np.allclose(pos[3], [0, 0.1, 0])


def test_eight_by_eight_span():
    pos = element_positions(ArrayConfig(8, 3.5e9))
    assert len(pos) == 64
    # 7 half-wavelengths at 3.5 GHz; golden value 7/2 * c/3.5e9 = c/1e9
    assert np.ptp(pos[:, 1]) == pytest.approx(0.299792458, abs=1e-12)
    assert np.ptp(pos[:, 2]) == pytest.approx(0.299792458, abs=1e-12)
    assert np.all(pos[:, 0] == 0)


def test_invalid_configs():
    with pytest.raises(ValueError):
        ArrayConfig(0, 3.5e9)
    with pytest.raises(ValueError):
        ArrayConfig(2, -1.0)
    with pytest.raises(ValueError):
        ArrayConfig(2, 3.5e9, 0.0)
    with pytest.raises(ValueError):
        Direction(4.0, 0.0)
    with pytest.raises(ValueError):
        Direction(0.0, 2.0)


def test_broadside_is_all_ones():
    a = steering_vector(ArrayConfig(8, 3.5e9), Direction(0.0, 0.0))
    assert np.allclose(a, 1.0, atol=1e-15)


def test_endfire_alternates_with_y_index():
    cfg = ArrayConfig(2, 3.5e9)
    a = steering_vector(cfg, Direction(np.pi / 2, 0.0))
    m = np.repeat([0, 1], 2)  # y index of each element, row-major
    assert np.allclose(a, (-1.0) ** m, atol=1e-12)
    assert sorted(np.round(a.real).tolist()) == [-1, -1, 1, 1]


def test_random_direction_norm(rng):
    cfg = ArrayConfig(8, 3.5e9)
    a = steering_vector(cfg, Direction(rng.uniform(-np.pi, np.pi), rng.uniform(-1.5, 1.5)))
    assert abs(np.vdot(a, a).real - 64) < 1e-12


def test_entries_match_plane_wave_loop():
    # element-by-element evaluation as an independent reference
    cfg = ArrayConfig(3, 2.4e9, 0.05)
    az, el = 0.7, -0.3
    u = (np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el))
    k = 2 * np.pi / cfg.wavelength
    ref = []
    for m in range(3):
        for n in range(3):
            p = (0.0, m * 0.05, n * 0.05)
            ref.append(np.exp(1j * k * sum(pi * ui for pi, ui in zip(p, u))))
    assert np.allclose(steering_vector(cfg, Direction(az, el)), ref, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(side=st.integers(1, 10), az=azimuths, el=elevations)
def test_unit_modulus_and_norm(side, az, el):
    cfg = ArrayConfig(side, 3.5e9)
    a = steering_vector(cfg, Direction(az, el))
    assert np.allclose(np.abs(a), 1.0, atol=1e-14)
    assert abs(np.vdot(a, a).real - side ** 2) <= 1e-12 * side ** 2


@settings(max_examples=100, deadline=None)
@given(az=st.floats(-np.pi + 1e-9, np.pi))
def test_mirror_azimuth_conjugates(az):
    cfg = ArrayConfig(4, 3.5e9)
    a = steering_vectors(cfg, az, 0.0)
    b = steering_vectors(cfg, -az, 0.0)
    assert np.allclose(a, np.conj(b), atol=1e-12)


def test_direction_from_vector():
    d = Direction.from_vector((1.0, 1.0, np.sqrt(2.0)))
    assert d.azimuth == pytest.approx(np.pi / 4)
    assert d.elevation == pytest.approx(np.pi / 4)
    assert Direction.from_vector((-1.0, -0.0, 0.0)).azimuth == pytest.approx(np.pi)
