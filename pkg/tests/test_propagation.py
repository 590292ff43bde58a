import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from hetnet_ee.propagation import (
    DielectricLayer, DiffractionGeometry, PropagationError, TotalInternalReflectionError,
    antenna_gain, compute_gains, deygout_loss, fresnel_parameter, free_space_loss_db,
    interface_coefficients, knife_edge_loss, reflection_transmission, sector_angles,
)
from hetnet_ee.scenario import AntennaPatternParams, BaseStation, Scenario, UserEquipment, make_band

mpmath.mp.dps = 50
LAMBDA_700 = 299792458.0 / 700e6


def mp_knife_edge(v):
    v = mpmath.mpf(v)
    return float(6.9 + 20 * mpmath.log10(mpmath.sqrt((v - mpmath.mpf("0.1")) ** 2 + 1) + v - mpmath.mpf("0.1")))


def mp_fresnel(h, r1, r2, lam):
    h, r1, r2, lam = (mpmath.mpf(x) for x in (h, r1, r2, lam))
    s1, s2 = mpmath.sqrt(h * h + r1 * r1), mpmath.sqrt(h * h + r2 * r2)
    return float(h * mpmath.sqrt(2 / lam * (s1 + s2) / (r1 * r2)))


def test_fresnel_examples():
    assert fresnel_parameter(DiffractionGeometry(0.0, 100.0, 50.0, 0.1)) == 0.0
    v = fresnel_parameter(DiffractionGeometry(10.0, 1000.0, 1000.0, 0.4286))
    assert_allclose(v, mp_fresnel(10, 1000, 1000, "0.4286"), rtol=1e-13)
    assert abs(v - 0.966) < 5e-4
    v2 = fresnel_parameter(DiffractionGeometry(10.0, 1000.0, 1000.0, 2 * 0.4286))
    assert_allclose(v2, v / math.sqrt(2), rtol=1e-13)
    # negative h gives a negative v
    assert fresnel_parameter(DiffractionGeometry(-10.0, 1000.0, 1000.0, 0.4286)) == pytest.approx(-v)
    with pytest.raises(PropagationError):
        fresnel_parameter(DiffractionGeometry(1.0, 0.0, 10.0, 0.1))


def test_knife_edge_golden():
    assert knife_edge_loss(0.1) == 6.9
    assert abs(knife_edge_loss(0.0) - 6.03) < 0.01
    for v in (-3.0, -0.78, 0.0, 0.5, 2.0, 10.0):
        assert_allclose(knife_edge_loss(v), mp_knife_edge(v), rtol=1e-13)
    # asymptotic branch: 6.9 + 20 log10(2 (v - 0.1)) + small
    assert knife_edge_loss(10.0) > 6.9 + 20 * math.log10(2 * 9.9)
    # remainder ~ 20 log10(1 + 1 / (4 u^2)) with u = 9.9
    assert knife_edge_loss(10.0) - (6.9 + 20 * math.log10(2 * 9.9)) < 20 * math.log10(1 + 1 / (4 * 9.9 ** 2)) + 1e-6
    # roughly zero at the clearance edge
    assert abs(knife_edge_loss(-0.78)) < 0.05
    assert_allclose(knife_edge_loss(np.array([0.1, 0.1])), [6.9, 6.9])


def _trace(profile, d, lam):
    """Independent three-edge Deygout hand trace for obstacles above a flat line."""
    (d1, h1), (d2, h2), (d3, h3) = profile
    v = [mp_fresnel(h, x, d - x, lam) for x, h in profile]
    assert int(np.argmax(v)) == 1  # the crafted profile has its main edge in the middle
    # left sub-path: Tx (0, 0) to main edge (d2, h2)
    hl = h1 - h2 * d1 / d2
    vl = mp_fresnel(hl, d1, d2 - d1, lam)
    # right sub-path: main edge (d2, h2) to Rx (d, 0)
    hr = h3 - h2 * (d - d3) / (d - d2)
    vr = mp_fresnel(hr, d3 - d2, d - d3, lam)
    terms = [mp_knife_edge(v[1])]
    terms += [mp_knife_edge(x) for x in (vl, vr) if x > -0.78]
    return sum(terms)


def test_deygout_cases():
    assert deygout_loss([], LAMBDA_700, 1000.0) == 0.0
    single = deygout_loss([(400.0, 12.0)], LAMBDA_700, 1000.0, k_corr=0.5)
    assert_allclose(single, 0.5 * mp_knife_edge(mp_fresnel(12, 400, 600, LAMBDA_700)), rtol=1e-12)
    profile = [(200.0, 20.0), (500.0, 30.0), (800.0, 22.0)]
    raw = _trace(profile, 1000.0, LAMBDA_700)
    assert_allclose(deygout_loss(profile, LAMBDA_700, 1000.0, k_corr=0.3), 0.3 * raw, rtol=1e-12)


def test_deygout_validation():
    with pytest.raises(PropagationError):
        deygout_loss([(10.0, 1.0)], LAMBDA_700, 100.0, k_corr=0.9)
    with pytest.raises(PropagationError):
        deygout_loss([(50.0, 1.0), (20.0, 1.0)], LAMBDA_700, 100.0)
    with pytest.raises(PropagationError):
        deygout_loss([(150.0, 1.0)], LAMBDA_700, 100.0)


def test_matched_media():
    for theta in (0.0, 0.3, 1.2):
        for pol in ("TE", "TM"):
            rho, t = reflection_transmission(DielectricLayer(2.5, 2.5, 0.2, theta), 0.1, pol)
            assert abs(rho) < 1e-12
            assert abs(abs(t) - 1) < 1e-12
    rho, t = reflection_transmission(DielectricLayer(2.5, 2.5, 0.0, 0.4), 0.1)
    assert abs(t - 1) < 1e-12 and abs(rho) < 1e-12


def test_single_interface_normal_incidence():
    rho, _ = interface_coefficients(1.0, 4.0, 0.0, 0.0, "TE")
    assert_allclose(rho, -1.0 / 3.0, rtol=1e-15)


def test_layer_energy_and_tir():
    # lossless slab: |rho|^2 + (n_out cos / n_in cos) |T|^2 = 1 with identical outer media
    for pol in ("TE", "TM"):
        rho, t = reflection_transmission(DielectricLayer(1.0, 4.0, 0.07, 0.5), 0.1, pol)
        assert_allclose(abs(rho) ** 2 + abs(t) ** 2, 1.0, rtol=1e-12)
    with pytest.raises(TotalInternalReflectionError):
        DielectricLayer(4.0, 1.0, 0.1, 0.6).transmitted_angle
    with pytest.raises(PropagationError):
        reflection_transmission(DielectricLayer(1.0, 2.0, 0.1, 0.2), 0.1, "XY")


def test_antenna_gain():
    p = AntennaPatternParams()
    assert antenna_gain(90.0, 0.0, p) == p.gain_max
    assert antenna_gain(90.0, 0.0, p) == 8.0
    assert_allclose(antenna_gain(105.0, 0.0, p), -4.0, rtol=1e-14)
    theta, phi = np.meshgrid(np.linspace(0, 180, 37), np.linspace(-180, 180, 73))
    g = antenna_gain(theta, phi, p)
    assert np.all(p.gain_max - g <= p.a_max + p.sla_v)
    assert np.all(g <= p.gain_max)
    with pytest.raises(PropagationError):
        antenna_gain(-1.0, 0.0, p)
    with pytest.raises(PropagationError):
        antenna_gain(90.0, 200.0, p)


def test_sector_angles():
    theta, phi = sector_angles((0, 0, 10), (100, 0, 10), azimuth=0.0)
    assert (theta, phi) == (90.0, 0.0)
    theta, phi = sector_angles((0, 0, 10), (0, 100, 10), azimuth=90.0)
    assert_allclose(phi, 0.0, atol=1e-12)
    theta, _ = sector_angles((0, 0, 110), (100, 0, 10))
    assert_allclose(theta, 135.0)


def _omni_scenario(positions, freq_preset="700MHz"):
    band = make_band(0, freq_preset, antenna=None)
    ues = [UserEquipment(i, p, 1e6) for i, p in enumerate(positions)]
    return Scenario([BaseStation(0, (0.0, 0.0, 25.0), (band,))], ues)


def test_gains_symmetry_and_friis():
    sc = _omni_scenario([(300.0, 0.0, 1.5), (0.0, -300.0, 1.5)])
    g = compute_gains(sc)
    assert_allclose(g.beta[0, 0], g.beta[1, 0], rtol=1e-12)
    # n_exp = 2 reproduces Friis
    g2 = compute_gains(sc, params={"exponent": 2.0})
    d = math.sqrt(300.0 ** 2 + 23.5 ** 2)
    noise_db = -174 + 7 + 10 * math.log10(180e3) - 30
    friis = -(20 * math.log10(4 * math.pi * d * 700e6 / 299792458.0)) - noise_db
    assert abs(g2.db()[0, 0] - friis) < 0.01
    assert_allclose(free_space_loss_db(d, 700e6), 20 * math.log10(4 * math.pi * d * 700e6 / 299792458.0))


def test_knife_edge_lowers_gain():
    sc = _omni_scenario([(500.0, 0.0, 1.5)])
    clear = compute_gains(sc, "raytrace_lite")
    blocked = compute_gains(sc, "raytrace_lite", {"obstacles": {(0, 0): [(250.0, 30.0)]}})
    assert blocked.beta[0, 0] < clear.beta[0, 0]
    # string keys as used in JSON configs
    same = compute_gains(sc, "raytrace_lite", {"obstacles": {"0,0": [(250.0, 30.0)]}})
    assert same.beta[0, 0] == blocked.beta[0, 0]


def test_gain_cache(tmp_path):
    sc = _omni_scenario([(500.0, 0.0, 1.5), (100.0, 50.0, 1.5)])
    path = tmp_path / "gains.json"
    first = compute_gains(sc, cache=path)
    assert path.exists()
    second = compute_gains(sc, cache=path)
    assert np.array_equal(first.beta, second.beta)
    assert first.get(1, 0, 0) == first.beta[1, 0]
    with pytest.raises(ValueError):
        first.beta[0, 0] = 1.0
