from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hetnet_ee.power_model import (
    MetricError, PowerModelParams, bs_power, cell_params, energy_efficiency, energy_efficiency_alt,
    load_dependent_power, load_independent_power, power_breakdown, total_power, transfer_time,
)
from hetnet_ee.scenario import BaseStation, Scenario, UserEquipment, make_band


def _alloc(cell_of, power, prbs, outage=None):
    cell_of = np.asarray(cell_of)
    outage = np.zeros(cell_of.size, dtype=bool) if outage is None else np.asarray(outage)
    return SimpleNamespace(cell_of=cell_of, power=np.asarray(power, float), prbs=np.asarray(prbs, float),
                           outage=outage)


def _scenario(n_bs=1, n_ues=1, bands=("700MHz",)):
    bs = [BaseStation(i, (500.0 * i, 0.0, 25.0), tuple(make_band(j, b) for j, b in enumerate(bands)))
          for i in range(n_bs)]
    ues = [UserEquipment(k, (10.0 + k, 5.0, 1.5), 1e6) for k in range(n_ues)]
    return Scenario(bs, ues)


def test_load_dependent_examples():
    sc = _scenario()
    p = PowerModelParams()
    a = _alloc([0], [0.1], [10])
    assert_allclose(load_dependent_power(sc, a, p), 10 * 0.1 / 0.48, rtol=1e-15)
    assert load_dependent_power(sc, _alloc([0], [0.0], [10]), p) == 0.0
    b = _alloc([0], [0.2], [10])
    assert_allclose(load_dependent_power(sc, b, p), 2 * load_dependent_power(sc, a, p), rtol=1e-15)


def test_load_independent_hand_value():
    sc = _scenario()
    li = load_independent_power(sc, _alloc([0], [0.01], [100]), PowerModelParams())
    assert_allclose(li, 300 + 34 + 4 * 4.49 + 4 * 0.00312 * 100, rtol=1e-14)
    assert_allclose(li, 353.208, rtol=1e-12)


def test_shutdown_and_sharing():
    sc = _scenario(n_bs=2, n_ues=1)
    # UE on BS 0 only: BS 1 is off and consumes nothing
    a = _alloc([0], [0.01], [100])
    assert bs_power(sc, a, 1) == 0.0
    sc2 = _scenario(bands=("700MHz", "2.6GHz"), n_ues=2)
    a2 = _alloc([0, 1], [0.01, 0.01], [100, 273])
    full = power_breakdown(sc2, a2, PowerModelParams())
    shared = power_breakdown(sc2, a2, PowerModelParams(lambda0=2.0))
    assert_allclose(full.per_cell - shared.per_cell, [150.0, 150.0], rtol=1e-12)


def test_bs_power_additivity():
    sc = _scenario(n_bs=1, n_ues=2)
    a = _alloc([0, 0], [0.01, 0.02], [40, 60])
    assert_allclose(bs_power(sc, a, 0), total_power(sc, a), rtol=1e-15)
    sc2 = _scenario(n_bs=2, n_ues=3)
    b = _alloc([0, 1, 1], [0.01, 0.02, 0.03], [40, 30, 70])
    parts = bs_power(sc2, b, 0) + bs_power(sc2, b, 1)
    assert abs(parts - total_power(sc2, b)) < 1e-9
    assert bs_power(sc2, b, 1, band_id=0) == bs_power(sc2, b, 1)
    with pytest.raises(KeyError):
        bs_power(sc2, b, 7)


def test_backhaul_once_per_bs():
    sc = _scenario(bands=("700MHz", "2.6GHz"), n_ues=2)
    a = _alloc([0, 1], [0.01, 0.01], [100, 273])
    base = total_power(sc, a, PowerModelParams())
    with_c = total_power(sc, a, PowerModelParams(c=50.0))
    assert_allclose(with_c - base, 50.0, rtol=1e-12)


def test_outage_ues_not_counted():
    sc = _scenario(n_ues=2)
    a = _alloc([0, 0], [0.1, 0.1], [10, 10], outage=[False, True])
    assert_allclose(load_dependent_power(sc, a), 10 * 0.1 / 0.48)


def test_presets_by_carrier():
    sc = _scenario(bands=("700MHz", "2.6GHz"))
    p = cell_params(sc)
    assert p[0].d1 == 0.00312 and p[1].d1 == 0.0156
    assert cell_params(sc, {1: "default_700MHz"})[1].d1 == 0.00312
    with pytest.raises(ValueError):
        PowerModelParams(eta_pa=0.0)
    with pytest.raises(ValueError):
        PowerModelParams(lambda0=0.5)


def test_energy_efficiency_values():
    # R = 10 Mbps, X = 100 Mb -> T = 10 s and R / T = 1e6
    t = transfer_time(100e6, 10e6)
    assert t == 10.0
    assert_allclose(energy_efficiency([10e6], [t], 1.0), 1e6)
    assert_allclose(energy_efficiency_alt([100e6], [t], 1.0), 1e7)
    # 100% outage gives zero
    assert energy_efficiency([10e6], [t], 5.0, served=[False]) == 0.0
    # doubling total power halves EE
    e1 = energy_efficiency([1e6, 2e6], [1.0, 2.0], 10.0)
    assert_allclose(energy_efficiency([1e6, 2e6], [1.0, 2.0], 20.0), e1 / 2)
    with pytest.raises(MetricError):
        energy_efficiency([1e6], [1.0], 0.0)
    assert np.isinf(transfer_time(1.0, 0.0))
