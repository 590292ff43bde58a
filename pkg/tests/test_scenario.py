import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hetnet_ee.scenario import (
    Band, BaseStation, Scenario, ScenarioError, UserEquipment, generate_synthetic, load_scenario,
    make_band, save_scenario, scenario_to_dict,
)

REF_26 = {"area": [2000, 2000], "bands": [{"preset": "2.6GHz", "count": 7}], "n_ues": 20, "seed": 42}


def test_generate_reference_preset():
    sc = generate_synthetic(REF_26)
    assert len(sc.base_stations) == 7
    assert sc.n_ues == 20
    band = sc.cells[0].band
    # 2.6 GHz row: 64 antennas, 273 PRBs, 120 W, 360 kHz
    assert (band.max_antennas, band.prb_count) == (64, 273)
    assert band.max_power == 120.0
    assert band.prb_bandwidth == 360e3
    for ue in sc.ues:
        assert 0 <= ue.position[0] <= 2000 and 0 <= ue.position[1] <= 2000


def test_minimal_scenario():
    sc = generate_synthetic({"area": [100, 100], "bands": [{"preset": "700MHz", "count": 1}],
                             "n_ues": 1, "seed": 0})
    assert sc.n_cells == 1 and sc.n_ues == 1


def test_deterministic_serialization():
    a = json.dumps(scenario_to_dict(generate_synthetic(REF_26)), sort_keys=True)
    b = json.dumps(scenario_to_dict(generate_synthetic(REF_26)), sort_keys=True)
    assert a == b
    c = json.dumps(scenario_to_dict(generate_synthetic({**REF_26, "seed": 43})), sort_keys=True)
    assert a != c


def test_three_sectors_and_two_bands():
    cfg = {"area": [1500, 1500], "n_ues": 10, "seed": 1, "sectors": 3,
           "bands": [{"preset": "700MHz", "count": 2}, {"preset": "2.6GHz", "count": 3}]}
    sc = generate_synthetic(cfg)
    assert len(sc.base_stations) == 9
    assert sc.n_cells == 3 * 2 + 9
    assert sc.band_ids == [0, 1]
    # cells follow lexicographic (bs, band) order
    keys = [c.key for c in sc.cells]
    assert keys == sorted(keys)


def test_round_trip(tmp_path):
    sc = generate_synthetic(REF_26)
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back == sc
    assert back.digest() == sc.digest()


def _dump(tmp_path, data):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    return path


def test_zero_prb_count_rejected(tmp_path):
    data = scenario_to_dict(generate_synthetic(REF_26))
    data["base_stations"][0]["bands"][0]["prb_count"] = 0
    with pytest.raises(ScenarioError) as err:
        load_scenario(_dump(tmp_path, data))
    assert "prb_count" in str(err.value)


def test_duplicate_ue_rejected(tmp_path):
    data = scenario_to_dict(generate_synthetic(REF_26))
    data["ues"][1]["id"] = data["ues"][0]["id"]
    with pytest.raises(ScenarioError):
        load_scenario(_dump(tmp_path, data))


def test_band_invariants():
    with pytest.raises(ScenarioError):
        make_band(0, "700MHz", active_antennas=8)  # more than the 4 available
    with pytest.raises(ScenarioError):
        make_band(0, "700MHz", max_power=-1.0)
    with pytest.raises(ScenarioError):
        make_band(0, "nope")


def test_with_rates_and_antennas():
    sc = generate_synthetic(REF_26)
    r = sc.with_rates(5e6)
    assert_allclose(r.rates, 5e6)
    assert_allclose(sc.rates, 0.0)
    a = sc.with_active_antennas(16)
    assert all(c.band.active_antennas == 16 for c in a.cells)
    assert all(c.band.active_antennas == 4 for c in
               generate_synthetic({**REF_26, "bands": [{"preset": "700MHz", "count": 2}]})
               .with_active_antennas(64).cells)


def test_manual_construction():
    band = Band(id=0, carrier_frequency=700e6, prb_bandwidth=180e3, prb_count=100,
                max_antennas=4, max_power=200.0)
    assert band.active_antennas == 4
    assert_allclose(band.wavelength, 299792458.0 / 700e6)
    sc = Scenario([BaseStation(0, (0, 0, 25), (band,))], [UserEquipment(0, (10, 0, 1.5), 1e6)])
    assert sc.cell_index(0, 0) == 0
    with pytest.raises(KeyError):
        sc.cell_index(0, 1)
    assert np.array_equal(sc.cell_array("prb_count"), [100.0])
