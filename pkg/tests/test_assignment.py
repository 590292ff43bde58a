import numpy as np
import pytest
from numpy.testing import assert_array_equal

from hetnet_ee.allocation import algorithm7
from hetnet_ee.assignment import (
    Assignment, InfeasibleAssignmentError, InsufficientAntennasError, bias_assign,
    bias_rematch_assign, bias_threshold_assign, evaluate_switchoff, greedy_assign, rematch_assign,
    run_algorithm, threshold_assign,
)
from hetnet_ee.power_model import PowerModelParams
from hetnet_ee.propagation import ChannelGains
from hetnet_ee.scenario import BaseStation, Scenario, UserEquipment, make_band


def _gains(beta, bands):
    beta = np.asarray(beta, dtype=float)
    keys = tuple((i, b) for i, b in enumerate(bands))
    return ChannelGains(beta, tuple(range(beta.shape[0])), keys)


def test_greedy():
    a = greedy_assign(np.array([[2.0, 1.0], [1.0, 3.0]]))
    assert_array_equal(a.cell_of, [0, 1])
    assert a.off_cells == frozenset()
    b = greedy_assign(np.ones((5, 3)))
    assert_array_equal(b.cell_of, 0)
    assert b.cell_to_ues[0] == [0, 1, 2, 3, 4]


def test_greedy_dominant_band():
    # every UE sees a far stronger low band: all stay there
    rng = np.random.default_rng(3)
    low = rng.uniform(1e3, 1e4, size=(195, 3))
    high = rng.uniform(1.0, 10.0, size=(195, 7))
    g = _gains(np.hstack([low, high]), [0] * 3 + [1] * 7)
    a = greedy_assign(g)
    assert np.all(a.cell_of < 3)


def test_rematch_hand_trace():
    beta = np.array([[5.0, 1.0], [4.0, 2.0], [1.0, 3.0]])
    a = rematch_assign(beta, j=1)
    assert_array_equal(a.cell_of, [0, 0, 0])
    assert a.off_cells == {1}
    assert_array_equal(rematch_assign(beta, j=0).cell_of, greedy_assign(beta).cell_of)


def test_rematch_j2_survivors():
    rng = np.random.default_rng(7)
    beta = rng.lognormal(0.0, 2.0, size=(40, 9))
    a = rematch_assign(beta, j=2)
    loads = a.loads()
    for c in range(9):
        if c not in a.off_cells:
            assert loads[c] == 0 or loads[c] >= 3
    assert all(loads[c] == 0 for c in a.off_cells)


def test_rematch_infeasible():
    with pytest.raises(InfeasibleAssignmentError):
        rematch_assign(np.array([[1.0]]), j=1)


def test_threshold_cases():
    beta = np.array([
        [10, 1, 1, 1],
        [9, 1, 1, 1],
        [1, 8, 1, 1],
        [1, 7, 1, 1],
        [5, 1, 5.5, 1],
        [1, 1, 1, 10],
    ], dtype=float)
    high = threshold_assign(beta, j=1, delta=20.0)
    low = threshold_assign(beta, j=1, delta=0.5)
    assert high.off_cells == {2, 3}
    assert low.off_cells == {2}
    assert_array_equal(threshold_assign(beta, 1, 1e12).cell_of, rematch_assign(beta, 1).cell_of)
    assert_array_equal(threshold_assign(beta, 1, 1e-12).cell_of, greedy_assign(beta).cell_of)


def test_bias():
    g = _gains([[1e3, 1.0]], [0, 1])
    assert_array_equal(greedy_assign(g).cell_of, [0])
    assert_array_equal(bias_assign(g, {1: 35.0}).cell_of, [1])
    assert_array_equal(bias_assign(g, {0: 0.0, 1: 0.0}).cell_of, greedy_assign(g).cell_of)
    rng = np.random.default_rng(1)
    g2 = _gains(rng.lognormal(size=(30, 6)), [0, 0, 0, 1, 1, 1])
    # a common bias on every band leaves the argmax unchanged
    assert_array_equal(bias_assign(g2, {0: 12.0, 1: 12.0}).cell_of, greedy_assign(g2).cell_of)
    with pytest.raises(ValueError):
        bias_assign(g2, {1: -3.0})


def test_bias_compositions():
    rng = np.random.default_rng(5)
    g = _gains(rng.lognormal(0.0, 1.5, size=(25, 6)), [0, 0, 0, 1, 1, 1])
    zero = {0: 0.0, 1: 0.0}
    assert_array_equal(bias_rematch_assign(g, zero, 1).cell_of, rematch_assign(g, 1).cell_of)
    assert_array_equal(bias_threshold_assign(g, zero, 1, 0.7).cell_of, threshold_assign(g, 1, 0.7).cell_of)
    assert_array_equal(bias_rematch_assign(g, {1: 20.0}, 0).cell_of, bias_assign(g, {1: 20.0}).cell_of)


def test_bias_then_rematch_hand_trace():
    # cells 0 and 1 in band 0, cell 2 in band 1
    g = _gains([
        [10.0, 1.0, 0.1],
        [10.0, 9.0, 1e-4],
        [1.0, 10.0, 1e-4],
        [0.1, 0.1, 1.0],
    ], [0, 0, 1])
    biased = bias_assign(g, {1: 35.0})
    assert_array_equal(biased.cell_of, [2, 0, 1, 2])  # only UE 0 flips
    a = bias_rematch_assign(g, {1: 35.0}, j=1)
    assert_array_equal(a.cell_of, [2, 1, 1, 2])
    assert a.off_cells == {0}


def test_run_algorithm_and_assignment_maps():
    beta = np.array([[5.0, 1.0], [4.0, 2.0], [1.0, 3.0]])
    for name in ("greedy", "rematch", "threshold"):
        run_algorithm(name, beta)
    with pytest.raises(ValueError):
        run_algorithm("nope", beta)
    a = run_algorithm("rematch", beta)
    assert a.ue_to_cell == {0: 0, 1: 0, 2: 0}
    assert a.off_keys == {1}
    moved = Assignment(np.array([0, 1, 1]), frozenset(), (0, 1), (0, 1, 2)).moved([1, 2], [0, 0], extra_off=[1])
    assert_array_equal(moved.cell_of, [0, 0, 0])
    assert moved.off_cells == {1}
    with pytest.raises(ValueError):
        Assignment(np.array([0, 1]), frozenset({1}), (0, 1), (0, 1))


# --------------------------------------------------------------------------
# switch-off evaluation
# --------------------------------------------------------------------------

def _two_band_scenario(rates):
    """Two BSs on different band ids (no mutual interference), 2.6 GHz hardware."""
    b0, b1 = make_band(0, "2.6GHz"), make_band(1, "2.6GHz")
    stations = [BaseStation(0, (0, 0, 25), (b0,)), BaseStation(1, (300, 0, 25), (b1,))]
    ues = [UserEquipment(i, (10.0 * i, 5.0, 1.5), r) for i, r in enumerate(rates)]
    return Scenario(stations, ues)


def test_switchoff_empty_candidate():
    sc = _two_band_scenario([1e6])
    beta = np.array([[1e9, 1e8]])
    a = greedy_assign(beta)
    state = algorithm7(sc, beta, a, "sm")
    ev = evaluate_switchoff(sc, beta, a, state, cell=1)
    assert ev.condition_holds and ev.ues.size == 0


def test_switchoff_fixed_cost_saving():
    sc = _two_band_scenario([5e6, 5e6])
    beta = np.array([[1e9, 1e8], [2e8, 2e8 * 1.0000001]])  # UE 1 sees (almost) equal gains
    a = greedy_assign(beta)
    assert_array_equal(a.cell_of, [0, 1])
    state = algorithm7(sc, beta, a, "sm")
    ev = evaluate_switchoff(sc, beta, a, state, cell=1)
    assert ev.condition_holds
    assert ev.power_after < ev.power_before


def _single_cell_sm_total(rates, beta, a, n, bw, p):
    """Independent SM total power of one cell with noise only."""
    k = len(rates)
    power = (2.0 ** (np.asarray(rates) / (bw * n)) - 1.0) / ((a - k) * np.asarray(beta))
    return n * power.sum() / p.eta_pa + p.fixed + a * p.d0 + a * p.d1 * n * k


def test_switchoff_weak_alternative_fails():
    sc = _two_band_scenario([20e6, 20e6])
    tiny = PowerModelParams(p_fix=0.0, p_sync=0.0, d0=0.0, d1=0.0)
    beta = np.array([[1e6, 1e2], [1e2, 1e6 * 1.001]])
    a = greedy_assign(beta)
    state = algorithm7(sc, beta, a, "sm")
    ev = evaluate_switchoff(sc, beta, a, state, cell=1, power_params=tiny)
    assert not ev.condition_holds
    band = sc.cells[0].band
    brute_after = _single_cell_sm_total(sc.rates, beta[:, 0], band.active_antennas, band.prb_count,
                                        band.prb_bandwidth, tiny)
    assert brute_after > ev.power_before
    np.testing.assert_allclose(ev.power_after, brute_after, rtol=1e-9)


def test_switchoff_insufficient_antennas():
    b0 = make_band(0, "700MHz")  # 4 antennas
    b1 = make_band(1, "700MHz")
    sc = Scenario([BaseStation(0, (0, 0, 25), (b0,)), BaseStation(1, (300, 0, 25), (b1,))],
                  [UserEquipment(i, (i, 0, 1.5), 1e5) for i in range(4)])
    beta = np.array([[1e9, 1e6], [1e9, 1e6], [1e9, 1e6], [1e6, 1e9]])
    a = greedy_assign(beta)
    state = algorithm7(sc, beta, a, "sm")
    with pytest.raises(InsufficientAntennasError):
        evaluate_switchoff(sc, beta, a, state, cell=1)
