"""Achieved rates, transfer times, outage statistics and energy efficiency."""
from dataclasses import dataclass, field

import numpy as np

from .allocation import LN2, _Net, _beta, interference_plus_noise
from .power_model import (
    MetricError, energy_efficiency, energy_efficiency_alt, power_breakdown, transfer_time,
)

#: Relative tolerance for classifying a delivered rate as meeting its target.
RATE_EPS = 1e-6


@dataclass
class Metrics:
    rates: np.ndarray
    times: np.ndarray
    served: np.ndarray
    shortfall: np.ndarray
    outage_count: int
    outage_fraction: float
    ee: float
    ee_alt: float
    power: object
    cell_ee: dict = field(default_factory=dict)

    def row(self):
        """Flat summary suitable for a results table."""
        return {
            "ee": self.ee,
            "ee_alt": self.ee_alt,
            "outage_fraction": self.outage_fraction,
            "outage_count": self.outage_count,
            "p_ld": self.power.load_dependent,
            "p_li": self.power.load_independent,
            "p_tot": self.power.total,
        }


def achieved_rates(scenario, gains, allocation):
    """Rates delivered by an allocation, recomputed from its final powers.

    ``R_k = b alpha_k log2(1 + (a - L) beta_k p_k / (I_k + 1))`` with
    ``I_k`` recomputed from the per-PRB radiated power of the other cells of
    the same band. Outage UEs get 0.
    """
    beta = _beta(gains)
    net = _Net.of(scenario)
    cell_of = np.asarray(allocation.cell_of)
    ipn = interference_plus_noise(beta, cell_of, allocation.cell_tx, net.coupling)
    own = beta[np.arange(cell_of.size), cell_of]
    dof = net.antennas[cell_of] - allocation.layers[cell_of]
    sinr = np.where(dof > 0, dof, 0.0) * own * allocation.power / ipn
    rates = net.bandwidth[cell_of] * allocation.prbs * np.log1p(sinr) / LN2
    return np.where(allocation.outage, 0.0, rates)


def achieved_rate(scenario, gains, allocation, ue):
    """Rate of one UE (index into ``scenario.ues``)."""
    return float(achieved_rates(scenario, gains, allocation)[ue])


def evaluate(scenario, gains, allocation, power_params=None):
    """Full metric set of a final allocation.

    The EE numerator runs over UEs that are not in outage; the denominator
    is the total consumed power. Per-cell EE ``sum_k R_k / P_m`` is reported
    only for cells with assigned UEs.
    """
    rates = achieved_rates(scenario, gains, allocation)
    targets = scenario.rates
    served = ~np.asarray(allocation.outage, dtype=bool)
    shortfall = served & (rates < targets * (1 - RATE_EPS))
    times = transfer_time(scenario.payloads, rates)
    bd = power_breakdown(scenario, allocation, power_params)
    n = rates.size
    count = int(np.sum(~served))
    try:
        ee = energy_efficiency(rates, times, bd.total, served)
        ee_alt = energy_efficiency_alt(scenario.payloads, times, bd.total, served & (rates > 0))
    except MetricError:
        ee = ee_alt = 0.0
    cell_of = np.asarray(allocation.cell_of)
    cell_ee = {}
    for cell in scenario.cells:
        members = cell_of == cell.index
        if members.any() and bd.per_cell[cell.index] > 0:
            cell_ee[cell.key] = float(np.sum(rates[members & served]) / bd.per_cell[cell.index])
    return Metrics(rates, times, served, shortfall, count, count / n if n else 0.0, ee, ee_alt, bd, cell_ee)
