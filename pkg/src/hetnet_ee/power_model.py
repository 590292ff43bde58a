"""
Base-station power consumption and the network energy-efficiency metric.

Power terms are evaluated per cell, a cell being one (BS, band) pair:

* load dependent: ``sum_k alpha_k p_k / eta`` over the served UEs of the cell;
* load independent: ``I (P_FIX/lambda0 + P_SYNC/lambda1) + I a D0 + a D1 sum_k alpha_k``
  where ``I`` is 1 when the cell carries at least one assigned UE.

The fixed coding/backhaul term ``C`` is charged once per active BS and is
booked on the BS's first active cell so per-cell and per-BS sums agree.
"""
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    """The requested metric is undefined for the given inputs."""


@dataclass(frozen=True)
class PowerModelParams:
    """Energy consumption constants of one carrier.

    Attributes
    ----------
    eta_pa : float
        Power amplifier efficiency in ``(0, 1]``.
    p_fix, p_sync : float
        Fixed site and synchronization power in W.
    d0 : float
        W per active antenna.
    d1 : float
        W per antenna and per PRB-layer.
    lambda0, lambda1 : float
        Hardware sharing divisors, ``>= 1``.
    c : float
        Fixed coding/backhaul power per active BS in W.
    """

    eta_pa: float = 0.48
    p_fix: float = 300.0
    p_sync: float = 34.0
    d0: float = 4.49
    d1: float = 0.00312
    lambda0: float = 1.0
    lambda1: float = 1.0
    c: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta_pa <= 1:
            raise ValueError(f"eta_pa must lie in (0, 1], got {self.eta_pa}")
        for name in ("p_fix", "p_sync", "d0", "d1", "c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.lambda0 < 1 or self.lambda1 < 1:
            raise ValueError("lambda0 and lambda1 must be >= 1")

    @property
    def fixed(self):
        return self.p_fix / self.lambda0 + self.p_sync / self.lambda1


POWER_PRESETS = {
    "default_700MHz": PowerModelParams(d1=0.00312),
    "default_2.6GHz": PowerModelParams(d1=0.01560),
}

#: Preset chosen for a band when none is configured, keyed by carrier (Hz).
_PRESET_BY_CARRIER = {700e6: "default_700MHz", 2.6e9: "default_2.6GHz"}


def get_power_preset(name):
    try:
        return POWER_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown power preset {name!r}") from None


def cell_params(scenario, params=None):
    """Resolve power parameters for every cell.

    Parameters
    ----------
    params : PowerModelParams, dict or None
        A single parameter set for all cells, or a mapping band id to
        parameter set / preset name. ``None`` picks the preset matching each
        band's carrier (700 MHz or 2.6 GHz) and falls back to the 700 MHz one.

    Returns
    -------
    list of PowerModelParams
        One entry per cell in scenario order.
    """
    out = []
    for cell in scenario.cells:
        if isinstance(params, PowerModelParams):
            p = params
        elif isinstance(params, dict) and cell.band.id in params:
            p = params[cell.band.id]
        elif isinstance(params, str):
            p = params
        else:
            p = _PRESET_BY_CARRIER.get(cell.band.carrier_frequency, "default_700MHz")
        if isinstance(p, str):
            p = get_power_preset(p)
        elif isinstance(p, dict):
            p = PowerModelParams(**p)
        out.append(p)
    return out


@dataclass(frozen=True)
class PowerBreakdown:
    load_dependent: float
    load_independent: float
    total: float
    per_bs: dict
    per_cell: np.ndarray = field(repr=False)
    per_cell_ld: np.ndarray = field(repr=False)
    per_cell_li: np.ndarray = field(repr=False)


def _cell_terms(scenario, allocation, params):
    """Per-cell load-dependent and load-independent power arrays."""
    plist = cell_params(scenario, params)
    cell_of = np.asarray(allocation.cell_of)
    power = np.asarray(allocation.power, dtype=float)
    prbs = np.asarray(allocation.prbs, dtype=float)
    if np.any(power < 0) or np.any(prbs < 0):
        raise ValueError("allocation contains negative power or PRB counts")
    served = ~np.asarray(allocation.outage, dtype=bool)
    n = scenario.n_cells
    ld = np.zeros(n)
    li = np.zeros(n)
    active = np.zeros(n, dtype=bool)
    for c in range(n):
        members = cell_of == c
        if not np.any(members):
            continue
        active[c] = True
        p = plist[c]
        a = scenario.cells[c].band.active_antennas
        live = members & served
        ld[c] = np.sum(prbs[live] * power[live]) / p.eta_pa
        li[c] = p.fixed + a * p.d0 + a * p.d1 * np.sum(prbs[live])
    # C once per active BS, on its first active cell
    seen = set()
    for c in range(n):
        bs_id = scenario.cells[c].bs.id
        if active[c] and bs_id not in seen:
            seen.add(bs_id)
            li[c] += plist[c].c
    return ld, li, active


def load_dependent_power(scenario, allocation, params=None):
    """Transmit power drawn from the supply: ``sum alpha_k p_k / eta`` in W."""
    ld, _, _ = _cell_terms(scenario, allocation, params)
    return float(ld.sum())


def load_independent_power(scenario, allocation, params=None):
    """Fixed, antenna and per-layer processing power in W."""
    _, li, _ = _cell_terms(scenario, allocation, params)
    return float(li.sum())


def power_breakdown(scenario, allocation, params=None):
    ld, li, _ = _cell_terms(scenario, allocation, params)
    per_cell = ld + li
    per_bs = {}
    for cell in scenario.cells:
        per_bs[cell.bs.id] = per_bs.get(cell.bs.id, 0.0) + float(per_cell[cell.index])
    return PowerBreakdown(
        load_dependent=float(ld.sum()),
        load_independent=float(li.sum()),
        total=float(per_cell.sum()),
        per_bs=per_bs,
        per_cell=per_cell,
        per_cell_ld=ld,
        per_cell_li=li,
    )


def total_power(scenario, allocation, params=None):
    return power_breakdown(scenario, allocation, params).total


def bs_power(scenario, allocation, bs_id, band_id=None, params=None):
    """Power consumed by one BS, or one of its carriers when ``band_id`` is given.

    Raises ``KeyError`` for an unknown BS or band.
    """
    bd = power_breakdown(scenario, allocation, params)
    if band_id is None:
        if bs_id not in bd.per_bs:
            raise KeyError(f"unknown BS {bs_id}")
        return bd.per_bs[bs_id]
    return float(bd.per_cell[scenario.cell_index(bs_id, band_id)])


def transfer_time(payload, rate):
    """Time in s to move ``payload`` bits at ``rate`` bit/s (``inf`` at zero rate)."""
    payload = np.asarray(payload, dtype=float)
    rate = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, payload / np.where(rate > 0, rate, 1.0), np.inf)


def energy_efficiency(rates, times, total, served=None):
    """Network energy efficiency ``sum_k R_k / T_k`` over served UEs, divided by ``total``.

    Parameters
    ----------
    rates : array_like
        Achieved rates in bit/s.
    times : array_like
        Transfer times in s.
    total : float
        Total consumed power in W.
    served : array_like of bool, optional
        UEs entering the numerator; outage UEs are excluded.
    """
    if not total > 0:
        raise MetricError("energy efficiency is undefined for zero total power")
    rates = np.asarray(rates, dtype=float)
    times = np.asarray(times, dtype=float)
    mask = np.ones(rates.shape, dtype=bool) if served is None else np.asarray(served, dtype=bool)
    mask = mask & (rates > 0) & np.isfinite(times)
    return float(np.sum(rates[mask] / times[mask]) / total)


def energy_efficiency_alt(payloads, times, total, served=None):
    """Delivered bits per Joule: ``sum_k X_k / (P_tot max_k T_k)`` over served UEs."""
    if not total > 0:
        raise MetricError("energy efficiency is undefined for zero total power")
    payloads = np.asarray(payloads, dtype=float)
    times = np.asarray(times, dtype=float)
    mask = np.ones(payloads.shape, dtype=bool) if served is None else np.asarray(served, dtype=bool)
    mask = mask & np.isfinite(times)
    if not np.any(mask):
        return 0.0
    return float(np.sum(payloads[mask]) / (total * np.max(times[mask])))
