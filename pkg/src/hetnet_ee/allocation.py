"""
PRB allocation and power control.

Contents:

* single-user closed forms for the optimal PRB and antenna counts;
* the per-UE inversions between PRBs and per-PRB power;
* cell solvers for the two PRB strategies (NSM splits the PRBs of a cell
  among its UEs at a common per-PRB power, SM gives every UE all PRBs on its
  own spatial layer);
* a Perron-Frobenius feasibility test, the distributed fixed-point loop
  (Algorithm 7) and the equal-power benchmark scheme.

PRB counts are continuous everywhere. Gains are noise-normalized, so the
interference-plus-noise term of a UE is ``I_k + 1``.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._lambertw import lambertw0
from .propagation import ChannelGains

LN2 = math.log(2.0)
MODES = ("sm", "nsm", "benchmark")


class InfeasibleError(RuntimeError):
    """Rate targets cannot be met jointly (spectral radius or budgets)."""

    def __init__(self, message, feasibility=None):
        super().__init__(message)
        self.feasibility = feasibility


class NonConvergenceError(RuntimeError):
    """Algorithm 7 hit its iteration cap; ``state`` holds the last iterate and trace."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


# --------------------------------------------------------------------------
# single-user closed forms
# --------------------------------------------------------------------------

def optimal_prbs_single_user(rate, prb_bandwidth, antennas, beta, eta_pa, d1):
    """Power-minimizing PRB count of a single-user cell.

    ``alpha* = (R ln2 / b) / (W0((D1 eta a (a - 1) beta - 1) / e) + 1)``.

    Raises
    ------
    ValueError
        If the Lambert W argument lies below ``-1/e``.
    """
    if antennas < 2 or beta <= 0 or rate <= 0:
        raise ValueError("need a >= 2, beta > 0 and rate > 0")
    arg = (d1 * eta_pa * antennas * (antennas - 1) * beta - 1.0) / math.e
    if arg < -1.0 / math.e:
        raise ValueError("Lambert W argument below -1/e")
    return (rate * LN2 / prb_bandwidth) / (lambertw0(arg) + 1.0)


def optimal_antennas_single_user(alpha, rate, prb_bandwidth, beta, eta_pa, d0, d1):
    """Power-minimizing antenna count of a single-user cell at fixed ``alpha``.

    ``a* = sqrt(alpha (2^{R/(b alpha)} - 1) / (eta beta (D0 + D1 alpha))) + 1``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    g = math.expm1(LN2 * rate / (prb_bandwidth * alpha))
    return math.sqrt(alpha * g / (eta_pa * beta * (d0 + d1 * alpha))) + 1.0


def single_user_power(alpha, antennas, rate, prb_bandwidth, beta, eta_pa, d0, d1):
    """Power-dependent part of a single-user cell: ``(alpha/eta) p + D0 a + D1 alpha a``."""
    p = power_for_prbs(alpha, rate, prb_bandwidth, antennas, 1, beta, 1.0)
    return alpha * p / eta_pa + d0 * antennas + d1 * alpha * antennas


# --------------------------------------------------------------------------
# per-UE inversions
# --------------------------------------------------------------------------

def prbs_required(power, rate, prb_bandwidth, antennas, layers, beta, i_plus_noise=1.0):
    """PRBs needed to carry ``rate`` at per-PRB ``power``.

    ``alpha = R / (b log2(1 + (a - L) beta p / (I + 1)))``; vectorized.
    """
    power = np.asarray(power, dtype=float)
    rate = np.asarray(rate, dtype=float)
    dof = np.asarray(antennas, dtype=float) - np.asarray(layers, dtype=float)
    if np.any(dof <= 0):
        raise InfeasibleError("zero-forcing needs more antennas than layers")
    sinr = dof * np.asarray(beta, dtype=float) * power / np.asarray(i_plus_noise, dtype=float)
    if np.any((sinr <= 0) & (rate > 0)):
        raise InfeasibleError("non-positive SINR with a positive rate target")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(rate > 0, rate / (prb_bandwidth * np.log1p(np.maximum(sinr, 0.0)) / LN2), 0.0)
    return float(out) if out.ndim == 0 else out


def power_for_prbs(alpha, rate, prb_bandwidth, antennas, layers, beta, i_plus_noise=1.0):
    """Per-PRB power meeting ``rate`` on ``alpha`` PRBs.

    ``p = (2^{R/(b alpha)} - 1)(I + 1) / (beta (a - L))``; vectorized.
    """
    alpha = np.asarray(alpha, dtype=float)
    rate = np.asarray(rate, dtype=float)
    dof = np.asarray(antennas, dtype=float) - np.asarray(layers, dtype=float)
    if np.any(dof <= 0):
        raise InfeasibleError("zero-forcing needs more antennas than layers")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g = np.where(rate > 0, np.expm1(LN2 * rate / (prb_bandwidth * alpha)), 0.0)
        out = g * np.asarray(i_plus_noise, dtype=float) / (np.asarray(beta, dtype=float) * dof)
    return float(out) if out.ndim == 0 else out


def min_power_allocation(prbs, rates, prb_bandwidth, antennas, layers, beta, i_plus_noise, max_power):
    """Minimum transmit power under rate and sum-power constraints.

    Solves ``min sum_k N_k p_k`` s.t. ``sum_k p_k <= P^max`` and the rate
    constraints, whose KKT point is ``p_k = P^min_k``.

    Returns
    -------
    p : numpy.ndarray
        Per-UE per-PRB power.
    multipliers : dict
        ``mu`` (rate constraints, equal to ``N_k``) and ``nu`` (budget, 0).

    Raises
    ------
    InfeasibleError
        If ``sum_k P^min_k > P^max``.
    """
    p_min = np.atleast_1d(power_for_prbs(prbs, rates, prb_bandwidth, antennas, layers, beta, i_plus_noise))
    if p_min.sum() > max_power:
        raise InfeasibleError("minimum powers exceed the budget")
    return p_min, {"mu": np.broadcast_to(np.asarray(prbs, dtype=float), p_min.shape).copy(), "nu": 0.0}


# --------------------------------------------------------------------------
# multi-user cell power (analysis helpers)
# --------------------------------------------------------------------------

def nsm_cell_power(alphas, rates, prb_bandwidth, antennas, beta, eta_pa, d0, d1):
    """Power-dependent consumption of an interference-free NSM cell.

    ``(1/eta) sum_k alpha_k p_k + D0 a + D1 a sum_k alpha_k`` with ``p_k`` the
    single-layer power for ``alpha_k`` PRBs.
    """
    alphas = np.asarray(alphas, dtype=float)
    p = power_for_prbs(alphas, rates, prb_bandwidth, antennas, 1, beta)
    return float(np.sum(alphas * p) / eta_pa + d0 * antennas + d1 * antennas * alphas.sum())


def sm_cell_power(alpha, rates, prb_bandwidth, antennas, beta, eta_pa, d0, d1):
    """Power-dependent consumption of an interference-free SM cell.

    Every one of the ``K`` UEs uses the same ``alpha`` PRBs on its own layer.
    """
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    k = rates.size
    p = power_for_prbs(alpha, rates, prb_bandwidth, antennas, k, beta)
    return float(alpha * np.sum(p) / eta_pa + d0 * antennas + d1 * antennas * k * alpha)


def integer_compositions(total, parts):
    """All ordered ways to write ``total`` as ``parts`` positive integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in integer_compositions(total - first, parts - 1):
            yield (first,) + rest


# --------------------------------------------------------------------------
# sufficient condition for the full-PRB strategy
# --------------------------------------------------------------------------

def sufficient_condition(alpha_tilde, p_tilde, alpha_star, p_star, c_term, eta_pa):
    """Check ``alpha(p~) p~ - alpha(p*) p* >= delta C eta`` with ``delta = alpha(p*) - alpha(p~)``.

    ``c_term`` is the per-PRB processing cost ``D1 a`` in W.
    """
    if not p_tilde > p_star:
        raise ValueError("the condition is stated for p_tilde > p_star")
    delta = alpha_star - alpha_tilde
    return bool(alpha_tilde * p_tilde - alpha_star * p_star >= delta * c_term * eta_pa)


# --------------------------------------------------------------------------
# allocation state
# --------------------------------------------------------------------------

@dataclass
class AllocationState:
    """Result of a PRB/power allocation.

    Attributes
    ----------
    mode : str
    cell_of : numpy.ndarray
        Cell index per UE.
    power : numpy.ndarray
        Per-PRB transmit power per UE in W (0 for outage or zero-rate UEs).
    prbs : numpy.ndarray
        PRBs per UE (continuous).
    interference : numpy.ndarray
        Normalized interference plus noise ``I_k + 1`` seen by each UE.
    outage : numpy.ndarray of bool
    layers : numpy.ndarray
        Spatial layers per cell used in the ZF degrees of freedom ``a - L``.
    cell_tx : numpy.ndarray
        Per-PRB radiated power per cell, the quantity other cells see as
        interference.
    iterations : int
    converged : bool
    trace : list of numpy.ndarray
        Per-cell total transmit power ``sum_k alpha_k p_k`` after each sweep.
    residuals : list of float
    """

    mode: str
    cell_of: np.ndarray
    power: np.ndarray
    prbs: np.ndarray
    interference: np.ndarray
    outage: np.ndarray
    layers: np.ndarray
    cell_tx: np.ndarray
    iterations: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    feasibility: object = None

    @property
    def served(self):
        return ~self.outage

    def cell_transmit_power(self, n_cells=None):
        """Total transmit power ``sum_k alpha_k p_k`` per cell in W."""
        n = n_cells if n_cells is not None else self.cell_tx.size
        live = ~self.outage
        return np.bincount(self.cell_of[live], weights=(self.prbs * self.power)[live], minlength=n)

    def copy(self):
        return replace(
            self,
            power=self.power.copy(), prbs=self.prbs.copy(), interference=self.interference.copy(),
            outage=self.outage.copy(), layers=self.layers.copy(), cell_tx=self.cell_tx.copy(),
            trace=list(self.trace), residuals=list(self.residuals),
        )


@dataclass(frozen=True)
class _Net:
    """Flattened per-cell arrays of a scenario."""

    n_prb: np.ndarray
    antennas: np.ndarray
    max_power: np.ndarray
    bandwidth: np.ndarray
    coupling: np.ndarray  # (C, C) True where cells share a band and differ

    @classmethod
    def of(cls, scenario):
        bands = np.array([c.band.id for c in scenario.cells])
        coupling = (bands[:, None] == bands[None, :]) & ~np.eye(bands.size, dtype=bool)
        return cls(
            scenario.cell_array("prb_count"),
            scenario.cell_array("active_antennas"),
            scenario.cell_array("max_power"),
            scenario.cell_array("prb_bandwidth"),
            coupling,
        )


def _beta(gains):
    return np.asarray(gains.beta if isinstance(gains, ChannelGains) else gains, dtype=float)


def interference_plus_noise(beta, cell_of, cell_tx, coupling):
    """``I_k + 1`` for every UE given per-PRB radiated power per cell."""
    own = np.asarray(cell_of)
    mask = coupling[own]  # (K, C) cells interfering with each UE's own cell
    return 1.0 + np.sum(beta * mask * np.asarray(cell_tx)[None, :], axis=1)


# --------------------------------------------------------------------------
# cell solvers
# --------------------------------------------------------------------------

def _nsm_prb_sum(p, rates, bw, dof, beta, ipn):
    sinr = dof * beta * p / ipn
    return float(np.sum(rates / (bw * np.log1p(sinr) / LN2)))


def solve_cell_nsm(rates, beta, i_plus_noise, antennas, n_prb, max_power, prb_bandwidth, rtol=1e-13):
    """NSM cell subproblem at fixed interference.

    Finds the common per-PRB power ``p`` at which the PRB demands
    ``alpha_k(p)`` fill the cell exactly (``sum_k alpha_k = N``) by geometric
    bisection on ``(0, P^max / N]``. When even ``p = P^max / N`` needs more
    than ``N`` PRBs, the UE with the largest demand is put in outage and the
    search restarts.

    Returns
    -------
    p : numpy.ndarray
        Per-UE per-PRB power (common value, 0 for outage and zero-rate UEs).
    alpha : numpy.ndarray
    outage : numpy.ndarray of bool
    """
    rates = np.asarray(rates, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ipn = np.asarray(i_plus_noise, dtype=float)
    k = rates.size
    p_out = np.zeros(k)
    a_out = np.zeros(k)
    outage = np.zeros(k, dtype=bool)
    dof = antennas - 1.0
    if dof <= 0:
        outage[rates > 0] = True
        return p_out, a_out, outage
    p_cap = max_power / n_prb
    active = rates > 0
    while active.any():
        idx = np.flatnonzero(active)
        r, b, i = rates[idx], beta[idx], ipn[idx]
        demand = r / (prb_bandwidth * np.log1p(dof * b * p_cap / i) / LN2)
        if demand.sum() > n_prb * (1 + 1e-12):
            worst = idx[int(np.argmax(demand))]
            active[worst] = False
            outage[worst] = True
            continue
        hi = p_cap
        lo = p_cap
        while _nsm_prb_sum(lo, r, prb_bandwidth, dof, b, i) <= n_prb:
            lo *= 0.5
            if lo < 1e-300:
                break
        if demand.sum() >= n_prb:
            p = hi
        else:
            for _ in range(400):
                mid = math.sqrt(lo * hi)
                if _nsm_prb_sum(mid, r, prb_bandwidth, dof, b, i) > n_prb:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= rtol * hi:
                    break
            p = hi
        p_out[idx] = p
        a_out[idx] = r / (prb_bandwidth * np.log1p(dof * b * p / i) / LN2)
        break
    return p_out, a_out, outage


def solve_cell_sm(rates, beta, i_plus_noise, antennas, n_prb, max_power, prb_bandwidth):
    """SM cell subproblem at fixed interference.

    Every UE with a positive rate gets all ``N`` PRBs on its own layer and
    ``p_k = power_for_prbs(N, ..., layers=K)``. If ``a <= K`` the weakest UEs
    (lowest ``beta / (I + 1)``) go to outage until ``K < a``; if
    ``N sum_k p_k > P^max`` the UE needing the most power goes to outage
    and the rest are recomputed.

    Returns
    -------
    p, alpha, outage : numpy.ndarray
    """
    rates = np.asarray(rates, dtype=float)
    beta = np.asarray(beta, dtype=float)
    ipn = np.asarray(i_plus_noise, dtype=float)
    k = rates.size
    p_out = np.zeros(k)
    a_out = np.zeros(k)
    outage = np.zeros(k, dtype=bool)
    active = rates > 0
    quality = beta / ipn
    while active.sum() >= antennas:
        idx = np.flatnonzero(active)
        weakest = idx[int(np.argmin(quality[idx]))]
        active[weakest] = False
        outage[weakest] = True
    while active.any():
        idx = np.flatnonzero(active)
        p = power_for_prbs(n_prb, rates[idx], prb_bandwidth, antennas, idx.size, beta[idx], ipn[idx])
        p = np.atleast_1d(p)
        if n_prb * p.sum() > max_power * (1 + 1e-12):
            worst = idx[int(np.argmax(p))]
            active[worst] = False
            outage[worst] = True
            continue
        p_out[idx] = p
        a_out[idx] = n_prb
        break
    return p_out, a_out, outage


def _sweep(mode, beta, rates, cell_of, net, cell_tx, cells=None, silent=(), forced=None):
    """One Jacobi sweep: re-solve the given cells against frozen ``cell_tx``.

    UEs flagged in ``forced`` stay in outage without being offered to the
    cell solver.
    """
    if forced is not None and forced.any():
        rates = np.where(forced, 0.0, rates)
    tx = np.array(cell_tx, dtype=float)
    tx[list(silent)] = 0.0
    ipn = interference_plus_noise(beta, cell_of, tx, net.coupling)
    k_total = rates.size
    power = np.zeros(k_total)
    prbs = np.zeros(k_total)
    outage = np.zeros(k_total, dtype=bool)
    layers = np.zeros(net.n_prb.size)
    new_tx = np.zeros(net.n_prb.size)
    cells = range(net.n_prb.size) if cells is None else cells
    for c in cells:
        idx = np.flatnonzero(cell_of == c)
        if idx.size == 0:
            continue
        args = (rates[idx], beta[idx, c], ipn[idx], net.antennas[c], net.n_prb[c], net.max_power[c], net.bandwidth[c])
        if mode == "nsm":
            p, a, out = solve_cell_nsm(*args)
            layers[c] = 1
        else:
            p, a, out = solve_cell_sm(*args)
            layers[c] = np.sum((rates[idx] > 0) & ~out)
        if forced is not None:
            out = out | forced[idx]
        power[idx], prbs[idx], outage[idx] = p, a, out
        live = ~out
        new_tx[c] = np.sum(a[live] * p[live]) / net.n_prb[c]
    return power, prbs, outage, ipn, layers, new_tx


# --------------------------------------------------------------------------
# feasibility
# --------------------------------------------------------------------------

@dataclass
class FeasibilityResult:
    """Outcome of the Perron-Frobenius test.

    ``radius`` is the spectral radius of the coupling matrix; ``powers`` the
    per-UE (SM) or per-cell (NSM) per-PRB powers of the linear fixed point
    when ``radius < 1``.
    """

    feasible: bool
    radius: float
    spectral_feasible: bool
    budget_feasible: bool
    antennas_feasible: bool
    matrix: np.ndarray = field(repr=False)
    powers: np.ndarray = field(default=None, repr=False)
    mode: str = "sm"

    def __bool__(self):
        return self.feasible


def spectral_radius(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def coupling_matrix(scenario, gains, assignment, rates=None, mode="sm"):
    """Normalized coupling matrix ``F`` and noise vector ``u`` of ``p = F p + u``.

    SM works per UE (zero-rate UEs excluded): ``F[k, k'] = g_k beta[k, c(k')] /
    ((a - K) beta[k, c(k)])`` for ``k'`` in another cell of the same band, with
    ``g_k = 2^{R_k/(b N)} - 1``. NSM works per cell with the equal split
    ``alpha_k = N / K``: ``F[c, c'] = max_k s_k beta[k, c'] / ((a - 1) beta[k, c])``
    and ``s_k = 2^{K R_k / (b N)} - 1``, which makes the NSM test sufficient
    rather than exact.

    Returns
    -------
    F : numpy.ndarray
    u : numpy.ndarray
    index : numpy.ndarray
        UE indices (SM) or cell indices (NSM) labelling the rows.
    antennas_ok : bool
    """
    beta = _beta(gains)
    net = _Net.of(scenario)
    rates = scenario.rates if rates is None else np.asarray(rates, dtype=float)
    cell_of = np.asarray(assignment.cell_of)
    mode = mode.lower()
    if mode in ("sm", "benchmark"):
        idx = np.flatnonzero(rates > 0)
        own = cell_of[idx]
        k_cell = np.bincount(own, minlength=net.n_prb.size)
        dof = net.antennas[own] - k_cell[own]
        antennas_ok = bool(np.all(dof > 0))
        dof = np.where(dof > 0, dof, np.nan)
        g = np.expm1(LN2 * rates[idx] / (net.bandwidth[own] * net.n_prb[own]))
        b_own = beta[idx, own]
        b_cross = beta[idx][:, own]  # gain from UE k to the cell of UE k'
        couple = net.coupling[own][:, own]
        f = (g / (dof * b_own))[:, None] * b_cross * couple
        u = g / (dof * b_own)
        return np.nan_to_num(f, nan=np.inf), np.nan_to_num(u, nan=np.inf), idx, antennas_ok
    if mode == "nsm":
        cells = np.array(sorted({int(c) for c in cell_of[rates > 0]}))
        n = cells.size
        f = np.zeros((n, n))
        u = np.zeros(n)
        antennas_ok = bool(np.all(net.antennas[cells] > 1)) if n else True
        for i, c in enumerate(cells):
            members = np.flatnonzero((cell_of == c) & (rates > 0))
            kc = members.size
            s = np.expm1(LN2 * kc * rates[members] / (net.bandwidth[c] * net.n_prb[c]))
            scale = s / ((net.antennas[c] - 1) * beta[members, c])
            u[i] = np.max(scale)
            for j, c2 in enumerate(cells):
                if net.coupling[c, c2]:
                    f[i, j] = np.max(scale * beta[members, c2])
        return f, u, cells, antennas_ok
    raise ValueError(f"unknown mode {mode!r}")


def feasibility_check(scenario, gains, assignment, rates=None, mode="sm"):
    """Perron-Frobenius feasibility of the rate targets.

    Feasible iff the ZF degrees of freedom are positive, the spectral radius
    of the coupling matrix is below one and the fixed point
    ``p = (I - F)^{-1} u`` fits every cell's power budget. Exact for SM,
    sufficient for NSM (see :func:`coupling_matrix`).

    Returns
    -------
    FeasibilityResult
    """
    mode = mode.lower()
    net = _Net.of(scenario)
    f, u, index, antennas_ok = coupling_matrix(scenario, gains, assignment, rates, mode)
    if f.size and not np.all(np.isfinite(f)):
        return FeasibilityResult(False, math.inf, False, False, False, f, None, mode)
    radius = spectral_radius(f)
    spectral_ok = radius < 1.0
    budget_ok = False
    powers = None
    if spectral_ok and index.size:
        powers = np.linalg.solve(np.eye(index.size) - f, u)
        if mode == "nsm":
            budget_ok = bool(np.all(net.n_prb[index] * powers <= net.max_power[index] * (1 + 1e-12)))
        else:
            cell_of = np.asarray(assignment.cell_of)[index]
            per_cell = np.bincount(cell_of, weights=powers, minlength=net.n_prb.size)
            budget_ok = bool(np.all(net.n_prb * per_cell <= net.max_power * (1 + 1e-12)))
        budget_ok = budget_ok and bool(np.all(powers >= 0))
    elif spectral_ok:
        budget_ok = True
    feasible = bool(antennas_ok and spectral_ok and budget_ok)
    return FeasibilityResult(feasible, radius, spectral_ok, budget_ok, antennas_ok, f, powers, mode)


# --------------------------------------------------------------------------
# Algorithm 7
# --------------------------------------------------------------------------

def _antenna_trim(rates, beta, cell_of, antennas):
    """Zero the rates of the weakest UEs of every cell holding ``K >= a`` UEs."""
    rates = np.array(rates, dtype=float)
    for c in np.unique(cell_of):
        idx = np.flatnonzero((cell_of == c) & (rates > 0))
        excess = idx.size - int(antennas[c]) + 1
        if excess > 0:
            rates[idx[np.argsort(beta[idx, c], kind="stable")[:excess]]] = 0.0
    return rates


def algorithm7(scenario, gains, assignment, mode="sm", tol=1e-6, max_iters=100, init="zero",
               require_feasible=False, check=True, free_sweeps=10):
    """Distributed PRB allocation and power control (Jacobi fixed point).

    At every sweep each cell recomputes the interference seen by its UEs
    from the other cells' powers of the previous sweep and solves its cell
    subproblem (:func:`solve_cell_nsm` or :func:`solve_cell_sm`). Outages are
    re-decided from scratch during the first ``free_sweeps`` sweeps. The loop stops once the summed
    change of per-cell transmit power falls below ``tol`` and the outage set
    is unchanged.

    Parameters
    ----------
    mode : {"sm", "nsm"}
    tol : float
        Stopping tolerance in W on ``sum_m |P_m^{t+1} - P_m^t|``.
    max_iters : int
    init : {"zero", "max_power"}
        Starting powers: zero, or ``P^max / N`` per PRB on every occupied cell.
    require_feasible : bool
        Also refuse instances whose linear fixed point breaks a power budget
        (otherwise outage handling absorbs them).
    check : bool
        Run the Perron-Frobenius test first.
    free_sweeps : int
        Sweeps during which outage decisions are revisited from scratch.
        Afterwards a UE in outage stays there, which rules out cycles where
        dropping a UE lowers interference enough for it to fit again.

    Returns
    -------
    AllocationState
        ``iterations`` counts the sweeps up to the last one that changed the
        powers by at least ``tol`` (a single interference-free cell reports 1).

    Raises
    ------
    InfeasibleError
        SM spectral radius ``>= 1`` (or any infeasibility with ``require_feasible``).
    NonConvergenceError
        ``max_iters`` sweeps without meeting ``tol``.
    """
    mode = mode.lower()
    if mode not in ("sm", "nsm"):
        raise ValueError("algorithm7 supports modes 'sm' and 'nsm'")
    beta = _beta(gains)
    net = _Net.of(scenario)
    rates = scenario.rates
    cell_of = np.asarray(assignment.cell_of)
    feas = None
    if check:
        # UEs beyond a cell's zero-forcing capacity are outages, not a network-wide infeasibility
        trimmed = _antenna_trim(rates, beta, cell_of, net.antennas) if mode == "sm" else rates
        feas = feasibility_check(scenario, beta, assignment, trimmed, mode)
        # the NSM test is only sufficient, so a large radius there is left to outage handling
        if mode == "sm" and not feas.spectral_feasible:
            raise InfeasibleError(f"spectral radius {feas.radius:.6g} >= 1", feas)
        if require_feasible and not feas.feasible:
            raise InfeasibleError("rate targets exceed power budgets or antenna limits", feas)
    occupied = np.bincount(cell_of, minlength=net.n_prb.size) > 0
    if init == "zero":
        tx = np.zeros(net.n_prb.size)
    elif init == "max_power":
        tx = np.where(occupied, net.max_power / net.n_prb, 0.0)
    else:
        raise ValueError("init must be 'zero' or 'max_power'")

    total_prev = tx * net.n_prb
    outage_prev = None
    trace, residuals = [], []
    state = None
    for sweep in range(1, max_iters + 1):
        forced = outage_prev if (outage_prev is not None and sweep > free_sweeps) else None
        power, prbs, outage, ipn, layers, tx = _sweep(mode, beta, rates, cell_of, net, tx, forced=forced)
        total = tx * net.n_prb
        residual = float(np.sum(np.abs(total - total_prev)))
        trace.append(total.copy())
        residuals.append(residual)
        state = AllocationState(
            mode, cell_of.copy(), power, prbs, ipn, outage, layers, tx.copy(), sweep, False,
            trace, residuals, feas,
        )
        stable = outage_prev is not None and np.array_equal(outage, outage_prev)
        if residual < tol and (stable or sweep == 1 and not outage.any()):
            state.converged = True
            state.iterations = max(1, sweep - 1)
            return state
        total_prev = total
        outage_prev = outage
    raise NonConvergenceError(f"no convergence within {max_iters} iterations", state)


def resolve_cells(scenario, gains, assignment, base, cells, mode="sm", silent=()):
    """Re-solve selected cells once against the powers of ``base``.

    Cells in ``silent`` are treated as not transmitting. All other cells keep
    their allocation from ``base``. Used for the one-shot switch-off analysis.
    """
    mode = "sm" if mode == "benchmark" else mode.lower()
    beta = _beta(gains)
    net = _Net.of(scenario)
    cell_of = np.asarray(assignment.cell_of)
    power, prbs, outage, ipn, layers, tx = _sweep(
        mode, beta, scenario.rates, cell_of, net, base.cell_tx, cells=cells, silent=silent,
    )
    out = base.copy()
    out.cell_of = cell_of.copy()
    chosen = np.isin(cell_of, cells)
    out.power[chosen] = power[chosen]
    out.prbs[chosen] = prbs[chosen]
    out.outage[chosen] = outage[chosen]
    out.interference[chosen] = ipn[chosen]
    for c in cells:
        out.layers[c] = layers[c]
        out.cell_tx[c] = tx[c]
    for c in silent:
        out.layers[c] = 0
        out.cell_tx[c] = 0.0
    return out


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

def benchmark_allocation(scenario, gains, assignment, rel_tol=1e-9):
    """Equal-power spatially multiplexed benchmark.

    Each occupied cell splits its budget evenly, ``p_k = P^max / (K N)`` per
    PRB with ``K`` assigned UEs on their own layers, and every UE takes the
    PRBs it needs at that power. A UE needing more than ``N`` PRBs is in
    outage. Interference assumes every occupied cell radiates its full
    budget, ``P^max / N`` per PRB. When ``a <= K`` the UEs with the weakest
    gains are put in outage until ``K < a``.
    """
    beta = _beta(gains)
    net = _Net.of(scenario)
    rates = scenario.rates
    cell_of = np.asarray(assignment.cell_of)
    k_total = rates.size
    occupied = np.bincount(cell_of, minlength=net.n_prb.size) > 0
    tx = np.where(occupied, net.max_power / net.n_prb, 0.0)
    ipn = interference_plus_noise(beta, cell_of, tx, net.coupling)
    power = np.zeros(k_total)
    prbs = np.zeros(k_total)
    outage = np.zeros(k_total, dtype=bool)
    layers = np.zeros(net.n_prb.size)
    for c in np.flatnonzero(occupied):
        idx = np.flatnonzero(cell_of == c)
        keep = list(idx[np.argsort(-beta[idx, c] / ipn[idx], kind="stable")])
        while len(keep) >= net.antennas[c]:
            outage[keep.pop()] = True
        keep = np.array(keep, dtype=int)
        k = keep.size
        layers[c] = k
        if k == 0:
            continue
        p = net.max_power[c] / (k * net.n_prb[c])
        a = np.atleast_1d(prbs_required(p, rates[keep], net.bandwidth[c], net.antennas[c], k, beta[keep, c], ipn[keep]))
        over = a > net.n_prb[c] * (1 + rel_tol)
        outage[keep[over]] = True
        ok = keep[~over]
        prbs[ok] = a[~over]
        power[ok] = np.where(rates[ok] > 0, p, 0.0)
    total = np.bincount(cell_of[~outage], weights=(prbs * power)[~outage], minlength=net.n_prb.size)
    return AllocationState(
        "benchmark", cell_of.copy(), power, prbs, ipn, outage, layers, tx, 1, True, [total], [0.0], None,
    )


def allocate(scenario, gains, assignment, mode="sm", **kwargs):
    """Dispatch to :func:`algorithm7` or :func:`benchmark_allocation`."""
    if mode == "benchmark":
        return benchmark_allocation(scenario, gains, assignment)
    return algorithm7(scenario, gains, assignment, mode, **kwargs)
