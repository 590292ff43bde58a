"""
UE-to-cell association (greedy, re-matching, threshold and biased variants)
and the switch-off optimality test for a single cell.

Gains are handled as a ``(n_ues, n_cells)`` matrix whose columns follow the
lexicographic ``(bs_id, band_id)`` cell order, so ``numpy.argmax`` already
breaks ties toward the lowest cell.
"""
from dataclasses import dataclass, field

import numpy as np

from .propagation import ChannelGains


class InfeasibleAssignmentError(RuntimeError):
    """Every candidate cell was removed while UEs were still unassigned."""


class InsufficientAntennasError(ValueError):
    """A receiving cell cannot zero-force its enlarged UE set."""


ALGORITHMS = ("greedy", "rematch", "threshold", "bias", "bias_rematch", "bias_threshold")


@dataclass(frozen=True)
class Assignment:
    """Matching of UEs to cells.

    Attributes
    ----------
    cell_of : numpy.ndarray
        Cell index per UE.
    off_cells : frozenset
        Indices of cells switched off by the algorithm.
    cell_keys : tuple of (bs_id, band_id)
    ue_ids : tuple
    """

    cell_of: np.ndarray
    off_cells: frozenset = frozenset()
    cell_keys: tuple = ()
    ue_ids: tuple = ()

    def __post_init__(self):
        cell_of = np.asarray(self.cell_of, dtype=int).copy()
        cell_of.setflags(write=False)
        object.__setattr__(self, "cell_of", cell_of)
        object.__setattr__(self, "off_cells", frozenset(int(c) for c in self.off_cells))
        n_cells = len(self.cell_keys) if self.cell_keys else (int(cell_of.max()) + 1 if cell_of.size else 0)
        if self.cell_keys and (cell_of.min(initial=0) < 0 or cell_of.max(initial=0) >= n_cells):
            raise ValueError("cell index out of range")
        if set(cell_of.tolist()) & self.off_cells:
            raise ValueError("a UE is assigned to a switched-off cell")
        if not self.ue_ids:
            object.__setattr__(self, "ue_ids", tuple(range(cell_of.size)))

    @property
    def n_cells(self):
        return len(self.cell_keys) if self.cell_keys else int(self.cell_of.max()) + 1

    def members(self, cell):
        """Indices of the UEs assigned to ``cell``."""
        return np.flatnonzero(self.cell_of == cell)

    def loads(self):
        return np.bincount(self.cell_of, minlength=self.n_cells)

    @property
    def ue_to_cell(self):
        keys = self.cell_keys or tuple(range(self.n_cells))
        return {u: keys[c] for u, c in zip(self.ue_ids, self.cell_of)}

    @property
    def cell_to_ues(self):
        keys = self.cell_keys or tuple(range(self.n_cells))
        out = {k: [] for k in keys}
        for u, c in zip(self.ue_ids, self.cell_of):
            out[keys[c]].append(u)
        return out

    @property
    def off_keys(self):
        keys = self.cell_keys or tuple(range(self.n_cells))
        return {keys[c] for c in self.off_cells}

    def moved(self, ues, cells, extra_off=()):
        cell_of = self.cell_of.copy()
        cell_of[np.asarray(ues, dtype=int)] = cells
        return Assignment(cell_of, self.off_cells | set(extra_off), self.cell_keys, self.ue_ids)


def _matrix(gains):
    if isinstance(gains, ChannelGains):
        return np.asarray(gains.beta, dtype=float), gains.cell_keys, gains.ue_ids
    beta = np.asarray(gains, dtype=float)
    if beta.ndim != 2 or beta.size == 0:
        raise ValueError("gains must be a non-empty 2-D array")
    if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
        raise ValueError("gains must be positive and finite")
    return beta, tuple(range(beta.shape[1])), tuple(range(beta.shape[0]))


def _biased(beta, keys, bias):
    """Gains with a per-band bias in dB applied (``beta_dB + Theta_b``)."""
    if bias is None:
        return beta
    if isinstance(bias, dict):
        offsets = np.array([float(bias.get(k[1], 0.0)) if isinstance(k, tuple) else 0.0 for k in keys])
    else:
        offsets = np.broadcast_to(np.asarray(bias, dtype=float), (beta.shape[1],))
    if np.any(offsets < 0):
        raise ValueError("bias values must be >= 0 dB")
    return beta * 10.0 ** (offsets / 10.0)


def greedy_assign(gains, bias=None):
    """Algorithm 1: every UE picks the cell with the largest gain.

    Parameters
    ----------
    gains : ChannelGains or array_like, shape (n_ues, n_cells)
    bias : dict or array_like, optional
        Per-band (dict keyed by band id) or per-cell bias in dB. When given,
        this is the biased association of Algorithm 4.
    """
    beta, keys, ues = _matrix(gains)
    score = _biased(beta, keys, bias)
    return Assignment(np.argmax(score, axis=1), frozenset(), keys, ues)


def bias_assign(gains, bias):
    """Algorithm 4: greedy association on ``beta_dB + Theta_b``."""
    return greedy_assign(gains, bias)


def _switch_off_loop(score, cell_of, j, delta=None):
    """Shared loop of the re-matching and threshold algorithms.

    Cells serving between 1 and ``j`` UEs are visited in ascending index
    order, each at most once. Re-matching moves every UE of a visited cell to
    its best remaining cell; with ``delta`` a UE moves only when its relative
    gain loss ``(s_cur - s_alt) / s_alt`` is below ``delta``. A visited cell
    that ends up empty is switched off.
    """
    n_cells = score.shape[1]
    cell_of = cell_of.copy()
    off = set()
    visited = set()
    while True:
        loads = np.bincount(cell_of, minlength=n_cells)
        pending = [c for c in range(n_cells) if c not in off and c not in visited and 1 <= loads[c] <= j]
        if not pending:
            break
        cell = pending[0]
        visited.add(cell)
        candidates = np.array([c not in off and c != cell for c in range(n_cells)])
        members = np.flatnonzero(cell_of == cell)
        if not candidates.any():
            raise InfeasibleAssignmentError(f"no cell left to receive the UEs of cell {cell}")
        for k in members:
            masked = np.where(candidates, score[k], -np.inf)
            alt = int(np.argmax(masked))
            if delta is None or (score[k, cell] - score[k, alt]) / score[k, alt] < delta:
                cell_of[k] = alt
        if not np.any(cell_of == cell):
            off.add(cell)
    return cell_of, off


def rematch_assign(gains, j=1, bias=None):
    """Algorithm 2 (and 5 with ``bias``): switch off cells serving at most ``j`` UEs.

    Raises
    ------
    InfeasibleAssignmentError
        When a cell must be emptied but no other cell remains.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    beta, keys, ues = _matrix(gains)
    score = _biased(beta, keys, bias)
    cell_of, off = _switch_off_loop(score, np.argmax(score, axis=1), int(j))
    return Assignment(cell_of, frozenset(off), keys, ues)


def threshold_assign(gains, j=1, delta=1.0, bias=None):
    """Algorithm 3 (and 6 with ``bias``): re-matching gated by a relative gain loss below ``delta``."""
    if j < 0:
        raise ValueError("j must be >= 0")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    beta, keys, ues = _matrix(gains)
    score = _biased(beta, keys, bias)
    cell_of, off = _switch_off_loop(score, np.argmax(score, axis=1), int(j), float(delta))
    return Assignment(cell_of, frozenset(off), keys, ues)


def bias_rematch_assign(gains, bias, j=1):
    """Algorithm 5: biased association followed by re-matching on biased gains."""
    return rematch_assign(gains, j, bias)


def bias_threshold_assign(gains, bias, j=1, delta=1.0):
    """Algorithm 6: biased association followed by the threshold loop on biased gains."""
    return threshold_assign(gains, j, delta, bias)


def run_algorithm(name, gains, j=1, delta=1.0, bias=None):
    """Dispatch by algorithm name (one of :data:`ALGORITHMS`)."""
    if name == "greedy":
        return greedy_assign(gains)
    if name == "rematch":
        return rematch_assign(gains, j)
    if name == "threshold":
        return threshold_assign(gains, j, delta)
    if name == "bias":
        return bias_assign(gains, bias)
    if name == "bias_rematch":
        return bias_rematch_assign(gains, bias, j)
    if name == "bias_threshold":
        return bias_threshold_assign(gains, bias, j, delta)
    raise ValueError(f"unknown assignment algorithm {name!r}; expected one of {ALGORITHMS}")


# --------------------------------------------------------------------------
# switch-off evaluation
# --------------------------------------------------------------------------

@dataclass
class SwitchOffEvaluation:
    """Per-UE quantities of the switch-off test for one candidate cell.

    ``gamma`` is ``gamma2 / gamma1``; the condition for UE ``l`` reads
    ``gamma_l / beta'_l <= 1 / beta_l + delta_l``.
    """

    cell: int
    ues: np.ndarray
    targets: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    beta_next: np.ndarray
    condition_holds: bool
    power_before: float = np.nan
    power_after: float = np.nan
    after: object = field(default=None, repr=False)

    @property
    def gamma(self):
        return self.gamma2 / self.gamma1

    @property
    def per_ue(self):
        lhs = 1.0 / self.beta + self.delta
        return self.gamma / self.beta_next <= lhs + 1e-12 * np.abs(lhs)


def evaluate_switchoff(scenario, gains, assignment, allocation, cell, mode="sm", power_params=None):
    """Test whether switching ``cell`` off and moving its UEs saves power.

    Every UE ``l`` of the candidate moves to its best surviving cell by true
    gain. Receiving cells are re-solved with the interference left once the
    candidate stops transmitting, computed from the current powers of all
    other cells (one-shot). The per-UE quantities are

    * SM: ``gamma1 = (a_n - K'_n)(I_l + 1)``, ``gamma2 = (a_m - l)(I~_l + 1)``
      with ``K'_n`` the UE count of the receiving cell after the move;
    * NSM: ``gamma1 = (2^{R'} - 1)(I_l + 1)``, ``gamma2 = (2^{R''} - 1)(I~_l + 1)``
      with ``R' = R / (b alpha_l)`` before and ``R'' = R / (b alpha'_l)`` after;

    and ``delta_l`` spreads the released load-independent power of the
    candidate, net of the extra load-independent and load-dependent power of
    the receiving cells, evenly over the moving UEs. The conjunction over
    ``l`` is then sufficient for the total power not to increase, and exact
    for a single moving UE.

    Returns
    -------
    SwitchOffEvaluation

    Raises
    ------
    InsufficientAntennasError
        SM mode with ``a_n <= K_2 + l_n`` at a receiving cell.
    """
    from . import allocation as alloc
    from .power_model import power_breakdown

    mode = mode.lower()
    beta = np.asarray(gains.beta if isinstance(gains, ChannelGains) else gains, dtype=float)
    ues = assignment.members(cell)
    empty = np.zeros(0)
    if ues.size == 0:
        return SwitchOffEvaluation(cell, ues, np.zeros(0, dtype=int), empty, empty, empty, empty, empty, True)
    n_cells = beta.shape[1]
    surviving = np.array([c != cell and c not in assignment.off_cells for c in range(n_cells)])
    if not surviving.any():
        raise InfeasibleAssignmentError("no surviving cell to receive the UEs")
    targets = np.array([int(np.argmax(np.where(surviving, beta[k], -np.inf))) for k in ues])

    if mode == "sm":
        cells = scenario.cells
        for n in np.unique(targets):
            k2 = int(np.sum(allocation.cell_of == n))
            ell_n = int(np.sum(targets == n))
            a_n = cells[n].band.active_antennas
            if a_n <= k2 + ell_n:
                raise InsufficientAntennasError(
                    f"cell {n} has {a_n} antennas for {k2 + ell_n} UEs after the move"
                )

    new_assignment = assignment.moved(ues, targets, extra_off=[cell])
    after = alloc.resolve_cells(
        scenario, beta, new_assignment, allocation, cells=np.unique(targets), mode=mode,
        silent=[cell],
    )
    before_bd = power_breakdown(scenario, allocation, power_params)
    after_bd = power_breakdown(scenario, after, power_params)
    eta = np.array([p.eta_pa for p in _params(scenario, power_params)])

    involved = np.unique(targets)
    before_l = _ld(allocation, ues, eta)
    others = np.setdiff1d(np.arange(n_cells), involved)
    # everything the candidate stops consuming beyond its UEs' transmit power
    # (load-independent terms, plus any shift of the per-BS constant)
    released = float(np.sum(before_bd.per_cell[others] - after_bd.per_cell[others]) - np.sum(before_l))
    extra_li = float(np.sum(after_bd.per_cell_li[involved] - before_bd.per_cell_li[involved]))
    incumbents = np.flatnonzero(np.isin(allocation.cell_of, involved))
    extra_k2 = float(np.sum(
        _ld(after, incumbents, eta) - _ld(allocation, incumbents, eta)
    ))
    share = (released - extra_li - extra_k2) / ues.size

    after_l = _ld(after, ues, eta)
    b = beta[ues, cell]
    b_next = beta[ues, targets]
    i_before = allocation.interference[ues]
    i_after = after.interference[ues]
    if mode == "sm":
        k_new = np.array([np.sum(new_assignment.cell_of == n) for n in targets])
        a_new = np.array([scenario.cells[n].band.active_antennas for n in targets])
        gamma1 = (a_new - k_new) * i_before
        gamma2 = (scenario.cells[cell].band.active_antennas - ues.size) * i_after
    else:
        bw = scenario.cells[cell].band.prb_bandwidth
        rates = scenario.rates[ues]
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(allocation.prbs[ues] > 0, rates / (bw * allocation.prbs[ues]), 0.0)
            r2 = np.where(after.prbs[ues] > 0, rates / (bw * np.maximum(after.prbs[ues], 1e-300)), 0.0)
        gamma1 = (2.0 ** r1 - 1.0) * i_before
        gamma2 = (2.0 ** r2 - 1.0) * i_after

    gamma = np.divide(gamma2, gamma1, out=np.ones_like(gamma2), where=gamma1 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = after_l * b_next / gamma
        delta = np.where(c > 0, (before_l + share) / np.where(c > 0, c, 1.0) - 1.0 / b, np.inf)
    holds_ue = gamma / b_next <= 1.0 / b + delta + 1e-12 * np.abs(1.0 / b + delta)
    new_outage = bool(np.any(after.outage[ues]) or np.any(after.outage[incumbents] & ~allocation.outage[incumbents]))
    holds = bool(np.all(holds_ue)) and not new_outage
    return SwitchOffEvaluation(
        cell, ues, targets, gamma1, gamma2, delta, b, b_next, holds,
        power_before=before_bd.total, power_after=after_bd.total, after=after,
    )


def _params(scenario, power_params):
    from .power_model import cell_params
    return cell_params(scenario, power_params)


def _ld(state, idx, eta):
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        return np.zeros(0)
    live = ~state.outage[idx]
    return np.where(live, state.prbs[idx] * state.power[idx] / eta[state.cell_of[idx]], 0.0)
