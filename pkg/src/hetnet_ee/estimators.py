"""
scikit-learn style wrappers around association and power allocation.

``UEAssigner`` treats the gain matrix as ``X`` (rows are UEs, columns are
cells) and learns which cells to switch off; ``PowerAllocator`` fits an
allocation for a given association and scores it by network EE.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import allocation as _alloc
from . import assignment as _assign
from ._validation import check_cell_index, check_gains
from .evaluation import evaluate


class UEAssigner(BaseEstimator):
    """UE-to-cell association.

    Parameters
    ----------
    algorithm : str
        One of ``greedy``, ``rematch``, ``threshold``, ``bias``,
        ``bias_rematch``, ``bias_threshold``.
    j : int
        Cells serving at most ``j`` UEs are candidates for switch-off.
    delta : float
        Relative gain-loss threshold of the threshold variants.
    bias_db : array_like or None
        Per-cell bias in dB (a per-band dict is accepted as well when
        ``cell_bands`` is passed to :meth:`fit`).
    """

    def __init__(self, algorithm="greedy", j=1, delta=1.0, bias_db=None):
        self.algorithm = algorithm
        self.j = j
        self.delta = delta
        self.bias_db = bias_db

    def _bias(self, n_cells, cell_bands):
        if self.bias_db is None:
            return None
        if isinstance(self.bias_db, dict):
            if cell_bands is None:
                raise ValueError("a per-band bias needs cell_bands")
            return np.array([float(self.bias_db.get(b, 0.0)) for b in cell_bands])
        return np.broadcast_to(np.asarray(self.bias_db, dtype=float), (n_cells,))

    def fit(self, X, y=None, cell_bands=None):
        beta = check_gains(X)
        bias = self._bias(beta.shape[1], cell_bands)
        self.assignment_ = _assign.run_algorithm(self.algorithm, beta, self.j, self.delta, bias)
        self.off_cells_ = np.array(sorted(self.assignment_.off_cells), dtype=int)
        self.labels_ = np.asarray(self.assignment_.cell_of).copy()
        self.bias_vector_ = np.zeros(beta.shape[1]) if bias is None else np.asarray(bias, dtype=float)
        self.n_features_in_ = beta.shape[1]
        return self

    def predict(self, X):
        """Associate UEs to the best cell that survived fitting (biased score)."""
        check_is_fitted(self, "assignment_")
        beta = check_gains(X)
        if beta.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} cells, got {beta.shape[1]}")
        score = beta * 10.0 ** (self.bias_vector_ / 10.0)
        score[:, self.off_cells_] = -np.inf
        return np.argmax(score, axis=1)

    def fit_predict(self, X, y=None, cell_bands=None):
        return self.fit(X, y, cell_bands).labels_


class PowerAllocator(BaseEstimator):
    """PRB allocation and power control for a fixed association.

    Parameters
    ----------
    scenario : Scenario
        Network description the gains belong to.
    mode : {"sm", "nsm", "benchmark"}
    tol : float
        Stopping tolerance in W.
    max_iter : int
    init : {"zero", "max_power"}
    power_params : PowerModelParams, dict or None
        Used by :meth:`score`.
    """

    def __init__(self, scenario=None, mode="sm", tol=1e-6, max_iter=100, init="zero", power_params=None):
        self.scenario = scenario
        self.mode = mode
        self.tol = tol
        self.max_iter = max_iter
        self.init = init
        self.power_params = power_params

    def _assignment(self, beta, y):
        if isinstance(y, _assign.Assignment):
            return y
        if y is None:
            return _assign.greedy_assign(beta)
        return _assign.Assignment(check_cell_index(y, beta.shape[0], beta.shape[1]), frozenset(),
                                  tuple(c.key for c in self.scenario.cells))

    def fit(self, X, y=None):
        """Allocate for gains ``X`` and association ``y`` (greedy when omitted)."""
        if self.scenario is None:
            raise ValueError("PowerAllocator needs a scenario")
        beta = check_gains(X)
        if beta.shape != (self.scenario.n_ues, self.scenario.n_cells):
            raise ValueError("gain matrix does not match the scenario")
        assignment = self._assignment(beta, y)
        if self.mode == "benchmark":
            state = _alloc.benchmark_allocation(self.scenario, beta, assignment)
        else:
            state = _alloc.algorithm7(self.scenario, beta, assignment, self.mode, tol=self.tol,
                                      max_iters=self.max_iter, init=self.init)
        self.state_ = state
        self.assignment_ = assignment
        self.n_iter_ = state.iterations
        self.trace_ = np.array(state.trace)
        self.power_ = state.power
        self.prbs_ = state.prbs
        self.outage_ = state.outage
        return self

    def predict(self, X=None):
        """Per-UE per-PRB power of the fitted allocation."""
        check_is_fitted(self, "state_")
        return self.power_.copy()

    def score(self, X, y=None):
        """Network energy efficiency of the fitted allocation."""
        check_is_fitted(self, "state_")
        beta = check_gains(X)
        return evaluate(self.scenario, beta, self.state_, self.power_params).ee
