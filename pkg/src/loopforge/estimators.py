"""Scikit-learn style front end: fit a loop design to an instance.

``LoopDesigner`` behaves like a (non-inductive) clustering estimator:
``fit(X)`` solves the selected model on the instance ``X``, ``labels_``
holds the loop index per actor (-1 when unassigned), ``score`` returns the
total benefit against the zero-loop baseline. ``get_params``/``set_params``
come from :class:`sklearn.base.BaseEstimator`, so the designers compose with
``clone`` and parameter search utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .benders import BendersConfig, run_benders_ml, run_benders_sl
from .cliques import build_mlcol, generate_loop_candidates
from .compact import build_mlcpct, build_slcpct
from .geometry import build_neighbourhood_graph
from .instance import Instance, baseline_objective, validate_instance
from .lp import OPTIMAL, TIME_LIMIT, SolveLimits, solve
from .metrics import KpiReport, compute_kpis
from .solution import extract_solution

MODEL_NAMES = ("slcpct", "slext", "mlcpct", "mlcol", "mlcolext")


def check_instance(X) -> Instance:
    """Validate that X is a usable Instance; raises ValueError otherwise."""
    if not isinstance(X, Instance):
        raise ValueError(f"expected an Instance, got {type(X).__name__}")
    problems = validate_instance(X)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    return X


class LoopDesigner(BaseEstimator):
    """Designs collective self-consumption loops for a prosumer instance.

    Parameters
    ----------
    model:
        One of ``slcpct`` (single-loop compact), ``slext`` (single-loop
        Benders), ``mlcpct`` (multi-loop compact), ``mlcol`` (multi-loop over
        generated candidate loops) or ``mlcolext`` (candidate loops +
        Benders).
    time_limit:
        Wall-clock budget in seconds, None for unlimited.
    rel_gap:
        Relative MILP gap for the compact/extended solves.
    max_loops:
        Loop count for ``mlcpct``; defaults to n // 2.
    tol_abs, tol_rel, max_iter:
        Benders termination controls.
    candidate_mode, max_candidates:
        Candidate-loop generation controls for the extended models.
    """

    def __init__(self, model: str = "slcpct", time_limit: float | None = None,
                 rel_gap: float = 1e-6, max_loops: int | None = None,
                 tol_abs: float = 1e-4, tol_rel: float = 1e-6,
                 max_iter: int = 500, candidate_mode: str = "three_step",
                 max_candidates: int = 100_000):
        self.model = model
        self.time_limit = time_limit
        self.rel_gap = rel_gap
        self.max_loops = max_loops
        self.tol_abs = tol_abs
        self.tol_rel = tol_rel
        self.max_iter = max_iter
        self.candidate_mode = candidate_mode
        self.max_candidates = max_candidates

    # -- sklearn-ish API ----------------------------------------------------

    def fit(self, X: Instance, y=None) -> "LoopDesigner":
        if self.model not in MODEL_NAMES:
            raise ValueError(f"unknown model {self.model!r}; "
                             f"expected one of {MODEL_NAMES}")
        instance = check_instance(X)
        graph = build_neighbourhood_graph(instance)
        limits = SolveLimits(time_limit=self.time_limit, rel_gap=self.rel_gap)
        self.instance_ = instance
        self.graph_ = graph
        self.baseline_ = baseline_objective(instance)
        self.trace_ = None
        self.candidates_ = None
        self.solution_ = None
        self.model_size_ = None

        if self.model in ("slcpct", "mlcpct", "mlcol"):
            if self.model == "slcpct":
                built = build_slcpct(instance, graph)
            elif self.model == "mlcpct":
                built = build_mlcpct(instance, graph, self.max_loops)
            else:
                self.candidates_ = generate_loop_candidates(
                    instance, graph, mode=self.candidate_mode,
                    max_candidates=self.max_candidates)
                built = build_mlcol(instance, self.candidates_, graph)
            self.model_size_ = (built.n_vars, built.n_constraints, built.n_binary)
            result = solve(built, limits)
            self.status_ = result.status
            self.objective_ = result.objective
            self.best_bound_ = result.best_bound
            if result.status == OPTIMAL:
                self.solution_ = extract_solution(self.model, built, result,
                                                  instance, graph,
                                                  candidates=self.candidates_)
            elif result.status != TIME_LIMIT:
                raise RuntimeError(f"solve failed with status {result.status}")
        else:
            config = BendersConfig(tol_abs=self.tol_abs, tol_rel=self.tol_rel,
                                   max_iter=self.max_iter,
                                   time_limit=self.time_limit)
            if self.model == "slext":
                solution, trace = run_benders_sl(instance, graph, config)
            else:
                self.candidates_ = generate_loop_candidates(
                    instance, graph, mode=self.candidate_mode,
                    max_candidates=self.max_candidates)
                solution, trace = run_benders_ml(instance, self.candidates_,
                                                 config, graph)
            self.solution_ = solution
            self.trace_ = trace
            self.status_ = trace.status if not trace.converged else OPTIMAL
            self.objective_ = solution.objective
            self.best_bound_ = trace.lower_bounds[-1] if trace.records else None

        if self.solution_ is not None:
            self.labels_ = np.array([-1 if l is None else l
                                     for l in self.solution_.loop_assignment])
            self.n_loops_ = len(self.solution_.loops)
        else:
            self.labels_ = None
            self.n_loops_ = None
        return self

    def fit_predict(self, X: Instance, y=None) -> np.ndarray:
        return self.fit(X).labels_

    def score(self, X=None, y=None) -> float:
        """Total benefit (EUR saved vs the zero-loop baseline); higher is better."""
        self._check_fitted()
        return self.baseline_ - self.objective_

    def kpis(self) -> KpiReport:
        self._check_fitted()
        if self.solution_ is None:
            raise NotFittedError("no extracted solution (solver hit its limit)")
        return compute_kpis(self.instance_, self.solution_, self.baseline_)

    def _check_fitted(self) -> None:
        if not hasattr(self, "status_"):
            raise NotFittedError("this LoopDesigner instance is not fitted yet; "
                                 "call fit(instance) first")
