"""scikit-learn style front end for the attribution rules."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .domain import window_filter
from .rules import attribute_session, attribute_window
from .validation import check_rule, check_session_log, check_window

ENGINES = ("rules", "matrix", "incremental")


class RevenueAttributor(TransformerMixin, BaseEstimator):
    """Attribute session revenue to the platform, its services and the channels.

    ``fit`` learns the player set of a session log and the allocation of
    the sessions ending in ``]window_start, window_end]``. ``transform``
    returns one row of per-player credit for each session passed, in the
    column order of ``players_``, regardless of the window.

    Parameters
    ----------
    rule : str or RuleSpec
        ``shapley-dd12``, ``shapley-dd13``, ``event-shapley``, ``exp:<theta>``
        or ``alpha:<file>``.
    window_start, window_end : float
        Bounds of the half-open attribution window.
    engine : {"rules", "matrix", "incremental"}
        Computation path; ``incremental`` only supports exponential rules.
    n_jobs : int
        Worker count for the per-session work in ``fit``.
    """

    def __init__(self, rule="shapley-dd12", window_start=0.0, window_end=math.inf, engine="rules", n_jobs=1):
        self.rule = rule
        self.window_start = window_start
        self.window_end = window_end
        self.engine = engine
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        log = check_session_log(X)
        self.rule_ = check_rule(self.rule)
        self.window_ = check_window(self.window_start, self.window_end)
        self.players_ = log.players()
        sessions = window_filter(log, self.window_)
        self.n_sessions_ = len(sessions)
        self.allocation_ = attribute_window(log, self.window_, self.rule_, engine=self.engine, n_jobs=self.n_jobs)
        self.total_revenue_ = math.fsum(s.revenue for s in sessions)
        total = self.total_revenue_
        self.shares_ = {p: (v / total if total else 0.0) for p, v in self.allocation_.amounts.items()}
        return self

    def transform(self, X):
        check_is_fitted(self, "allocation_")
        log = check_session_log(X)
        column = {p: j for j, p in enumerate(self.players_)}
        out = np.zeros((len(log), len(self.players_)))
        attribute = attribute_session
        if self.engine != "rules":
            from . import engine as _engine

            attribute = getattr(_engine, f"attribute_session_{self.engine}")
        for i, s in enumerate(log):
            for p, v in attribute(s, self.rule_).items():
                if p not in column:
                    raise ValueError(f"session {s.id!r} involves {p}, unseen during fit")
                out[i, column[p]] = v
        return out

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "players_")
        return np.array([str(p) for p in self.players_], dtype=object)

    def allocation_dict(self) -> dict[str, float]:
        check_is_fitted(self, "allocation_")
        return self.allocation_.by_name()
