"""Input coercion shared by the estimator and the command line."""

from __future__ import annotations

import math
import os
from typing import Iterable

from .domain import Session, SessionLog, TimeWindow, parse_session_log, read_session_log, session_from_record
from .rules import RuleSpec


def check_session_log(X) -> SessionLog:
    """Coerce ``X`` to a SessionLog.

    Accepts a SessionLog, an iterable of Session objects or JSON-style
    records, JSONL text/bytes, or a path to a JSONL file.
    """
    if isinstance(X, SessionLog):
        return X
    if isinstance(X, os.PathLike):
        return read_session_log(X)
    if isinstance(X, (str, bytes)):
        text = X.decode("utf-8") if isinstance(X, bytes) else X
        if "\n" not in text.strip() and not text.lstrip().startswith("{") and os.path.exists(text):
            return read_session_log(text)
        return parse_session_log(text)
    if isinstance(X, Iterable):
        sessions = []
        for i, item in enumerate(X):
            if isinstance(item, Session):
                sessions.append(item)
            elif isinstance(item, dict):
                sessions.append(session_from_record(item, i + 1))
            else:
                raise TypeError(f"item {i} is a {type(item).__name__}, expected a Session or a record dict")
        return SessionLog(tuple(sessions))
    raise TypeError(f"cannot read sessions from {type(X).__name__}")


def check_rule(rule) -> RuleSpec:
    if isinstance(rule, RuleSpec):
        return rule
    if isinstance(rule, str):
        return RuleSpec.parse(rule)
    raise TypeError(f"rule must be a RuleSpec or a rule name, got {type(rule).__name__}")


def check_window(t1, t2) -> TimeWindow:
    t1, t2 = float(t1), float(t2)
    if math.isnan(t1) or math.isnan(t2):
        raise ValueError("window bounds must not be NaN")
    return TimeWindow(t1, t2)
