"""Revenue attribution for video platforms via dynamic cooperative games."""

from .domain import (
    ALL_TIME,
    PLATFORM,
    RECOMMENDER,
    SEARCH,
    Allocation,
    Event,
    PlayerId,
    PlayerKind,
    Session,
    SessionLog,
    SessionLogError,
    SessionLogSyntaxError,
    SessionValidationError,
    TimeWindow,
    channel,
    parse_session_log,
    read_session_log,
    serialize_session_log,
    table1_log,
    total_revenue,
    window_filter,
)
from .estimator import RevenueAttributor
from .games import GameKind, session_value, window_value
from .rules import (
    EVENT_SHAPLEY,
    SHAPLEY_DD12,
    SHAPLEY_DD13,
    AttenuationFn,
    RuleKind,
    RuleSpec,
    attribute_session,
    attribute_window,
    exponential,
    tabulated,
)

__version__ = "0.1.0"
