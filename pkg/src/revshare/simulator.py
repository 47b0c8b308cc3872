"""Markov-chain session generator and the replicated attribution experiment.

Random streams come from numpy's PCG64. Session ``i`` of replication ``r``
draws from ``SeedSequence(seed, spawn_key=(r, i))``, so each session's owner
path is independent of the session length, the number of sessions and the
worker layout. A length-10 session therefore extends the length-5 session
with the same index.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .domain import (
    PLATFORM,
    RECOMMENDER,
    SEARCH,
    Event,
    PlayerId,
    Session,
    SessionLog,
    channel,
)
from .rules import RuleSpec, attribute_window
from .domain import ALL_TIME

STOCHASTIC_TOL = 1e-12


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class BehaviorModel:
    players: tuple[PlayerId, ...]
    initial: np.ndarray
    transition: np.ndarray
    revenue_profile: dict[PlayerId, float]
    session_length: int = 5
    sessions_per_window: int = 100
    replications: int = 10
    seed: int = 42
    stop_probability: float = 0.0

    def __post_init__(self):
        players = tuple(p if isinstance(p, PlayerId) else PlayerId.parse(p) for p in self.players)
        object.__setattr__(self, "players", players)
        initial = np.asarray(self.initial, dtype=float)
        transition = np.asarray(self.transition, dtype=float)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        profile = {
            (p if isinstance(p, PlayerId) else PlayerId.parse(p)): float(v)
            for p, v in self.revenue_profile.items()
        }
        object.__setattr__(self, "revenue_profile", profile)
        self.validate()

    def validate(self) -> None:
        n = len(self.players)
        if n == 0 or len(set(self.players)) != n:
            raise ModelError("players must be a non-empty list without repeats")
        if PLATFORM in self.players:
            raise ModelError("the platform only owns the entry event; leave it out of the chain")
        if self.initial.shape != (n,):
            raise ModelError(f"initial vector has shape {self.initial.shape}, expected ({n},)")
        if self.transition.shape != (n, n):
            raise ModelError(f"transition matrix has shape {self.transition.shape}, expected ({n}, {n})")
        if (self.initial < 0).any() or (self.transition < 0).any():
            raise ModelError("probabilities must be nonnegative")
        if abs(self.initial.sum() - 1.0) > STOCHASTIC_TOL:
            raise ModelError(f"initial vector sums to {self.initial.sum()!r}, not 1")
        for i, row in enumerate(self.transition):
            if abs(row.sum() - 1.0) > STOCHASTIC_TOL:
                raise ModelError(f"transition row {i} ({self.players[i]}) sums to {row.sum()!r}, not 1")
        unknown = set(self.revenue_profile) - set(self.players)
        if unknown:
            raise ModelError(f"revenue profile names players outside the chain: {sorted(map(str, unknown))}")
        if any(v < 0 for v in self.revenue_profile.values()):
            raise ModelError("revenues must be nonnegative")
        if self.session_length < 0 or self.sessions_per_window < 1 or self.replications < 1:
            raise ModelError("need session_length >= 0, sessions_per_window >= 1, replications >= 1")
        if not 0.0 <= self.stop_probability < 1.0:
            raise ModelError("stop_probability must lie in [0, 1)")

    def marginals(self, steps: int) -> np.ndarray:
        """Owner distribution of events 1..steps, one row per event."""
        rows, dist = [], self.initial
        for _ in range(steps):
            rows.append(dist)
            dist = dist @ self.transition
        return np.array(rows).reshape(steps, len(self.players))


def paper_model(**overrides) -> BehaviorModel:
    """Three channels, channels 1 and 2 with about twice the videos of channel 3."""
    players = (SEARCH, RECOMMENDER, channel("1"), channel("2"), channel("3"))
    model = BehaviorModel(
        players=players,
        initial=[0.25, 0.13, 0.25, 0.25, 0.12],
        transition=[
            [0.10, 0.40, 0.20, 0.20, 0.10],
            [0.00, 0.00, 0.40, 0.40, 0.20],
            [0.10, 0.50, 0.40, 0.00, 0.00],
            [0.10, 0.50, 0.00, 0.40, 0.00],
            [0.10, 0.70, 0.00, 0.00, 0.20],
        ],
        revenue_profile={channel("1"): 3.0, channel("2"): 6.0, channel("3"): 9.0, RECOMMENDER: 1.0},
    )
    return replace(model, **overrides) if overrides else model


def model_from_mapping(doc: dict) -> BehaviorModel:
    known = {
        "players", "initial", "transition", "revenue", "session_length",
        "sessions_per_window", "replications", "seed", "stop_probability",
    }
    extra = set(doc) - known
    if extra:
        raise ModelError(f"unknown model keys: {sorted(extra)}")
    missing = {"players", "initial", "transition"} - set(doc)
    if missing:
        raise ModelError(f"model is missing {sorted(missing)}")
    kwargs = {k: doc[k] for k in known - {"revenue", "players", "initial", "transition"} if k in doc}
    try:
        return BehaviorModel(
            players=tuple(doc["players"]),
            initial=doc["initial"],
            transition=doc["transition"],
            revenue_profile=doc.get("revenue", {}),
            **kwargs,
        )
    except ModelError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc)) from None


def load_model(path) -> BehaviorModel:
    """Read a behaviour model from TOML.

    Example::

        players = ["search", "recommender", "channel:1"]
        initial = [0.5, 0.25, 0.25]
        transition = [[0.1, 0.4, 0.5], [0.0, 0.0, 1.0], [0.2, 0.5, 0.3]]
        session_length = 5

        [revenue]
        "channel:1" = 3
        recommender = 1
    """
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ModelError(f"{path}: {exc}") from None
    return model_from_mapping(doc)


def model_to_toml(model: BehaviorModel) -> str:
    def row(values):
        return "[" + ", ".join(repr(float(v)) for v in values) + "]"

    lines = [
        "players = [" + ", ".join(f'"{p}"' for p in model.players) + "]",
        f"initial = {row(model.initial)}",
        "transition = [",
        *(f"  {row(r)}," for r in model.transition),
        "]",
        f"session_length = {model.session_length}",
        f"sessions_per_window = {model.sessions_per_window}",
        f"replications = {model.replications}",
        f"seed = {model.seed}",
        f"stop_probability = {model.stop_probability!r}",
        "",
        "[revenue]",
        *(f'"{p}" = {v!r}' for p, v in model.revenue_profile.items()),
    ]
    return "\n".join(lines) + "\n"


def session_rng(seed: int, replication: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication, index))))


def generate_session(
    model: BehaviorModel, rng: np.random.Generator, id: str = "s0", start_time: float = 0.0, end_time: float = 1.0
) -> Session:
    events = [Event(PLATFORM, 0.0)]
    cum_initial = np.cumsum(model.initial)
    cum_rows = np.cumsum(model.transition, axis=1)
    state = None
    for k in range(model.session_length):
        if k and model.stop_probability and rng.random() < model.stop_probability:
            break
        cdf = cum_initial if state is None else cum_rows[state]
        # clamp guards the last bin against cumsum rounding below 1
        state = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)
        owner = model.players[state]
        events.append(Event(owner, model.revenue_profile.get(owner, 0.0)))
    return Session(id, start_time, end_time, tuple(events))


def generate_window(model: BehaviorModel, replication: int) -> SessionLog:
    sessions = []
    for i in range(model.sessions_per_window):
        rng = session_rng(model.seed, replication, i)
        sessions.append(generate_session(model, rng, f"r{replication}-s{i}", float(i), float(i + 1)))
    return SessionLog(tuple(sessions))


@dataclass
class RuleShares:
    rule: str
    players: list[PlayerId]
    # replications x players; last column is the platform-side aggregate
    shares: np.ndarray

    @property
    def mean(self) -> dict[str, float]:
        return dict(zip(self.labels, self.shares.mean(axis=0)))

    @property
    def sd(self) -> dict[str, float]:
        ddof = 1 if len(self.shares) > 1 else 0
        return dict(zip(self.labels, self.shares.std(axis=0, ddof=ddof)))

    @property
    def labels(self) -> list[str]:
        return [str(p) for p in self.players] + ["W"]

    @property
    def platform_share(self) -> float:
        return float(self.shares[:, -1].mean())


@dataclass
class ExperimentTable:
    session_length: int
    rules: dict[str, RuleShares] = field(default_factory=dict)

    def long_rows(self):
        for name, rs in self.rules.items():
            mean, sd = rs.mean, rs.sd
            for label in rs.labels:
                yield {"rule": name, "length": self.session_length, "player": label,
                       "mean": mean[label], "sd": sd[label]}


def _replicate(model: BehaviorModel, rules: Sequence[RuleSpec], replication: int, engine: str):
    log = generate_window(model, replication)
    players = [PLATFORM, *model.players]
    rows = []
    for rule in rules:
        alloc = attribute_window(log, ALL_TIME, rule, engine=engine, players=players)
        total = math.fsum(s.revenue for s in log)
        amounts = [alloc[p] for p in players]
        shares = [a / total if total else 0.0 for a in amounts]
        shares.append(math.fsum(s for p, s in zip(players, shares) if p.is_platform_side))
        rows.append(shares)
    return rows


def run_experiment(
    model: BehaviorModel, rules: Sequence[RuleSpec], engine: str = "rules", n_jobs: int = 1
) -> ExperimentTable:
    """Attribute ``replications`` seeded windows under each rule and collect revenue shares."""
    if n_jobs != 1 and model.replications > 1:
        from joblib import Parallel, delayed

        per_rep = Parallel(n_jobs=n_jobs)(
            delayed(_replicate)(model, rules, r, engine) for r in range(model.replications)
        )
    else:
        per_rep = [_replicate(model, rules, r, engine) for r in range(model.replications)]
    players = [PLATFORM, *model.players]
    table = ExperimentTable(model.session_length)
    for j, rule in enumerate(rules):
        table.rules[rule.name] = RuleShares(rule.name, players, np.array([rep[j] for rep in per_rep]))
    return table


def length_sweep(
    model: BehaviorModel, lengths: Sequence[int], rules: Sequence[RuleSpec], engine: str = "rules", n_jobs: int = 1
) -> list[ExperimentTable]:
    return [run_experiment(replace(model, session_length=n), rules, engine, n_jobs) for n in lengths]
