"""Episode loop and rejection sampling."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Literal, Sequence, TypeVar

from .curate import CurationDataset
from .env import SimulatedWeb, SiteSpec
from .errors import BackendUnavailable, JudgeUnavailable, ProtocolViolation, TrajforgeError
from .model import QueryRecord, Step, Stop, Trajectory
from .policy import DEFAULT_CLIP_K, clip_context, decide

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class RolloutConfig:
    max_steps: int = 15
    clip_k: int = DEFAULT_CLIP_K
    judge: Literal["rule_based", "model_based"] = "rule_based"

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.clip_k < 1:
            raise ValueError("clip_k must be >= 1")


def as_env(env) -> SimulatedWeb:
    return SimulatedWeb([env]) if isinstance(env, SiteSpec) else env


def run_episode(env, backend, q: QueryRecord, cfg: RolloutConfig = RolloutConfig()) -> Trajectory:
    """Roll the policy out until it stops, hits ``max_steps``, or breaks protocol.

    A reply that is still malformed after the policy's reprompt ends the
    episode with ``terminal="env_error"``; in that case the trajectory may be
    empty.
    """
    env = as_env(env)
    state, obs = env.reset(q)
    steps: list[Step] = []
    terminal = "step_limit"
    for _ in range(cfg.max_steps):
        ctx = clip_context(steps, obs, cfg.clip_k, q.query_text, q.query_id)
        try:
            d = decide(backend, ctx)
        except ProtocolViolation as exc:
            log.info("query %s: protocol violation at step %d: %s", q.query_id, len(steps) + 1, exc)
            terminal = "env_error"
            break
        steps.append(Step(obs, d.thought, d.action, "self", d.tokens))
        if isinstance(d.action, Stop):
            terminal = "stopped"
            break
        state, obs = env.step(state, d.action)
    return Trajectory(q.query_id, q.query_text, q.site, tuple(steps), terminal)


def self_assess(traj: Trajectory, q: QueryRecord, judge) -> float:
    """Score in [0, 1]; ``judge`` is a :class:`~trajforge.judges.RuleJudge` or ``ModelJudge``."""
    score = judge.assess(traj, q)
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"judge returned out-of-range score {score}")
    return score


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """Order-preserving map; ``jobs > 1`` runs items on a thread pool."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class RejectionResult:
    dataset: CurationDataset
    trajectories: list[Trajectory]
    scores: dict[str, float | None] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def query_set(self) -> frozenset[str]:
        return self.dataset.query_set

    def manifest(self) -> dict:
        return {
            **self.dataset.manifest(),
            "scores": self.scores,
            "errors": self.errors,
            "tokens": {t.query_id: t.tokens_generated for t in self.trajectories},
        }


def rejection_sample(
    queries: Iterable[QueryRecord],
    run: Callable[[QueryRecord], Trajectory],
    judge,
    jobs: int = 1,
    name: str = "D_rej",
) -> RejectionResult:
    """Run one episode per query and keep the trajectories the judge scores 1."""
    queries = list(queries)

    def one(q: QueryRecord):
        try:
            traj = run(q)
        except (BackendUnavailable, TrajforgeError) as exc:
            return q, None, None, f"{type(exc).__name__}: {exc}"
        try:
            return q, traj, self_assess(traj, q, judge), None
        except JudgeUnavailable as exc:
            return q, traj, None, f"JudgeUnavailable: {exc}"

    trajs, scores, errors, kept = [], {}, {}, []
    for q, traj, score, err in parallel_map(one, queries, jobs):
        scores[q.query_id] = score
        if err:
            errors[q.query_id] = err
        if traj is not None:
            trajs.append(traj)
            if score == 1.0:
                kept.append(traj)
    return RejectionResult(CurationDataset.from_trajectories(name, kept), trajs, scores, errors)
