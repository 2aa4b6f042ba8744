"""Synthetic rollback trajectories.

Starting from a successful trajectory, a pivot step ``j`` is chosen, a
different action is requested for it, and the action is executed in the
simulator. If it lands somewhere new and that page is confirmed to be off
track, a ``goback`` step with a recovery rationale is recorded. By default
the original path is then appended from step ``j`` so the variant still
finishes the task.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping

from .curate import CurationDataset
from .env import EnvState, SimulatedWeb
from .errors import (
    BackendUnavailable,
    JudgeUnavailable,
    NoAlternative,
    ProtocolViolation,
    ReplayMismatch,
    ScriptMiss,
    WrongRecoveryAction,
)
from .judges import VARIANT_SEP
from .model import Action, GoBack, Observation, Step, Stop, Thought, Trajectory
from .policy import DEFAULT_CLIP_K, PromptContext, ask_agent, clip_context, context_messages, context_meta
from .prompts import ALTERNATIVE_SUFFIX, GOBACK_TEMPLATE, SYSTEM_PROMPT
from .protocol import render_action

log = logging.getLogger(__name__)

Mode = Literal["continue", "truncate"]
Outcome = Literal["kept", "no_alternative", "same_observation", "not_failure", "wrong_recovery", "replay_mismatch", "error"]


def variant_id(base_query_id: str, pivot: int) -> str:
    return f"{base_query_id}{VARIANT_SEP}{pivot}"


def _derive_seed(seed: int, query_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{query_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def sample_pivots(traj: Trajectory, n: int, seed: int) -> list[int]:
    """``n`` distinct pivot indices drawn from every step except the last."""
    candidates = len(traj) - 1
    if n < 1 or n > candidates:
        raise ValueError(f"cannot sample {n} pivots from a {len(traj)}-step trajectory")
    return random.Random(seed).sample(range(candidates), n)


@dataclass(frozen=True)
class Alternative:
    thought: Thought
    action: Action
    tokens: int = 0


def alternative_action(backend, o_j: Observation, a_j: Action, ctx: PromptContext) -> Alternative:
    """Ask for an action other than ``a_j``; one retry on a collision."""
    suffix = ALTERNATIVE_SUFFIX.format(action=render_action(a_j))
    messages = context_messages(ctx, suffix)
    tokens = 0
    for attempt in range(2):
        meta = context_meta(ctx, "alternative", attempt=attempt, original=render_action(a_j))
        try:
            d = ask_agent(backend, ctx.system_instructions, messages, meta)
        except ProtocolViolation:
            continue
        tokens += d.tokens
        if render_action(d.action) != render_action(a_j):
            return Alternative(d.thought, d.action, tokens)
    raise NoAlternative(f"no alternative to {render_action(a_j)!r} for {ctx.query_id}")


@dataclass(frozen=True)
class Divergence:
    observation: Observation
    state: EnvState


def materialize_divergence(web: SimulatedWeb, base: Trajectory, j: int, alt: Action) -> Divergence | None:
    """Replay the first ``j`` actions, execute ``alt``, and keep the result only if it differs from step ``j+1``."""
    if not 0 <= j < len(base) - 1:
        raise ValueError(f"pivot {j} out of range")
    if isinstance(alt, Stop):
        return None
    q = base.query()
    state, _ = web.replay(q, base.actions[:j])
    state, obs = web.step(state, alt)
    if obs.fingerprint == base.steps[j + 1].observation.fingerprint:
        return None
    return Divergence(obs, state)


def confirm_failure(judge, base: Trajectory, j: int, alt: Action, div: Divergence) -> bool:
    return judge.off_track(base.query(), [*base.actions[:j], alt], div.observation, div.state)


def build_goback_thought(backend, o_j: Observation, o_div: Observation, alt: Action, query_id: str = "") -> Alternative:
    """Recovery rationale whose action must be ``goback``; one re-prompt, then failure."""
    user = GOBACK_TEMPLATE.format(
        action=render_action(alt), last_observation=o_j.tree_text, current_observation=o_div.tree_text
    )
    tokens = 0
    for attempt in range(2):
        meta = {"task": "goback", "query_id": query_id, "fingerprint": o_div.fingerprint, "attempt": attempt}
        try:
            d = ask_agent(backend, SYSTEM_PROMPT, [{"role": "user", "content": user}], meta)
        except ProtocolViolation:
            continue
        tokens += d.tokens
        if isinstance(d.action, GoBack):
            return Alternative(d.thought, d.action, tokens)
    raise WrongRecoveryAction(f"recovery reply for {query_id} never chose goback")


def assemble_rollback_trajectory(
    web: SimulatedWeb,
    base: Trajectory,
    j: int,
    alt: Alternative,
    div: Divergence,
    recovery: Alternative,
    mode: Mode = "continue",
    strict_thought: bool = False,
) -> Trajectory:
    """Prefix, the detour step, the goback step, then (``continue``) the original suffix.

    The result is replayed in the simulator; any divergence from the recorded
    observations raises :class:`ReplayMismatch`. ``strict_thought`` pairs the
    detour action with the original thought instead of the alternative one.
    """
    if mode not in ("continue", "truncate"):
        raise ValueError(f"unknown mode {mode!r}")
    o_j = base.steps[j].observation
    detour_thought = base.steps[j].thought if strict_thought else alt.thought
    steps = list(base.steps[:j])
    steps.append(Step(o_j, detour_thought, alt.action, "rollback", alt.tokens))
    steps.append(Step(div.observation, recovery.thought, GoBack(), "rollback", recovery.tokens))
    if mode == "continue":
        steps.extend(base.steps[j:])
    terminal = base.terminal if mode == "continue" else "truncated"
    traj = base.with_steps(steps, query_id=variant_id(base.query_id, j), terminal=terminal)

    q = base.query()
    executed = traj.actions if mode == "truncate" else traj.actions[:-1]
    _, seen = web.replay(q, executed)
    expected = traj.fingerprints
    if mode == "truncate":
        # the goback must land back on o_j even though no step records it
        expected = expected + [o_j.fingerprint]
    if [o.fingerprint for o in seen] != expected:
        raise ReplayMismatch(f"{traj.query_id}: replay diverges from the assembled trajectory")
    return traj


@dataclass
class RollbackResult:
    dataset: CurationDataset
    reports: list[dict] = field(default_factory=list)

    @property
    def tokens(self) -> int:
        return sum(r.get("tokens", 0) for r in self.reports)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.reports:
            out[r["outcome"]] = out.get(r["outcome"], 0) + 1
        return out


def synthesize_variant(
    web: SimulatedWeb,
    base: Trajectory,
    j: int,
    backends: Mapping[str, object],
    judge,
    mode: Mode = "continue",
    clip_k: int = DEFAULT_CLIP_K,
    strict_thought: bool = False,
) -> tuple[Trajectory | None, dict]:
    report = {"base_query_id": base.query_id, "variant_id": variant_id(base.query_id, j), "pivot": j, "tokens": 0}
    o_j, a_j = base.steps[j].observation, base.steps[j].action
    ctx = clip_context(base.steps[:j], o_j, clip_k, base.query_text, base.query_id)
    try:
        alt = alternative_action(backends["proposer"], o_j, a_j, ctx)
    except NoAlternative:
        return None, {**report, "outcome": "no_alternative"}
    report["tokens"] += alt.tokens
    report["alternative"] = render_action(alt.action)
    div = materialize_divergence(web, base, j, alt.action)
    if div is None:
        return None, {**report, "outcome": "same_observation"}
    if not confirm_failure(judge, base, j, alt.action, div):
        return None, {**report, "outcome": "not_failure"}
    try:
        recovery = build_goback_thought(backends["verbalizer"], o_j, div.observation, alt.action, base.query_id)
    except WrongRecoveryAction:
        return None, {**report, "outcome": "wrong_recovery"}
    report["tokens"] += recovery.tokens
    try:
        traj = assemble_rollback_trajectory(web, base, j, alt, div, recovery, mode, strict_thought)
    except ReplayMismatch:
        return None, {**report, "outcome": "replay_mismatch"}
    return traj, {**report, "outcome": "kept"}


def build_rollback_set(
    pool: Iterable[Trajectory],
    n: int,
    backends: Mapping[str, object],
    judge,
    web: SimulatedWeb,
    seed: int = 42,
    mode: Mode = "continue",
    clip_k: int = DEFAULT_CLIP_K,
    strict_thought: bool = False,
    name: str = "D_R",
) -> RollbackResult:
    """Synthesize up to ``n`` variants per base trajectory.

    ``pool`` should hold successful trajectories; the first trajectory seen
    for a query is its base. Pivots are seeded per base query so results do
    not depend on pool order. Bases too short for ``n`` pivots use all of
    their non-final steps.
    """
    bases: dict[str, Trajectory] = {}
    for t in pool:
        if t.terminal == "stopped" and len(t) >= 2:
            bases.setdefault(t.query_id, t)
    if not bases:
        return RollbackResult(CurationDataset(name))

    kept: dict[str, Trajectory] = {}
    reports = []
    for qid, base in bases.items():
        pivots = sample_pivots(base, min(n, len(base) - 1), _derive_seed(seed, qid))
        for j in pivots:
            try:
                traj, report = synthesize_variant(web, base, j, backends, judge, mode, clip_k, strict_thought)
            except (BackendUnavailable, ScriptMiss, JudgeUnavailable) as exc:
                traj, report = None, {"base_query_id": qid, "variant_id": variant_id(qid, j), "pivot": j, "outcome": "error", "error": str(exc), "tokens": 0}
            reports.append(report)
            if traj is not None:
                kept[traj.query_id] = traj
    return RollbackResult(CurationDataset(name, kept), reports)
