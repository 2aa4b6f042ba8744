"""Branching by model-predictive control over simulated outcomes.

At every step ``k`` candidate actions are proposed one at a time (each
prompt lists the earlier ones), each candidate's outcome is predicted by a
simulator model, a scorer rates the prediction, and the best-scoring action
is executed. The whole deliberation is then written into the step's thought
as a ``<think>`` block.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Sequence

from .curate import CurationDataset
from .errors import BackendUnavailable, JudgeUnavailable, NoValidCandidate, ProtocolViolation, TrajforgeError
from .model import Action, Observation, QueryRecord, Step, Stop, Thought, Trajectory
from .policy import ask_agent, clip_context, context_messages, context_meta, PromptContext
from .prompts import PROPOSAL_SUFFIX, SCORING_SYSTEM, SCORING_USER, SIMULATION_FIRST, SIMULATION_NEXT, SIMULATION_SYSTEM
from .protocol import render_action
from .rollout import RolloutConfig, as_env, parallel_map, self_assess

DEFAULT_BRANCH_K = 3
DEFAULT_SIM_DEPTH = 2


@dataclass(frozen=True)
class Candidate:
    index: int
    thought: Thought
    action: Action
    simulation: str = ""
    score: float = 0.0
    score_rationale: str = ""
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "thought": self.thought.text,
            "action": render_action(self.action),
            "simulation": self.simulation,
            "score": self.score,
            "rationale": self.score_rationale,
            "flagged": self.flagged,
        }


class MeteredBackend:
    """Wraps a backend and sums the completion tokens it reports."""

    def __init__(self, backend):
        self.backend = backend
        self.tokens = 0
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, system, messages, meta=None):
        out = self.backend.complete(system, messages, meta)
        with self._lock:
            self.tokens += out.tokens
            self.calls += 1
        return out


def _describe(c: Candidate) -> str:
    return f"(Thought: {c.thought.text} Action: {render_action(c.action)})"


def propose_actions(backend, ctx: PromptContext, k: int = DEFAULT_BRANCH_K) -> list[Candidate]:
    """Up to ``k`` distinct candidate actions, in proposal order.

    A duplicate or unparseable proposal is re-requested once and then dropped.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    out: list[Candidate] = []
    seen: set[str] = set()
    for i in range(1, k + 1):
        suffix = PROPOSAL_SUFFIX.format(previous="; ".join(_describe(c) for c in out)) if out else None
        messages = context_messages(ctx, suffix)
        for attempt in range(2):
            meta = context_meta(ctx, "propose", candidate=i, attempt=attempt)
            try:
                d = ask_agent(backend, ctx.system_instructions, messages, meta)
            except ProtocolViolation:
                continue
            key = render_action(d.action)
            if key in seen:
                continue
            seen.add(key)
            out.append(Candidate(len(out) + 1, d.thought, d.action))
            break
    if not out:
        raise NoValidCandidate(f"no usable candidate action for {ctx.query_id} step {ctx.step_number}")
    return out


def simulate(backend, o: Observation, a: Action, depth: int = DEFAULT_SIM_DEPTH, query_id: str = "") -> str:
    """Chain ``depth`` outcome predictions, each fed the previous description."""
    if depth < 1:
        raise ValueError("simulation depth must be >= 1")
    action = render_action(a)
    preds: list[str] = []
    for d in range(1, depth + 1):
        if d == 1:
            user = SIMULATION_FIRST.format(observation=o.tree_text, action=action)
        else:
            user = SIMULATION_NEXT.format(observation=preds[-1])
        meta = {"task": "simulate", "query_id": query_id, "fingerprint": o.fingerprint, "action": action, "depth": d}
        preds.append(backend.complete(SIMULATION_SYSTEM, [{"role": "user", "content": user}], meta).text.strip())
    return "\n".join(preds)


class ScoreResult(NamedTuple):
    score: float
    rationale: str
    flagged: bool = False


_SCORE = re.compile(r"score\s*:\s*\{?\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+))", re.I)
_THOUGHT = re.compile(r"thought\s*:", re.I)


def parse_score(text: str) -> ScoreResult:
    hits = list(_SCORE.finditer(text))
    head = text[: hits[-1].start()] if hits else text
    tm = _THOUGHT.search(head)
    rationale = (head[tm.end():] if tm else head).strip()
    if not hits:
        return ScoreResult(0.0, rationale, True)
    raw = float(hits[-1].group(1))
    clamped = min(1.0, max(0.0, raw))
    return ScoreResult(clamped, rationale, clamped != raw)


def score_candidate(backend, q: QueryRecord, o: Observation, a: Action, sim_text: str) -> ScoreResult:
    """Ask the evaluator for ``Thought: ... Score: x``; x is clamped to [0, 1].

    A reply without a number scores 0 with ``flagged`` set.
    """
    action = render_action(a)
    user = SCORING_USER.format(task=q.query_text, observation=o.tree_text, action=action, simulation=sim_text)
    meta = {"task": "score", "query_id": q.query_id, "fingerprint": o.fingerprint, "action": action}
    return parse_score(backend.complete(SCORING_SYSTEM, [{"role": "user", "content": user}], meta).text)


def select(candidates: Sequence[Candidate]) -> Candidate:
    """Highest score; the earliest proposal wins ties."""
    if not candidates:
        raise ValueError("select needs at least one candidate")
    best = candidates[0]
    for c in candidates[1:]:
        if c.score > best.score:
            best = c
    return best


def _fmt_score(x: float) -> str:
    return str(float(x))


def verbalize_branch(candidates: Sequence[Candidate], chosen: Candidate) -> Thought:
    if chosen not in candidates:
        raise ValueError("chosen candidate is not among the candidates")
    entries = []
    for n, c in enumerate(candidates, 1):
        critic = f"{c.score_rationale} Score: {_fmt_score(c.score)}".strip()
        entries.append(
            f"{n}. Thought: {c.thought.text}\n"
            f"Possible Step: {render_action(c.action)}\n"
            f"Simulated Output: {c.simulation}\n"
            f"Critic Evaluation: {critic}"
        )
    return Thought(chosen.thought.text, "\n".join(entries).strip())


def deliberate(
    backends: Mapping[str, object], q: QueryRecord, ctx: PromptContext, k: int, depth: int
) -> tuple[list[Candidate], Candidate]:
    proposals = propose_actions(backends["proposer"], ctx, k)
    scored = []
    for c in proposals:
        sim = simulate(backends["simulator"], ctx.current, c.action, depth, q.query_id)
        s = score_candidate(backends["scorer"], q, ctx.current, c.action, sim)
        scored.append(replace(c, simulation=sim, score=s.score, score_rationale=s.rationale, flagged=s.flagged))
    return scored, select(scored)


def run_mpc_episode(
    env,
    backends: Mapping[str, object],
    q: QueryRecord,
    cfg: RolloutConfig = RolloutConfig(),
    k: int = DEFAULT_BRANCH_K,
    depth: int = DEFAULT_SIM_DEPTH,
    log: list | None = None,
) -> Trajectory:
    """Closed-loop episode where every action comes from :func:`deliberate`.

    ``backends`` maps ``proposer``, ``simulator`` and ``scorer`` to backends.
    Per-step deliberation records are appended to ``log`` when given.
    """
    for role in ("proposer", "simulator", "scorer"):
        if role not in backends:
            raise KeyError(f"missing backend for role {role!r}")
    env = as_env(env)
    state, obs = env.reset(q)
    steps: list[Step] = []
    terminal = "step_limit"
    for _ in range(cfg.max_steps):
        ctx = clip_context(steps, obs, cfg.clip_k, q.query_text, q.query_id)
        meters = {role: MeteredBackend(backends[role]) for role in ("proposer", "simulator", "scorer")}
        try:
            candidates, chosen = deliberate(meters, q, ctx, k, depth)
        except NoValidCandidate:
            terminal = "env_error"
            break
        tokens = sum(m.tokens for m in meters.values())
        steps.append(Step(obs, verbalize_branch(candidates, chosen), chosen.action, "branch", tokens))
        if log is not None:
            log.append(
                {
                    "query_id": q.query_id,
                    "step": len(steps) - 1,
                    "candidates": [c.to_dict() for c in candidates],
                    "chosen": chosen.index,
                    "tokens": {role: m.tokens for role, m in meters.items()},
                }
            )
        if isinstance(chosen.action, Stop):
            terminal = "stopped"
            break
        state, obs = env.step(state, chosen.action)
    return Trajectory(q.query_id, q.query_text, q.site, tuple(steps), terminal)


@dataclass
class BranchResult:
    dataset: CurationDataset
    trajectories: list[Trajectory]
    log: list[dict] = field(default_factory=list)
    scores: dict[str, float | None] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def tokens(self) -> int:
        return sum(t.tokens_generated for t in self.trajectories)

    def manifest(self) -> dict:
        return {
            **self.dataset.manifest(),
            "scores": self.scores,
            "errors": self.errors,
            "tokens": {t.query_id: t.tokens_generated for t in self.trajectories},
        }


def build_branch_set(
    queries: Iterable[QueryRecord],
    env,
    backends: Mapping[str, object],
    judge,
    cfg: RolloutConfig = RolloutConfig(),
    k: int = DEFAULT_BRANCH_K,
    depth: int = DEFAULT_SIM_DEPTH,
    jobs: int = 1,
    name: str = "D_B",
) -> BranchResult:
    """Run an MPC episode per query and keep the judged successes."""
    queries = list(queries)

    def one(q: QueryRecord):
        log: list = []
        try:
            traj = run_mpc_episode(env, backends, q, cfg, k, depth, log)
        except (BackendUnavailable, TrajforgeError) as exc:
            return q, None, log, None, f"{type(exc).__name__}: {exc}"
        try:
            return q, traj, log, self_assess(traj, q, judge), None
        except JudgeUnavailable as exc:
            return q, traj, log, None, f"JudgeUnavailable: {exc}"

    result = BranchResult(CurationDataset(name), [])
    kept = {}
    for q, traj, log, score, err in parallel_map(one, queries, jobs):
        result.log.extend(log)
        result.scores[q.query_id] = score
        if err:
            result.errors[q.query_id] = err
        if traj is not None:
            result.trajectories.append(traj)
            if score == 1.0:
                kept[q.query_id] = traj
    result.dataset = CurationDataset(name, kept)
    return result
