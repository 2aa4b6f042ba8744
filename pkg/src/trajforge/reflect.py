"""Loop removal and lookahead re-verbalization of trajectories.

A loop is a pair of steps ``i < j`` with identical observations. Splicing
drops steps ``i .. j-1`` so the trajectory continues from step ``j`` (which
sees the same page as step ``i``); this repeats until no observation
repeats. Every remaining thought is then rewritten by a verbalizer model as
a forward-looking plan.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .backends import Completion
from .curate import CurationDataset
from .env import SimulatedWeb
from .errors import BackendUnavailable, EmptyVerbalization, JudgeUnavailable, ScriptMiss
from .model import Step, Thought, Trajectory
from .prompts import ENVIRONMENT_DESCRIPTION, LOOKAHEAD_TEMPLATE, REFINEMENT_HINTS
from .protocol import render_action
from .rollout import parallel_map, self_assess

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopReport:
    i: int
    j: int
    fingerprint: str

    def to_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "fingerprint": self.fingerprint}


def detect_loop(traj: Trajectory) -> LoopReport | None:
    """Smallest ``i`` with a repeated observation, paired with its last repeat ``j``."""
    fps = traj.fingerprints
    last: dict[str, int] = {}
    for idx, fp in enumerate(fps):
        last[fp] = idx
    for i, fp in enumerate(fps):
        if last[fp] > i:
            return LoopReport(i, last[fp], fp)
    return None


def splice(traj: Trajectory, r: LoopReport) -> Trajectory:
    if not 0 <= r.i < r.j < len(traj):
        raise ValueError(f"loop ({r.i}, {r.j}) out of range for a {len(traj)}-step trajectory")
    if traj.steps[r.i].observation != traj.steps[r.j].observation:
        raise ValueError(f"steps {r.i} and {r.j} do not share an observation")
    return traj.with_steps(traj.steps[: r.i] + traj.steps[r.j:])


def splice_to_fixpoint(traj: Trajectory) -> tuple[Trajectory, list[LoopReport]]:
    reports = []
    while (r := detect_loop(traj)) is not None:
        reports.append(r)
        traj = splice(traj, r)
    return traj, reports


def _render_steps(steps: Sequence[Step], start: int) -> str:
    if not steps:
        return "(none)"
    return "\n".join(
        f"Step {n}: Thought: {s.thought.text} Action: {render_action(s.action)}" for n, s in enumerate(steps, start + 1)
    )


def lookahead_prompt(traj: Trajectory, t_c: int) -> str:
    if not 0 <= t_c < len(traj):
        raise IndexError(f"step {t_c} out of range for a {len(traj)}-step trajectory")
    cur = traj.steps[t_c]
    action = render_action(cur.action)
    return LOOKAHEAD_TEMPLATE.format(
        environment=ENVIRONMENT_DESCRIPTION,
        refinement_hints=REFINEMENT_HINTS.format(action=action),
        demonstration=cur.thought.text,
        task=traj.query_text,
        history=_render_steps(traj.steps[:t_c], 0),
        observation=cur.observation.tree_text,
        action=action,
        lookahead=_render_steps(traj.steps[t_c + 1:], t_c + 1),
    )


def lookahead_completion(traj: Trajectory, t_c: int, verbalizer) -> Completion:
    prompt = lookahead_prompt(traj, t_c)
    cur = traj.steps[t_c]
    meta = {
        "task": "verbalize_lookahead",
        "query_id": traj.query_id,
        "step": t_c,
        "fingerprint": cur.observation.fingerprint,
        "action": render_action(cur.action),
    }
    out = verbalizer.complete("", [{"role": "user", "content": prompt}], meta)
    if not out.text.strip():
        raise EmptyVerbalization(f"empty lookahead thought for {traj.query_id} step {t_c}")
    return out


def verbalize_lookahead(traj: Trajectory, t_c: int, verbalizer) -> Thought:
    return Thought(lookahead_completion(traj, t_c, verbalizer).text.strip())


def reverbalize(traj: Trajectory, verbalizer) -> Trajectory:
    """Replace every thought with a lookahead thought; observations and actions are kept."""
    new_steps = []
    for t, s in enumerate(traj.steps):
        out = lookahead_completion(traj, t, verbalizer)
        new_steps.append(Step(s.observation, Thought(out.text.strip()), s.action, "lookahead", out.tokens))
    return traj.with_steps(new_steps)


@dataclass
class ReflectionResult:
    dataset: CurationDataset
    reports: list[dict] = field(default_factory=list)

    @property
    def tokens(self) -> int:
        return sum(r.get("tokens", 0) for r in self.reports)


def build_reflection_set(
    pool: Iterable[Trajectory],
    judge,
    verbalizer,
    web: SimulatedWeb,
    refine_all: bool = False,
    jobs: int = 1,
    name: str = "D_L",
) -> ReflectionResult:
    """Splice looping trajectories, replay-check them, re-verbalize and re-judge.

    Loop-free trajectories are skipped unless ``refine_all`` is set, which
    produces the variant that rewrites every trajectory.
    """
    pool = list(pool)

    def one(traj: Trajectory) -> tuple[Trajectory | None, dict]:
        refined, loops = splice_to_fixpoint(traj)
        report = {
            "query_id": traj.query_id,
            "loops": [r.to_dict() for r in loops],
            "original_length": len(traj),
            "refined_length": len(refined),
            "tokens": 0,
        }
        if not loops and not refine_all:
            return None, {**report, "outcome": "no_loop"}
        if not refined.steps:
            return None, {**report, "outcome": "empty"}
        q = traj.query()
        _, seen = web.replay(q, refined.actions[:-1])
        if [o.fingerprint for o in seen] != refined.fingerprints:
            return None, {**report, "outcome": "replay_mismatch"}
        try:
            verbal = reverbalize(refined, verbalizer)
        except (BackendUnavailable, ScriptMiss, EmptyVerbalization) as exc:
            return None, {**report, "outcome": "verbalizer_error", "error": str(exc)}
        report["tokens"] = verbal.tokens_generated
        try:
            score = self_assess(verbal, q, judge)
        except JudgeUnavailable as exc:
            return None, {**report, "outcome": "judge_error", "error": str(exc)}
        if score != 1.0:
            return None, {**report, "outcome": "not_success"}
        return verbal, {**report, "outcome": "kept"}

    kept: dict[str, Trajectory] = {}
    reports = []
    for traj, report in parallel_map(one, pool, jobs):
        reports.append(report)
        if traj is not None and traj.query_id not in kept:
            kept[traj.query_id] = traj
    return ReflectionResult(CurationDataset(name, kept), reports)
