"""Trajectory judges used for rejection sampling and re-judging curated data.

``RuleJudge`` checks the simulator's success predicates; ``ModelJudge`` asks a
backend for a verdict. Rollback variants (``q#rbN``) are judged against their
base query.
"""

from __future__ import annotations

import re
from typing import Sequence

from .env import EnvState, SimulatedWeb
from .errors import BackendUnavailable, JudgeUnavailable, ScriptMiss, UnparseableVerdict
from .evalkit import judge_trajectory
from .model import Action, Observation, QueryRecord, Trajectory
from .prompts import OFF_TRACK_SYSTEM, OFF_TRACK_USER
from .protocol import render_action

VARIANT_SEP = "#rb"

_TRACK = re.compile(r"\bOFF[ _]TRACK\b|\bON[ _]TRACK\b")


def base_query_id(query_id: str) -> str:
    return query_id.split(VARIANT_SEP, 1)[0]


def base_query(q: QueryRecord) -> QueryRecord:
    return QueryRecord(base_query_id(q.query_id), q.query_text, q.site)


class RuleJudge:
    kind = "rule_based"

    def __init__(self, web: SimulatedWeb):
        self.web = web

    def assess(self, traj: Trajectory, q: QueryRecord) -> float:
        return 1.0 if self.web.is_success(base_query(q), traj) else 0.0

    def off_track(self, q: QueryRecord, actions: Sequence[Action], observation: Observation, state: EnvState) -> bool:
        site = self.web.site(state.site_id)
        return not site.on_success_path(base_query_id(q.query_id), state.current_page)


class ModelJudge:
    kind = "model_based"

    def __init__(self, backend):
        self.backend = backend

    def assess(self, traj: Trajectory, q: QueryRecord) -> float:
        try:
            return judge_trajectory(self.backend, base_query(q), traj).score
        except (BackendUnavailable, ScriptMiss, UnparseableVerdict) as exc:
            raise JudgeUnavailable(str(exc)) from exc

    def off_track(self, q: QueryRecord, actions: Sequence[Action], observation: Observation, state: EnvState) -> bool:
        user = OFF_TRACK_USER.format(
            task=q.query_text,
            actions="\n".join(f"{i}. {render_action(a)}" for i, a in enumerate(actions, 1)) or "(none)",
            observation=observation.tree_text,
        )
        meta = {"task": "off_track", "query_id": base_query_id(q.query_id), "fingerprint": observation.fingerprint}
        try:
            reply = self.backend.complete(OFF_TRACK_SYSTEM, [{"role": "user", "content": user}], meta)
        except (BackendUnavailable, ScriptMiss) as exc:
            raise JudgeUnavailable(str(exc)) from exc
        hits = list(_TRACK.finditer(reply.text))
        if not hits:
            raise JudgeUnavailable(f"no ON/OFF TRACK verdict in {reply.text[:120]!r}")
        return hits[-1].group(0).startswith("OFF")
