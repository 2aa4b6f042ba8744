"""Value types for web-navigation trajectories.

Everything here is immutable so trajectories can be passed freely between
worker threads. JSON (de)serialization lives next to the types because the
on-disk layout is part of the public contract.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Literal, Union

# --- actions -----------------------------------------------------------------


@dataclass(frozen=True)
class Click:
    element_id: int


@dataclass(frozen=True)
class Type:
    element_id: int
    content: str
    press_enter: bool = True


@dataclass(frozen=True)
class Scroll:
    direction: Literal["up", "down"]


@dataclass(frozen=True)
class GoBack:
    pass


@dataclass(frozen=True)
class Restart:
    pass


@dataclass(frozen=True)
class Stop:
    answer: str = ""


Action = Union[Click, Type, Scroll, GoBack, Restart, Stop]
ACTION_TYPES = (Click, Type, Scroll, GoBack, Restart, Stop)


# --- observations ------------------------------------------------------------

_WS_RUN = re.compile(r"[ \t\f\v]+")


def normalize_tree(text: str) -> str:
    """Collapse whitespace runs, strip line ends and drop trailing blank lines."""
    lines = [_WS_RUN.sub(" ", line).rstrip() for line in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines)


Normalizer = Callable[[str], str]


def fingerprint_text(text: str, normalizer: Normalizer = normalize_tree) -> str:
    return hashlib.sha256(normalizer(text).encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class Observation:
    """Serialized accessibility tree plus its normalized digest.

    Equality and hashing use the fingerprint only, so two trees that differ
    in insignificant whitespace compare equal.
    """

    tree_text: str
    fingerprint: str = ""

    def __post_init__(self):
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", fingerprint_text(self.tree_text))

    @classmethod
    def from_text(cls, text: str, normalizer: Normalizer = normalize_tree) -> "Observation":
        return cls(text, fingerprint_text(text, normalizer))

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)


# --- trajectory --------------------------------------------------------------


@dataclass(frozen=True)
class Thought:
    text: str
    think_block: str | None = None


Provenance = Literal["self", "lookahead", "branch", "rollback"]
PROVENANCES = ("self", "lookahead", "branch", "rollback")

Terminal = Literal["stopped", "step_limit", "env_error", "truncated"]
TERMINALS = ("stopped", "step_limit", "env_error", "truncated")


@dataclass(frozen=True)
class Step:
    observation: Observation
    thought: Thought
    action: Action
    provenance: Provenance = "self"
    tokens: int = 0

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.tokens < 0:
            raise ValueError("tokens must be non-negative")


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    query_text: str
    site: str


@dataclass(frozen=True)
class Trajectory:
    query_id: str
    query_text: str
    site: str
    steps: tuple[Step, ...] = ()
    terminal: Terminal = "stopped"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.terminal not in TERMINALS:
            raise ValueError(f"unknown terminal {self.terminal!r}")
        if self.terminal == "stopped" and (not self.steps or not isinstance(self.steps[-1].action, Stop)):
            raise ValueError("a stopped trajectory must end with a stop action")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def tokens_generated(self) -> int:
        return sum(s.tokens for s in self.steps)

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps]

    @property
    def fingerprints(self) -> list[str]:
        return [s.observation.fingerprint for s in self.steps]

    @property
    def answer(self) -> str | None:
        if self.steps and isinstance(self.steps[-1].action, Stop):
            return self.steps[-1].action.answer
        return None

    def query(self) -> QueryRecord:
        return QueryRecord(self.query_id, self.query_text, self.site)

    def with_steps(self, steps: Iterable[Step], **changes) -> "Trajectory":
        return replace(self, steps=tuple(steps), **changes)


# --- serialization -----------------------------------------------------------


def step_to_dict(step: Step) -> dict:
    from .protocol import render_action

    return {
        "observation": step.observation.tree_text,
        "thought": step.thought.text,
        "think_block": step.thought.think_block,
        "action": render_action(step.action),
        "provenance": step.provenance,
        "tokens": step.tokens,
    }


def step_from_dict(d: dict) -> Step:
    from .protocol import parse_action

    return Step(
        observation=Observation(d["observation"]),
        thought=Thought(d["thought"], d.get("think_block")),
        action=parse_action(d["action"]),
        provenance=d.get("provenance", "self"),
        tokens=int(d.get("tokens", 0)),
    )


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "query_id": traj.query_id,
        "query_text": traj.query_text,
        "site": traj.site,
        "steps": [step_to_dict(s) for s in traj.steps],
        "terminal": traj.terminal,
    }


def trajectory_from_dict(d: dict) -> Trajectory:
    return Trajectory(
        query_id=d["query_id"],
        query_text=d["query_text"],
        site=d["site"],
        steps=tuple(step_from_dict(s) for s in d["steps"]),
        terminal=d["terminal"],
    )


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def write_jsonl(path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")
            n += 1
    return n


def read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_trajectories(path, trajs: Iterable[Trajectory]) -> int:
    return write_jsonl(path, (trajectory_to_dict(t) for t in trajs))


def read_trajectories(path) -> list[Trajectory]:
    return [trajectory_from_dict(d) for d in read_jsonl(path)]


def read_queries(path) -> list[QueryRecord]:
    queries = [QueryRecord(d["query_id"], d["query_text"], d["site"]) for d in read_jsonl(path)]
    seen: set[str] = set()
    for q in queries:
        if q.query_id in seen:
            raise ValueError(f"duplicate query_id {q.query_id!r}")
        seen.add(q.query_id)
    return queries
