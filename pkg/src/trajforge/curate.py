"""Query-indexed trajectory datasets, the cumulative union chain, and SFT export."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .model import Trajectory, read_trajectories, write_trajectories
from .policy import DEFAULT_CLIP_K, clip_context, render_context
from .prompts import SYSTEM_PROMPT
from .protocol import render_agent_reply


@dataclass(frozen=True)
class CurationDataset:
    """At most one trajectory per query id, in insertion order."""

    name: str
    entries: Mapping[str, Trajectory] = field(default_factory=dict)
    parent: str | None = None
    added_query_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))
        for qid, traj in self.entries.items():
            if traj.query_id != qid:
                raise ValueError(f"entry key {qid!r} does not match trajectory query_id {traj.query_id!r}")

    @classmethod
    def from_trajectories(cls, name: str, trajs: Iterable[Trajectory]) -> "CurationDataset":
        entries: dict[str, Trajectory] = {}
        for t in trajs:
            if t.query_id in entries:
                raise ValueError(f"dataset {name!r} already has a trajectory for {t.query_id!r}")
            entries[t.query_id] = t
        return cls(name, entries)

    @property
    def query_set(self) -> frozenset[str]:
        return frozenset(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.entries.values())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.entries

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "parent": self.parent,
            "added_query_ids": list(self.added_query_ids),
            "counts": {
                "total": len(self),
                "added": len(self.added_query_ids),
                "steps": sum(len(t) for t in self),
            },
        }

    def save(self, path) -> int:
        return write_trajectories(path, self)

    @classmethod
    def load(cls, path, name: str) -> "CurationDataset":
        return cls.from_trajectories(name, read_trajectories(path))


def cumulative_union(base: CurationDataset, addition: CurationDataset, name: str | None = None) -> CurationDataset:
    """``base`` plus every entry of ``addition`` whose query is not already solved in ``base``."""
    entries = dict(base.entries)
    added = []
    for qid, traj in addition.entries.items():
        if qid not in entries:
            entries[qid] = traj
            added.append(qid)
    return CurationDataset(name or f"{base.name}+{addition.name}", entries, parent=base.name, added_query_ids=tuple(added))


def build_pipeline_datasets(
    d_rej: CurationDataset, d_l: CurationDataset, d_b: CurationDataset, d_r: CurationDataset
) -> dict[str, CurationDataset]:
    d_l_c = cumulative_union(d_rej, d_l, "D_L_c")
    d_b_c = cumulative_union(d_l_c, d_b, "D_B_c")
    d_r_c = cumulative_union(d_b_c, d_r, "D_R_c")
    return {"D_L_c": d_l_c, "D_B_c": d_b_c, "D_R_c": d_r_c}


@dataclass(frozen=True)
class SftRecord:
    system: str
    user_context: str
    target: str
    meta: dict

    def to_chat(self) -> dict:
        return {
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user_context},
                {"role": "assistant", "content": self.target},
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_chat(cls, d: dict) -> "SftRecord":
        roles = {m["role"]: m["content"] for m in d["messages"]}
        return cls(roles["system"], roles["user"], roles["assistant"], dict(d.get("meta", {})))


def export_sft(ds: CurationDataset, clip_k: int = DEFAULT_CLIP_K, system_prompt: str = SYSTEM_PROMPT) -> Iterator[SftRecord]:
    """One record per step: the clipped context before the step, and its thought + action as target."""
    for traj in ds:
        for t, step in enumerate(traj.steps):
            ctx = clip_context(traj.steps[:t], step.observation, clip_k, traj.query_text, traj.query_id, system_prompt)
            yield SftRecord(
                system=system_prompt,
                user_context=render_context(ctx),
                target=render_agent_reply(step.thought, step.action),
                meta={"query_id": traj.query_id, "step_index": t, "provenance": step.provenance, "clip_k": clip_k},
            )


@dataclass(frozen=True)
class DatasetDiff:
    only_a: frozenset[str]
    only_b: frozenset[str]
    shared: frozenset[str]

    def to_dict(self) -> dict:
        return {k: sorted(getattr(self, k)) for k in ("only_a", "only_b", "shared")}


def dataset_diff(a: CurationDataset, b: CurationDataset) -> DatasetDiff:
    qa, qb = a.query_set, b.query_set
    return DatasetDiff(qa - qb, qb - qa, qa & qb)
