"""Agent policy: clipped prompt context plus one model call per step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .errors import ProtocolError, ProtocolViolation
from .model import Action, Observation, Thought
from .prompts import FORMAT_REMINDER, SYSTEM_PROMPT
from .protocol import parse_agent_reply, render_action

DEFAULT_CLIP_K = 3


@dataclass(frozen=True)
class HistoryEntry:
    thought: Thought
    action: Action
    observation: Observation | None = None


@dataclass(frozen=True)
class PromptContext:
    system_instructions: str
    query_id: str
    query_text: str
    entries: tuple[HistoryEntry, ...]
    current: Observation
    k: int

    @property
    def step_number(self) -> int:
        return len(self.entries) + 1

    @property
    def observations(self) -> list[Observation]:
        """Every observation visible in the context, current one last."""
        return [e.observation for e in self.entries if e.observation is not None] + [self.current]


def clip_context(
    history: Sequence,
    current: Observation,
    k: int = DEFAULT_CLIP_K,
    query_text: str = "",
    query_id: str = "",
    system: str = SYSTEM_PROMPT,
) -> PromptContext:
    """Keep every prior (thought, action) but only the last ``k - 1`` prior observations.

    ``history`` items need ``thought``, ``action`` and ``observation``
    attributes, so both trajectory steps and the entries of an existing
    context are accepted; an entry whose observation was already dropped stays
    dropped.
    """
    if k < 1:
        raise ValueError("clip window k must be >= 1")
    keep_from = len(history) - (k - 1)
    entries = tuple(
        HistoryEntry(h.thought, h.action, h.observation if i >= keep_from else None)
        for i, h in enumerate(history)
    )
    return PromptContext(system, query_id, query_text, entries, current, k)


def render_context(ctx: PromptContext) -> str:
    parts = [f"The user's objective: {ctx.query_text}"]
    if ctx.entries:
        parts.append("The previous actions:")
        for i, e in enumerate(ctx.entries, 1):
            block = [f"Step {i}:"]
            if e.observation is not None:
                block.append(f"Observation:\n{e.observation.tree_text}")
            block.append(f"Thought: {e.thought.text}")
            block.append(f"Action: ```{render_action(e.action)}```")
            parts.append("\n".join(block))
    parts.append(f"The current observation (web page's accessibility tree):\n{ctx.current.tree_text}")
    return "\n\n".join(parts)


def context_messages(ctx: PromptContext, suffix: str | None = None) -> list[dict]:
    text = render_context(ctx)
    if suffix:
        text = f"{text}\n\n{suffix}"
    return [{"role": "user", "content": text}]


def context_meta(ctx: PromptContext, task: str, **extra) -> dict:
    return {"task": task, "query_id": ctx.query_id, "fingerprint": ctx.current.fingerprint, "step": ctx.step_number, **extra}


@dataclass(frozen=True)
class Decision:
    thought: Thought
    action: Action
    tokens: int


def ask_agent(backend, system: str, messages: list[dict], meta: Mapping[str, Any]) -> Decision:
    """Call the backend and parse a thought/action reply, reprompting once on a format error."""
    reply = backend.complete(system, messages, dict(meta))
    tokens = reply.tokens
    try:
        thought, action = parse_agent_reply(reply.text)
        return Decision(thought, action, tokens)
    except ProtocolError:
        pass
    retry_messages = [*messages, {"role": "assistant", "content": reply.text}, {"role": "user", "content": FORMAT_REMINDER}]
    reply = backend.complete(system, retry_messages, {**meta, "retry": 1})
    tokens += reply.tokens
    try:
        thought, action = parse_agent_reply(reply.text)
    except ProtocolError as exc:
        raise ProtocolViolation(f"reply still malformed after reprompt: {exc}", exc) from exc
    return Decision(thought, action, tokens)


def decide(backend, ctx: PromptContext, **meta) -> Decision:
    return ask_agent(backend, ctx.system_instructions, context_messages(ctx), context_meta(ctx, "decide", **meta))
