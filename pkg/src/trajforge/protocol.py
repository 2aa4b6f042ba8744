"""Parsing and rendering of the agent's text protocol.

Actions use the bracketed browser grammar::

    click [7]
    type [3] [query text] [1]
    scroll [down]
    goback
    restart
    stop [answer]

and a full reply looks like ``<think>...</think> Thought: ... Action: ```...```.
"""

from __future__ import annotations

import re

from .errors import MalformedAction, MissingAction, MissingThought
from .model import Action, Click, GoBack, Restart, Scroll, Stop, Thought, Type

_FENCE = "```"

_CLICK = re.compile(r"click\s*\[\s*(\d+)\s*\]", re.I)
_TYPE_FULL = re.compile(r"type\s*\[\s*(\d+)\s*\]\s*\[(.*)\]\s*\[\s*(?:press_enter_after\s*=\s*)?([01])\s*\]", re.I | re.S)
_TYPE_SHORT = re.compile(r"type\s*\[\s*(\d+)\s*\]\s*\[(.*)\]", re.I | re.S)
_SCROLL = re.compile(r"scroll\s*\[\s*(?:direction\s*=\s*)?(up|down)\s*\]", re.I)
_GOBACK = re.compile(r"go\s*back", re.I)
_RESTART = re.compile(r"restart", re.I)
_STOP = re.compile(r"stop\s*\[(.*)\]", re.I | re.S)
_STOP_BARE = re.compile(r"stop", re.I)


def _unwrap(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 * len(_FENCE) and text.startswith(_FENCE) and text.endswith(_FENCE):
        text = text[len(_FENCE):-len(_FENCE)].strip()
    return text


def parse_action(text: str) -> Action:
    """Parse a single action expression, optionally fenced in triple backticks."""
    expr = _unwrap(text)
    if not expr:
        raise MalformedAction("empty action")
    verb = expr.split("[", 1)[0].strip().lower()

    if verb == "click":
        m = _CLICK.fullmatch(expr)
        if not m:
            raise MalformedAction(f"bad click expression: {expr!r}")
        return Click(int(m.group(1)))
    if verb == "type":
        m = _TYPE_FULL.fullmatch(expr)
        if m:
            return Type(int(m.group(1)), m.group(2), m.group(3) == "1")
        m = _TYPE_SHORT.fullmatch(expr)
        if not m:
            raise MalformedAction(f"bad type expression: {expr!r}")
        return Type(int(m.group(1)), m.group(2), True)
    if verb == "scroll":
        m = _SCROLL.fullmatch(expr)
        if not m:
            raise MalformedAction(f"bad scroll expression: {expr!r}")
        return Scroll(m.group(1).lower())
    if _GOBACK.fullmatch(expr):
        return GoBack()
    if _RESTART.fullmatch(expr):
        return Restart()
    if verb == "stop":
        m = _STOP.fullmatch(expr)
        if m:
            return Stop(m.group(1))
        if _STOP_BARE.fullmatch(expr):
            return Stop("")
        raise MalformedAction(f"bad stop expression: {expr!r}")
    raise MalformedAction(f"unknown action verb in {expr!r}")


def render_action(action: Action) -> str:
    if isinstance(action, Click):
        return f"click [{action.element_id}]"
    if isinstance(action, Type):
        return f"type [{action.element_id}] [{action.content}] [{int(action.press_enter)}]"
    if isinstance(action, Scroll):
        return f"scroll [{action.direction}]"
    if isinstance(action, GoBack):
        return "goback"
    if isinstance(action, Restart):
        return "restart"
    if isinstance(action, Stop):
        return f"stop [{action.answer}]"
    raise TypeError(f"not an action: {action!r}")


_THINK = re.compile(r"<think>(.*?)</think>", re.S | re.I)
_THOUGHT_LABEL = re.compile(r"thought\s*:", re.I)
_ACTION_LABEL = re.compile(r"action\s*:", re.I)


def _action_payload(rest: str) -> str:
    rest = rest.strip()
    if rest.startswith(_FENCE):
        end = rest.find(_FENCE, len(_FENCE))
        if end == -1:
            raise MissingAction("unterminated action fence")
        payload = rest[: end + len(_FENCE)]
    else:
        payload = rest.split("\n", 1)[0]
    if not _unwrap(payload):
        raise MissingAction("empty 'Action:' segment")
    return payload


def parse_agent_reply(text: str) -> tuple[Thought, Action]:
    """Split a completion into (Thought, Action).

    The ``<think>`` block, when present, is kept verbatim (minus surrounding
    whitespace) so that verbalized branch deliberations survive a round trip.
    """
    think_block = None
    m = _THINK.search(text)
    if m:
        think_block = m.group(1).strip()
        text = text[: m.start()] + text[m.end():]

    labels = list(_ACTION_LABEL.finditer(text))
    if not labels:
        raise MissingAction("reply has no 'Action:' segment")
    # The first label whose payload parses wins; later labels may sit inside
    # an answer string and earlier ones inside free-form thought text.
    error: Exception | None = None
    for label in labels:
        try:
            action = parse_action(_action_payload(text[label.end():]))
        except (MalformedAction, MissingAction) as exc:
            error = exc
            continue
        break
    else:
        raise error

    head = text[: label.start()]
    tm = _THOUGHT_LABEL.search(head)
    if not tm:
        raise MissingThought("reply has no 'Thought:' segment")
    thought_text = head[tm.end():].strip()
    if not thought_text:
        raise MissingThought("empty 'Thought:' segment")
    return Thought(thought_text, think_block), action


def render_agent_reply(thought: Thought, action: Action) -> str:
    body = f"Thought: {thought.text} Action: {_FENCE}{render_action(action)}{_FENCE}"
    if thought.think_block:
        return f"<think>\n{thought.think_block}\n</think>\n\n{body}"
    return body
