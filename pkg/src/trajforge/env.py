"""Deterministic simulated web environment.

A site is a page graph: each page carries an accessibility-tree text and an
element table, and transitions are an explicit lookup keyed by
``(page, click id)`` or ``(page, type id, content pattern)``. Fixture sites
are plain JSON documents, e.g.::

    {
      "site_id": "shop",
      "start_page": "home",
      "pages": {
        "home": {"tree": "[1] RootWebArea 'Shop' ...",
                 "elements": {"1": "static", "3": "typable", "4": "clickable"},
                 "scroll": {"down": "home_lower"}}
      },
      "transitions": [
        {"from": "home", "action": "click [4]", "to": "deals"},
        {"from": "home", "action": "type [3] [iphone*]", "to": "results"}
      ],
      "success": {"shop-1": {"final_pages": ["product"], "answer_contains": ["$799"]}}
    }
"""

from __future__ import annotations

import fnmatch
import json
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping, Protocol, Sequence

from .errors import InvalidElement, UnknownQuery, UnknownSite
from .model import Action, Click, GoBack, Observation, QueryRecord, Restart, Scroll, Stop, Trajectory, Type

Affordance = Literal["clickable", "typable", "static"]
AFFORDANCES = ("clickable", "typable", "static")

ERROR_PREFIX = "[Error]"
WARNING_PREFIX = "[Warning]"


@dataclass(frozen=True)
class Page:
    page_id: str
    tree_text: str
    elements: Mapping[int, Affordance]
    scroll: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Transition:
    source: str
    verb: Literal["click", "type"]
    element_id: int
    target: str
    content_pattern: str | None = None

    def matches(self, page_id: str, action: Action) -> bool:
        if page_id != self.source:
            return False
        if self.verb == "click":
            return isinstance(action, Click) and action.element_id == self.element_id
        return (
            isinstance(action, Type)
            and action.element_id == self.element_id
            and fnmatch.fnmatchcase(action.content, self.content_pattern or "*")
        )


@dataclass(frozen=True)
class SuccessPredicate:
    """Rule-based reward: where the agent must stop and what the answer must mention.

    ``final_pages=None`` accepts any page; answer matching is a
    case-insensitive substring test over every entry of ``answer_contains``.
    """

    final_pages: tuple[str, ...] | None = None
    answer_contains: tuple[str, ...] = ()

    def __call__(self, page_id: str, answer: str) -> bool:
        if self.final_pages is not None and page_id not in self.final_pages:
            return False
        low = answer.lower()
        return all(s.lower() in low for s in self.answer_contains)


@dataclass(frozen=True)
class SiteSpec:
    site_id: str
    pages: Mapping[str, Page]
    start_page: str
    transitions: tuple[Transition, ...] = ()
    success_predicates: Mapping[str, SuccessPredicate] = field(default_factory=dict)

    def validate(self) -> "SiteSpec":
        if self.start_page not in self.pages:
            raise UnknownSite(f"site {self.site_id!r}: start page {self.start_page!r} is not defined")
        for page in self.pages.values():
            for direction, target in page.scroll.items():
                if direction not in ("up", "down") or target not in self.pages:
                    raise UnknownSite(f"site {self.site_id!r}: bad scroll {direction}->{target} on {page.page_id!r}")
            for aff in page.elements.values():
                if aff not in AFFORDANCES:
                    raise UnknownSite(f"site {self.site_id!r}: unknown affordance {aff!r}")
        for tr in self.transitions:
            if tr.source not in self.pages or tr.target not in self.pages:
                raise UnknownSite(f"site {self.site_id!r}: transition {tr.source}->{tr.target} names an unknown page")
            aff = self.pages[tr.source].elements.get(tr.element_id)
            wanted = "clickable" if tr.verb == "click" else "typable"
            if aff != wanted:
                raise UnknownSite(
                    f"site {self.site_id!r}: {tr.verb} [{tr.element_id}] on {tr.source!r} needs a {wanted} element"
                )
        for qid, pred in self.success_predicates.items():
            for p in pred.final_pages or ():
                if p not in self.pages:
                    raise UnknownSite(f"site {self.site_id!r}: predicate for {qid!r} names unknown page {p!r}")
        return self

    def observe(self, page_id: str) -> Observation:
        return Observation(self.pages[page_id].tree_text)

    def successors(self, page_id: str) -> set[str]:
        out = {tr.target for tr in self.transitions if tr.source == page_id}
        out.update(self.pages[page_id].scroll.values())
        return out

    def on_success_path(self, query_id: str, page_id: str) -> bool:
        """True if some success page is forward-reachable from ``page_id``."""
        pred = self.success_predicates.get(query_id)
        if pred is None:
            raise UnknownQuery(f"site {self.site_id!r} has no predicate for {query_id!r}")
        if pred.final_pages is None:
            return True
        goals = set(pred.final_pages)
        seen = {page_id}
        todo = deque([page_id])
        while todo:
            cur = todo.popleft()
            if cur in goals:
                return True
            for nxt in self.successors(cur):
                if nxt not in seen:
                    seen.add(nxt)
                    todo.append(nxt)
        return False


@dataclass(frozen=True)
class EnvState:
    site_id: str
    current_page: str
    history: tuple[str, ...] = ()
    step_count: int = 0
    stopped: bool = False


# --- loading -----------------------------------------------------------------


def site_from_dict(d: dict) -> SiteSpec:
    from .protocol import parse_action

    pages = {}
    for pid, p in d["pages"].items():
        pages[pid] = Page(
            page_id=pid,
            tree_text=p["tree"],
            elements={int(k): v for k, v in p.get("elements", {}).items()},
            scroll=dict(p.get("scroll", {})),
        )
    transitions = []
    for t in d.get("transitions", []):
        act = parse_action(t["action"])
        if isinstance(act, Click):
            transitions.append(Transition(t["from"], "click", act.element_id, t["to"]))
        elif isinstance(act, Type):
            transitions.append(Transition(t["from"], "type", act.element_id, t["to"], act.content))
        else:
            raise UnknownSite(f"transition action must be click or type, got {t['action']!r}")
    preds = {}
    for qid, p in d.get("success", {}).items():
        final = p.get("final_pages")
        preds[qid] = SuccessPredicate(
            final_pages=tuple(final) if final is not None else None,
            answer_contains=tuple(p.get("answer_contains", ())),
        )
    return SiteSpec(
        site_id=d["site_id"],
        pages=pages,
        start_page=d.get("start_page", ""),
        transitions=tuple(transitions),
        success_predicates=preds,
    ).validate()


def load_site(path) -> SiteSpec:
    with open(path, encoding="utf-8") as fh:
        return site_from_dict(json.load(fh))


def load_sites(directory) -> dict[str, SiteSpec]:
    sites = {}
    for path in sorted(Path(directory).glob("*.json")):
        site = load_site(path)
        if site.site_id in sites:
            raise UnknownSite(f"duplicate site id {site.site_id!r} in {directory}")
        sites[site.site_id] = site
    return sites


# --- dynamics ----------------------------------------------------------------


def _with_banner(obs: Observation, line: str) -> Observation:
    return Observation(f"{obs.tree_text}\n{line}")


def reset(site: SiteSpec, q: QueryRecord | None = None) -> tuple[EnvState, Observation]:
    if q is not None and q.site != site.site_id:
        raise UnknownSite(f"query {q.query_id!r} targets site {q.site!r}, not {site.site_id!r}")
    if site.start_page not in site.pages:
        raise UnknownSite(f"site {site.site_id!r} has no start page")
    return EnvState(site.site_id, site.start_page), site.observe(site.start_page)


def step(site: SiteSpec, state: EnvState, action: Action, strict: bool = False) -> tuple[EnvState, Observation]:
    """Apply one action and return the new state and observation.

    The input state is never modified. Actions that cannot be executed yield
    the unchanged page with an error line appended, so an agent loop can keep
    going; pass ``strict=True`` to raise :class:`InvalidElement` instead for
    ids absent from the page.
    """
    page = site.pages[state.current_page]
    here = site.observe(page.page_id)
    if state.stopped:
        return state, here
    count = state.step_count + 1

    if isinstance(action, (Click, Type)):
        moved = replace(state, step_count=count)
        if action.element_id not in page.elements:
            if strict:
                raise InvalidElement(f"element [{action.element_id}] is not on page {page.page_id!r}")
            return moved, _with_banner(here, f"{ERROR_PREFIX} element [{action.element_id}] does not exist on this page.")
        for tr in site.transitions:
            if tr.matches(page.page_id, action):
                nxt = replace(state, current_page=tr.target, history=state.history + (page.page_id,), step_count=count)
                return nxt, site.observe(tr.target)
        verb = "click" if isinstance(action, Click) else "type into"
        return moved, _with_banner(here, f"{ERROR_PREFIX} could not {verb} element [{action.element_id}]; the page did not change.")

    if isinstance(action, Scroll):
        target = page.scroll.get(action.direction, page.page_id)
        return replace(state, current_page=target, step_count=count), site.observe(target)

    if isinstance(action, GoBack):
        if not state.history:
            return replace(state, step_count=count), _with_banner(here, f"{WARNING_PREFIX} there is no previous page to go back to.")
        prev = state.history[-1]
        return replace(state, current_page=prev, history=state.history[:-1], step_count=count), site.observe(prev)

    if isinstance(action, Restart):
        return replace(state, current_page=site.start_page, history=(), step_count=count), site.observe(site.start_page)

    if isinstance(action, Stop):
        return replace(state, step_count=count, stopped=True), here

    raise TypeError(f"not an action: {action!r}")


def replay(site: SiteSpec, actions: Iterable[Action], q: QueryRecord | None = None) -> tuple[EnvState, list[Observation]]:
    """Run ``actions`` from reset; returns the final state and every observation seen (including the first)."""
    state, obs = reset(site, q)
    seen = [obs]
    for a in actions:
        state, obs = step(site, state, a)
        seen.append(obs)
    return state, seen


def is_success(site: SiteSpec, q: QueryRecord, traj: Trajectory) -> bool:
    pred = site.success_predicates.get(q.query_id)
    if pred is None:
        raise UnknownQuery(f"site {site.site_id!r} has no predicate for {q.query_id!r}")
    if traj.terminal != "stopped":
        return False
    state, _ = replay(site, traj.actions[:-1])
    return pred(state.current_page, traj.answer or "")


class Environment(Protocol):
    """What the episode loop needs from an environment.

    :class:`SimulatedWeb` implements it over fixture sites; a live-browser
    backend could implement the same three methods.
    """

    def reset(self, q: QueryRecord) -> tuple[EnvState, Observation]: ...

    def step(self, state: EnvState, action: Action) -> tuple[EnvState, Observation]: ...

    def is_success(self, q: QueryRecord, traj: Trajectory) -> bool: ...


class SimulatedWeb:
    """A collection of fixture sites behind the :class:`Environment` interface."""

    def __init__(self, sites: Mapping[str, SiteSpec] | Sequence[SiteSpec]):
        if not isinstance(sites, Mapping):
            sites = {s.site_id: s for s in sites}
        self.sites = dict(sites)

    @classmethod
    def from_dir(cls, directory) -> "SimulatedWeb":
        return cls(load_sites(directory))

    def site(self, site_id: str) -> SiteSpec:
        try:
            return self.sites[site_id]
        except KeyError:
            raise UnknownSite(f"unknown site {site_id!r}") from None

    def reset(self, q: QueryRecord) -> tuple[EnvState, Observation]:
        return reset(self.site(q.site), q)

    def step(self, state: EnvState, action: Action) -> tuple[EnvState, Observation]:
        return step(self.site(state.site_id), state, action)

    def is_success(self, q: QueryRecord, traj: Trajectory) -> bool:
        return is_success(self.site(q.site), q, traj)

    def replay(self, q: QueryRecord, actions: Iterable[Action]) -> tuple[EnvState, list[Observation]]:
        return replay(self.site(q.site), actions, q)
