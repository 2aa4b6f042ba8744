import pytest

from trajforge.backends import ScriptedBackend
from trajforge.errors import EmptyVerbalization
from trajforge.judges import RuleJudge
from trajforge.model import Click, GoBack, Step, Stop, Thought, Trajectory
from trajforge.reflect import (
    LoopReport,
    build_reflection_set,
    detect_loop,
    lookahead_prompt,
    reverbalize,
    splice,
    splice_to_fixpoint,
)

from conftest import make_traj


def test_detect_min_i_max_j():
    t = make_traj(list("abacba"))
    r = detect_loop(t)
    assert (r.i, r.j) == (0, 5)
    assert detect_loop(make_traj(list("abc"))) is None


def test_splice_length_and_content():
    t = make_traj(list("xabcay"))
    r = detect_loop(t)
    s = splice(t, r)
    assert len(s) == len(t) - (r.j - r.i)
    assert [st.thought.text for st in s.steps] == ["t0", "t4", "t5"]


def test_splice_rejects_bad_report():
    t = make_traj(list("abc"))
    with pytest.raises(ValueError):
        splice(t, LoopReport(0, 2, "x"))
    with pytest.raises(ValueError):
        splice(t, LoopReport(2, 1, "x"))


def test_fixpoint_has_no_repeats():
    t, reports = splice_to_fixpoint(make_traj(list("abcbdaefe")))
    assert len(set(t.fingerprints)) == len(t)
    assert len(reports) == 2


def test_lookahead_prompt_fields():
    t = make_traj(list("abc"), terminal="stopped")
    p = lookahead_prompt(t, 1)
    assert "The navigation history: Step 1: Thought: t0 Action: click [0]" in p
    assert "The navigation lookahead: Step 3: Thought: t2 Action: stop [done]" in p
    assert "The current action you are about to exactly choose: click [1]" in p
    assert "page b" in p
    with pytest.raises(IndexError):
        lookahead_prompt(t, 3)


def test_reverbalize_replaces_thoughts_only():
    t = make_traj(list("abc"), terminal="stopped")
    v = ScriptedBackend([{"match": {"task": "verbalize_lookahead"}, "reply": "  plan ahead  "}])
    r = reverbalize(t, v)
    assert r.actions == t.actions and r.fingerprints == t.fingerprints
    assert all(s.thought.text == "plan ahead" and s.provenance == "lookahead" for s in r.steps)
    with pytest.raises(EmptyVerbalization):
        reverbalize(t, ScriptedBackend([{"match": {}, "reply": "   "}]))


def _loopy(tiny_web, q):
    acts = [Click(3), GoBack(), Click(1), Click(5), Stop("$5")]
    _, obs = tiny_web.replay(q, acts[:-1])
    return Trajectory(q.query_id, q.query_text, q.site, tuple(Step(o, Thought("t"), a) for o, a in zip(obs, acts)))


def test_build_reflection_set(tiny_web, widget_query):
    loopy = _loopy(tiny_web, widget_query)
    clean, _ = splice_to_fixpoint(loopy)
    v = ScriptedBackend([{"match": {"task": "verbalize_lookahead"}, "reply": "look ahead"}])
    res = build_reflection_set([loopy], RuleJudge(tiny_web), v, tiny_web)
    assert len(res.dataset) == 1 and len(res.dataset.entries["w"]) == 3
    assert res.reports[0]["outcome"] == "kept" and res.tokens == 6
    skipped = build_reflection_set([clean], RuleJudge(tiny_web), v, tiny_web)
    assert skipped.reports[0]["outcome"] == "no_loop" and len(skipped.dataset) == 0
    every = build_reflection_set([clean], RuleJudge(tiny_web), v, tiny_web, refine_all=True)
    assert every.reports[0]["outcome"] == "kept"


def test_reflection_detects_replay_mismatch(tiny_web, widget_query):
    # after the splice, click [3] is followed by the products page, which replay cannot reproduce
    loopy = _loopy(tiny_web, widget_query)
    forged = loopy.with_steps([loopy.steps[0], loopy.steps[1], loopy.steps[0], *loopy.steps[3:]])
    v = ScriptedBackend([{"match": {}, "reply": "x"}])
    res = build_reflection_set([forged], RuleJudge(tiny_web), v, tiny_web)
    assert res.reports[0]["outcome"] == "replay_mismatch"
