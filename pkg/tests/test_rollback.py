import pytest

from trajforge.backends import ScriptedBackend
from trajforge.errors import NoAlternative, ReplayMismatch, WrongRecoveryAction
from trajforge.judges import RuleJudge
from trajforge.model import Click, GoBack, Observation, Step, Stop, Thought, Trajectory
from trajforge.policy import clip_context
from trajforge.rollback import (
    Alternative,
    alternative_action,
    assemble_rollback_trajectory,
    build_goback_thought,
    build_rollback_set,
    materialize_divergence,
    sample_pivots,
    variant_id,
)

from conftest import make_traj


def _reply(thought, action):
    return f"Thought: {thought} Action: ```{action}```"


@pytest.fixture
def base(tiny_web, widget_query):
    acts = [Click(1), Click(5), Stop("$5")]
    _, obs = tiny_web.replay(widget_query, acts[:-1])
    return Trajectory("w", widget_query.query_text, "tiny", tuple(Step(o, Thought(f"h{n}"), a) for n, (o, a) in enumerate(zip(obs, acts))))


def test_sample_pivots_seeded_and_distinct():
    t = make_traj(list("abcdefgh"))
    a = sample_pivots(t, 3, 42)
    assert a == sample_pivots(t, 3, 42)
    assert len(set(a)) == 3 and all(0 <= j < len(t) - 1 for j in a)
    with pytest.raises(ValueError):
        sample_pivots(t, 8, 42)


def test_variant_id():
    assert variant_id("q7", 2) == "q7#rb2"


def test_alternative_retries_on_collision():
    ctx = clip_context([], Observation("x"), query_id="q")
    b = ScriptedBackend([
        {"match": {"attempt": 0}, "reply": _reply("same", "click [1]")},
        {"match": {"attempt": 1}, "reply": _reply("other", "click [2]")},
    ])
    alt = alternative_action(b, ctx.current, Click(1), ctx)
    assert alt.action == Click(2) and alt.tokens == 10
    with pytest.raises(NoAlternative):
        alternative_action(ScriptedBackend([{"match": {}, "reply": _reply("s", "click [1]")}]), ctx.current, Click(1), ctx)


def test_divergence(tiny_web, base):
    div = materialize_divergence(tiny_web, base, 0, Click(3))
    assert div.state.current_page == "dead"
    assert materialize_divergence(tiny_web, base, 0, Click(1)) is None
    assert materialize_divergence(tiny_web, base, 0, Stop("x")) is None
    with pytest.raises(ValueError):
        materialize_divergence(tiny_web, base, 2, Click(3))


def test_goback_thought_must_go_back(tiny_web, base):
    o = base.steps[0].observation
    good = ScriptedBackend([{"match": {"task": "goback"}, "reply": _reply("wrong turn", "goback")}])
    assert build_goback_thought(good, o, o, Click(3)).thought.text == "wrong turn"
    with pytest.raises(WrongRecoveryAction):
        build_goback_thought(ScriptedBackend([{"match": {}, "reply": _reply("x", "restart")}]), o, o, Click(3))


@pytest.mark.parametrize("mode", ["continue", "truncate"])
def test_assemble_structure(tiny_web, base, mode):
    j = 1
    alt = Alternative(Thought("maybe scroll"), Click(7), 3)
    # an absent element leaves the page in place under an error banner, a distinct observation
    div = materialize_divergence(tiny_web, base, j, Click(7))
    rec = Alternative(Thought("back"), GoBack(), 2)
    with pytest.raises(ReplayMismatch):
        # goback after an in-place error pops the real history, not the banner
        assemble_rollback_trajectory(tiny_web, base, j, alt, div, rec, mode)
    j = 0
    div = materialize_divergence(tiny_web, base, j, Click(3))
    alt = Alternative(Thought("dead end?"), Click(3), 3)
    t = assemble_rollback_trajectory(tiny_web, base, j, alt, div, rec, mode)
    assert t.query_id == "w#rb0"
    assert t.actions[j] == Click(3) and isinstance(t.actions[j + 1], GoBack)
    assert t.steps[j + 1].observation == div.observation
    assert [s.provenance for s in t.steps[j:j + 2]] == ["rollback", "rollback"]
    if mode == "continue":
        assert len(t) == len(base) + 2 and t.terminal == "stopped"
        assert t.fingerprints[j + 2:] == base.fingerprints[j:]
    else:
        assert len(t) == j + 2 and t.terminal == "truncated"
    strict = assemble_rollback_trajectory(tiny_web, base, j, alt, div, rec, mode, strict_thought=True)
    assert strict.steps[j].thought == base.steps[j].thought


def test_build_rollback_set(tiny_web, base):
    proposer = ScriptedBackend([{"match": {"task": "alternative"}, "reply": _reply("try the other link", "click [3]")}])
    verbal = ScriptedBackend([{"match": {"task": "goback"}, "reply": _reply("nothing here", "goback")}])
    res = build_rollback_set([base], 2, {"proposer": proposer, "verbalizer": verbal}, RuleJudge(tiny_web), tiny_web, seed=42)
    outcomes = {r["pivot"]: r["outcome"] for r in res.reports}
    # pivot 0 diverges to the dead end; on the products page click [3] does not exist
    assert outcomes[0] == "kept"
    assert outcomes[1] == "not_failure"
    assert list(res.dataset.entries) == ["w#rb0"]
    assert res.tokens > 0 and res.counts() == {"kept": 1, "not_failure": 1}


def test_build_rollback_skips_short_and_failed(tiny_web):
    short = make_traj(["a"], terminal="stopped", query_id="w", site="tiny")
    res = build_rollback_set([short, make_traj(list("ab"))], 2, {}, None, tiny_web)
    assert len(res.dataset) == 0 and res.reports == []
