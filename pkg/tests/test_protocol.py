import pytest
from hypothesis import given, strategies as st

from trajforge.errors import MalformedAction, MissingAction, MissingThought
from trajforge.model import Click, GoBack, Restart, Scroll, Stop, Thought, Type
from trajforge.protocol import parse_action, parse_agent_reply, render_action, render_agent_reply

text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="`"), max_size=40)

actions = st.one_of(
    st.builds(Click, st.integers(0, 10_000)),
    st.builds(Type, st.integers(0, 10_000), text, st.booleans()),
    st.builds(Scroll, st.sampled_from(["up", "down"])),
    st.just(GoBack()),
    st.just(Restart()),
    st.builds(Stop, text),
)


@given(actions)
def test_render_parse_round_trip(a):
    assert parse_action(render_action(a)) == a
    assert parse_action(f"```{render_action(a)}```") == a


@pytest.mark.parametrize(
    "expr, expected",
    [
        ("click [12]", Click(12)),
        ("CLICK [ 3 ]", Click(3)),
        ("type [3] [hello world] [0]", Type(3, "hello world", False)),
        ("type [3] [hello] [press_enter_after=1]", Type(3, "hello", True)),
        ("type [3] [hello]", Type(3, "hello", True)),
        ("type [3] [a] b] [0]", Type(3, "a] b", False)),
        ("scroll [down]", Scroll("down")),
        ("scroll [direction=up]", Scroll("up")),
        ("goback", GoBack()),
        ("go back", GoBack()),
        ("restart", Restart()),
        ("stop [42 USD]", Stop("42 USD")),
        ("stop", Stop("")),
        ("stop [N/A]", Stop("N/A")),
    ],
)
def test_parse_action_examples(expr, expected):
    assert parse_action(expr) == expected


@pytest.mark.parametrize("expr", ["", "click []", "click [x]", "scroll [left]", "hover [3]", "type [a] [b]", "jump"])
def test_malformed_actions(expr):
    with pytest.raises(MalformedAction):
        parse_action(expr)


def test_render_canonical_forms():
    assert render_action(Type(3, "x", False)) == "type [3] [x] [0]"
    assert render_action(Scroll("up")) == "scroll [up]"
    assert render_action(Stop("")) == "stop []"


def test_parse_reply_with_think_block():
    reply = "<think>\n1. Thought: a\nPossible Step: click [1]\n</think>\n\nThought: go to products Action: ```click [1]```"
    thought, action = parse_agent_reply(reply)
    assert thought.text == "go to products"
    assert thought.think_block == "1. Thought: a\nPossible Step: click [1]"
    assert action == Click(1)


def test_parse_reply_plain_and_unfenced():
    t, a = parse_agent_reply("Thought: done here\nAction: stop [7]")
    assert (t.text, t.think_block, a) == ("done here", None, Stop("7"))


def test_parse_reply_skips_action_word_inside_thought():
    t, a = parse_agent_reply("Thought: the Action: field is odd. Action: ```goback```")
    assert a == GoBack()
    assert t.text == "the Action: field is odd."


def test_parse_reply_errors():
    with pytest.raises(MissingThought):
        parse_agent_reply("Action: ```click [1]```")
    with pytest.raises(MissingAction):
        parse_agent_reply("Thought: nothing to do")
    with pytest.raises(MalformedAction):
        parse_agent_reply("Thought: x Action: ```fly [1]```")


@given(st.text(st.characters(whitelist_categories=("L", "N")), min_size=1, max_size=30), actions)
def test_reply_round_trip(words, a):
    th = Thought(words, "deliberation")
    t, parsed = parse_agent_reply(render_agent_reply(th, a))
    assert (t, parsed) == (th, a)
