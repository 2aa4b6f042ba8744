import copy

import pytest

from trajforge.env import SimulatedWeb, load_sites, reset, site_from_dict, step
from trajforge.errors import InvalidElement, UnknownQuery, UnknownSite
from trajforge.model import Click, GoBack, QueryRecord, Restart, Scroll, Step, Stop, Thought, Trajectory, Type

from conftest import CORPUS, TINY_SITE


def test_reset_and_click(tiny_site, widget_query):
    s0, o0 = reset(tiny_site, widget_query)
    assert s0.current_page == "home" and "Home" in o0.tree_text
    s1, o1 = step(tiny_site, s0, Click(1))
    assert s1.current_page == "products" and s1.history == ("home",)
    assert s0.current_page == "home"  # input state untouched


def test_type_pattern_matching(tiny_site):
    s0, _ = reset(tiny_site)
    s1, _ = step(tiny_site, s0, Type(2, "blue widget"))
    assert s1.current_page == "results"
    s2, o2 = step(tiny_site, s0, Type(2, "lamp"))
    assert s2.current_page == "home" and o2.tree_text.endswith("the page did not change.")


def test_invalid_element_banner_and_strict(tiny_site):
    s0, o0 = reset(tiny_site)
    s1, o1 = step(tiny_site, s0, Click(77))
    assert s1.current_page == "home" and "[Error] element [77]" in o1.tree_text
    assert o1 != o0
    with pytest.raises(InvalidElement):
        step(tiny_site, s0, Click(77), strict=True)


def test_scroll_does_not_push_history(tiny_site):
    s, _ = reset(tiny_site)
    s, _ = step(tiny_site, s, Click(1))
    s, o = step(tiny_site, s, Scroll("down"))
    assert s.current_page == "products_more" and s.history == ("home",)
    s, _ = step(tiny_site, s, Scroll("down"))  # no edge: stays put
    assert s.current_page == "products_more"
    s, o = step(tiny_site, s, GoBack())
    assert s.current_page == "home"


def test_goback_restart_and_stop(tiny_site):
    s, o_home = reset(tiny_site)
    s, o = step(tiny_site, s, GoBack())
    assert o.tree_text.startswith(o_home.tree_text) and "[Warning]" in o.tree_text
    s, _ = step(tiny_site, s, Click(1))
    s, _ = step(tiny_site, s, Click(5))
    s, o = step(tiny_site, s, Restart())
    assert s.current_page == "home" and s.history == ()
    s, _ = step(tiny_site, s, Stop("x"))
    assert s.stopped
    s2, _ = step(tiny_site, s, Click(1))
    assert s2 == s


def test_replay_is_deterministic(tiny_web, widget_query):
    acts = [Click(1), Scroll("down"), Scroll("up"), Click(5)]
    a = tiny_web.replay(widget_query, acts)
    b = tiny_web.replay(widget_query, acts)
    assert a == b and len(a[1]) == 5


def test_is_success(tiny_web, widget_query):
    acts = [Click(1), Click(5)]
    _, obs = tiny_web.replay(widget_query, acts)
    good = Trajectory("w", "", "tiny", tuple(Step(o, Thought("t"), a) for o, a in zip(obs, [*acts, Stop("It is $5")])))
    bad = good.with_steps([*good.steps[:-1], Step(obs[-1], Thought("t"), Stop("$7"))])
    assert tiny_web.is_success(widget_query, good)
    assert not tiny_web.is_success(widget_query, bad)
    assert not tiny_web.is_success(widget_query, good.with_steps(good.steps[:-1], terminal="step_limit"))
    with pytest.raises(UnknownQuery):
        tiny_web.is_success(QueryRecord("zz", "", "tiny"), good)


def test_on_success_path(tiny_site):
    assert tiny_site.on_success_path("g", "home")
    assert tiny_site.on_success_path("g", "products")  # via scroll
    assert not tiny_site.on_success_path("g", "dead")
    assert not tiny_site.on_success_path("g", "widget")


def test_unknown_site_errors(tiny_web):
    with pytest.raises(UnknownSite):
        tiny_web.reset(QueryRecord("w", "", "nowhere"))
    bad = copy.deepcopy(TINY_SITE)
    bad["start_page"] = "missing"
    with pytest.raises(UnknownSite):
        site_from_dict(bad)
    bad = copy.deepcopy(TINY_SITE)
    bad["transitions"].append({"from": "home", "action": "click [4]", "to": "dead"})  # static element
    with pytest.raises(UnknownSite):
        site_from_dict(bad)


def test_corpus_sites_load():
    sites = load_sites(CORPUS / "sites")
    assert set(sites) == {"shop", "library", "transit"}
    assert SimulatedWeb(sites).site("shop").start_page == "home"
