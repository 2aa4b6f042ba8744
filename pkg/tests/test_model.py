import hashlib

import pytest

from trajforge.model import (
    Click,
    Observation,
    Step,
    Stop,
    Thought,
    Trajectory,
    fingerprint_text,
    normalize_tree,
    read_trajectories,
    write_trajectories,
)

from conftest import make_traj


def test_fingerprint_matches_independent_sha256():
    raw = "RootWebArea  'Home'\t\n\t[1]   link 'A'   \n\n\n"
    # hand-normalized: whitespace runs collapse, trailing blanks and blank tail lines go
    expected = hashlib.sha256("RootWebArea 'Home'\n [1] link 'A'".encode("utf-8")).hexdigest()
    assert fingerprint_text(raw) == expected
    assert Observation(raw).fingerprint == expected


def test_fingerprint_ignores_whitespace_only_edits():
    a = Observation("[1] link 'A'\n[2] link 'B'")
    b = Observation("[1]  link 'A'  \n[2]\tlink 'B'\n\n")
    assert a == b and hash(a) == hash(b)
    assert a != Observation("[1] link 'A'\n[2] link 'C'")


def test_normalize_keeps_line_structure():
    assert normalize_tree("a\n\nb") == "a\n\nb"
    assert normalize_tree("") == ""


def test_custom_normalizer():
    o = Observation.from_text("ABC", normalizer=str.lower)
    assert o.fingerprint == hashlib.sha256(b"abc").hexdigest()


def test_stopped_trajectory_must_end_with_stop():
    with pytest.raises(ValueError):
        make_traj(["a", "b"], terminal="stopped").with_steps(make_traj(["a"]).steps)
    with pytest.raises(ValueError):
        Trajectory("q", "t", "s", (), "stopped")
    with pytest.raises(ValueError):
        Trajectory("q", "t", "s", (), "exploded")


def test_empty_env_error_trajectory_allowed():
    assert len(Trajectory("q", "t", "s", (), "env_error")) == 0


def test_step_validation():
    o = Observation("x")
    with pytest.raises(ValueError):
        Step(o, Thought("t"), Click(1), provenance="oracle")
    with pytest.raises(ValueError):
        Step(o, Thought("t"), Click(1), tokens=-1)


def test_trajectory_accessors():
    t = make_traj(["a", "b", "c"], terminal="stopped")
    assert len(t) == 3
    assert t.answer == "done"
    assert t.actions[:2] == [Click(0), Click(1)]
    assert isinstance(t.actions[-1], Stop)
    assert len(set(t.fingerprints)) == 3
    assert make_traj(["a"]).answer is None


def test_jsonl_round_trip(tmp_path):
    t = make_traj(["a", "b", "a"], terminal="stopped")
    t = t.with_steps([Step(s.observation, Thought(s.thought.text, "block"), s.action, "branch", 7) for s in t.steps])
    path = tmp_path / "t.jsonl"
    write_trajectories(path, [t])
    assert read_trajectories(path) == [t]
