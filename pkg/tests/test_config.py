import json

import pytest

from trajforge.config import ROLES, config_from_dict, load_config
from trajforge.errors import ConfigError

from conftest import CORPUS


def _raw(tmp_path):
    (tmp_path / "sites").mkdir()
    (tmp_path / "q.jsonl").write_text("")
    (tmp_path / "s.jsonl").write_text("")
    return {
        "sites_dir": "sites",
        "queries": "q.jsonl",
        "output_dir": "out",
        "backends": {r: {"kind": "scripted", "script": "s.jsonl"} for r in ROLES},
    }


def test_defaults(tmp_path):
    cfg = config_from_dict(_raw(tmp_path), tmp_path)
    assert (cfg.clip_k, cfg.max_steps, cfg.branch_k, cfg.sim_depth, cfg.rollback_n, cfg.seed) == (3, 15, 3, 2, 2, 42)
    assert cfg.rollback_mode == "continue" and cfg.output_dir == tmp_path / "out"


def test_missing_role_names_it(tmp_path):
    raw = _raw(tmp_path)
    del raw["backends"]["scorer"]
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw, tmp_path)
    assert exc.value.field == "backends.scorer" and "scorer" in str(exc.value)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"clip_k": 0}, "clip_k"),
        ({"rollback_mode": "sideways"}, "rollback_mode"),
        ({"queries": "nope.jsonl"}, "queries"),
        ({"seed": "x"}, "seed"),
        ({"judge": "oracle"}, "judge"),
    ],
)
def test_field_errors(tmp_path, patch, field):
    raw = {**_raw(tmp_path), **patch}
    with pytest.raises(ConfigError) as exc:
        config_from_dict(raw, tmp_path)
    assert exc.value.field == field


def test_env_interpolation(tmp_path, monkeypatch):
    raw = _raw(tmp_path)
    raw["backends"]["judge"] = {"kind": "remote", "endpoint": "${JUDGE_URL}", "model_name": "m", "api_key_env": "JUDGE_API_KEY"}
    monkeypatch.setenv("JUDGE_URL", "http://judge.test/v1")
    cfg = config_from_dict(raw, tmp_path)
    assert cfg.backends["judge"].endpoint == "http://judge.test/v1"
    monkeypatch.delenv("JUDGE_URL")
    with pytest.raises(ConfigError):
        config_from_dict(raw, tmp_path)


def test_load_corpus_config():
    cfg = load_config(CORPUS / "config.json")
    assert set(cfg.backends) == set(ROLES)


def test_load_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text(json.dumps([1]))
    with pytest.raises(ConfigError):
        load_config(p)
