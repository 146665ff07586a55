import json

import pytest

from vciedit.config import RunConfig, load_config
from vciedit.errors import ConfigurationError


def test_default_roundtrip(tmp_path):
    cfg = RunConfig()
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path).to_dict() == cfg.to_dict()


def test_partial_override(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"edit": {"phi": 0.3, "mode": "vci"}, "seeds_per_point": 5}))
    cfg = load_config(path)
    assert cfg.edit.phi == 0.3 and cfg.edit.mode == "vci" and cfg.seeds_per_point == 5
    assert cfg.edit.w_tgt == 15.0


@pytest.mark.parametrize("doc", [
    {"unknown": 1},
    {"seeds_per_point": 0},
    {"bench_repetitions": 2},
    {"edit": {"phi": 1.2}},
    {"edit": {"tgt_class": 9}},
    {"edit": {"colour": "red"}},
    {"sweep": {"phi": [0.5, 1.5]}},
    {"schedule": {"T": 0}},
])
def test_rejects_bad_config(tmp_path, doc):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigurationError):
        load_config(path).build_schedule()


def test_invalid_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_overrides_skip_none():
    cfg = RunConfig()
    assert cfg.with_edit(phi=None) is cfg
    assert cfg.with_edit(phi=0.2).edit.phi == 0.2
    assert cfg.with_schedule(T=500).build_schedule().T == 500
