"""Backend binding strings and case storage."""

from __future__ import annotations

import json

import pytest

from wardsim.config import (
    AppConfig,
    BackendDecl,
    list_case_ids,
    load_case_bundle,
    load_config,
    resolve_backend,
)
from wardsim.gateway import HttpBackend, ScriptedBackend
from wardsim.synthetic import SyntheticBackend

from conftest import DATA


class TestResolveBackend:
    def test_scripted_spec(self, tmp_path):
        fixture = tmp_path / "f.json"
        fixture.write_text(json.dumps({"mode": "ordered", "replies": []}))
        backend = resolve_backend(f"scripted:{fixture}")
        assert isinstance(backend, ScriptedBackend)

    def test_http_spec(self):
        backend = resolve_backend("http:my-model@https://host:8000/v1")
        assert isinstance(backend, HttpBackend)
        assert backend.model_name == "my-model"
        assert backend.endpoint_url == "https://host:8000/v1"

    def test_http_spec_requires_at(self):
        with pytest.raises(ValueError):
            resolve_backend("http:justamodel")

    def test_synthetic_with_seed(self):
        backend = resolve_backend("synthetic:42")
        assert isinstance(backend, SyntheticBackend)
        assert backend.seed == 42

    def test_named_backend_from_config(self):
        config = AppConfig(
            backends={
                "judge": BackendDecl(kind="http", url="https://j/v1", model="judge-1",
                                      auth_token_env="JUDGE_TOKEN", min_interval_s=0.5)
            }
        )
        backend = resolve_backend("judge", config)
        assert isinstance(backend, HttpBackend)
        assert backend.auth_token_env == "JUDGE_TOKEN"
        assert backend.min_interval_s == 0.5

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            resolve_backend("mystery")


class TestCaseStorage:
    def test_load_bundle(self):
        case, script = load_case_bundle(DATA / "cases", "wrist-01")
        assert case.case_id == "wrist-01"
        assert script.case_id == "wrist-01"

    def test_unknown_case(self):
        with pytest.raises(FileNotFoundError):
            load_case_bundle(DATA / "cases", "missing")

    def test_list_case_ids(self):
        ids = list_case_ids(DATA / "cases")
        assert ids == ["chest-02", "knee-03", "wrist-01"]

    def test_load_config_defaults(self, tmp_path):
        assert load_config(None) == AppConfig()
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"cases_dir": "elsewhere"}))
        assert load_config(path).cases_dir == "elsewhere"
