"""Application configuration: store paths, named backends, role bindings.

Backend binding strings:
  ``scripted:PATH``        scripted fixture file
  ``http:MODEL@BASE_URL``  OpenAI-compatible endpoint
  anything else            the name of a backend declared in the config file
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from .gateway import BackendHandle, HttpBackend, ScriptedBackend
from .models import CaseRecord, PatientScript


class BackendDecl(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str  # "scripted" | "http"
    path: Optional[str] = None
    url: Optional[str] = None
    model: Optional[str] = None
    auth_token_env: Optional[str] = None
    timeout_s: float = 120.0
    min_interval_s: Optional[float] = None


class AppConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    cases_dir: str = "data/cases"
    personas: str = "data/personas.json"
    students: str = "data/students.json"
    out_dir: str = "out"
    backends: dict[str, BackendDecl] = Field(default_factory=dict)
    role_bindings: dict[str, str] = Field(default_factory=dict)
    max_in_flight: int = 8
    human_timeout_s: float = 600.0
    research_mode: bool = False
    classroom_open: bool = False


def load_config(path: Optional[Union[str, Path]]) -> AppConfig:
    if path is None:
        return AppConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return AppConfig.model_validate(json.load(fh))


def resolve_backend(spec: str, config: Optional[AppConfig] = None) -> BackendHandle:
    """Turn a binding string or config-declared name into a live handle."""
    if spec == "synthetic" or spec.startswith("synthetic:"):
        from .synthetic import SyntheticBackend

        _, _, seed = spec.partition(":")
        return SyntheticBackend(seed=int(seed) if seed else 0)
    if spec.startswith("scripted:"):
        return ScriptedBackend(spec.split(":", 1)[1])
    if spec.startswith("http:"):
        rest = spec.split(":", 1)[1]
        if "@" not in rest:
            raise ValueError(f"http backend spec must look like http:MODEL@URL, got {spec!r}")
        model, url = rest.split("@", 1)
        return HttpBackend(url, model)
    if config is not None and spec in config.backends:
        decl = config.backends[spec]
        if decl.kind == "scripted":
            if not decl.path:
                raise ValueError(f"backend {spec!r} is scripted but has no path")
            return ScriptedBackend(decl.path)
        if decl.kind == "http":
            if not (decl.url and decl.model):
                raise ValueError(f"backend {spec!r} is http but lacks url/model")
            return HttpBackend(
                decl.url, decl.model, decl.auth_token_env, decl.timeout_s, decl.min_interval_s
            )
        raise ValueError(f"backend {spec!r} has unknown kind {decl.kind!r}")
    raise ValueError(f"unknown backend spec {spec!r}")


def resolve_role_backends(
    default_spec: Optional[str], config: AppConfig
) -> dict[str, BackendHandle]:
    """Bind every agent role: explicit per-role bindings win, the default fills the rest."""
    bindings: dict[str, BackendHandle] = {}
    for role, spec in config.role_bindings.items():
        bindings[role] = resolve_backend(spec, config)
    if default_spec:
        bindings["*"] = resolve_backend(default_spec, config)
    return bindings


# ---------------------------------------------------------------------------
# Case storage (one JSON document per record)
# ---------------------------------------------------------------------------


def case_path(cases_dir: Union[str, Path], case_id: str) -> Path:
    return Path(cases_dir) / f"{case_id}.case.json"


def script_path(cases_dir: Union[str, Path], case_id: str) -> Path:
    return Path(cases_dir) / f"{case_id}.script.json"


def load_case_bundle(cases_dir: Union[str, Path], case_id: str) -> tuple[CaseRecord, PatientScript]:
    cpath, spath = case_path(cases_dir, case_id), script_path(cases_dir, case_id)
    if not cpath.exists():
        raise FileNotFoundError(f"case not found: {case_id} (looked for {cpath})")
    with open(cpath, "r", encoding="utf-8") as fh:
        case = CaseRecord.model_validate(json.load(fh))
    if not spath.exists():
        raise FileNotFoundError(f"patient script not found for case {case_id} ({spath})")
    with open(spath, "r", encoding="utf-8") as fh:
        script = PatientScript.model_validate(json.load(fh))
    return case, script


def list_case_ids(cases_dir: Union[str, Path]) -> list[str]:
    directory = Path(cases_dir)
    if not directory.is_dir():
        return []
    return sorted(p.name[: -len(".case.json")] for p in directory.glob("*.case.json"))
