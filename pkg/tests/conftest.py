"""Shared fixtures: sample data stores, case bundles, canned monologues."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from wardsim.models import CaseRecord, PatientScript
from wardsim.stores import PersonaStore, load_persona_store

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "data"
TESTS_DATA = Path(__file__).resolve().parent / "data"

REFERENCE_COHORT = ["Alice_1101", "Bob_2202", "Charlie_3303"]


def reference_monologue(
    cohort: list[str] | None = None,
    include_image: bool = True,
    student_order: list[str] | None = None,
) -> str:
    """A canonical, defect-free tagged monologue for the given cohort."""
    ids = student_order if student_order is not None else (cohort or REFERENCE_COHORT)
    parts = [
        "<think_history>This is the first analysis round after the opening complaint; discussion has just begun.</think_history>",
        "<think_question>The current goal is the mechanism of injury; guide them there without revealing it.</think_question>",
    ]
    for sid in ids:
        parts.append(
            f'<think_student student_id="{sid}">{sid} is engaging with the case and needs a nudge toward evidence.</think_student>'
        )
    parts.append(
        "<think_group>The team holds three different threads with no consensus; the next question must connect them.</think_group>"
    )
    if include_image:
        parts.append(
            "<think_image>No imaging has entered the discussion yet; hold it for the next milestone.</think_image>"
        )
    return "".join(parts)


def reference_reply(cohort: list[str] | None = None, include_image: bool = True) -> str:
    """The full tutor JSON reply wrapping the reference monologue."""
    return json.dumps(
        {
            "internal_monologue": reference_monologue(cohort, include_image),
            "guidance": "Excellent starting points. As a team: what single question would move us forward the most, and why?",
        }
    )


@pytest.fixture(scope="session")
def store() -> PersonaStore:
    return load_persona_store(DATA / "personas.json", DATA / "students.json")


def _load_bundle(case_id: str) -> tuple[CaseRecord, PatientScript]:
    with open(DATA / "cases" / f"{case_id}.case.json", encoding="utf-8") as fh:
        case = CaseRecord.model_validate(json.load(fh))
    with open(DATA / "cases" / f"{case_id}.script.json", encoding="utf-8") as fh:
        script = PatientScript.model_validate(json.load(fh))
    return case, script


@pytest.fixture(scope="session")
def wrist_bundle() -> tuple[CaseRecord, PatientScript]:
    return _load_bundle("wrist-01")


@pytest.fixture(scope="session")
def knee_bundle() -> tuple[CaseRecord, PatientScript]:
    return _load_bundle("knee-03")


@pytest.fixture(scope="session")
def chest_bundle() -> tuple[CaseRecord, PatientScript]:
    return _load_bundle("chest-02")
