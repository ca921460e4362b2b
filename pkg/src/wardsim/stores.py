"""Flat-file persona and student databases, script matching, cohort sampling.

Stores are read-only after load and safe to share across concurrent sessions;
each selection operation takes its own seed so results are reproducible.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import NamedTuple, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import CohortTooLarge, NoCompatiblePersona
from .models import PatientPersona, PatientScript, StudentProfile


class PersonaStore(BaseModel):
    model_config = ConfigDict(frozen=True)

    personas: list[PatientPersona] = Field(default_factory=list)
    students: list[StudentProfile] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_ids(self) -> "PersonaStore":
        pids = [p.persona_id for p in self.personas]
        if len(pids) != len(set(pids)):
            dupes = sorted({i for i in pids if pids.count(i) > 1})
            raise ValueError(f"duplicate persona ids: {dupes}")
        sids = [s.student_id for s in self.students]
        if len(sids) != len(set(sids)):
            dupes = sorted({i for i in sids if sids.count(i) > 1})
            raise ValueError(f"duplicate student ids: {dupes}")
        return self


def load_persona_store(
    personas_path: Union[str, Path], students_path: Union[str, Path]
) -> PersonaStore:
    """Load the two JSON-array database files."""
    with open(personas_path, "r", encoding="utf-8") as fh:
        personas = [PatientPersona.model_validate(item) for item in json.load(fh)]
    with open(students_path, "r", encoding="utf-8") as fh:
        students = [StudentProfile.model_validate(item) for item in json.load(fh)]
    return PersonaStore(personas=personas, students=students)


class PersonaMatch(NamedTuple):
    persona: PatientPersona
    override_applied: bool
    fallback_used: bool


def _tags_intersect(persona_tags: list[str], script_tags: list[str]) -> bool:
    # exact case-insensitive whole-tag equality
    normalized = {t.strip().lower() for t in persona_tags}
    return any(t.strip().lower() in normalized for t in script_tags)


def match_persona(
    store: PersonaStore,
    script: PatientScript,
    rng_seed: int,
    allow_fallback: bool = False,
) -> PersonaMatch:
    """Select a persona compatible with the script, uniformly under the seed.

    When the script carries demographics, eligible personas must also match
    its gender, and the chosen persona's age/gender are overridden by the
    script's.  An empty eligible set raises unless fallback is enabled, in
    which case a uniformly random persona is returned and flagged.
    """
    if not store.personas:
        raise NoCompatiblePersona("persona store is empty")
    script_tags = script.metadata.case_attributes.compatible_persona_tags
    demographics = script.metadata.demographics

    eligible = [p for p in store.personas if _tags_intersect(p.persona_tags, script_tags)]
    if demographics is not None and demographics.gender:
        wanted = demographics.gender.strip().lower()
        eligible = [p for p in eligible if p.demographics.gender.strip().lower() == wanted]

    rng = random.Random(rng_seed)
    if not eligible:
        if not allow_fallback:
            raise NoCompatiblePersona(
                f"no persona matches tags {script_tags}"
                + (f" and gender {demographics.gender}" if demographics else "")
            )
        persona = rng.choice(store.personas)
        if demographics is not None:
            return PersonaMatch(
                persona.with_demographics(demographics.age, demographics.gender), True, True
            )
        return PersonaMatch(persona, False, True)

    persona = rng.choice(eligible)
    if demographics is not None:
        return PersonaMatch(
            persona.with_demographics(demographics.age, demographics.gender), True, False
        )
    return PersonaMatch(persona, False, False)


def sample_cohort(store: PersonaStore, n: int, rng_seed: int) -> list[StudentProfile]:
    """Sample n distinct student profiles uniformly without replacement."""
    if n < 1:
        raise CohortTooLarge(f"cohort size must be >= 1, got {n}")
    if n > len(store.students):
        raise CohortTooLarge(f"cohort size {n} exceeds student store size {len(store.students)}")
    return random.Random(rng_seed).sample(store.students, n)
