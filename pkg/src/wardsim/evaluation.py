"""Simulation-based interactive evaluation.

A tutor backend is redeployed into fresh scripted sessions; an independent
judge rates each finished transcript on three 1-10 dimensions (teaching
strategy, multi-student management, professionalism/safety); results are
aggregated over repeated runs, and inter-rater agreement over human rating
sheets is measured with Fleiss' kappa.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean, pstdev
from typing import Any, Callable, NamedTuple, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import MalformedReply, WardsimError
from .gateway import BackendHandle, Gateway, Role
from .models import CaseRecord, PatientScript, Transcript
from .orchestrator import Session, SessionConfig, derive_seed
from .prompts import judge_dimension_request
from .stores import PersonaStore

log = logging.getLogger(__name__)

DIMENSIONS = ("ETS", "MSM", "MPS")


class EvalScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: str
    score: int = Field(ge=1, le=10)
    justification: str = ""


def transcript_dialogue(transcript: Transcript) -> list[dict[str, Any]]:
    """Flatten a transcript into the judge-facing dialogue history."""
    entries: list[dict[str, Any]] = []
    for rnd in transcript.rounds:
        r = rnd.round_index
        entries.append({"round": r, "speaker": "patient", "text": rnd.patient_statement})
        for a in rnd.student_analyses:
            entries.append({"round": r, "speaker": a.student_id, "text": a.analysis})
        if rnd.tutor_turn is not None:
            entries.append({"round": r, "speaker": "tutor", "text": rnd.tutor_turn.guidance})
        for act in rnd.student_actions:
            if act.query_for_patient:
                entries.append({"round": r, "speaker": act.student_id,
                                "text": f"(to patient) {act.query_for_patient}"})
            if act.query_for_expert:
                entries.append({"round": r, "speaker": act.student_id,
                                "text": f"(to expert) {act.query_for_expert}"})
        for ans in rnd.expert_answers:
            entries.append({"round": r, "speaker": "expert", "to": ans.student_id, "text": ans.answer})
        if rnd.patient_response:
            entries.append({"round": r, "speaker": "patient", "text": rnd.patient_response})
    return entries


def judge_transcript(
    transcript: Transcript,
    case: CaseRecord,
    dimension: str,
    judge_backend: BackendHandle,
    *,
    gateway: Optional[Gateway] = None,
    retries: int = 2,
) -> EvalScore:
    """Rate one completed transcript on one dimension."""
    if not transcript.rounds:
        raise ValueError("transcript has no completed rounds to judge")
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    runner = gateway or Gateway()
    request = judge_dimension_request(
        dimension,
        {
            "case_id": case.case_id,
            "question": case.question,
            "answer": case.answer,
        },
        [s.model_dump() for s in case.socratic_steps],
        transcript_dialogue(transcript),
    )
    reply = runner.invoke(request, judge_backend, retries=retries)
    return EvalScore(dimension=dimension, score=reply.score, justification=reply.justification)


# ---------------------------------------------------------------------------
# Run-level aggregation
# ---------------------------------------------------------------------------


class TranscriptScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    session_id: str
    case_id: str
    run: int
    dimension: str
    score: int


class DimensionAggregate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    std: float  # population std over run means
    run_means: list[float]
    transcript_std: float = 0.0


class EvalAggregate(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimensions: dict[str, DimensionAggregate]
    avg: float
    run_count: int = Field(ge=1)
    per_transcript: list[TranscriptScore] = Field(default_factory=list)
    coverage: float = 1.0
    failures: list[str] = Field(default_factory=list)

    def table(self) -> dict[str, Any]:
        """Report layout: one row per dimension plus the overall average."""
        return {
            "runs": self.run_count,
            "coverage": self.coverage,
            "scores": {
                dim: {"mean": agg.mean, "std": agg.std} for dim, agg in self.dimensions.items()
            },
            "Avg": self.avg,
        }


@dataclass
class SessionTemplate:
    """Everything needed to spin up fresh evaluation sessions around a tutor."""

    store: PersonaStore
    backends: dict[str, BackendHandle]
    judge_backend: BackendHandle
    n_students: int = 3
    max_rounds: int = 2
    review_max_retries: int = 3
    base_seed: int = 0
    gateway: Optional[Gateway] = None
    clock: Optional[Callable[[], str]] = None
    extra_config: dict[str, Any] = field(default_factory=dict)


def run_evaluation(
    tutor_backend: BackendHandle,
    case_bundles: Sequence[tuple[CaseRecord, PatientScript]],
    n_runs: int,
    template: SessionTemplate,
) -> EvalAggregate:
    """Fresh seeds per run, one session per case, three judgments per transcript.

    Partial failures are recorded and skipped; aggregates cover the scored
    transcripts with the coverage ratio reported.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if not case_bundles:
        raise ValueError("case set is empty")

    scores: list[TranscriptScore] = []
    failures: list[str] = []
    expected = 0

    def run_one(run: int, case: CaseRecord, script: PatientScript) -> Transcript:
        seed = derive_seed(template.base_seed, f"eval:{run}:{case.case_id}")
        config = SessionConfig(
            case_id=case.case_id,
            n_students=template.n_students,
            max_rounds=template.max_rounds,
            review_max_retries=template.review_max_retries,
            rng_seed=seed,
            session_id=f"{case.case_id}-run{run}",
            **template.extra_config,
        )
        backends = dict(template.backends)
        backends[Role.TUTOR_GUIDANCE.value] = tutor_backend
        backends[Role.TUTOR_REVISION.value] = tutor_backend
        session = Session(
            config, case, script, template.store, backends,
            gateway=template.gateway, clock=template.clock,
        )
        return session.run()

    for run in range(1, n_runs + 1):
        # sessions within a run execute concurrently; results collect in case order
        with ThreadPoolExecutor(max_workers=min(8, len(case_bundles))) as pool:
            session_futures = [
                pool.submit(run_one, run, case, script) for case, script in case_bundles
            ]
            for (case, _), future in zip(case_bundles, session_futures):
                expected += 1
                try:
                    transcript = future.result()
                except WardsimError as exc:
                    failures.append(f"run {run} case {case.case_id}: session failed: {exc}")
                    continue
                scores_for = _judge_all_dimensions(transcript, case, template)
                for dim in DIMENSIONS:
                    outcome = scores_for[dim]
                    if isinstance(outcome, MalformedReply):
                        failures.append(f"run {run} case {case.case_id}: {dim} unscored: {outcome}")
                        continue
                    scores.append(
                        TranscriptScore(
                            session_id=transcript.session_id,
                            case_id=case.case_id,
                            run=run,
                            dimension=dim,
                            score=outcome.score,
                        )
                    )
    return aggregate_scores(scores, n_runs, expected, failures)


def _judge_all_dimensions(
    transcript: Transcript, case: CaseRecord, template: "SessionTemplate"
) -> dict[str, Any]:
    """The three dimension judgments run concurrently, collected in fixed order."""
    def judge(dim: str):
        return judge_transcript(
            transcript, case, dim, template.judge_backend, gateway=template.gateway
        )

    results: dict[str, Any] = {}
    with ThreadPoolExecutor(max_workers=len(DIMENSIONS)) as pool:
        futures = {dim: pool.submit(judge, dim) for dim in DIMENSIONS}
        for dim in DIMENSIONS:
            try:
                results[dim] = futures[dim].result()
            except MalformedReply as exc:
                results[dim] = exc
    return results


def aggregate_scores(
    scores: list[TranscriptScore],
    n_runs: int,
    expected_transcripts: int,
    failures: Optional[list[str]] = None,
) -> EvalAggregate:
    """Aggregate per-transcript scores into run means and dimension tables."""
    dimensions: dict[str, DimensionAggregate] = {}
    for dim in DIMENSIONS:
        dim_scores = [s for s in scores if s.dimension == dim]
        run_means = []
        for run in range(1, n_runs + 1):
            run_scores = [s.score for s in dim_scores if s.run == run]
            if run_scores:
                run_means.append(fmean(run_scores))
        if not run_means:
            dimensions[dim] = DimensionAggregate(mean=0.0, std=0.0, run_means=[])
            continue
        all_scores = [s.score for s in dim_scores]
        dimensions[dim] = DimensionAggregate(
            mean=fmean(run_means),
            std=pstdev(run_means) if len(run_means) > 1 else 0.0,
            run_means=run_means,
            transcript_std=pstdev(all_scores) if len(all_scores) > 1 else 0.0,
        )
    scored_dims = [agg.mean for agg in dimensions.values() if agg.run_means]
    avg = fmean(scored_dims) if scored_dims else 0.0
    scored_sessions = len({(s.session_id, s.run) for s in scores})
    coverage = scored_sessions / expected_transcripts if expected_transcripts else 0.0
    return EvalAggregate(
        dimensions=dimensions,
        avg=avg,
        run_count=n_runs,
        per_transcript=scores,
        coverage=coverage,
        failures=failures or [],
    )


# ---------------------------------------------------------------------------
# Fleiss' kappa over human rating sheets
# ---------------------------------------------------------------------------


class RatingMatrix(BaseModel):
    """Items x raters categorical ratings; every cell filled, >= 2 raters."""

    model_config = ConfigDict(frozen=True)

    ratings: list[list[Union[int, str]]]

    @model_validator(mode="after")
    def _rectangular(self) -> "RatingMatrix":
        if not self.ratings:
            raise ValueError("rating matrix has no items")
        width = len(self.ratings[0])
        if width < 2:
            raise ValueError("fleiss kappa needs at least 2 raters")
        for row in self.ratings:
            if len(row) != width:
                raise ValueError("every item must have the same number of raters")
        return self

    @property
    def n_raters(self) -> int:
        return len(self.ratings[0])


class KappaResult(NamedTuple):
    value: float
    degenerate: bool


def fleiss_kappa(matrix: RatingMatrix) -> KappaResult:
    """Standard Fleiss' kappa; a single-category matrix returns 1.0 flagged."""
    n = matrix.n_raters
    items = matrix.ratings
    categories = sorted({str(cell) for row in items for cell in row})
    counts = []
    for row in items:
        counts.append([sum(1 for cell in row if str(cell) == cat) for cat in categories])

    big_n = len(items)
    p_bar = fmean((sum(c * c for c in row) - n) / (n * (n - 1)) for row in counts)
    totals = [sum(row[j] for row in counts) for j in range(len(categories))]
    p_e = sum((t / (big_n * n)) ** 2 for t in totals)
    if p_e >= 1.0:
        return KappaResult(1.0, True)
    return KappaResult((p_bar - p_e) / (1.0 - p_e), False)


DEFAULT_BANDS: tuple[tuple[int, int, str], ...] = (
    (1, 2, "poor"),
    (3, 4, "weak"),
    (5, 6, "fair"),
    (7, 8, "good"),
    (9, 10, "excellent"),
)


def band_matrix(matrix: RatingMatrix, bands: Sequence[tuple[int, int, str]] = DEFAULT_BANDS) -> RatingMatrix:
    """Collapse raw 1-10 ratings into tier labels before computing agreement."""
    def band(value: Union[int, str]) -> str:
        v = int(value)
        for lo, hi, label in bands:
            if lo <= v <= hi:
                return label
        raise ValueError(f"rating {v} outside every band")

    return RatingMatrix(ratings=[[band(cell) for cell in row] for row in matrix.ratings])


# ---------------------------------------------------------------------------
# Human rating sheets (CSV out, CSV in)
# ---------------------------------------------------------------------------

_SHEET_FIELDS = ["item_id", "transcript", "ETS", "MSM", "MPS"]


def render_anonymized(transcript: Transcript) -> str:
    """Flatten a transcript to plain text with student names masked, both as
    speaker labels and inside message text."""
    alias = {sid: f"Student {i + 1}" for i, sid in enumerate(transcript.cohort)}
    lines = []
    for entry in transcript_dialogue(transcript):
        speaker = alias.get(entry["speaker"], entry["speaker"].capitalize())
        text = entry["text"]
        for sid, masked in alias.items():
            text = text.replace(sid, masked)
        lines.append(f"[round {entry['round']}] {speaker}: {text}")
    return "\n".join(lines)


def export_rating_sheet(transcripts: Sequence[Transcript], path: Union[str, Path]) -> None:
    """Write the blank scoring sheet one human rater fills in."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SHEET_FIELDS)
        writer.writeheader()
        for t in transcripts:
            writer.writerow(
                {"item_id": t.session_id, "transcript": render_anonymized(t), "ETS": "", "MSM": "", "MPS": ""}
            )


def import_rating_matrix(paths: Sequence[Union[str, Path]], dimension: str) -> RatingMatrix:
    """Assemble one dimension's matrix from several raters' filled sheets."""
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    per_rater: list[dict[str, int]] = []
    for path in paths:
        ratings: dict[str, int] = {}
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                cell = (row.get(dimension) or "").strip()
                if not cell:
                    raise ValueError(f"{path}: missing {dimension} rating for {row.get('item_id')}")
                ratings[row["item_id"]] = int(cell)
        per_rater.append(ratings)
    item_ids = sorted(per_rater[0])
    for i, ratings in enumerate(per_rater[1:], start=2):
        if sorted(ratings) != item_ids:
            raise ValueError(f"rater sheet {i} covers different items")
    return RatingMatrix(ratings=[[ratings[item] for ratings in per_rater] for item in item_ids])
