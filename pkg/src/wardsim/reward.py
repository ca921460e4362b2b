"""Rubric scoring, veto reward, group-relative advantages, and the clipped
surrogate objective value.

The reward rubric has three axes (structure, analysis quality, clinical
accuracy & safety) with seven criteria scored on -2..+2.  A negative score on
any criterion in the veto set replaces the weighted sum with a large penalty.
Advantage computation and the surrogate objective are pure numeric functions:
policy ratios arrive as numbers from an external trainer.
"""

from __future__ import annotations

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from statistics import fmean, pstdev
from typing import Any, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ConfigMismatch, DomainError, MalformedReply
from .models import canonical_jsonl_line
from .monologue import is1_score, parse_monologue

log = logging.getLogger(__name__)

DEFAULT_CRITERIA: tuple[str, ...] = ("IS-1", "IS-2", "IS-3", "AQ-1", "AQ-2", "CS-1", "CS-2")
DEFAULT_VETO: tuple[str, ...] = ("CS-1", "CS-2", "IS-1")
SCORE_MIN = -2
SCORE_MAX = 2


class RubricScorecard(BaseModel):
    """Per-criterion integer scores with reasons and per-criterion weights."""

    model_config = ConfigDict(frozen=True)

    scores: dict[str, int]
    reasons: dict[str, str] = Field(default_factory=dict)
    criterion_set: list[str] = Field(default_factory=lambda: list(DEFAULT_CRITERIA))
    weights: dict[str, float] = Field(default_factory=dict)
    flags: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "RubricScorecard":
        if set(self.scores) != set(self.criterion_set):
            raise ValueError("scores keys must equal criterion_set")
        for cid, s in self.scores.items():
            if not SCORE_MIN <= s <= SCORE_MAX:
                raise ValueError(f"{cid} score {s} outside [{SCORE_MIN}, {SCORE_MAX}]")
        return self

    def weight(self, criterion: str) -> float:
        return self.weights.get(criterion, 1.0)


class RewardConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    veto_set: list[str] = Field(default_factory=lambda: list(DEFAULT_VETO))
    veto_penalty: float = -15.0


def final_reward(card: RubricScorecard, cfg: Optional[RewardConfig] = None) -> float:
    """Weighted rubric sum, replaced by the veto penalty when any veto-set
    criterion is strictly negative."""
    cfg = cfg or RewardConfig()
    missing = [c for c in cfg.veto_set if c not in card.criterion_set]
    if missing:
        raise ConfigMismatch(f"veto criteria absent from scorecard: {missing}")
    if any(card.scores[c] < 0 for c in cfg.veto_set):
        return cfg.veto_penalty
    return float(sum(card.weight(c) * card.scores[c] for c in card.criterion_set))


# ---------------------------------------------------------------------------
# Group-relative advantages and surrogate objective
# ---------------------------------------------------------------------------


class GrpoCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    candidate_id: str
    reward: float
    advantage: Optional[float] = None


class GrpoGroup(BaseModel):
    """G candidate outputs for one prompt, with group-standardized advantages."""

    model_config = ConfigDict(frozen=True)

    prompt_id: str
    candidates: list[GrpoCandidate] = Field(min_length=1)

    @property
    def g(self) -> int:
        return len(self.candidates)


def compute_advantages(group: GrpoGroup, eps_std: float = 1e-8) -> GrpoGroup:
    """Standardize rewards within the group: A_i = (r_i - mean) / (pstd + eps).

    Zero-variance groups (including singletons) get exactly zero advantages.
    """
    rewards = [c.reward for c in group.candidates]
    mean = fmean(rewards)
    std = pstdev(rewards) if len(rewards) > 1 else 0.0
    if std == 0.0:
        advantages = [0.0] * len(rewards)
    else:
        advantages = [(r - mean) / (std + eps_std) for r in rewards]
    updated = [
        c.model_copy(update={"advantage": a}) for c, a in zip(group.candidates, advantages)
    ]
    return GrpoGroup(prompt_id=group.prompt_id, candidates=updated)


class GrpoEvalInput(BaseModel):
    """Numeric inputs for one objective evaluation (per-sequence ratios)."""

    model_config = ConfigDict(frozen=True)

    ratios: list[float]
    advantages: list[float]
    clip_epsilon: float = 0.2
    kl_beta: float = 0.0
    ref_ratios: Optional[list[float]] = None

    @model_validator(mode="after")
    def _lengths(self) -> "GrpoEvalInput":
        if len(self.ratios) != len(self.advantages):
            raise ValueError("ratios and advantages must have the same length")
        if self.ref_ratios is not None and len(self.ref_ratios) != len(self.ratios):
            raise ValueError("ref_ratios must match ratios in length")
        if not self.ratios:
            raise ValueError("at least one candidate required")
        return self


def grpo_objective(inp: GrpoEvalInput) -> float:
    """Mean clipped-surrogate term minus the scaled KL penalty.

    Per candidate: min(rho * A, clip(rho, 1-eps, 1+eps) * A).  The KL term uses
    the nonnegative estimator r - ln(r) - 1 over reference ratios when given,
    else zero.
    """
    for rho in inp.ratios:
        if rho <= 0.0:
            raise DomainError(f"policy ratio must be positive, got {rho}")
    if inp.ref_ratios is not None:
        for r in inp.ref_ratios:
            if r <= 0.0:
                raise DomainError(f"reference ratio must be positive, got {r}")

    lo, hi = 1.0 - inp.clip_epsilon, 1.0 + inp.clip_epsilon
    terms = []
    for rho, adv in zip(inp.ratios, inp.advantages):
        clipped = min(max(rho, lo), hi)
        terms.append(min(rho * adv, clipped * adv))
    surrogate = fmean(terms)
    kl = 0.0
    if inp.ref_ratios is not None:
        kl = fmean(r - math.log(r) - 1.0 for r in inp.ref_ratios)
    return surrogate - inp.kl_beta * kl


# ---------------------------------------------------------------------------
# Judge-driven scoring of a tutor output
# ---------------------------------------------------------------------------


class ScoringContext(BaseModel):
    """The judge prompts' shared {context}: case material plus dialogue state."""

    model_config = ConfigDict(frozen=True)

    case_data: dict[str, Any]
    socratic_steps: list[dict[str, Any]] = Field(default_factory=list)
    cohort: list[str] = Field(default_factory=list)
    dialogue_history: list[dict[str, Any]] = Field(default_factory=list)
    image_present: bool = False

    def payload(self) -> dict[str, Any]:
        return {
            "case_data": self.case_data,
            "socratic_steps": self.socratic_steps,
            "dialogue_history": self.dialogue_history,
        }


def axes_for(criteria: Sequence[str]) -> dict[str, list[str]]:
    """Group criterion ids by axis prefix (text before the first dash)."""
    axes: dict[str, list[str]] = {}
    for cid in criteria:
        axes.setdefault(cid.split("-", 1)[0], []).append(cid)
    return axes


def score_sample(
    tutor_output: str,
    context: ScoringContext,
    judge_backend,
    *,
    criterion_set: Optional[Sequence[str]] = None,
    weights: Optional[dict[str, float]] = None,
    gateway=None,
    retries: int = 2,
) -> RubricScorecard:
    """Score one tutor output against the rubric.

    IS-1 is computed rule-based from the monologue structure; every other
    criterion comes from the per-axis judge.  Judge failures degrade to the
    most negative score rather than aborting the sample.
    """
    from . import gateway as gw
    from .prompts import judge_axis_request

    criteria = list(criterion_set or DEFAULT_CRITERIA)
    runner = gateway or gw.Gateway()

    scores: dict[str, int] = {}
    reasons: dict[str, str] = {}
    flags: list[str] = []

    judged = [c for c in criteria if c != "IS-1"]
    axes = axes_for(judged)

    def call_axis(axis: str, axis_criteria: list[str]):
        request = judge_axis_request(axis, axis_criteria, context.payload(), tutor_output)
        return runner.invoke(request, judge_backend, retries=retries)

    # the per-axis judges run concurrently; assembly stays in criterion order
    with ThreadPoolExecutor(max_workers=max(1, len(axes))) as pool:
        futures = {axis: pool.submit(call_axis, axis, crit) for axis, crit in axes.items()}
        replies: dict[str, Any] = {}
        for axis in axes:
            try:
                replies[axis] = futures[axis].result()
            except MalformedReply:
                replies[axis] = None

    for axis, axis_criteria in axes.items():
        reply = replies[axis]
        if reply is None:
            for cid in axis_criteria:
                scores[cid] = SCORE_MIN
                reasons[cid] = "judge failure"
            flags.append(f"judge_failure:{axis}")
            continue
        judgments = reply.scores
        for cid in axis_criteria:
            judgment = judgments.get(cid)
            if judgment is None:
                scores[cid] = SCORE_MIN
                reasons[cid] = "judge failure"
                flags.append(f"judge_missing:{cid}")
                continue
            value = judgment.score
            if value < SCORE_MIN or value > SCORE_MAX:
                log.warning("clamping out-of-range judge score %s for %s", value, cid)
                flags.append(f"clamped:{cid}")
                value = max(SCORE_MIN, min(SCORE_MAX, value))
            scores[cid] = value
            reasons[cid] = judgment.reason

    if "IS-1" in criteria:
        report = parse_monologue(tutor_output, context.cohort, context.image_present)
        scores["IS-1"] = is1_score(report)
        defects = report.missing_tags + report.unknown_student_ids + report.missing_student_ids
        reasons["IS-1"] = "structure ok" if report.clean else f"structural defects: {defects or 'order/json'}"

    return RubricScorecard(
        scores=scores,
        reasons=reasons,
        criterion_set=criteria,
        weights=weights or {},
        flags=flags,
    )


# ---------------------------------------------------------------------------
# Training-record export
# ---------------------------------------------------------------------------


class ScoredCandidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    candidate_id: str
    text: str
    scorecard: RubricScorecard


def context_digest(context: Any) -> str:
    return hashlib.sha256(canonical_jsonl_line(context).encode("utf-8")).hexdigest()


def export_training_records(
    prompt_id: str,
    context: Any,
    candidates: Sequence[ScoredCandidate],
    cfg: Optional[RewardConfig] = None,
    eps_std: float = 1e-8,
) -> list[str]:
    """Build the JSONL record(s) for one candidate group.

    Rewards come from :func:`final_reward`, advantages from
    :func:`compute_advantages`; an empty group emits nothing.
    """
    if not candidates:
        return []
    cfg = cfg or RewardConfig()
    rewards = [final_reward(c.scorecard, cfg) for c in candidates]
    group = GrpoGroup(
        prompt_id=prompt_id,
        candidates=[
            GrpoCandidate(candidate_id=c.candidate_id, reward=r)
            for c, r in zip(candidates, rewards)
        ],
    )
    group = compute_advantages(group, eps_std=eps_std)
    record = {
        "prompt_id": prompt_id,
        "context_digest": context_digest(context),
        "candidates": [
            {
                "candidate_id": cand.candidate_id,
                "text": cand.text,
                "scores": cand.scorecard.scores,
                "reward": gc.reward,
                "advantage": gc.advantage,
            }
            for cand, gc in zip(candidates, group.candidates)
        ],
    }
    return [canonical_jsonl_line(record)]
