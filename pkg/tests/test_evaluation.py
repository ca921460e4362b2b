"""Interactive evaluation, aggregation, and inter-rater agreement."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from wardsim.errors import MalformedReply
from wardsim.evaluation import (
    DIMENSIONS,
    RatingMatrix,
    SessionTemplate,
    TranscriptScore,
    aggregate_scores,
    band_matrix,
    export_rating_sheet,
    fleiss_kappa,
    import_rating_matrix,
    judge_transcript,
    render_anonymized,
    run_evaluation,
    transcript_dialogue,
)
from wardsim.gateway import ScriptedBackend
from wardsim.models import Transcript
from wardsim.synthetic import SyntheticBackend


def minimal_transcript(wrist_bundle, store) -> Transcript:
    from wardsim.orchestrator import Session, SessionConfig

    case, script = wrist_bundle
    config = SessionConfig(case_id=case.case_id, n_students=2, max_rounds=1, rng_seed=4)
    session = Session(config, case, script, store, {"*": SyntheticBackend()},
                      clock=lambda: "2025-06-02T09:00:00Z")
    return session.run()


class TestJudgeTranscript:
    def test_scripted_judge_reply(self, wrist_bundle, store):
        transcript = minimal_transcript(wrist_bundle, store)
        case, _ = wrist_bundle
        backend = ScriptedBackend(
            {"mode": "keyed",
             "replies": {"Judge": {"ETS_Score": 8, "ETS_Justification": "probing questions"}}}
        )
        score = judge_transcript(transcript, case, "ETS", backend)
        assert score.dimension == "ETS" and score.score == 8

    def test_out_of_range_score_retried_then_malformed(self, wrist_bundle, store):
        transcript = minimal_transcript(wrist_bundle, store)
        case, _ = wrist_bundle
        backend = ScriptedBackend(
            {"mode": "keyed", "replies": {"Judge": {"MPS_Score": 11, "MPS_Justification": "x"}}}
        )
        with pytest.raises(MalformedReply):
            judge_transcript(transcript, case, "MPS", backend, retries=1)

    def test_empty_transcript_rejected(self, wrist_bundle):
        case, _ = wrist_bundle
        empty = Transcript(session_id="s", case_id=case.case_id, persona_id="p", cohort=[])
        with pytest.raises(ValueError):
            judge_transcript(empty, case, "ETS", ScriptedBackend({"mode": "keyed", "replies": {}}))

    def test_dialogue_flattening_orders_rounds(self, wrist_bundle, store):
        transcript = minimal_transcript(wrist_bundle, store)
        entries = transcript_dialogue(transcript)
        assert entries[0]["speaker"] == "patient"
        rounds = [e["round"] for e in entries]
        assert rounds == sorted(rounds)


class TestRunEvaluation:
    def template(self, store, judge_payloads=None):
        judge = ScriptedBackend(
            {"mode": "keyed", "replies": judge_payloads or {
                "Judge/*/judge-ETS": {"ETS_Score": 8, "ETS_Justification": "x"},
                "Judge/*/judge-MSM": {"MSM_Score": 8, "MSM_Justification": "x"},
                "Judge/*/judge-MPS": {"MPS_Score": 8, "MPS_Justification": "x"},
            }}
        )
        return SessionTemplate(
            store=store,
            backends={"*": SyntheticBackend()},
            judge_backend=judge,
            n_students=2,
            max_rounds=1,
            base_seed=11,
            clock=lambda: "2025-06-02T09:00:00Z",
        )

    def test_constant_scores_aggregate(self, wrist_bundle, chest_bundle, store):
        aggregate = run_evaluation(
            SyntheticBackend(), [wrist_bundle, chest_bundle], 2, self.template(store)
        )
        for dim in DIMENSIONS:
            assert aggregate.dimensions[dim].mean == 8.0
            assert aggregate.dimensions[dim].std == 0.0
        assert aggregate.avg == 8.0
        assert aggregate.coverage == 1.0
        assert aggregate.run_count == 2

    def test_run_means_hand_oracle(self):
        scores = [
            TranscriptScore(session_id="a", case_id="c", run=1, dimension="ETS", score=8),
            TranscriptScore(session_id="b", case_id="d", run=1, dimension="ETS", score=8),
            TranscriptScore(session_id="a", case_id="c", run=2, dimension="ETS", score=8),
            TranscriptScore(session_id="b", case_id="d", run=2, dimension="ETS", score=9),
        ]
        # run means 8.0 and 8.5 -> mean 8.25, population std 0.25
        agg = aggregate_scores(scores, 2, 4)
        assert agg.dimensions["ETS"].mean == pytest.approx(8.25)
        assert agg.dimensions["ETS"].std == pytest.approx(0.25)

    def test_partial_judge_failure_reported(self, wrist_bundle, store):
        template = self.template(store, judge_payloads={
            "Judge/*/judge-ETS": {"ETS_Score": 7, "ETS_Justification": "x"},
            "Judge/*/judge-MSM": "never valid",
            "Judge/*/judge-MPS": {"MPS_Score": 9, "MPS_Justification": "x"},
        })
        aggregate = run_evaluation(SyntheticBackend(), [wrist_bundle], 1, template)
        assert aggregate.failures
        assert aggregate.dimensions["ETS"].mean == 7.0
        assert aggregate.dimensions["MSM"].run_means == []

    def test_deterministic_under_fixed_seeds(self, wrist_bundle, store):
        a = run_evaluation(SyntheticBackend(), [wrist_bundle], 2, self.template(store))
        b = run_evaluation(SyntheticBackend(), [wrist_bundle], 2, self.template(store))
        assert a.model_dump() == b.model_dump()

    def test_judge_requests_carry_case_and_steps(self, wrist_bundle, store):
        captured = []

        class SpyBackend:
            def complete(self, request):
                captured.append(request)
                dim = request.judge_dimension
                return f'{{"{dim}_Score": 8, "{dim}_Justification": "ok"}}'

        template = self.template(store)
        template.judge_backend = SpyBackend()
        run_evaluation(SyntheticBackend(), [wrist_bundle], 1, template)
        payload = captured[0].user_payload
        assert payload["case_data"]["case_id"] == "wrist-01"
        assert payload["socratic_steps"]
        assert payload["dialogue_history"]


class TestFleissKappa:
    def test_unanimous_is_exactly_one(self):
        matrix = RatingMatrix(ratings=[["A", "A", "A"], ["B", "B", "B"]])
        result = fleiss_kappa(matrix)
        assert result.value == 1.0 and not result.degenerate

    def test_worked_minus_one_third(self):
        matrix = RatingMatrix(ratings=[["A", "A", "B"], ["A", "B", "B"]])
        result = fleiss_kappa(matrix)
        assert result.value == pytest.approx(-1.0 / 3.0, abs=1e-9)

    def test_single_category_degenerate(self):
        matrix = RatingMatrix(ratings=[["A", "A"], ["A", "A"]])
        result = fleiss_kappa(matrix)
        assert result.value == 1.0 and result.degenerate

    def test_needs_two_raters(self):
        with pytest.raises(ValueError):
            RatingMatrix(ratings=[["A"]])

    def test_ragged_rejected(self):
        with pytest.raises(ValueError):
            RatingMatrix(ratings=[["A", "B"], ["A"]])

    @given(
        data=st.lists(
            st.lists(st.sampled_from(["w", "x", "y", "z"]), min_size=3, max_size=3),
            min_size=2,
            max_size=12,
        ),
        seed=st.integers(0, 999),
    )
    @settings(max_examples=120, deadline=None)
    def test_relabel_and_permutation_invariance(self, data, seed):
        base = fleiss_kappa(RatingMatrix(ratings=data)).value
        rng = random.Random(seed)
        labels = ["w", "x", "y", "z"]
        relabeled_names = labels[:]
        rng.shuffle(relabeled_names)
        mapping = dict(zip(labels, relabeled_names))
        relabeled = [[mapping[c] for c in row] for row in data]
        rows = relabeled[:]
        rng.shuffle(rows)
        permuted = [row[:] for row in rows]
        for row in permuted:
            rng.shuffle(row)
        again = fleiss_kappa(RatingMatrix(ratings=permuted)).value
        assert again == pytest.approx(base, abs=1e-9)

    def test_banding_collapses_neighbors(self):
        matrix = RatingMatrix(ratings=[[9, 10, 9], [1, 2, 1]])
        banded = band_matrix(matrix)
        assert fleiss_kappa(banded).value == 1.0


class TestRatingSheets:
    def test_export_import_round_trip(self, tmp_path, wrist_bundle, store):
        transcript = minimal_transcript(wrist_bundle, store)
        blank = tmp_path / "sheet.csv"
        export_rating_sheet([transcript], blank)
        import csv

        rows = list(csv.DictReader(open(blank, encoding="utf-8")))
        assert rows[0]["item_id"] == transcript.session_id
        assert rows[0]["ETS"] == ""

        filled = []
        for rater, score in enumerate([8, 9, 8], start=1):
            path = tmp_path / f"rater{rater}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=["item_id", "transcript", "ETS", "MSM", "MPS"])
                writer.writeheader()
                writer.writerow({"item_id": transcript.session_id, "transcript": "(anon)",
                                 "ETS": score, "MSM": 7, "MPS": 9})
            filled.append(path)
        matrix = import_rating_matrix(filled, "ETS")
        assert matrix.ratings == [[8, 9, 8]]
        msm = import_rating_matrix(filled, "MSM")
        assert fleiss_kappa(msm).degenerate

    def test_anonymization_masks_student_names(self, wrist_bundle, store):
        transcript = minimal_transcript(wrist_bundle, store)
        text = render_anonymized(transcript)
        for sid in transcript.cohort:
            assert sid not in text
        assert "Student 1" in text

    def test_missing_cell_rejected(self, tmp_path):
        import csv

        path = tmp_path / "r.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["item_id", "transcript", "ETS", "MSM", "MPS"])
            writer.writeheader()
            writer.writerow({"item_id": "s1", "transcript": "t", "ETS": "", "MSM": 5, "MPS": 5})
        with pytest.raises(ValueError):
            import_rating_matrix([path, path], "ETS")
