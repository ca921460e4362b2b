"""Round protocol, review loop, determinism, privacy, event ordering."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from wardsim.errors import CohortTooLarge, InvalidCase
from wardsim.gateway import ExchangeRecorder, Gateway, ScriptedBackend
from wardsim.linting import lint_transcript, scan_analysis_privacy
from wardsim.models import model_json
from wardsim.orchestrator import Phase, Session, SessionConfig, init_session
from wardsim.synthetic import SyntheticBackend

from conftest import TESTS_DATA

CLOCK = lambda: "2025-06-02T09:00:00Z"  # noqa: E731


def make_config(case_id="wrist-01", **overrides):
    base = dict(case_id=case_id, n_students=3, max_rounds=2, review_max_retries=3, rng_seed=7)
    base.update(overrides)
    return SessionConfig(**base)


def synthetic_session(bundle, store, **overrides):
    case, script = bundle
    recorder = ExchangeRecorder()
    config = make_config(case_id=case.case_id, **overrides)
    session = Session(
        config, case, script, store, {"*": SyntheticBackend()},
        gateway=Gateway(recorder=recorder), clock=CLOCK,
    )
    return session, recorder


class TestInit:
    def test_init_opens_round_one(self, wrist_bundle, store):
        session, _ = synthetic_session(wrist_bundle, store)
        assert session.phase == Phase.STUDENT_ANALYSIS
        assert session.current_round == 1
        assert len(session.cohort) == 3
        assert session.events[0].type == "session_created"
        statements = [e for e in session.events if e.type == "patient_statement"]
        assert statements and "slipped on the ice" in statements[0].payload["text"]

    def test_invalid_case_aborts(self, wrist_bundle, store):
        case, script = wrist_bundle
        bad = case.model_copy(update={"socratic_steps": []})
        with pytest.raises(InvalidCase):
            Session(make_config(), bad, script, store, {"*": SyntheticBackend()})

    def test_cohort_too_large(self, wrist_bundle, store):
        case, script = wrist_bundle
        with pytest.raises(CohortTooLarge):
            Session(make_config(n_students=99), case, script, store, {"*": SyntheticBackend()})

    def test_init_session_wrapper(self, wrist_bundle, store):
        case, script = wrist_bundle
        session = init_session(make_config(), store, case, script, {"*": SyntheticBackend()})
        assert session.state.phase == Phase.STUDENT_ANALYSIS


class TestGoldenRun:
    def run_golden(self):
        import wardsim.models as m
        import wardsim.stores as stores

        store = stores.load_persona_store(
            Path("data/personas.json"), Path("data/students.json")
        )
        with open("data/cases/wrist-01.case.json", encoding="utf-8") as fh:
            case = m.CaseRecord.model_validate(json.load(fh))
        with open("data/cases/wrist-01.script.json", encoding="utf-8") as fh:
            script = m.PatientScript.model_validate(json.load(fh))
        config = SessionConfig(
            case_id="wrist-01", n_students=3, max_rounds=2, review_max_retries=3, rng_seed=7,
            backends={"*": "scripted:tests/data/golden_fixture.json"},
        )
        recorder = ExchangeRecorder()
        session = Session(
            config, case, script, store,
            {"*": ScriptedBackend(TESTS_DATA / "golden_fixture.json")},
            gateway=Gateway(recorder=recorder), clock=CLOCK,
        )
        transcript = session.run()
        return session, transcript, recorder

    def test_matches_committed_golden_bytes(self):
        _, transcript, _ = self.run_golden()
        expected = (TESTS_DATA / "golden_transcript.json").read_text(encoding="utf-8")
        assert model_json(transcript) == expected

    def test_repeat_run_identical(self):
        _, t1, _ = self.run_golden()
        _, t2, _ = self.run_golden()
        assert model_json(t1) == model_json(t2)

    def test_structure_of_golden(self):
        session, transcript, recorder = self.run_golden()
        assert session.phase == Phase.COMPLETED
        assert len(transcript.rounds) == 2
        for rnd in transcript.rounds:
            assert len(rnd.student_analyses) == 3
            assert rnd.tutor_turn is not None
            assert rnd.tutor_turn.parsed_monologue is not None
            assert rnd.patient_response
            assert rnd.review_trail and all(v.accepted for v in rnd.review_trail)
        assert lint_transcript(transcript, session.events).ok
        assert scan_analysis_privacy(recorder.entries(), transcript).ok


class TestReviewLoop:
    def fixture(self, specialist, safety, revision_suffix=" (revised)"):
        return {
            "mode": "keyed",
            "replies": {
                "StudentAnalysis": {"analysis_for_teacher": "same idea every time"},
                "TutorGuidance": {
                    "internal_monologue": "<think_history>h</think_history>",
                    "guidance": "draft zero",
                },
                "TutorRevision": [
                    {"revised_guidance": f"draft {i}{revision_suffix}"} for i in range(1, 10)
                ],
                "SpecialistFactCheck": specialist,
                "Safety": safety,
                "StudentAction": {"query_for_patient": None, "query_for_expert": None},
            },
        }

    def run_with(self, bundle, store, fixture, **cfg):
        case, script = bundle
        config = make_config(case_id=case.case_id, max_rounds=1, **cfg)
        session = Session(
            config, case, script, store, {"*": ScriptedBackend(fixture)}, clock=CLOCK
        )
        session.run_round()
        return session.rounds[0]

    def test_both_accept_first_draft(self, knee_bundle, store):
        rnd = self.run_with(
            knee_bundle, store,
            self.fixture({"is_correct": True}, {"is_safe": True}),
        )
        assert rnd.tutor_turn.revision_count == 0
        assert [v.accepted for v in rnd.review_trail] == [True, True]
        assert rnd.tutor_turn.guidance == "draft zero"
        assert "review_exhausted" not in rnd.flags

    def test_specialist_reject_then_accept(self, knee_bundle, store):
        rnd = self.run_with(
            knee_bundle, store,
            self.fixture(
                [{"is_correct": False, "feedback": "wrong bone named"}, {"is_correct": True}],
                {"is_safe": True},
            ),
        )
        assert rnd.tutor_turn.revision_count == 1
        assert len(rnd.review_trail) == 4
        assert [v.accepted for v in rnd.review_trail] == [False, True, True, True]
        assert rnd.review_trail[0].feedback == "wrong bone named"
        assert rnd.tutor_turn.guidance.endswith("(revised)")
        assert "review_exhausted" not in rnd.flags

    def test_always_reject_exhausts_exactly_max_retries(self, knee_bundle, store):
        rnd = self.run_with(
            knee_bundle, store,
            self.fixture(
                {"is_correct": False, "feedback": "still wrong"},
                {"is_safe": True},
                revision_suffix="",
            ),
            review_max_retries=3,
        )
        assert rnd.tutor_turn.revision_count == 3
        assert len(rnd.review_trail) == 8  # 4 cycles x 2 reviewers
        assert "review_exhausted" in rnd.flags

    def test_zero_retries_flags_immediately(self, knee_bundle, store):
        rnd = self.run_with(
            knee_bundle, store,
            self.fixture({"is_correct": False, "feedback": "nope"}, {"is_safe": True}),
            review_max_retries=0,
        )
        assert rnd.tutor_turn.revision_count == 0
        assert len(rnd.review_trail) == 2
        assert "review_exhausted" in rnd.flags

    def test_malformed_reviewer_counts_as_rejection(self, knee_bundle, store):
        fixture = self.fixture("garbage not json", {"is_safe": True})
        rnd = self.run_with(knee_bundle, store, fixture, review_max_retries=1)
        assert "review_exhausted" in rnd.flags
        assert rnd.review_trail[0].feedback == "reviewer unavailable"

    def test_safety_rejection_carries_category(self, knee_bundle, store):
        rnd = self.run_with(
            knee_bundle, store,
            self.fixture(
                {"is_correct": True},
                [
                    {"is_safe": False, "issue_category": "tone",
                     "feedback_and_suggestion": "soften the phrasing"},
                    {"is_safe": True},
                ],
            ),
        )
        assert rnd.tutor_turn.revision_count == 1
        assert rnd.review_trail[1].issue_category == "tone"


class TestRoundBehavior:
    def test_all_null_actions_close_round_without_patient(self, knee_bundle, store):
        case, script = knee_bundle
        fixture = {
            "mode": "keyed",
            "replies": {
                "StudentAnalysis": {"analysis_for_teacher": "thinking"},
                "TutorGuidance": {"internal_monologue": "<think_history>h</think_history>", "guidance": "g"},
                "SpecialistFactCheck": {"is_correct": True},
                "Safety": {"is_safe": True},
                "StudentAction": {"query_for_patient": None, "query_for_expert": None},
            },
        }
        config = make_config(case_id=case.case_id, max_rounds=1)
        session = Session(config, case, script, store, {"*": ScriptedBackend(fixture)}, clock=CLOCK)
        session.run_round()
        rnd = session.rounds[0]
        assert rnd.patient_response is None
        assert session.phase == Phase.COMPLETED

    def test_student_malformed_records_skipped_turn(self, knee_bundle, store):
        case, script = knee_bundle
        fixture = {
            "mode": "keyed",
            "replies": {
                "StudentAnalysis": "never valid json",
                "TutorGuidance": {"internal_monologue": "<think_history>h</think_history>", "guidance": "g"},
                "SpecialistFactCheck": {"is_correct": True},
                "Safety": {"is_safe": True},
                "StudentAction": {"query_for_patient": None, "query_for_expert": None},
            },
        }
        config = make_config(case_id=case.case_id, max_rounds=1, n_students=2)
        session = Session(config, case, script, store, {"*": ScriptedBackend(fixture)}, clock=CLOCK)
        session.run_round()
        rnd = session.rounds[0]
        assert len(rnd.student_analyses) == 2  # cohort still covered
        assert all(a.analysis == "" for a in rnd.student_analyses)
        assert sum(1 for f in rnd.flags if f.startswith("analysis_skipped:")) == 2

    def test_max_rounds_one_completes(self, knee_bundle, store):
        session, _ = synthetic_session(knee_bundle, store, max_rounds=1)
        session.run_round()
        assert session.phase == Phase.COMPLETED
        with pytest.raises(RuntimeError):
            session.run_round()

    def test_patient_response_feeds_next_round_statement(self, wrist_bundle, store):
        session, _ = synthetic_session(wrist_bundle, store, max_rounds=2, rng_seed=3)
        session.run_round()
        first = session.rounds[0]
        if first.patient_response is not None:
            assert session.phase == Phase.STUDENT_ANALYSIS
            session.run_round()
            assert session.rounds[1].patient_statement == first.patient_response

    def test_run_handles_full_session(self, wrist_bundle, store):
        case, script = wrist_bundle
        session = Session(
            make_config(), case, script, store, {"*": SyntheticBackend()}, clock=CLOCK
        )
        transcript = session.run()
        assert len(transcript.rounds) == 2
        assert lint_transcript(transcript, session.events).ok

    def test_knee_case_has_no_image_tag_requirement(self, knee_bundle, store):
        session, _ = synthetic_session(knee_bundle, store, max_rounds=1)
        session.run_round()
        turn = session.rounds[0].tutor_turn
        assert turn.parsed_monologue is not None
        assert turn.parsed_monologue.image is None


class TestDeterminismAndPrivacy:
    def test_synthetic_runs_byte_identical(self, wrist_bundle, store):
        outs = []
        for _ in range(2):
            session, _ = synthetic_session(wrist_bundle, store, rng_seed=21)
            outs.append(model_json(session.run()))
        assert outs[0] == outs[1]

    @pytest.mark.parametrize("n,seed", [(1, 3), (4, 9), (8, 13)])
    def test_randomized_sessions_lint_and_privacy(self, wrist_bundle, store, n, seed):
        session, recorder = synthetic_session(wrist_bundle, store, n_students=n, rng_seed=seed)
        transcript = session.run()
        assert lint_transcript(transcript, session.events).ok
        report = scan_analysis_privacy(recorder.entries(), transcript)
        assert report.ok, report.violations

    def test_tutor_sees_all_analyses_students_see_only_own(self, wrist_bundle, store):
        session, recorder = synthetic_session(wrist_bundle, store, rng_seed=5)
        session.run()
        transcript = session.transcript()
        analyses = {a.student_id: a.analysis for a in transcript.rounds[0].student_analyses}
        for entry in recorder.entries():
            rendered = json.dumps(entry["user_payload"], ensure_ascii=False)
            if entry["role"] == "TutorGuidance" and entry["round"] == 1:
                for text in analyses.values():
                    assert text in rendered
            if entry["role"] == "StudentAnalysis" and entry["round"] == 2:
                own = entry["agent_id"]
                for sid, text in analyses.items():
                    if sid != own:
                        assert text not in rendered

    def test_history_budget_summarizes_old_rounds(self, wrist_bundle, store):
        session, recorder = synthetic_session(
            wrist_bundle, store, max_rounds=3, history_char_budget=600, rng_seed=2
        )
        session.run()
        tutor_requests = [
            e for e in recorder.entries() if e["role"] == "TutorGuidance" and e["round"] == 3
        ]
        rendered = json.dumps(tutor_requests[0]["user_payload"])
        assert "round_summary" in rendered


class TestParallelAgents:
    def test_parallel_run_matches_sequential_transcript(self, wrist_bundle, store):
        outputs = {}
        for parallel in (False, True):
            session, _ = synthetic_session(
                wrist_bundle, store, rng_seed=31, parallel_agents=parallel
            )
            transcript = session.run().model_copy(update={"config": {}})
            outputs[parallel] = model_json(transcript)  # content identical; config snapshot differs
        assert outputs[False] == outputs[True]

    def test_parallel_malformed_student_still_skips(self, knee_bundle, store):
        case, script = knee_bundle
        fixture = {
            "mode": "keyed",
            "replies": {
                "StudentAnalysis": "broken",
                "TutorGuidance": {"internal_monologue": "<think_history>h</think_history>", "guidance": "g"},
                "SpecialistFactCheck": {"is_correct": True},
                "Safety": {"is_safe": True},
                "StudentAction": {"query_for_patient": None, "query_for_expert": None},
            },
        }
        config = make_config(case_id=case.case_id, max_rounds=1, n_students=3, parallel_agents=True)
        session = Session(config, case, script, store, {"*": ScriptedBackend(fixture)}, clock=CLOCK)
        session.run_round()
        assert len(session.rounds[0].student_analyses) == 3


class TestRateLimit:
    def test_min_interval_enforced(self):
        import time

        from wardsim.gateway import AgentRequest, Gateway

        class SlowPolicyBackend:
            min_interval_s = 0.05

            def complete(self, request):
                return '{"is_safe": true}'

        gateway = Gateway()
        backend = SlowPolicyBackend()
        request = AgentRequest(role="Safety", system_prompt="s")
        start = time.monotonic()
        for _ in range(3):
            gateway.invoke(request, backend)
        assert time.monotonic() - start >= 0.1  # two enforced gaps


class TestEventFeed:
    def test_indices_gapless_and_phases_ordered(self, wrist_bundle, store):
        session, _ = synthetic_session(wrist_bundle, store)
        session.run()
        events = session.events
        assert [e.index for e in events] == list(range(len(events)))
        phases = [e.payload["phase"] for e in events if e.type == "phase"]
        assert phases[:3] == ["StudentAnalysis", "TutorReview", "QueryExploration"]
        assert phases[3] == "StudentAnalysis"

    def test_sink_receives_live_events(self, wrist_bundle, store):
        case, script = wrist_bundle
        seen = []
        session = Session(
            make_config(), case, script, store, {"*": SyntheticBackend()},
            clock=CLOCK, event_sink=seen.append,
        )
        session.run_round()
        assert [e.index for e in seen][-1] == seen[-1].index
        assert any(e.type == "guidance" for e in seen)
