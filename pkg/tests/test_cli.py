"""CLI surface: subcommands, exit codes, machine-readable errors."""

from __future__ import annotations

import csv
import json
import subprocess
import sys
from pathlib import Path

from conftest import REPO

from wardsim.models import canonical_json


def run_cli(*args, cwd=REPO):
    return subprocess.run(
        [sys.executable, "-m", "wardsim.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=300,
    )


def stderr_json(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


class TestSimulate:
    def test_scripted_golden_run_exits_zero(self, tmp_path):
        result = run_cli(
            "simulate", "--case", "wrist-01", "--students", "3", "--rounds", "2",
            "--seed", "7", "--backend", "scripted:tests/data/golden_fixture.json",
            "--out", str(tmp_path),
        )
        assert result.returncode == 0, result.stderr
        transcript_path = Path(result.stdout.strip())
        assert transcript_path.exists()
        transcript = json.loads(transcript_path.read_text())
        assert len(transcript["rounds"]) == 2
        assert (tmp_path / f"{transcript['session_id']}.exchanges.jsonl").exists()

    def test_synthetic_backend_spec(self, tmp_path):
        result = run_cli(
            "simulate", "--case", "knee-03", "--students", "2", "--rounds", "1",
            "--seed", "1", "--backend", "synthetic", "--out", str(tmp_path),
        )
        assert result.returncode == 0, result.stderr

    def test_unknown_case_exit_2(self, tmp_path):
        result = run_cli(
            "simulate", "--case", "nope-99", "--students", "2", "--rounds", "1",
            "--seed", "1", "--backend", "synthetic", "--out", str(tmp_path),
        )
        assert result.returncode == 2
        assert "case not found" in stderr_json(result)["error"]

    def test_zero_students_usage_error(self, tmp_path):
        result = run_cli(
            "simulate", "--case", "wrist-01", "--students", "0", "--rounds", "1",
            "--seed", "1", "--backend", "synthetic", "--out", str(tmp_path),
        )
        assert result.returncode == 2

    def test_missing_fixture_key_exit_3(self, tmp_path):
        fixture = tmp_path / "thin.json"
        fixture.write_text(json.dumps({"mode": "keyed", "replies": {}}))
        result = run_cli(
            "simulate", "--case", "wrist-01", "--students", "2", "--rounds", "1",
            "--seed", "1", "--backend", f"scripted:{fixture}", "--out", str(tmp_path),
        )
        assert result.returncode == 3
        assert stderr_json(result)["kind"] == "FixtureKeyMissing"


class TestScore:
    def test_score_reports_reward_and_figures(self, tmp_path):
        from conftest import reference_reply

        judges = tmp_path / "judges.json"
        judges.write_text(json.dumps({
            "mode": "keyed",
            "replies": {
                "Judge/*/judge-IS": {"IS-1": {"score": 2, "reason": "r"},
                                      "IS-2": {"score": 2, "reason": "r"},
                                      "IS-3": {"score": 1, "reason": "r"}},
                "Judge/*/judge-AQ": {"AQ-1": {"score": 1, "reason": "r"},
                                      "AQ-2": {"score": 2, "reason": "r"}},
                "Judge/*/judge-CS": {"CS-1": {"score": 2, "reason": "r"},
                                      "CS-2": {"score": 2, "reason": "r"}},
            },
        }))
        turn = tmp_path / "turn.json"
        turn.write_text(json.dumps({
            "tutor_output": reference_reply(),
            "context": {
                "case_data": {"question": "q", "answer": "a"},
                "socratic_steps": [],
                "cohort": ["Alice_1101", "Bob_2202", "Charlie_3303"],
                "dialogue_history": [],
                "image_present": True,
            },
        }))
        out = tmp_path / "report"
        result = run_cli("score", "--in", str(turn), "--judges", f"scripted:{judges}",
                         "--out", str(out))
        assert result.returncode == 0, result.stderr
        summary = json.loads(result.stdout)
        assert summary["final_reward"] == 12.0  # 2+2+1+1+2+2+2
        assert (out / "reward.json").exists()
        assert (out / "reward.csv").exists()
        assert (out / "reward_scores.png").exists()


class TestEvaluate:
    def test_evaluate_writes_report_and_figure(self, tmp_path):
        result = run_cli(
            "evaluate", "--cases", "data/cases", "--runs", "1",
            "--tutor", "synthetic", "--backend", "synthetic", "--judges", "synthetic:5",
            "--students", "2", "--rounds", "1", "--out", str(tmp_path / "eval"),
        )
        assert result.returncode == 0, result.stderr
        report = json.loads((tmp_path / "eval" / "evaluation.json").read_text())
        assert set(report["table"]["scores"]) == {"ETS", "MSM", "MPS"}
        assert (tmp_path / "eval" / "evaluation.csv").exists()
        assert (tmp_path / "eval" / "evaluation_scores.png").exists()
        with open(tmp_path / "eval" / "evaluation.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["dimension", "mean", "std", "runs", "transcript_std"]
        assert rows[-1][0] == "Avg"


class TestGenData:
    def test_decompose_then_script_then_export(self, tmp_path):
        qa = tmp_path / "qa.jsonl"
        qa.write_text(json.dumps({
            "id": "demo-1",
            "question": "A 40-year-old woman has sudden flank pain. What is the cause?",
            "answer": "A kidney stone",
            "images": ["Figure A"],
        }) + "\n")
        cases_dir = tmp_path / "cases"
        result = run_cli("gen-data", "--stage", "decompose", "--in", str(qa),
                         "--out", str(cases_dir), "--backend", "synthetic",
                         "--state", str(tmp_path / "state.json"))
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["cases_written"] == 1
        case_doc = json.loads((cases_dir / "demo-1.case.json").read_text())
        assert case_doc["socratic_steps"]

        # resume: second run skips the completed case
        again = run_cli("gen-data", "--stage", "decompose", "--in", str(qa),
                        "--out", str(cases_dir), "--backend", "synthetic",
                        "--state", str(tmp_path / "state.json"))
        assert json.loads(again.stdout)["cases_written"] == 0

        result = run_cli("gen-data", "--stage", "script", "--cases", str(cases_dir),
                         "--out", str(cases_dir), "--backend", "synthetic")
        assert result.returncode == 0, result.stderr
        script_doc = json.loads((cases_dir / "demo-1.script.json").read_text())
        assert script_doc["metadata"]["demographics"]["age"] == 40

        sim_out = tmp_path / "runs"
        result = run_cli("simulate", "--case", "demo-1", "--students", "2", "--rounds", "1",
                         "--seed", "2", "--backend", "synthetic", "--out", str(sim_out),
                         "--config", self._config(tmp_path, cases_dir))
        assert result.returncode == 0, result.stderr

        export_path = tmp_path / "dialogues.jsonl"
        result = run_cli("gen-data", "--stage", "export", "--in", str(sim_out),
                         "--cases", str(cases_dir), "--mode", "single_turn",
                         "--out", str(export_path))
        assert result.returncode == 0, result.stderr
        lines = export_path.read_text().splitlines()
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["conversations"][0]["role"] == "user"

    def _config(self, tmp_path, cases_dir):
        path = tmp_path / "config.json"
        path.write_text(canonical_json({
            "cases_dir": str(cases_dir),
            "personas": str(REPO / "data" / "personas.json"),
            "students": str(REPO / "data" / "students.json"),
        }))
        return str(path)

    def test_personas_stage(self, tmp_path):
        store = tmp_path / "personas.json"
        result = run_cli("gen-data", "--stage", "personas", "--kind", "patient", "-n", "4",
                         "--out", str(store), "--backend", "synthetic")
        assert result.returncode == 0, result.stderr
        assert len(json.loads(store.read_text())) == 4


class TestAgreement:
    def test_kappa_from_sheets(self, tmp_path):
        for rater, score in enumerate([8, 8, 8], start=1):
            with open(tmp_path / f"r{rater}.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=["item_id", "transcript", "ETS", "MSM", "MPS"])
                writer.writeheader()
                writer.writerow({"item_id": "s1", "transcript": "t", "ETS": score, "MSM": 7, "MPS": 9})
                writer.writerow({"item_id": "s2", "transcript": "t", "ETS": 5, "MSM": 7, "MPS": 9})
        result = run_cli("agreement", "--sheets", str(tmp_path / "r1.csv"),
                         "--sheets", str(tmp_path / "r2.csv"),
                         "--sheets", str(tmp_path / "r3.csv"), "--dimension", "ETS")
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["kappa"] == 1.0
