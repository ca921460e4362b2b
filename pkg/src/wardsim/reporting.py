"""Report rendering: JSON + CSV alongside matplotlib figures.

Used by the ``score`` and ``evaluate`` CLI paths; figures are written as PNG
files next to the delimited output so reports are skimmable without tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalAggregate
from .models import canonical_json
from .reward import RubricScorecard


def save_eval_report(aggregate: EvalAggregate, out_dir: Union[str, Path]) -> dict[str, Path]:
    """Write evaluation.json / evaluation.csv / evaluation_scores.png."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "evaluation.json",
        "csv": out / "evaluation.csv",
        "figure": out / "evaluation_scores.png",
    }

    report = aggregate.model_dump(mode="json")
    report["table"] = aggregate.table()
    paths["json"].write_text(canonical_json(report), encoding="utf-8")

    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dimension", "mean", "std", "runs", "transcript_std"])
        for dim, agg in aggregate.dimensions.items():
            writer.writerow([dim, f"{agg.mean:.4f}", f"{agg.std:.4f}", aggregate.run_count,
                             f"{agg.transcript_std:.4f}"])
        writer.writerow(["Avg", f"{aggregate.avg:.4f}", "", aggregate.run_count, ""])

    dims = list(aggregate.dimensions)
    means = [aggregate.dimensions[d].mean for d in dims]
    stds = [aggregate.dimensions[d].std for d in dims]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(dims, means, yerr=stds, capsize=4, color="#6baed6", edgecolor="#2171b5")
    ax.axhline(aggregate.avg, color="#555555", linestyle="--", linewidth=1,
               label=f"Avg = {aggregate.avg:.2f}")
    ax.set_ylim(0, 10)
    ax.set_ylabel("score (1-10)")
    ax.set_title(f"Interactive evaluation over {aggregate.run_count} run(s)")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(paths["figure"], dpi=120)
    plt.close(fig)
    return paths


def save_reward_report(
    card: RubricScorecard, reward: float, out_dir: Union[str, Path]
) -> dict[str, Path]:
    """Write reward.json / reward.csv / reward_scores.png for one scorecard."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "reward.json",
        "csv": out / "reward.csv",
        "figure": out / "reward_scores.png",
    }

    paths["json"].write_text(
        canonical_json(
            {
                "scores": card.scores,
                "reasons": card.reasons,
                "weights": {c: card.weight(c) for c in card.criterion_set},
                "flags": card.flags,
                "final_reward": reward,
            }
        ),
        encoding="utf-8",
    )

    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["criterion", "score", "weight", "reason"])
        for cid in card.criterion_set:
            writer.writerow([cid, card.scores[cid], card.weight(cid), card.reasons.get(cid, "")])
        writer.writerow(["final_reward", reward, "", ""])

    colors = ["#d7301f" if card.scores[c] < 0 else "#31a354" for c in card.criterion_set]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(card.criterion_set, [card.scores[c] for c in card.criterion_set], color=colors)
    ax.axhline(0, color="#333333", linewidth=0.8)
    ax.set_ylim(-2.5, 2.5)
    ax.set_ylabel("criterion score")
    ax.set_title(f"Rubric scores (final reward {reward:+.1f})")
    fig.tight_layout()
    fig.savefig(paths["figure"], dpi=120)
    plt.close(fig)
    return paths
