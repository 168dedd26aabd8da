"""Aggregate per-replicate metric records into standardized scores and ranks.

Per-dataset metric means are expressed as ratios against a fixed reference
method, geometric-averaged across datasets, then combined into a Full score
(all four metrics), an Available score (metrics the method produces), and a
Partial score (RMSE and Brier only, the ranking key).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

METRICS = ("rmse", "mis", "auprc", "brier")
RATIO_FLOOR = 1e-12


@dataclass
class MethodScore:
    method: str
    ratios: dict[str, float | None]  # per-metric geometric-mean ratio vs reference
    full_score: float | None
    available_score: float | None
    partial_score: float | None
    rank: int = 0
    cpu_minutes: float = 0.0
    failure_proportion: float = 0.0


@dataclass
class ScoreBoard:
    stratum: str
    reference: str
    rows: list[MethodScore] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["method", "rank", "partial_score", "available_score", "full_score"]
            + [f"ratio_{m}" for m in METRICS]
            + ["cpu_minutes", "failure_proportion"]
        )
        for row in self.rows:
            writer.writerow(
                [row.method, row.rank, _fmt(row.partial_score), _fmt(row.available_score),
                 _fmt(row.full_score)]
                + [_fmt(row.ratios.get(m)) for m in METRICS]
                + [_fmt(row.cpu_minutes), _fmt(row.failure_proportion)]
            )
        return buf.getvalue()

    def to_markdown(self) -> str:
        head = ["method", "rank", "partial", "available", "full", *METRICS, "cpu_min", "fail"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for row in self.rows:
            cells = [row.method, str(row.rank), _fmt(row.partial_score),
                     _fmt(row.available_score), _fmt(row.full_score)]
            cells += [_fmt(row.ratios.get(m)) for m in METRICS]
            cells += [_fmt(row.cpu_minutes), _fmt(row.failure_proportion)]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def parse_scoreboard_csv(text: str) -> ScoreBoard:
    """Inverse of ScoreBoard.to_csv (stratum/reference not round-tripped)."""
    reader = csv.DictReader(io.StringIO(text))
    board = ScoreBoard(stratum="", reference="")
    for rec in reader:
        opt = lambda s: None if s == "" else float(s)
        board.rows.append(
            MethodScore(
                method=rec["method"],
                ratios={m: opt(rec[f"ratio_{m}"]) for m in METRICS},
                full_score=opt(rec["full_score"]),
                available_score=opt(rec["available_score"]),
                partial_score=opt(rec["partial_score"]),
                rank=int(rec["rank"]),
                cpu_minutes=float(rec["cpu_minutes"]),
                failure_proportion=float(rec["failure_proportion"]),
            )
        )
    return board


def _metric_means(records: list[dict]) -> dict[str, float]:
    """Per-metric mean over non-failed records; AUPRC flipped to 1-AUPRC
    so that every standardized metric is lower-is-better."""
    means = {}
    for m in METRICS:
        vals = [r[m] for r in records if not r.get("failed") and r.get(m) is not None]
        if not vals:
            continue
        v = float(np.mean(vals))
        means[m] = 1.0 - v if m == "auprc" else v
    return means


def _floored_log(x: float, what: str) -> float:
    if x < RATIO_FLOOR:
        log.warning("flooring nonpositive %s mean %g at %g", what, x, RATIO_FLOOR)
        x = RATIO_FLOOR
    return math.log(x)


def standardize(records_by_cell: dict[tuple[str, str], list[dict]], reference: str
                ) -> dict[str, dict[str, float]]:
    """Geometric-mean metric ratios per method versus the reference.

    records_by_cell maps (dataset, method) to that cell's MetricRecord dicts.
    A cell with no usable value for a metric contributes nothing to that
    metric's geometric mean.
    """
    datasets = sorted({d for d, _ in records_by_cell})
    methods = sorted({m for _, m in records_by_cell})
    if reference not in methods:
        raise ValueError(f"reference method {reference!r} has no records")

    ref_means = {d: _metric_means(records_by_cell.get((d, reference), [])) for d in datasets}
    out: dict[str, dict[str, float]] = {}
    for method in methods:
        ratios: dict[str, float] = {}
        for metric in METRICS:
            logs = []
            for d in datasets:
                mm = _metric_means(records_by_cell.get((d, method), []))
                if metric in mm and metric in ref_means[d]:
                    logs.append(
                        _floored_log(mm[metric], f"{method}/{d}/{metric}")
                        - _floored_log(ref_means[d][metric], f"{reference}/{d}/{metric}")
                    )
            if logs:
                ratios[metric] = math.exp(float(np.mean(logs)))
        out[method] = ratios
    return out


def compose_scores(ratios: dict[str, float]) -> tuple[float | None, float | None, float | None]:
    """(full, available, partial) geometric-mean composites of metric ratios."""

    def gmean(vals):
        return math.exp(float(np.mean([math.log(v) for v in vals]))) if vals else None

    full = gmean([ratios[m] for m in METRICS]) if all(m in ratios for m in METRICS) else None
    available = gmean([ratios[m] for m in METRICS if m in ratios])
    partial = (
        gmean([ratios["rmse"], ratios["brier"]])
        if "rmse" in ratios and "brier" in ratios
        else None
    )
    return full, available, partial


def build_scoreboard(records: list[dict], reference: str, stratum: str = "all") -> ScoreBoard:
    """Full pipeline: records (dicts with dataset/method/metric fields) to board."""
    cells: dict[tuple[str, str], list[dict]] = {}
    for r in records:
        cells.setdefault((r["dataset"], r["method"]), []).append(r)
    ratios_by_method = standardize(cells, reference)

    board = ScoreBoard(stratum=stratum, reference=reference)
    for method, ratios in ratios_by_method.items():
        recs = [r for r in records if r["method"] == method]
        full, available, partial = compose_scores(ratios)
        board.rows.append(
            MethodScore(
                method=method,
                ratios={m: ratios.get(m) for m in METRICS},
                full_score=full,
                available_score=available,
                partial_score=partial,
                cpu_minutes=float(np.mean([r["cpu_minutes"] for r in recs])),
                failure_proportion=float(np.mean([bool(r.get("failed")) for r in recs])),
            )
        )
    board.rows.sort(key=lambda s: (s.partial_score is None, s.partial_score, s.method))
    for i, row in enumerate(board.rows, start=1):
        row.rank = i
    return board


def stratify_by_separation(records: list[dict], reference: str
                           ) -> dict[str, ScoreBoard]:
    """Split records on their replicate-level separation verdict and score each."""
    strata = {
        "with-separation": [r for r in records if r.get("separated")],
        "without-separation": [r for r in records if not r.get("separated")],
    }
    boards = {}
    for name, recs in strata.items():
        if recs:
            boards[name] = build_scoreboard(recs, reference, stratum=name)
        else:
            log.info("stratum %s is empty; omitted", name)
    return boards


def render_heatmap_svg(board: ScoreBoard, path: str) -> bool:
    """Score/ratio heatmap (rows = methods by rank). Needs matplotlib."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.info("matplotlib unavailable; skipping heatmap")
        return False

    cols = ["partial_score", "available_score", "full_score", *[f"ratio_{m}" for m in METRICS]]
    values = np.full((len(board.rows), len(cols)), np.nan)
    for i, row in enumerate(board.rows):
        vals = [row.partial_score, row.available_score, row.full_score] + [
            row.ratios.get(m) for m in METRICS
        ]
        for j, v in enumerate(vals):
            if v is not None:
                values[i, j] = math.log(max(v, RATIO_FLOOR))

    fig, ax = plt.subplots(figsize=(2 + len(cols), 1 + 0.35 * len(board.rows)))
    span = np.nanmax(np.abs(values)) if np.isfinite(values).any() else 1.0
    im = ax.imshow(values, aspect="auto", cmap="RdBu_r", vmin=-span, vmax=span)
    ax.set_xticks(range(len(cols)), cols, rotation=45, ha="right")
    ax.set_yticks(range(len(board.rows)), [r.method for r in board.rows])
    ax.set_title(f"log score ratios vs {board.reference} ({board.stratum})")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return True
