"""Report files: CSV tables and self-contained SVG charts. Output is byte
stable for a fixed input."""

import csv
import io
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from anystore.io import smart_read, smart_write
from anystore.logging import get_logger
from matplotlib import colormaps, rc_context
from matplotlib.colors import Normalize
from matplotlib.figure import Figure

from foresight.exceptions import StorageError
from foresight.model import EstimateResult
from foresight.scoring.metrics import (
    CalibrationBin,
    ScoreRow,
    TopicRow,
    improvements,
)

log = get_logger(__name__)

CALIBRATION_FIELDS = (
    "bin_low",
    "bin_high",
    "count",
    "mean_predicted",
    "conversion_rate",
    "mean_uncertainty",
)
TOPIC_FIELDS = ("topic", "count", "mean_predicted", "conversion_rate", "gap")
SUMMARY_FIELDS = ("method", "n", "brier")
IMPROVEMENT_FIELDS = (
    "method",
    "baseline",
    "brier",
    "baseline_brier",
    "delta",
    "relative",
)
SVG_RC = {"svg.hashsalt": "foresight", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None, "Creator": None}
UNCERTAINTY_MAX = 0.5


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def render_csv(fields: Sequence[str], rows: Iterable[dict[str, Any]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([fmt(row.get(f)) for f in fields])
    return buffer.getvalue().encode("utf-8")


def render_svg(fig: Figure) -> bytes:
    buffer = io.BytesIO()
    with rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata=SVG_METADATA)
    return buffer.getvalue()


def calibration_chart(bins: Sequence[CalibrationBin]) -> bytes:
    """Bubble per non empty bin: mean predicted vs. conversion rate, area
    by count, darker for higher mean uncertainty"""
    with rc_context(SVG_RC):
        fig = Figure(figsize=(6, 6))
        ax = fig.add_subplot()
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1)
        filled = [b for b in bins if b.count > 0]
        if filled:
            largest = max(b.count for b in filled)
            ax.scatter(
                [b.mean_predicted for b in filled],
                [b.conversion_rate for b in filled],
                s=[1500 * b.count / largest for b in filled],
                c=[b.mean_uncertainty for b in filled],
                cmap=colormaps["Blues"],
                norm=Normalize(0, UNCERTAINTY_MAX, clip=True),
                edgecolors="black",
                linewidths=0.5,
            )
            for b in filled:
                ax.annotate(
                    str(b.count),
                    (b.mean_predicted, b.conversion_rate),  # type: ignore[arg-type]
                    ha="center",
                    va="center",
                    fontsize=8,
                )
        ax.set_xlim(-0.05, 1.05)
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("Estimated probability")
        ax.set_ylabel("Conversion rate")
        return render_svg(fig)


def topics_chart(rows: Sequence[TopicRow]) -> bytes:
    with rc_context(SVG_RC):
        fig = Figure(figsize=(8, max(2, 0.5 * len(rows) + 1)))
        ax = fig.add_subplot()
        positions = list(range(len(rows)))
        ax.barh(
            [p + 0.2 for p in positions],
            [r.mean_predicted for r in rows],
            height=0.4,
            label="Mean estimated probability",
            color="#9ecae1",
        )
        ax.barh(
            [p - 0.2 for p in positions],
            [r.conversion_rate for r in rows],
            height=0.4,
            label="Conversion rate",
            color="#08519c",
        )
        ax.set_yticks(positions, [f"{r.topic} ({r.count})" for r in rows])
        ax.set_xlim(0, 1)
        if rows:
            ax.legend(loc="lower right")
        fig.tight_layout()
        return render_svg(fig)


def guesses_chart(result: EstimateResult) -> bytes:
    """Each bubble one guess of an estimate, area by token probability"""
    weights = [math.exp(g.logprob) for g in result.guesses]
    with rc_context(SVG_RC):
        fig = Figure(figsize=(7, 3))
        ax = fig.add_subplot()
        ax.axvspan(
            max(result.p_hat - result.u_hat, 0),
            min(result.p_hat + result.u_hat, 1),
            color="#deebf7",
        )
        ax.axvline(result.p_hat, color="#08519c")
        ax.scatter(
            [g.value for g in result.guesses],
            weights,
            s=[2000 * w for w in weights],
            color="#3182bd",
            alpha=0.6,
            edgecolors="black",
            linewidths=0.5,
        )
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.05)
        ax.set_xlabel(f"Probability (p = {result.p_hat:.3f}, u = {result.u_hat:.3f})")
        ax.set_ylabel("Token probability")
        fig.tight_layout()
        return render_svg(fig)


def read_scores(uri: str | Path) -> list[ScoreRow]:
    """Static score rows (method,n,brier), e.g. published reference scores"""
    rows = []
    data = smart_read(str(uri))
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    for row in csv.DictReader(io.StringIO(data)):
        rows.append(
            ScoreRow(
                method=row["method"],
                n=int(row["n"]) if row.get("n") else None,
                brier=float(row["brier"]),
            )
        )
    return rows


def _write(path: Path, data: bytes) -> Path:
    try:
        smart_write(str(path), data)
    except OSError as e:
        raise StorageError(f"Cannot write `{path}`: {e}") from e
    return path


def emit_report(
    bins: Sequence[CalibrationBin],
    breakdowns: Sequence[TopicRow],
    scores: Sequence[ScoreRow],
    output_dir: Path | str,
) -> list[Path]:
    """Write the report tables and charts

    Returns:
        The written paths (manifest)
    """
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Cannot create `{output_dir}`: {e}") from e
    manifest = [
        _write(
            output_dir / "calibration.csv",
            render_csv(CALIBRATION_FIELDS, (b.model_dump() for b in bins)),
        ),
        _write(
            output_dir / "topics.csv",
            render_csv(TOPIC_FIELDS, (r.model_dump() for r in breakdowns)),
        ),
        _write(
            output_dir / "summary.csv",
            render_csv(SUMMARY_FIELDS, (s.model_dump() for s in scores)),
        ),
        _write(
            output_dir / "improvement.csv",
            render_csv(IMPROVEMENT_FIELDS, improvements(scores)),
        ),
        _write(output_dir / "calibration.svg", calibration_chart(bins)),
        _write(output_dir / "topics.svg", topics_chart(breakdowns)),
    ]
    log.info("Wrote report", output_dir=str(output_dir), files=len(manifest))
    return manifest
