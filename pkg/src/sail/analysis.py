"""Post-hoc statistics over per-sample diagnostics.

Splits the samples of an episode into four quadrants by the joint
correctness of the two models, then correlates each model's entropy
and confidence with its per-sample cross-entropy inside each quadrant.
Quadrants with too few points are skipped rather than reported with a
meaningless coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .harness import RunReport

QUADRANTS = ("both-correct", "vlm-only", "ada-only", "both-wrong")
MODELS = ("vlm", "ada")
PREDICTORS = ("entropy", "confidence")

MIN_QUADRANT_POINTS = 3


def pearson_r(x, y) -> float:
    """Pearson correlation coefficient, NaN when either side is degenerate.

    Uses the standard centered-moment formula.  Fewer than two points,
    or zero variance on either axis, leaves the coefficient undefined
    and yields NaN.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError(
            f"expected matching 1-d arrays, got shapes {x.shape} and {y.shape}"
        )
    if x.size < 2:
        return float("nan")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(dx * dy) / denom)


@dataclass(frozen=True)
class CorrelationCell:
    """One (quadrant, model, predictor) correlation result."""

    quadrant: str
    model: str
    predictor: str
    n_points: int
    r: float
    skipped: bool
    note: str


@dataclass(frozen=True)
class CorrelationAnalysis:
    """All correlation cells plus the quadrant partition sizes."""

    cells: tuple[CorrelationCell, ...]
    quadrant_counts: dict[str, int]
    n_samples: int


def _quadrant_masks(correct_vlm: np.ndarray, correct_ada: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "both-correct": correct_vlm & correct_ada,
        "vlm-only": correct_vlm & ~correct_ada,
        "ada-only": ~correct_vlm & correct_ada,
        "both-wrong": ~correct_vlm & ~correct_ada,
    }


def analyze_correlations(report: RunReport) -> CorrelationAnalysis:
    """Correlate per-sample uncertainty with per-sample loss, by quadrant.

    For every quadrant of the joint-correctness partition and for each
    model, computes Pearson r between the model's predictive entropy
    (and separately its top-class confidence) and its cross-entropy on
    the true label.  Quadrants with fewer than three points are marked
    skipped with a note instead of a coefficient.

    Raises
    ------
    InvalidInputError
        If the report was produced without per-sample diagnostics.
    """
    if report.diagnostics is None:
        raise InvalidInputError(
            "report carries no per-sample diagnostics; rerun with keep_diagnostics enabled"
        )
    data = report.diagnostics.arrays()
    masks = _quadrant_masks(data["correct_vlm"], data["correct_ada"])
    cells = []
    counts = {}
    for quadrant in QUADRANTS:
        mask = masks[quadrant]
        n = int(mask.sum())
        counts[quadrant] = n
        for model in MODELS:
            target = data[f"cross_entropy_{model}"][mask]
            for predictor in PREDICTORS:
                if n < MIN_QUADRANT_POINTS:
                    cells.append(
                        CorrelationCell(
                            quadrant=quadrant,
                            model=model,
                            predictor=predictor,
                            n_points=n,
                            r=float("nan"),
                            skipped=True,
                            note=f"skipped: {n} point(s) < {MIN_QUADRANT_POINTS}",
                        )
                    )
                    continue
                values = data[f"{predictor}_{model}"][mask]
                r = pearson_r(values, target)
                note = "" if np.isfinite(r) else "undefined: zero variance"
                cells.append(
                    CorrelationCell(
                        quadrant=quadrant,
                        model=model,
                        predictor=predictor,
                        n_points=n,
                        r=r,
                        skipped=False,
                        note=note,
                    )
                )
    return CorrelationAnalysis(
        cells=tuple(cells),
        quadrant_counts=counts,
        n_samples=int(sum(counts.values())),
    )


def write_scatter_csv(report: RunReport, path) -> None:
    """Per-sample scatter points with their quadrant labels."""
    if report.diagnostics is None:
        raise InvalidInputError(
            "report carries no per-sample diagnostics; rerun with keep_diagnostics enabled"
        )
    data = report.diagnostics.arrays()
    masks = _quadrant_masks(data["correct_vlm"], data["correct_ada"])
    quadrant_of = np.empty(data["step"].shape[0], dtype=object)
    for quadrant, mask in masks.items():
        quadrant_of[mask] = quadrant
    columns = (
        "step",
        "quadrant",
        "entropy_vlm",
        "entropy_ada",
        "confidence_vlm",
        "confidence_ada",
        "cross_entropy_vlm",
        "cross_entropy_ada",
    )
    lines = [",".join(columns)]
    for i in range(data["step"].shape[0]):
        lines.append(
            ",".join(
                [
                    str(int(data["step"][i])),
                    str(quadrant_of[i]),
                    f"{data['entropy_vlm'][i]:.9g}",
                    f"{data['entropy_ada'][i]:.9g}",
                    f"{data['confidence_vlm'][i]:.9g}",
                    f"{data['confidence_ada'][i]:.9g}",
                    f"{data['cross_entropy_vlm'][i]:.9g}",
                    f"{data['cross_entropy_ada'][i]:.9g}",
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(analysis: CorrelationAnalysis, path) -> None:
    """One row per (quadrant, model, predictor) with r or a skip note."""
    lines = ["quadrant,model,predictor,n_points,r,note"]
    for cell in analysis.cells:
        r_text = f"{cell.r:.9g}" if np.isfinite(cell.r) else "nan"
        lines.append(
            f"{cell.quadrant},{cell.model},{cell.predictor},{cell.n_points},{r_text},{cell.note}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
