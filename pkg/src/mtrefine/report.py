"""Score tables, per-iteration trend series, and side-by-side cases.

Everything here is a pure function of stored score records and traces:
reports never recompute metrics, so regenerating one from the same
artifacts is byte-identical.  Numbers are rounded at render time only;
the structured (line-delimited) exports keep full precision and
round-trip exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

TEXT_METRICS = ("bleu", "chrf")
NEURAL_METRICS = ("da", "qe")
METRIC_TITLES = {"bleu": "BLEU", "chrf": "chrF++", "da": "DA", "qe": "QE"}

# Table row order; labels outside this list keep first-seen order after it.
CANONICAL_ORDER = (
    "Reference",
    "Translate",
    "Refine",
    "Refine_Contrast",
    "Refine_Random",
    "Paraphrase",
)

CASE_FIELD_ORDER = ("Source", "Reference", "Translate", "Refine_Contrast", "Paraphrase")


class ComparabilityError(ValueError):
    """Score records from different sampled sets cannot share a table."""


def format_text_metric(value: float) -> str:
    """Surface-metric rendering: two decimals."""
    return f"{value:.2f}"


def format_neural(value: float) -> str:
    """Neural-metric rendering: four decimals, no integer zero (".8606",
    "-.0811")."""
    text = f"{value:.4f}"
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


@dataclass(frozen=True)
class ScoreRecord:
    """Corpus scores for one strategy at one iteration, full precision.

    ``iteration`` 0 is the base (Translate or an external submission);
    metrics a run did not compute stay None.  ``sample_key`` identifies
    the sampled set the scores were computed on.
    """

    strategy: str
    iteration: int
    sample_key: str
    bleu: float | None = None
    chrf: float | None = None
    da: float | None = None
    qe: float | None = None

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


def write_score_records(records: Sequence[ScoreRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(asdict(record), sort_keys=True, ensure_ascii=False))
            handle.write("\n")


def read_score_records(path: str | Path) -> list[ScoreRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(ScoreRecord(**json.loads(line)))
    return records


@dataclass(frozen=True)
class StrategyRow:
    """One table row: the selected iteration's scores for a strategy."""

    strategy: str
    bleu: float | None = None
    chrf: float | None = None
    da: float | None = None
    qe: float | None = None
    best_iteration: int | None = None


def _ordered_labels(labels: Iterable[str]) -> list[str]:
    seen: list[str] = []
    for label in labels:
        if label not in seen:
            seen.append(label)
    known = [label for label in CANONICAL_ORDER if label in seen]
    other = [label for label in seen if label not in CANONICAL_ORDER]
    return known + other


def _check_comparable(records: Sequence[ScoreRecord]) -> None:
    keys = {record.sample_key for record in records}
    if len(keys) > 1:
        raise ComparabilityError(
            f"records span {len(keys)} different sampled sets: {sorted(keys)}"
        )


def build_score_table(
    records: Sequence[ScoreRecord],
    selections: Mapping[str, int] | None = None,
) -> list[StrategyRow]:
    """One row per strategy at its selected iteration.

    ``selections`` maps strategy label to the chosen iteration (from
    reference-free argmax); strategies absent from it report their
    earliest stored iteration and carry no best_iteration, which puts
    Translate and reference rows at 0 and unselected refinement runs at
    round 1.
    """
    if not records:
        return []
    _check_comparable(records)
    selections = dict(selections or {})
    by_strategy: dict[str, dict[int, ScoreRecord]] = {}
    for record in records:
        by_strategy.setdefault(record.strategy, {})[record.iteration] = record

    rows = []
    for label in _ordered_labels(r.strategy for r in records):
        iterations = by_strategy[label]
        best = selections.get(label)
        chosen = best if best is not None else min(iterations)
        if chosen not in iterations:
            raise ComparabilityError(
                f"strategy {label!r} has no score record for iteration "
                f"{chosen}; have {sorted(iterations)}"
            )
        record = iterations[chosen]
        rows.append(
            StrategyRow(
                strategy=label,
                bleu=record.bleu,
                chrf=record.chrf,
                da=record.da,
                qe=record.qe,
                best_iteration=best,
            )
        )
    return rows


@dataclass(frozen=True)
class TrendSeries:
    """Scores of one metric across iterations 1..T for one strategy.

    ``baseline`` is the iteration-0 (Translate or submission) value and
    ``reference`` the human-reference value where one exists; both are
    rendered as horizontal lines.
    """

    strategy: str
    metric: str
    values: tuple[float, ...]
    baseline: float | None = None
    reference: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("a trend series needs at least one iteration")
        for i, value in enumerate(self.values, start=1):
            if value is None or not math.isfinite(value):
                raise ValueError(
                    f"{self.strategy}/{self.metric}: non-finite value at "
                    f"iteration {i}"
                )


def build_trend_series(
    records: Sequence[ScoreRecord],
    metrics: Sequence[str] = ("bleu", "chrf", "da", "qe"),
) -> list[TrendSeries]:
    """One series per (strategy, metric) over iterations 1..T.

    The Translate strategy's iteration-0 value becomes every series'
    baseline; a Reference record contributes the reference line for the
    metrics it has (typically QE only).
    """
    if not records:
        return []
    _check_comparable(records)
    baselines: dict[str, float | None] = {}
    references: dict[str, float | None] = {}
    per_strategy: dict[str, dict[int, ScoreRecord]] = {}
    for record in records:
        if record.strategy == "Translate" and record.iteration == 0:
            baselines = {m: record.metric(m) for m in metrics}
        elif record.strategy == "Reference":
            references = {m: record.metric(m) for m in metrics}
        elif record.iteration >= 1:
            per_strategy.setdefault(record.strategy, {})[record.iteration] = record

    series = []
    for label in _ordered_labels(per_strategy):
        iterations = per_strategy[label]
        top = max(iterations)
        missing = [t for t in range(1, top + 1) if t not in iterations]
        if missing:
            raise ValueError(f"strategy {label!r} missing iterations {missing}")
        for metric in metrics:
            values = [iterations[t].metric(metric) for t in range(1, top + 1)]
            if any(v is None for v in values):
                continue
            series.append(
                TrendSeries(
                    strategy=label,
                    metric=metric,
                    values=tuple(values),
                    baseline=baselines.get(metric),
                    reference=references.get(metric),
                )
            )
    return series


@dataclass(frozen=True)
class CaseRecord:
    """One side-by-side example: source, reference, system outputs."""

    instance_id: int
    source: str
    reference: str
    outputs: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "outputs", dict(self.outputs))


# --- rendering and export -------------------------------------------------

_ROW_FIELDS = ("strategy", "bleu", "chrf", "da", "qe", "best_iteration")


def _format_cell(name: str, value) -> str:
    if value is None:
        return ""
    if name in TEXT_METRICS:
        return format_text_metric(value)
    if name in NEURAL_METRICS:
        return format_neural(value)
    return str(value)


def render_rows_tsv(rows: Sequence[StrategyRow]) -> str:
    lines = ["\t".join(_ROW_FIELDS)]
    for row in rows:
        lines.append(
            "\t".join(_format_cell(f, getattr(row, f)) for f in _ROW_FIELDS)
        )
    return "\n".join(lines) + "\n"


def render_rows_text(rows: Sequence[StrategyRow]) -> str:
    """Aligned plain-text table."""
    header = ["Strategy", "BLEU", "chrF++", "DA", "QE", "Best"]
    body = [
        [
            row.strategy,
            _format_cell("bleu", row.bleu),
            _format_cell("chrf", row.chrf),
            _format_cell("da", row.da),
            _format_cell("qe", row.qe),
            _format_cell("best_iteration", row.best_iteration),
        ]
        for row in rows
    ]
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    out_lines = []
    for line in [header] + body:
        out_lines.append(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip()
        )
    return "\n".join(out_lines) + "\n"


def render_rows_jsonl(rows: Sequence[StrategyRow]) -> str:
    return "".join(
        json.dumps(asdict(row), sort_keys=True, ensure_ascii=False) + "\n"
        for row in rows
    )


def load_rows_jsonl(path: str | Path) -> list[StrategyRow]:
    rows = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(StrategyRow(**json.loads(line)))
    return rows


def render_series_jsonl(series: Sequence[TrendSeries]) -> str:
    return "".join(
        json.dumps(asdict(s), sort_keys=True, ensure_ascii=False) + "\n"
        for s in series
    )


def load_series_jsonl(path: str | Path) -> list[TrendSeries]:
    series = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                record = json.loads(line)
                series.append(
                    TrendSeries(
                        strategy=record["strategy"],
                        metric=record["metric"],
                        values=tuple(record["values"]),
                        baseline=record["baseline"],
                        reference=record["reference"],
                    )
                )
    return series


def render_series_tsv(series: Sequence[TrendSeries]) -> str:
    """Delimited trend export: one line per (strategy, metric, iteration)."""
    lines = ["strategy\tmetric\titeration\tvalue\tbaseline\treference"]
    for s in series:
        for t, value in enumerate(s.values, start=1):
            lines.append(
                "\t".join(
                    [
                        s.strategy,
                        s.metric,
                        str(t),
                        repr(value),
                        "" if s.baseline is None else repr(s.baseline),
                        "" if s.reference is None else repr(s.reference),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def render_cases_text(cases: Sequence[CaseRecord]) -> str:
    """Side-by-side case layout: one labelled line per field, cases
    separated by blank lines."""
    blocks = []
    for case in cases:
        lines = [f"Source: {case.source}", f"Reference: {case.reference}"]
        ordered = [
            label for label in CASE_FIELD_ORDER if label in case.outputs
        ] + [label for label in case.outputs if label not in CASE_FIELD_ORDER]
        for label in ordered:
            lines.append(f"{label}: {case.outputs[label]}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


_RENDERERS = {
    ("rows", "tsv"): render_rows_tsv,
    ("rows", "jsonl"): render_rows_jsonl,
    ("rows", "txt"): render_rows_text,
    ("series", "tsv"): render_series_tsv,
    ("series", "jsonl"): render_series_jsonl,
    ("cases", "txt"): render_cases_text,
}


def export(payload: Sequence, kind: str, fmt: str, path: str | Path) -> Path:
    """Write rows, series, or cases in the requested format.

    kinds: rows {tsv, jsonl, txt}; series {tsv, jsonl}; cases {txt}.
    """
    try:
        renderer = _RENDERERS[(kind, fmt)]
    except KeyError:
        known = ", ".join(f"{k}/{f}" for k, f in sorted(_RENDERERS))
        raise ValueError(f"no renderer for {kind}/{fmt}; known: {known}") from None
    path = Path(path)
    try:
        path.write_text(renderer(payload), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
