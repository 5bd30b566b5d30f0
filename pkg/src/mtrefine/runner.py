"""End-to-end experiment driver: run, score, select, and write artifacts.

A run directory is self-describing: sampling manifest, per-strategy
trace files, full-precision score records, the selection map, rendered
tables and series, and a run manifest with call accounting.  Reports
are derived purely from the stored records, so `regenerate_report`
writes byte-identical files from an existing run directory.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import rng
from .config import ConfigError, RunConfig
from .corpus import (
    LanguagePair,
    SampledSet,
    load_parallel_corpus,
    sample_instances,
    write_sampling_manifest,
)
from .gateway import Gateway, MockBackend, OpenAIChatBackend, ResponseCache, make_mock_script
from .metrics import bleu_corpus, chrf_corpus, default_tokenizer_for, neural_score
from .metrics.scorers import ScorerConfig
from .metrics.tokenizers import BUILTIN_TOKENIZERS
from .pipeline import (
    RefinementTrace,
    Strategy,
    assign_random_targets,
    load_external_base,
    run_refinement,
    run_translate,
    select_best_iteration,
    write_traces,
)
from .prompts import PromptKind, load_templates
from .report import (
    CaseRecord,
    ScoreRecord,
    build_score_table,
    build_trend_series,
    export,
    read_score_records,
    write_score_records,
)

logger = logging.getLogger(__name__)

TRANSLATE_LABEL = PromptKind.TRANSLATE.label


@dataclass
class RunResult:
    """Everything a caller might want back from a completed run."""

    run_dir: Path
    sampled: SampledSet
    base: dict[int, str]
    traces: dict[str, list[RefinementTrace]]
    records: list[ScoreRecord]
    selections: dict[str, int]
    network_calls: int
    total_calls: int
    failures: dict[str, dict[int, str]] = field(default_factory=dict)


def build_gateway(cfg: RunConfig) -> Gateway:
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    if cfg.mock is not None:
        script = make_mock_script(cfg.mock.script, seed=cfg.mock.seed, marker=cfg.mock.marker)
        backend = MockBackend(script, cfg.backend)
    else:
        backend = OpenAIChatBackend(cfg.backend)
    return Gateway(backend=backend, cache=cache)


def resolve_tokenizer(cfg: RunConfig) -> tuple[str, tuple[str, ...] | None]:
    kind = cfg.tokenizer or default_tokenizer_for(cfg.corpus.target_lang)
    hook = cfg.tokenizer_hooks.get(kind)
    if kind not in BUILTIN_TOKENIZERS and hook is None:
        raise ConfigError(
            f"tokenizer {kind!r} needs an entry in tokenizer_hooks (a "
            "command reading one segment per line); for Japanese install "
            "a morphological analyzer and configure it here"
        )
    return kind, hook


def load_sample(cfg: RunConfig) -> SampledSet:
    pair = LanguagePair(cfg.corpus.source_lang, cfg.corpus.target_lang)
    full = load_parallel_corpus(cfg.corpus.source, cfg.corpus.references, pair)
    origin = {"source": cfg.corpus.source, "references": dict(cfg.corpus.references)}
    return sample_instances(full, cfg.sample_size, cfg.sample_seed, origin=origin)


def _aligned(sampled: SampledSet) -> tuple[list[int], list[str], list[str]]:
    """Ids in canonical (sorted) order with aligned sources and refs."""
    ids = sorted(sampled.ids)
    by_id = {inst.instance_id: inst for inst in sampled.instances}
    sources = [by_id[i].source for i in ids]
    references = [by_id[i].reference("A") for i in ids]
    return ids, sources, references


def _score_hypotheses(
    sources: list[str],
    hypotheses: list[str],
    references: list[str],
    tokenizer: str,
    hook: tuple[str, ...] | None,
    da_scorer: ScorerConfig | None,
    qe_scorer: ScorerConfig | None,
    surface: bool = True,
) -> dict[str, float | None]:
    """Corpus metrics for one iteration of one strategy."""
    out: dict[str, float | None] = {"bleu": None, "chrf": None, "da": None, "qe": None}
    if surface:
        out["bleu"] = bleu_corpus(
            hypotheses, references, tokenizer, list(hook) if hook else None
        ).score
        out["chrf"] = chrf_corpus(hypotheses, references).score
    if da_scorer is not None:
        _, out["da"] = neural_score(sources, hypotheses, references, da_scorer)
    if qe_scorer is not None:
        _, out["qe"] = neural_score(sources, hypotheses, None, qe_scorer)
    return out


def compute_score_records(
    sampled: SampledSet,
    traces: Mapping[str, Sequence[RefinementTrace]],
    tokenizer: str,
    hook: tuple[str, ...] | None = None,
    da_scorer: ScorerConfig | None = None,
    qe_scorer: ScorerConfig | None = None,
    include_reference: bool = True,
) -> list[ScoreRecord]:
    """Full-precision corpus scores for every strategy and iteration.

    Adds a QE-only Reference row (the human reference scored as a
    system) when a reference-free scorer is configured.
    """
    ids, sources, references = _aligned(sampled)
    sample_key = sampled.fingerprint()
    records: list[ScoreRecord] = []

    if include_reference and qe_scorer is not None:
        _, ref_qe = neural_score(sources, references, None, qe_scorer)
        records.append(
            ScoreRecord(
                strategy="Reference", iteration=0, sample_key=sample_key, qe=ref_qe
            )
        )

    for label, strategy_traces in traces.items():
        by_id = {t.instance_id: t for t in strategy_traces}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ConfigError(
                f"strategy {label!r} lacks traces for instances {missing[:5]}"
            )
        rounds = min(len(by_id[i].candidates) for i in ids)
        # base-only strategies (Translate, external submissions) report
        # iteration 0; refinement strategies start at round 1 since their
        # candidates[0] is another strategy's record
        start = 0 if (rounds == 1 or label == TRANSLATE_LABEL) else 1
        for t in range(start, rounds):
            hypotheses = [by_id[i].candidates[t] for i in ids]
            metrics = _score_hypotheses(
                sources, hypotheses, references, tokenizer, hook, da_scorer, qe_scorer
            )
            records.append(
                ScoreRecord(
                    strategy=label, iteration=t, sample_key=sample_key, **metrics
                )
            )
    return records


def select_iterations(records: Sequence[ScoreRecord]) -> dict[str, int]:
    """Reference-free argmax per strategy over iterations 1..T."""
    per_strategy: dict[str, dict[int, float | None]] = {}
    for record in records:
        if record.iteration >= 1:
            per_strategy.setdefault(record.strategy, {})[record.iteration] = record.qe
    selections = {}
    for label, by_iter in per_strategy.items():
        top = max(by_iter)
        scores = [by_iter[t] for t in range(1, top + 1)]
        if any(s is None for s in scores):
            continue
        selections[label] = select_best_iteration(scores)
    return selections


def build_cases(
    sampled: SampledSet,
    traces: Mapping[str, Sequence[RefinementTrace]],
    selections: Mapping[str, int],
    count: int,
) -> list[CaseRecord]:
    """Side-by-side examples for the first ``count`` instances (by id),
    each strategy shown at its selected iteration."""
    ids = sorted(sampled.ids)[:count]
    by_id = {inst.instance_id: inst for inst in sampled.instances}
    cases = []
    for instance_id in ids:
        outputs = {}
        for label, strategy_traces in traces.items():
            trace = next(
                (t for t in strategy_traces if t.instance_id == instance_id), None
            )
            if trace is None:
                continue
            pick = 0 if label == TRANSLATE_LABEL else selections.get(label, 1)
            pick = min(pick, len(trace.candidates) - 1)
            outputs[label] = trace.candidates[pick]
        inst = by_id[instance_id]
        cases.append(
            CaseRecord(
                instance_id=instance_id,
                source=inst.source,
                reference=inst.reference("A"),
                outputs=outputs,
            )
        )
    return cases


def write_reports(
    run_dir: Path,
    records: Sequence[ScoreRecord],
    selections: Mapping[str, int],
    cases: Sequence[CaseRecord],
) -> dict[str, str]:
    """Render every report artifact; returns name → path."""
    rows = build_score_table(records, selections)
    series = build_trend_series(records)
    paths = {
        "score_records": run_dir / "score_records.jsonl",
        "selections": run_dir / "selections.json",
        "rows_tsv": export(rows, "rows", "tsv", run_dir / "rows.tsv"),
        "rows_jsonl": export(rows, "rows", "jsonl", run_dir / "rows.jsonl"),
        "rows_txt": export(rows, "rows", "txt", run_dir / "rows.txt"),
        "series_jsonl": export(series, "series", "jsonl", run_dir / "series.jsonl"),
        "series_tsv": export(series, "series", "tsv", run_dir / "series.tsv"),
        "cases_txt": export(cases, "cases", "txt", run_dir / "cases.txt"),
    }
    write_score_records(records, paths["score_records"])
    Path(paths["selections"]).write_text(
        json.dumps(dict(sorted(selections.items())), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return {name: str(path) for name, path in paths.items()}


def run_experiment(cfg: RunConfig, external_base: str | Path | None = None,
                   system_name: str | None = None) -> RunResult:
    """Execute a configured run end to end.

    With ``external_base`` the base translations come from a
    line-aligned system-output file (named by ``system_name``) instead
    of fresh Translate queries.
    """
    started = time.time()
    run_dir = Path(cfg.output_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    traces_dir = run_dir / "traces"
    traces_dir.mkdir(exist_ok=True)

    sampled = load_sample(cfg)
    write_sampling_manifest(sampled, run_dir / "sampling_manifest.json")
    tokenizer, hook = resolve_tokenizer(cfg)
    templates = load_templates(cfg.templates_path) if cfg.templates_path else None
    gateway = build_gateway(cfg)
    failures: dict[str, dict[int, str]] = {}

    traces: dict[str, list[RefinementTrace]] = {}
    if external_base is None:
        base_label = TRANSLATE_LABEL
        translate_failures: dict[int, str] = {}
        base, base_traces = run_translate(
            sampled, gateway, templates=templates, max_workers=cfg.workers,
            failures=translate_failures,
        )
        if translate_failures:
            failures[base_label] = translate_failures
        traces[base_label] = base_traces
    else:
        base_label = system_name or Path(external_base).stem
        base = load_external_base(sampled, external_base)
        traces[base_label] = [
            RefinementTrace(instance_id=i, strategy=base_label, candidates=[base[i]])
            for i in sorted(base)
        ]

    # instances that failed at base have nothing to refine
    survivors = sampled
    if failures.get(base_label):
        keep = tuple(
            inst for inst in sampled.instances if inst.instance_id in base
        )
        survivors = SampledSet(
            instances=keep, seed=sampled.seed, origin=sampled.origin,
            origin_size=sampled.origin_size,
        )

    random_targets = None
    if any(s.kind is PromptKind.REFINE_RANDOM for s in cfg.strategies):
        random_targets = assign_random_targets(survivors, cfg.random_target_seed)

    for strategy in cfg.strategies:
        strategy_failures: dict[int, str] = {}
        label = (
            strategy.label if external_base is None
            else f"{base_label} {strategy.label}"
        )
        strategy_traces = run_refinement(
            survivors, base, strategy, gateway,
            random_targets=random_targets, templates=templates,
            max_workers=cfg.workers, failures=strategy_failures,
        )
        for trace in strategy_traces:
            trace.strategy = label
        if strategy_failures:
            failures[label] = strategy_failures
        traces[label] = strategy_traces

    scoring_ids = set(base)
    for label, strategy_traces in traces.items():
        scoring_ids &= {t.instance_id for t in strategy_traces}
    scorable = SampledSet(
        instances=tuple(
            inst for inst in sampled.instances if inst.instance_id in scoring_ids
        ),
        seed=sampled.seed, origin=sampled.origin, origin_size=sampled.origin_size,
    )

    for label, strategy_traces in traces.items():
        write_traces(strategy_traces, traces_dir / f"{label.replace(' ', '_')}.jsonl")

    records = compute_score_records(
        scorable, traces, tokenizer, hook, cfg.da_scorer, cfg.qe_scorer,
    )
    selections = select_iterations(records)
    cases = build_cases(scorable, traces, selections, cfg.case_count)
    artifact_paths = write_reports(run_dir, records, selections, cases)

    total_calls = len(gateway.exchange_log)
    manifest = {
        "run_name": cfg.run_name,
        "sampling_manifest": "sampling_manifest.json",
        "prng": rng.GENERATOR_NAME,
        "seeds": {
            "sample": cfg.sample_seed,
            "random_target": cfg.random_target_seed,
        },
        "strategies": [
            {"kind": s.kind.value, "iterations": s.iterations}
            for s in cfg.strategies
        ],
        "backend": cfg.backend.snapshot(),
        "mock": None if cfg.mock is None else {
            "script": cfg.mock.script, "seed": cfg.mock.seed,
            "marker": cfg.mock.marker,
        },
        "external_base": None if external_base is None else str(external_base),
        "tokenizer": tokenizer,
        "scorers": {
            "da": cfg.da_scorer.scorer_id if cfg.da_scorer else None,
            "qe": cfg.qe_scorer.scorer_id if cfg.qe_scorer else None,
        },
        "random_target_pool": "derangement over reference A within the sample",
        "calls": {"total": total_calls, "network": gateway.network_calls},
        "failures": {
            label: {str(i): msg for i, msg in sorted(per.items())}
            for label, per in failures.items()
        },
        "artifacts": artifact_paths,
        "timestamps": {"started": started, "finished": time.time()},
    }
    (run_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    return RunResult(
        run_dir=run_dir,
        sampled=sampled,
        base=base,
        traces=traces,
        records=records,
        selections=selections,
        network_calls=gateway.network_calls,
        total_calls=total_calls,
        failures=failures,
    )


def regenerate_report(run_dir: str | Path, case_count: int = 3) -> dict[str, str]:
    """Rebuild every report file from stored records and traces.

    Pure function of the run directory: regenerated files are
    byte-identical to the originals.
    """
    run_dir = Path(run_dir)
    records = read_score_records(run_dir / "score_records.jsonl")
    selections = json.loads((run_dir / "selections.json").read_text(encoding="utf-8"))
    from .corpus import load_sampled_set
    from .pipeline import read_traces

    sampled = load_sampled_set(run_dir / "sampling_manifest.json")
    traces = {}
    for path in sorted((run_dir / "traces").glob("*.jsonl")):
        strategy_traces = read_traces(path)
        if strategy_traces:
            traces[strategy_traces[0].strategy] = strategy_traces
    scoring_ids = set.intersection(
        *({t.instance_id for t in ts} for ts in traces.values())
    )
    scorable = SampledSet(
        instances=tuple(
            inst for inst in sampled.instances if inst.instance_id in scoring_ids
        ),
        seed=sampled.seed, origin=sampled.origin, origin_size=sampled.origin_size,
    )
    cases = build_cases(scorable, traces, selections, case_count)
    return write_reports(run_dir, records, selections, cases)
