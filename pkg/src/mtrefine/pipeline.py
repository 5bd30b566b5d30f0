"""Iterative refinement over a sampled test set.

One run is: a base translation per instance (queried fresh, or taken
from an external hypothesis file), then T rounds per refinement
strategy where the previous candidate is fed back through the prompt.
Every call is an independent exchange; nothing about earlier rounds
reaches the model except the candidate text embedded in the prompt.

Best-iteration selection is a corpus-level argmax over reference-free
scores, one per round.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import rng
from .corpus import CorpusError, SampledSet, TestInstance, read_segments
from .gateway import EmptyResponseError, Gateway, GatewayError
from .metrics.scorers import ScoringError
from .prompts import PromptKind, render_prompt

DEFAULT_ITERATIONS = 4


class PipelineError(RuntimeError):
    """A gateway failure annotated with the instance it struck."""


@dataclass(frozen=True)
class Strategy:
    """A prompt kind plus how many rounds to run it.

    Translate is the base (iteration index 0) and takes no rounds; the
    refinement and paraphrase strategies run 1..T rounds.
    """

    kind: PromptKind
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self) -> None:
        if self.kind is PromptKind.TRANSLATE:
            if self.iterations != 0:
                raise ValueError(
                    "Translate is the base translation and has no rounds; "
                    f"got iterations={self.iterations}"
                )
        elif self.iterations < 1:
            raise ValueError(
                f"{self.kind.label} needs at least one round, got "
                f"{self.iterations}"
            )

    @property
    def label(self) -> str:
        return self.kind.label


@dataclass(frozen=True)
class TraceStep:
    """One round of one instance: the prompt and what came back.

    A flagged empty completion keeps the previous candidate; its step
    records an empty raw response and the carried-over text.
    """

    iteration: int
    kind: str
    prompt_text: str
    raw_response: str
    response: str


@dataclass
class RefinementTrace:
    """Full audit record for one instance under one strategy.

    ``candidates[0]`` is the base translation; ``candidates[t]`` is the
    text after round t, so the list always has T+1 entries (a flagged
    round still occupies its slot with the carried-over candidate).
    """

    instance_id: int
    strategy: str
    candidates: list[str]
    steps: list[TraceStep] = field(default_factory=list)
    random_target: str | None = None
    flagged_iterations: list[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "strategy": self.strategy,
            "candidates": list(self.candidates),
            "random_target": self.random_target,
            "flagged_iterations": list(self.flagged_iterations),
            "steps": [
                {
                    "iteration": s.iteration,
                    "kind": s.kind,
                    "prompt": s.prompt_text,
                    "raw_response": s.raw_response,
                    "response": s.response,
                }
                for s in self.steps
            ],
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "RefinementTrace":
        return cls(
            instance_id=record["instance_id"],
            strategy=record["strategy"],
            candidates=list(record["candidates"]),
            steps=[
                TraceStep(
                    iteration=s["iteration"],
                    kind=s["kind"],
                    prompt_text=s["prompt"],
                    raw_response=s["raw_response"],
                    response=s["response"],
                )
                for s in record["steps"]
            ],
            random_target=record.get("random_target"),
            flagged_iterations=list(record.get("flagged_iterations", [])),
        )


def write_traces(traces: Sequence[RefinementTrace], path: str | Path) -> None:
    """One record per instance, line-delimited, stable key order."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for trace in traces:
            handle.write(
                json.dumps(trace.to_record(), sort_keys=True, ensure_ascii=False)
            )
            handle.write("\n")


def read_traces(path: str | Path) -> list[RefinementTrace]:
    traces = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                traces.append(RefinementTrace.from_record(json.loads(line)))
    return traces


def _map_instances(
    sampled: SampledSet,
    worker: Callable[[TestInstance], RefinementTrace],
    max_workers: int,
    failures: dict[int, str] | None,
) -> list[RefinementTrace]:
    """Run one worker per instance, isolate or propagate failures, and
    return traces sorted by instance id so concurrency and processing
    order never show up in outputs."""

    def guarded(inst: TestInstance) -> RefinementTrace | None:
        try:
            return worker(inst)
        except GatewayError as exc:
            message = f"instance {inst.instance_id}: {exc}"
            if failures is None:
                raise PipelineError(message) from exc
            failures[inst.instance_id] = str(exc)
            return None

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(guarded, sampled.instances))
    else:
        results = [guarded(inst) for inst in sampled.instances]
    traces = [t for t in results if t is not None]
    traces.sort(key=lambda t: t.instance_id)
    return traces


def run_translate(
    sampled: SampledSet,
    gateway: Gateway,
    templates: Mapping[PromptKind, str] | None = None,
    max_workers: int = 1,
    failures: dict[int, str] | None = None,
) -> tuple[dict[int, str], list[RefinementTrace]]:
    """Query one base translation per instance.

    Returns the id→text map consumed by the refinement strategies plus
    per-instance traces (candidates hold just the base).  A blank
    completion here has nothing to fall back on, so it is treated like
    any other gateway failure.
    """
    lang = sampled.pair.target_display_name

    def worker(inst: TestInstance) -> RefinementTrace:
        prompt = render_prompt(
            PromptKind.TRANSLATE, lang=lang, source=inst.source, templates=templates
        )
        exchange = gateway.complete(prompt)
        return RefinementTrace(
            instance_id=inst.instance_id,
            strategy=PromptKind.TRANSLATE.label,
            candidates=[exchange.response],
            steps=[
                TraceStep(
                    iteration=0,
                    kind=PromptKind.TRANSLATE.value,
                    prompt_text=prompt.text,
                    raw_response=exchange.raw_response,
                    response=exchange.response,
                )
            ],
        )

    traces = _map_instances(sampled, worker, max_workers, failures)
    base = {t.instance_id: t.candidates[0] for t in traces}
    return base, traces


def assign_random_targets(sampled: SampledSet, seed: int) -> dict[int, str]:
    """Deranged reference-"A" sentences: every instance gets another
    instance's reference, never its own, deterministically per seed."""
    if sampled.size < 2:
        raise CorpusError(
            f"random-target assignment needs at least 2 instances, got "
            f"{sampled.size} (no derangement exists)"
        )
    references = [inst.reference("A") for inst in sampled.instances]
    perm = rng.derangement(rng.make_rng(seed), sampled.size)
    return {
        inst.instance_id: references[perm[i]]
        for i, inst in enumerate(sampled.instances)
    }


def run_refinement(
    sampled: SampledSet,
    base: Mapping[int, str],
    strategy: Strategy,
    gateway: Gateway,
    random_targets: Mapping[int, str] | None = None,
    templates: Mapping[PromptKind, str] | None = None,
    max_workers: int = 1,
    failures: dict[int, str] | None = None,
) -> list[RefinementTrace]:
    """Run T rounds of one refinement or paraphrase strategy.

    Round t renders the prompt with the candidate from round t-1 (the
    random-target substitute appears at t=1 only); a blank completion
    keeps the previous candidate and flags the round.
    """
    if strategy.kind is PromptKind.TRANSLATE:
        raise ValueError("run_refinement does not take the Translate strategy")
    missing = [i.instance_id for i in sampled.instances if i.instance_id not in base]
    if missing:
        raise CorpusError(f"base translations missing for instances {missing[:5]}")
    if strategy.kind is PromptKind.REFINE_RANDOM and random_targets is None:
        raise ValueError(f"{strategy.label} needs a random-target map")
    lang = sampled.pair.target_display_name

    def worker(inst: TestInstance) -> RefinementTrace:
        trace = RefinementTrace(
            instance_id=inst.instance_id,
            strategy=strategy.label,
            candidates=[base[inst.instance_id]],
        )
        if strategy.kind is PromptKind.REFINE_RANDOM:
            trace.random_target = random_targets[inst.instance_id]
        for t in range(1, strategy.iterations + 1):
            prev = trace.candidates[t - 1]
            prompt = render_prompt(
                strategy.kind,
                lang=lang,
                source=inst.source,
                prev_translation=prev,
                random_target=trace.random_target,
                is_first_iteration=(t == 1),
                templates=templates,
            )
            try:
                exchange = gateway.complete(prompt)
                raw, response = exchange.raw_response, exchange.response
            except EmptyResponseError:
                raw, response = "", prev
                trace.flagged_iterations.append(t)
            trace.candidates.append(response)
            trace.steps.append(
                TraceStep(
                    iteration=t,
                    kind=strategy.kind.value,
                    prompt_text=prompt.text,
                    raw_response=raw,
                    response=response,
                )
            )
        return trace

    return _map_instances(sampled, worker, max_workers, failures)


def load_external_base(sampled: SampledSet, hypothesis_path: str | Path) -> dict[int, str]:
    """Base translations from a system-output file aligned with the
    origin test set; sampled ids index into it directly."""
    lines = read_segments(hypothesis_path)
    if sampled.origin_size and len(lines) != sampled.origin_size:
        raise CorpusError(
            f"hypothesis file {hypothesis_path} has {len(lines)} lines, "
            f"origin test set has {sampled.origin_size}"
        )
    out_of_range = [i for i in sampled.ids if i >= len(lines)]
    if out_of_range:
        raise CorpusError(
            f"hypothesis file {hypothesis_path} has {len(lines)} lines but "
            f"sampled ids reach {max(out_of_range)}"
        )
    return {i: lines[i] for i in sampled.ids}


def refine_external(
    sampled: SampledSet,
    hypothesis_path: str | Path,
    strategy: Strategy,
    gateway: Gateway,
    random_targets: Mapping[int, str] | None = None,
    templates: Mapping[PromptKind, str] | None = None,
    max_workers: int = 1,
    failures: dict[int, str] | None = None,
) -> list[RefinementTrace]:
    """Refine an externally produced system output instead of a fresh
    base translation."""
    base = load_external_base(sampled, hypothesis_path)
    return run_refinement(
        sampled,
        base,
        strategy,
        gateway,
        random_targets=random_targets,
        templates=templates,
        max_workers=max_workers,
        failures=failures,
    )


def select_best_iteration(per_iteration_scores: Sequence[float]) -> int:
    """1-based index of the first maximum of per-round corpus scores."""
    if not per_iteration_scores:
        raise ScoringError("cannot select from an empty score list")
    for i, score in enumerate(per_iteration_scores, start=1):
        if not math.isfinite(score):
            raise ScoringError(f"non-finite score {score!r} at iteration {i}")
    best = max(per_iteration_scores)
    return list(per_iteration_scores).index(best) + 1
