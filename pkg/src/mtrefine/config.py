"""Run configuration: one YAML file describes a full experiment.

The file names the corpus, the sample, the strategies, the backend, the
scorers, and the output location.  Everything the pipeline touches is
explicit here so a config plus a cache directory is enough to re-create
a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .gateway import BackendConfig
from .metrics.scorers import ScorerConfig
from .pipeline import DEFAULT_ITERATIONS, Strategy
from .prompts import PromptKind

DEFAULT_MAX_ITERATIONS = 8


class ConfigError(ValueError):
    """Malformed or incomplete run configuration."""


@dataclass(frozen=True)
class CorpusConfig:
    source: str
    references: dict[str, str]
    source_lang: str
    target_lang: str

    def __post_init__(self) -> None:
        if not self.references:
            raise ConfigError("corpus.references must name at least one file")
        if "A" not in self.references:
            raise ConfigError('corpus.references must include label "A"')


@dataclass(frozen=True)
class MockConfig:
    """Offline backend: a named deterministic script."""

    script: str = "identity"
    seed: int = 0
    marker: str = " +"


@dataclass(frozen=True)
class RunConfig:
    run_name: str
    corpus: CorpusConfig
    sample_size: int
    sample_seed: int
    strategies: tuple[Strategy, ...]
    backend: BackendConfig
    output_dir: str
    mock: MockConfig | None = None
    cache_dir: str | None = None
    random_target_seed: int = 1
    workers: int = 1
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    templates_path: str | None = None
    tokenizer: str | None = None
    tokenizer_hooks: dict[str, tuple[str, ...]] = field(default_factory=dict)
    da_scorer: ScorerConfig | None = None
    qe_scorer: ScorerConfig | None = None
    case_count: int = 3

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate strategies: {labels}")
        for strategy in self.strategies:
            if strategy.kind is PromptKind.TRANSLATE:
                raise ConfigError(
                    "the base translation runs implicitly; list only "
                    "refinement/paraphrase strategies"
                )
            if strategy.iterations > self.max_iterations:
                raise ConfigError(
                    f"{strategy.label}: iterations {strategy.iterations} "
                    f"exceeds max_iterations {self.max_iterations}"
                )


def _parse_scorer(raw: dict, role: str) -> ScorerConfig:
    try:
        return ScorerConfig(
            scorer_id=raw["scorer_id"],
            reference_based=bool(raw["reference_based"]),
            mode=raw.get("mode", "builtin"),
            command=tuple(raw.get("command", ())),
            url=raw.get("url", ""),
            batch_size=int(raw.get("batch_size", 64)),
            timeout=float(raw.get("timeout", 120.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"scorers.{role}: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    def need(key: str):
        try:
            return raw[key]
        except KeyError:
            raise ConfigError(f"{path}: missing required key {key!r}") from None

    corpus_raw = need("corpus")
    corpus = CorpusConfig(
        source=str(corpus_raw["source"]),
        references={str(k): str(v) for k, v in corpus_raw["references"].items()},
        source_lang=str(corpus_raw["source_lang"]),
        target_lang=str(corpus_raw["target_lang"]),
    )

    sample_raw = need("sample")
    max_iterations = int(raw.get("max_iterations", DEFAULT_MAX_ITERATIONS))

    strategies = []
    for entry in raw.get("strategies", []):
        try:
            if isinstance(entry, str):
                kind, iterations = PromptKind.from_label(entry), DEFAULT_ITERATIONS
            else:
                kind = PromptKind.from_label(str(entry["kind"]))
                iterations = int(entry.get("iterations", DEFAULT_ITERATIONS))
            strategies.append(Strategy(kind=kind, iterations=iterations))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: strategies: {exc}") from exc

    backend_raw = dict(need("backend"))
    backend_kind = backend_raw.pop("kind", "openai")
    mock = None
    if backend_kind == "mock":
        mock = MockConfig(
            script=backend_raw.pop("mock_script", "identity"),
            seed=int(backend_raw.pop("mock_seed", 0)),
            marker=backend_raw.pop("mock_marker", " +"),
        )
        backend_raw.setdefault("endpoint", "mock://local")
        backend_raw.setdefault("model", f"mock-{mock.script}")
    elif backend_kind != "openai":
        raise ConfigError(f"{path}: backend.kind must be openai or mock")
    try:
        backend = BackendConfig(**backend_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: backend: {exc}") from exc

    # deterministic builtin stubs by default; set a role to null to
    # disable it, or point it at a subprocess/http scorer
    scorers_raw = raw.get("scorers", {}) or {}
    if "da" not in scorers_raw:
        da_scorer = ScorerConfig(scorer_id="edit-similarity", reference_based=True)
    elif scorers_raw["da"] is None:
        da_scorer = None
    else:
        da_scorer = _parse_scorer(scorers_raw["da"], "da")
    if "qe" not in scorers_raw:
        qe_scorer = ScorerConfig(scorer_id="length-ratio", reference_based=False)
    elif scorers_raw["qe"] is None:
        qe_scorer = None
    else:
        qe_scorer = _parse_scorer(scorers_raw["qe"], "qe")

    hooks = {
        str(name): tuple(str(part) for part in command)
        for name, command in (raw.get("tokenizer_hooks") or {}).items()
    }

    return RunConfig(
        run_name=str(need("run_name")),
        corpus=corpus,
        sample_size=int(sample_raw["size"]),
        sample_seed=int(sample_raw["seed"]),
        strategies=tuple(strategies),
        backend=backend,
        output_dir=str(need("output_dir")),
        mock=mock,
        cache_dir=raw.get("cache_dir"),
        random_target_seed=int(raw.get("random_target_seed", 1)),
        workers=int(raw.get("workers", 1)),
        max_iterations=max_iterations,
        templates_path=raw.get("templates"),
        tokenizer=raw.get("tokenizer"),
        tokenizer_hooks=hooks,
        da_scorer=da_scorer,
        qe_scorer=qe_scorer,
        case_count=int(raw.get("case_count", 3)),
    )
