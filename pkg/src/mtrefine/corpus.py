"""Test-set loading, deterministic subsampling, and sampling manifests.

A parallel test set is a source file plus one or more reference files,
all line-aligned.  Instances keep their zero-based line number as a
stable id so a subsample can always be traced back to the origin files,
and so externally produced hypothesis files (which are aligned with the
full origin set) can be indexed directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import rng

# Display names used when prompts address the target language in English.
LANGUAGE_NAMES: dict[str, str] = {
    "en": "English",
    "de": "German",
    "zh": "Chinese",
    "ja": "Japanese",
    "fr": "French",
    "ru": "Russian",
    "cs": "Czech",
    "uk": "Ukrainian",
    "sah": "Yakut",
}


class CorpusError(ValueError):
    """Malformed or misaligned test-set files."""


def language_display_name(code: str, overrides: Mapping[str, str] | None = None) -> str:
    """English display name for a language code, e.g. ``de`` -> ``German``."""
    if overrides and code in overrides:
        return overrides[code]
    try:
        return LANGUAGE_NAMES[code]
    except KeyError:
        known = ", ".join(sorted(LANGUAGE_NAMES))
        raise CorpusError(
            f"unknown language code {code!r}; known codes: {known}. "
            "Pass a display-name override to register a new one."
        ) from None


@dataclass(frozen=True)
class LanguagePair:
    """Direction of translation plus the target name prompts spell out."""

    source_code: str
    target_code: str
    target_display_name: str = ""

    def __post_init__(self) -> None:
        if not self.source_code or not self.target_code:
            raise CorpusError("language codes must be non-empty")
        if not self.target_display_name:
            object.__setattr__(
                self, "target_display_name", language_display_name(self.target_code)
            )

    @property
    def name(self) -> str:
        return f"{self.source_code}-{self.target_code}"


@dataclass(frozen=True)
class TestInstance:
    """One line of the test set: a source segment and its references.

    ``references`` maps reference label (usually "A", sometimes also "B")
    to segment text.  ``instance_id`` is the zero-based line number in
    the origin files.
    """

    instance_id: int
    source: str
    references: Mapping[str, str]
    pair: LanguagePair

    def __post_init__(self) -> None:
        if not self.source.strip():
            raise CorpusError(f"instance {self.instance_id}: empty source segment")
        if not self.references:
            raise CorpusError(f"instance {self.instance_id}: no references")
        object.__setattr__(self, "references", dict(self.references))

    def reference(self, label: str = "A") -> str:
        try:
            return self.references[label]
        except KeyError:
            raise CorpusError(
                f"instance {self.instance_id}: no reference labeled {label!r}"
            ) from None


def read_segments(path: str | Path) -> list[str]:
    """Read one segment per line.

    UTF-8 with a byte-order mark at file start tolerated; each line is
    trimmed of its trailing newline only, so interior and edge
    whitespace survives verbatim.
    """
    text = Path(path).read_text(encoding="utf-8-sig")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line[:-1] if line.endswith("\r") else line for line in lines]


def load_parallel_corpus(
    source_path: str | Path,
    reference_paths: Mapping[str, str | Path],
    pair: LanguagePair,
) -> list[TestInstance]:
    """Load aligned source and reference files into instances.

    Line counts must agree across every file; mismatches report both
    offending paths and their counts.
    """
    if not reference_paths:
        raise CorpusError("at least one reference file is required")
    source_path = Path(source_path)
    sources = read_segments(source_path)
    references: dict[str, list[str]] = {}
    for label, path in reference_paths.items():
        segments = read_segments(path)
        if len(segments) != len(sources):
            raise CorpusError(
                f"line count mismatch: {source_path} has {len(sources)} lines, "
                f"reference {label!r} at {path} has {len(segments)}"
            )
        references[label] = segments
    return [
        TestInstance(
            instance_id=i,
            source=src,
            references={label: references[label][i] for label in references},
            pair=pair,
        )
        for i, src in enumerate(sources)
    ]


@dataclass(frozen=True)
class SampledSet:
    """A seeded subsample of a test set, re-creatable from its manifest.

    ``origin`` holds {"source": path, "references": {label: path}} when
    the set came from files; empty for sets built in memory.
    """

    instances: tuple[TestInstance, ...]
    seed: int
    origin: dict = field(default_factory=dict)
    origin_size: int = 0

    @property
    def size(self) -> int:
        return len(self.instances)

    @property
    def ids(self) -> list[int]:
        return [inst.instance_id for inst in self.instances]

    @property
    def pair(self) -> LanguagePair:
        return self.instances[0].pair

    def by_id(self, instance_id: int) -> TestInstance:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(instance_id)

    def fingerprint(self) -> str:
        """Identity token used to refuse cross-sample score comparisons."""
        origin = self.origin.get("source", "")
        return f"{origin}|seed={self.seed}|size={self.size}|ids={self.ids[:3]}"


def sample_instances(
    full: list[TestInstance],
    size: int,
    seed: int,
    origin: Mapping | None = None,
) -> SampledSet:
    """Draw a deterministic subsample of ``size`` instances.

    Ids keep their origin line numbers; the order is the seeded draw
    order, identical across runs and platforms for equal inputs.
    """
    if not 1 <= size <= len(full):
        raise CorpusError(
            f"sample size {size} out of range for test set of {len(full)}"
        )
    generator = rng.make_rng(seed)
    chosen = rng.sample_indices(generator, len(full), size)
    return SampledSet(
        instances=tuple(full[i] for i in chosen),
        seed=seed,
        origin=dict(origin or {}),
        origin_size=len(full),
    )


def write_sampling_manifest(sampled: SampledSet, path: str | Path) -> None:
    """Record origin paths, seed, size, generator, and selected ids."""
    manifest = {
        "origin": sampled.origin,
        "pair": {
            "source_code": sampled.pair.source_code,
            "target_code": sampled.pair.target_code,
            "target_display_name": sampled.pair.target_display_name,
        },
        "seed": sampled.seed,
        "size": sampled.size,
        "origin_size": sampled.origin_size,
        "prng": rng.GENERATOR_NAME,
        "ids": sampled.ids,
    }
    Path(path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_sampled_set(manifest_path: str | Path) -> SampledSet:
    """Re-create a SampledSet from its manifest and the origin files."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    if manifest.get("prng") != rng.GENERATOR_NAME:
        raise CorpusError(
            f"manifest {manifest_path} was drawn with generator "
            f"{manifest.get('prng')!r}, this build implements {rng.GENERATOR_NAME!r}"
        )
    origin = manifest["origin"]
    pair = LanguagePair(**manifest["pair"])
    full = load_parallel_corpus(origin["source"], origin["references"], pair)
    if len(full) != manifest["origin_size"]:
        raise CorpusError(
            f"origin files now hold {len(full)} lines, manifest recorded "
            f"{manifest['origin_size']}"
        )
    instances = tuple(full[i] for i in manifest["ids"])
    return SampledSet(
        instances=instances,
        seed=manifest["seed"],
        origin=dict(origin),
        origin_size=manifest["origin_size"],
    )
