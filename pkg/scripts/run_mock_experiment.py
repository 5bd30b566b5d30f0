#!/usr/bin/env python3
"""Run a full offline experiment against the deterministic mock backend.

Generates a small synthetic parallel test set, runs the base translation
plus all four iterative strategies, scores every round with the builtin
stub scorers, and prints the resulting table.  Useful as a smoke test of
the whole pipeline and as a template for real configurations.

    python3 scripts/run_mock_experiment.py --output-dir runs/mock-demo
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

from mtrefine.config import CorpusConfig, MockConfig, RunConfig
from mtrefine.gateway import BackendConfig
from mtrefine.metrics.scorers import ScorerConfig
from mtrefine.pipeline import Strategy
from mtrefine.prompts import PromptKind
from mtrefine.runner import run_experiment

WORDS = (
    "committee market proposal winter railway speaker harvest council "
    "village treaty engine border library festival journey"
).split()


def synthesize_corpus(directory: Path, lines: int, seed: int) -> tuple[Path, Path]:
    """A deterministic fake en->de test set; real runs point the config
    at actual WMT-style files instead."""
    directory.mkdir(parents=True, exist_ok=True)
    source = directory / "test.en"
    reference = directory / "test.de"
    rand = random.Random(seed)
    src_lines, ref_lines = [], []
    for i in range(lines):
        picks = rand.sample(WORDS, k=rand.randint(4, 8))
        src_lines.append(f"Sentence {i}: the {' and the '.join(picks)}.")
        ref_lines.append(f"Satz {i}: der {' und der '.join(picks)}.")
    source.write_text("\n".join(src_lines) + "\n", encoding="utf-8")
    reference.write_text("\n".join(ref_lines) + "\n", encoding="utf-8")
    return source, reference


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--output-dir", default="runs/mock-demo")
    parser.add_argument("--corpus-size", type=int, default=40)
    parser.add_argument("--sample-size", type=int, default=12)
    parser.add_argument("--sample-seed", type=int, default=7)
    parser.add_argument("--iterations", type=int, default=4)
    parser.add_argument(
        "--mock-script", default="drift", choices=("identity", "drift", "shuffle")
    )
    parser.add_argument("--cache-dir", help="cache completions across reruns")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.output_dir)
    source, reference = synthesize_corpus(out / "corpus", args.corpus_size, seed=11)

    cfg = RunConfig(
        run_name="mock-demo",
        corpus=CorpusConfig(str(source), {"A": str(reference)}, "en", "de"),
        sample_size=args.sample_size,
        sample_seed=args.sample_seed,
        strategies=tuple(
            Strategy(kind, args.iterations)
            for kind in (
                PromptKind.REFINE,
                PromptKind.REFINE_CONTRAST,
                PromptKind.REFINE_RANDOM,
                PromptKind.PARAPHRASE,
            )
        ),
        backend=BackendConfig(endpoint="mock://local", model=f"mock-{args.mock_script}"),
        output_dir=str(out),
        mock=MockConfig(script=args.mock_script),
        cache_dir=args.cache_dir,
        workers=args.workers,
        da_scorer=ScorerConfig("edit-similarity", reference_based=True),
        qe_scorer=ScorerConfig("length-ratio", reference_based=False),
    )

    result = run_experiment(cfg)
    print(f"run directory: {result.run_dir}")
    print(f"calls: {result.total_calls} total, {result.network_calls} network")
    for label, best in sorted(result.selections.items()):
        print(f"selected iteration for {label}: {best}")
    print()
    print((result.run_dir / "rows.txt").read_text(encoding="utf-8"))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
