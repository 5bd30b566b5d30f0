#!/usr/bin/env python3
"""Build a blind pairwise judging campaign from a completed run directory.

Each side names a strategy from the run's trace files, optionally with
an iteration ("Refine_Contrast@2"); without one, the run's selected
iteration is used, falling back to the last round.  The special side
"Reference" pairs against the human reference.  The campaign lands in a
store directory that `mtrefine serve-eval --store ...` serves.

    python3 scripts/make_eval_campaign.py --run-dir runs/mock-demo \\
        --store eval-store --side-a Translate --side-b Refine_Contrast
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from mtrefine.corpus import load_sampled_set
from mtrefine.evalsvc import (
    CampaignStore,
    create_campaign,
    outputs_from_references,
    outputs_from_traces,
)
from mtrefine.pipeline import read_traces

REFERENCE_SIDE = "Reference"


def parse_side(spec: str) -> tuple[str, int | None]:
    if "@" in spec:
        label, _, iteration = spec.partition("@")
        return label, int(iteration)
    return spec, None


def side_outputs(run_dir: Path, spec: str, selections: dict) -> tuple[str, dict[int, str]]:
    label, iteration = parse_side(spec)
    if label == REFERENCE_SIDE:
        sampled = load_sampled_set(run_dir / "sampling_manifest.json")
        return label, outputs_from_references(sampled)
    trace_path = run_dir / "traces" / f"{label.replace(' ', '_')}.jsonl"
    if not trace_path.exists():
        known = sorted(p.stem for p in (run_dir / "traces").glob("*.jsonl"))
        raise SystemExit(f"no traces for {label!r}; run has: {', '.join(known)}")
    traces = read_traces(trace_path)
    if iteration is None:
        iteration = selections.get(label, len(traces[0].candidates) - 1)
    name = label if iteration == 0 else f"{label}@{iteration}"
    return name, outputs_from_traces(traces, iteration)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--run-dir", required=True)
    parser.add_argument("--store", required=True, help="campaign store directory")
    parser.add_argument("--side-a", required=True,
                        help='strategy label, optionally "Label@iteration"')
    parser.add_argument("--side-b", required=True)
    parser.add_argument("--size", type=int, default=50)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--label", help="display label for the campaign")
    parser.add_argument("--question", help="override the judging question")
    args = parser.parse_args()

    run_dir = Path(args.run_dir)
    selections = {}
    selections_path = run_dir / "selections.json"
    if selections_path.exists():
        selections = json.loads(selections_path.read_text(encoding="utf-8"))

    name_a, outputs_a = side_outputs(run_dir, args.side_a, selections)
    name_b, outputs_b = side_outputs(run_dir, args.side_b, selections)
    ids = sorted(set(outputs_a) & set(outputs_b))

    sampled = load_sampled_set(run_dir / "sampling_manifest.json")
    campaign = create_campaign(
        name_a, outputs_a, name_b, outputs_b, ids,
        seed=args.seed,
        size=min(args.size, len(ids)),
        source_lang=sampled.pair.source_code,
        target_lang=sampled.pair.target_code,
        label=args.label,
        question=args.question,
    )
    CampaignStore(args.store).add(campaign)
    print(f"campaign {campaign.campaign_id}: {campaign.label} "
          f"({campaign.size} items)")
    print(f"serve it with: mtrefine serve-eval --store {args.store} "
          f"--operator-token <token> --ui frontend/dist")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
