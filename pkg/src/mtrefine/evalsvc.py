"""Blind pairwise preference campaigns over HTTP.

A campaign pairs two systems' outputs on a seeded subsample of items.
Presentation side is a seeded coin flip per item; judges only ever see
two anonymous texts and the question, never system identities.  The
judgment log is append-only (audit trail included) and fsynced before
any acknowledgement, so an acknowledged judgment is always on disk.
Tallies de-anonymize through the hidden labels kept server-side.
"""

from __future__ import annotations

import json
import os
import string
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from fastapi import Body, FastAPI, Header, HTTPException, Query

from . import rng
from .corpus import SampledSet, language_display_name
from .pipeline import RefinementTrace

# The question shown to judges, with the target language filled in.
QUESTION_TEMPLATE = (
    "Please choose the translation that is more fluent, natural, and "
    "reflecting better use of ${language}"
)

DEFAULT_CAMPAIGN_SIZE = 50

CHOICES = ("first", "second", "tie")


class CampaignError(ValueError):
    """Bad campaign definition: coverage gaps, sizes, unknown items."""


def default_question(target_code: str) -> str:
    return string.Template(QUESTION_TEMPLATE).substitute(
        language=language_display_name(target_code)
    )


@dataclass(frozen=True)
class CampaignItem:
    """One judging item; system names here are the hidden labels."""

    instance_id: int
    text_first: str
    text_second: str
    first_system: str
    second_system: str


@dataclass(frozen=True)
class Campaign:
    campaign_id: str
    label: str
    source_lang: str
    target_lang: str
    question: str
    seed: int
    systems: tuple[str, str]
    items: tuple[CampaignItem, ...]

    @property
    def size(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Judgment:
    campaign_id: str
    item_index: int
    choice: str
    evaluator: str
    first_system: str
    timestamp: float


@dataclass(frozen=True)
class PreferenceTally:
    """Per-system preference counts plus ties; counts sum to total."""

    counts: Mapping[str, int]
    tie: int
    total: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", dict(self.counts))
        if sum(self.counts.values()) + self.tie != self.total:
            raise ValueError("tally counts do not sum to total")


def outputs_from_traces(
    traces: Sequence[RefinementTrace], iteration: int
) -> dict[int, str]:
    """System outputs at one iteration, keyed by instance id."""
    outputs = {}
    for trace in traces:
        if iteration >= len(trace.candidates):
            raise CampaignError(
                f"instance {trace.instance_id}: trace has "
                f"{len(trace.candidates) - 1} iterations, wanted {iteration}"
            )
        outputs[trace.instance_id] = trace.candidates[iteration]
    return outputs


def outputs_from_references(sampled: SampledSet, label: str = "A") -> dict[int, str]:
    """Human references presented as just another system."""
    return {inst.instance_id: inst.reference(label) for inst in sampled.instances}


def create_campaign(
    name_a: str,
    outputs_a: Mapping[int, str],
    name_b: str,
    outputs_b: Mapping[int, str],
    ids: Sequence[int],
    seed: int,
    size: int = DEFAULT_CAMPAIGN_SIZE,
    source_lang: str = "",
    target_lang: str = "en",
    label: str | None = None,
    question: str | None = None,
) -> Campaign:
    """Build a blind campaign from two aligned output maps.

    Items are a seeded subsample of ``ids``; each item's presentation
    side comes from a seeded coin flip, so identical inputs and seed
    reproduce the identical campaign (bar the generated id).
    """
    if name_a == name_b:
        raise CampaignError(f"need two distinct system names, got {name_a!r} twice")
    ids = list(ids)
    if not ids:
        raise CampaignError("no candidate ids")
    for name, outputs in ((name_a, outputs_a), (name_b, outputs_b)):
        missing = [i for i in ids if i not in outputs]
        if missing:
            raise CampaignError(
                f"system {name!r} does not cover ids {missing[:10]}"
                + (" ..." if len(missing) > 10 else "")
            )
    if not 1 <= size <= len(ids):
        raise CampaignError(
            f"campaign size {size} out of range for {len(ids)} candidate ids"
        )

    generator = rng.make_rng(seed)
    chosen = [ids[i] for i in rng.sample_indices(generator, len(ids), size)]
    items = []
    for instance_id in chosen:
        a_first = rng.randbelow(generator, 2) == 0
        if a_first:
            items.append(
                CampaignItem(
                    instance_id=instance_id,
                    text_first=outputs_a[instance_id],
                    text_second=outputs_b[instance_id],
                    first_system=name_a,
                    second_system=name_b,
                )
            )
        else:
            items.append(
                CampaignItem(
                    instance_id=instance_id,
                    text_first=outputs_b[instance_id],
                    text_second=outputs_a[instance_id],
                    first_system=name_b,
                    second_system=name_a,
                )
            )
    return Campaign(
        campaign_id=uuid.uuid4().hex[:12],
        label=label or f"{name_a} vs {name_b}",
        source_lang=source_lang,
        target_lang=target_lang,
        question=question or default_question(target_lang),
        seed=seed,
        systems=(name_a, name_b),
        items=tuple(items),
    )


class CampaignStore:
    """Disk-backed campaigns and their append-only judgment logs.

    Layout: one directory per campaign holding ``campaign.json`` (the
    full definition, hidden labels included; operator-side only) and
    ``judgments.jsonl``.  Judgment appends are serialized per campaign
    and fsynced before returning.
    """

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._campaigns: dict[str, Campaign] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._mutex = threading.Lock()
        self._load()

    def _dir(self, campaign_id: str) -> Path:
        return self.root / campaign_id

    def _load(self) -> None:
        for path in sorted(self.root.glob("*/campaign.json")):
            record = json.loads(path.read_text(encoding="utf-8"))
            campaign = Campaign(
                campaign_id=record["campaign_id"],
                label=record["label"],
                source_lang=record["source_lang"],
                target_lang=record["target_lang"],
                question=record["question"],
                seed=record["seed"],
                systems=tuple(record["systems"]),
                items=tuple(CampaignItem(**item) for item in record["items"]),
            )
            self._campaigns[campaign.campaign_id] = campaign

    def add(self, campaign: Campaign) -> None:
        directory = self._dir(campaign.campaign_id)
        directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "campaign_id": campaign.campaign_id,
            "label": campaign.label,
            "source_lang": campaign.source_lang,
            "target_lang": campaign.target_lang,
            "question": campaign.question,
            "seed": campaign.seed,
            "systems": list(campaign.systems),
            "items": [asdict(item) for item in campaign.items],
        }
        tmp = directory / "campaign.json.tmp"
        tmp.write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False),
            encoding="utf-8",
        )
        tmp.replace(directory / "campaign.json")
        with self._mutex:
            self._campaigns[campaign.campaign_id] = campaign

    def get(self, campaign_id: str) -> Campaign:
        with self._mutex:
            try:
                return self._campaigns[campaign_id]
            except KeyError:
                raise CampaignError(f"unknown campaign {campaign_id!r}") from None

    def list(self) -> list[Campaign]:
        with self._mutex:
            return sorted(self._campaigns.values(), key=lambda c: c.campaign_id)

    def _lock_for(self, campaign_id: str) -> threading.Lock:
        with self._mutex:
            return self._locks.setdefault(campaign_id, threading.Lock())

    # -- judgments ---------------------------------------------------

    def append_judgment(self, judgment: Judgment) -> None:
        """Durable append: the call returns only after fsync."""
        path = self._dir(judgment.campaign_id) / "judgments.jsonl"
        line = json.dumps(asdict(judgment), sort_keys=True, ensure_ascii=False)
        with self._lock_for(judgment.campaign_id):
            with path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())

    def judgment_rows(self, campaign_id: str) -> list[Judgment]:
        """Every stored row in append order (the audit trail)."""
        self.get(campaign_id)
        path = self._dir(campaign_id) / "judgments.jsonl"
        if not path.exists():
            return []
        rows = []
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    rows.append(Judgment(**json.loads(line)))
        return rows

    def latest_judgments(self, campaign_id: str) -> dict[tuple[int, str], Judgment]:
        """Effective judgments: the last row per (item, evaluator)."""
        latest: dict[tuple[int, str], Judgment] = {}
        for row in self.judgment_rows(campaign_id):
            latest[(row.item_index, row.evaluator)] = row
        return latest

    # -- operations --------------------------------------------------

    def submit_judgment(
        self, campaign_id: str, item_index: int, choice: str, evaluator: str
    ) -> dict:
        campaign = self.get(campaign_id)
        if not isinstance(item_index, int) or not 0 <= item_index < campaign.size:
            raise CampaignError(
                f"item index {item_index!r} out of range 0..{campaign.size - 1}"
            )
        if choice not in CHOICES:
            raise CampaignError(f"choice must be one of {CHOICES}, got {choice!r}")
        if not evaluator or not evaluator.strip():
            raise CampaignError("evaluator token must be non-empty")
        judgment = Judgment(
            campaign_id=campaign_id,
            item_index=item_index,
            choice=choice,
            evaluator=evaluator,
            first_system=campaign.items[item_index].first_system,
            timestamp=time.time(),
        )
        self.append_judgment(judgment)
        judged = self._judged_count(campaign_id, evaluator)
        return {"accepted": True, "judged": judged, "total": campaign.size}

    def _judged_count(self, campaign_id: str, evaluator: str) -> int:
        latest = self.latest_judgments(campaign_id)
        return sum(1 for (_, token) in latest if token == evaluator)

    def next_task(self, campaign_id: str, evaluator: str) -> dict:
        """The lowest-index item this evaluator has not judged.

        The returned view carries texts and the question only; hidden
        labels never leave the server through this path.
        """
        campaign = self.get(campaign_id)
        if not evaluator or not evaluator.strip():
            raise CampaignError("evaluator token must be non-empty")
        judged_items = {
            index for (index, token) in self.latest_judgments(campaign_id)
            if token == evaluator
        }
        judged = len(judged_items)
        for index, item in enumerate(campaign.items):
            if index not in judged_items:
                return {
                    "campaign_id": campaign_id,
                    "item_index": index,
                    "question": campaign.question,
                    "text_first": item.text_first,
                    "text_second": item.text_second,
                    "judged": judged,
                    "total": campaign.size,
                }
        return {
            "campaign_id": campaign_id,
            "done": True,
            "judged": judged,
            "total": campaign.size,
        }

    def tally(self, campaign_id: str) -> PreferenceTally:
        """De-anonymized preference counts from effective judgments."""
        campaign = self.get(campaign_id)
        counts = {name: 0 for name in campaign.systems}
        tie = 0
        total = 0
        for (item_index, _), row in self.latest_judgments(campaign_id).items():
            item = campaign.items[item_index]
            total += 1
            if row.choice == "tie":
                tie += 1
            elif row.choice == "first":
                counts[item.first_system] += 1
            else:
                counts[item.second_system] += 1
        return PreferenceTally(counts=counts, tie=tie, total=total)


# --- HTTP layer -----------------------------------------------------------

def create_app(
    store: CampaignStore,
    operator_token: str | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    """JSON API plus optional static hosting of the judging bundle.

    Operator endpoints (create/list/tally) need the configured token in
    the X-Operator-Token header; judge endpoints need any non-empty
    evaluator token, which is an identity, not a secret.
    """
    app = FastAPI(title="pairwise-eval")

    def check_operator(token: str | None) -> None:
        if operator_token is None:
            raise HTTPException(403, "operator endpoints are disabled")
        if token != operator_token:
            raise HTTPException(403, "bad operator token")

    @app.post("/api/campaigns")
    def post_campaign(
        payload: dict = Body(...),
        x_operator_token: str | None = Header(default=None),
    ) -> dict:
        check_operator(x_operator_token)
        try:
            system_a = payload["system_a"]
            system_b = payload["system_b"]
            outputs_a = {int(k): str(v) for k, v in system_a["outputs"].items()}
            outputs_b = {int(k): str(v) for k, v in system_b["outputs"].items()}
            ids = sorted(outputs_a)
            campaign = create_campaign(
                name_a=str(system_a["name"]),
                outputs_a=outputs_a,
                name_b=str(system_b["name"]),
                outputs_b=outputs_b,
                ids=ids,
                seed=int(payload["seed"]),
                size=int(payload.get("size", DEFAULT_CAMPAIGN_SIZE)),
                source_lang=str(payload.get("source_lang", "")),
                target_lang=str(payload.get("target_lang", "en")),
                label=payload.get("label"),
                question=payload.get("question"),
            )
        except KeyError as exc:
            raise HTTPException(422, f"missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, str(exc)) from exc
        store.add(campaign)
        return {
            "campaign_id": campaign.campaign_id,
            "label": campaign.label,
            "size": campaign.size,
        }

    @app.get("/api/campaigns")
    def list_campaigns(
        x_operator_token: str | None = Header(default=None),
    ) -> list[dict]:
        check_operator(x_operator_token)
        return [
            {
                "campaign_id": c.campaign_id,
                "label": c.label,
                "size": c.size,
                "judgments": len(store.judgment_rows(c.campaign_id)),
            }
            for c in store.list()
        ]

    @app.get("/api/campaigns/{campaign_id}/next")
    def get_next(campaign_id: str, evaluator: str = Query(...)) -> dict:
        try:
            return store.next_task(campaign_id, evaluator)
        except CampaignError as exc:
            raise HTTPException(
                404 if "unknown campaign" in str(exc) else 400, str(exc)
            ) from exc

    @app.post("/api/campaigns/{campaign_id}/judgments")
    def post_judgment(campaign_id: str, payload: dict = Body(...)) -> dict:
        try:
            return store.submit_judgment(
                campaign_id,
                item_index=payload.get("item_index"),
                choice=payload.get("choice"),
                evaluator=payload.get("evaluator"),
            )
        except CampaignError as exc:
            raise HTTPException(
                404 if "unknown campaign" in str(exc) else 400, str(exc)
            ) from exc
        except OSError as exc:
            raise HTTPException(503, f"storage failure, retry: {exc}") from exc

    @app.get("/api/campaigns/{campaign_id}/tally")
    def get_tally(
        campaign_id: str,
        x_operator_token: str | None = Header(default=None),
    ) -> dict:
        check_operator(x_operator_token)
        try:
            tally = store.tally(campaign_id)
        except CampaignError as exc:
            raise HTTPException(404, str(exc)) from exc
        return {"counts": tally.counts, "tie": tally.tie, "total": tally.total}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
