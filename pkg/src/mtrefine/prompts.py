"""Prompt templates and rendering for the five querying strategies.

Templates use ``string.Template`` placeholders (``${source}``,
``${prev_translation}``, ``${random_target}``, ``${lang}``).  Rendering
is pure string substitution: byte-identical output for identical input,
no model calls, no clock, no randomness.
"""

from __future__ import annotations

import enum
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml


class TemplateError(ValueError):
    """Missing variable, unknown placeholder, or malformed template set."""


class InjectionError(ValueError):
    """A substitution value itself contains placeholder syntax."""


class PromptKind(enum.Enum):
    """The five querying strategies."""

    TRANSLATE = "translate"
    REFINE = "refine"
    REFINE_CONTRAST = "refine_contrast"
    REFINE_RANDOM = "refine_random"
    PARAPHRASE = "paraphrase"

    @property
    def label(self) -> str:
        """Human-facing label used in tables and trace files."""
        return _LABELS[self]

    @classmethod
    def from_label(cls, text: str) -> "PromptKind":
        normalized = text.strip().lower().replace("-", "_")
        for kind in cls:
            if normalized in (kind.value, kind.label.lower()):
                return kind
        raise TemplateError(f"unknown prompt kind {text!r}")


_LABELS: dict[PromptKind, str] = {
    PromptKind.TRANSLATE: "Translate",
    PromptKind.REFINE: "Refine",
    PromptKind.REFINE_CONTRAST: "Refine_Contrast",
    PromptKind.REFINE_RANDOM: "Refine_Random",
    PromptKind.PARAPHRASE: "Paraphrase",
}

# The refine_random template shares the contrastive text; its middle
# slot is filled with the random target on the first round and with the
# previous translation on every later round.
DEFAULT_TEMPLATES: dict[PromptKind, str] = {
    PromptKind.TRANSLATE: (
        "Source: ${source}\n"
        "Please give me a translation in ${lang} without any explanation."
    ),
    PromptKind.REFINE: (
        "Source: ${source}\n"
        "Translation: ${prev_translation}\n"
        "Please give me a better ${lang} translation without any explanation."
    ),
    PromptKind.REFINE_CONTRAST: (
        "Source: ${source}\n"
        "Bad translation: ${prev_translation}\n"
        "Please give me a better ${lang} translation without any explanation."
    ),
    PromptKind.REFINE_RANDOM: (
        "Source: ${source}\n"
        "Bad translation: ${prev_translation}\n"
        "Please give me a better ${lang} translation without any explanation."
    ),
    PromptKind.PARAPHRASE: (
        "Sentence: ${prev_translation}\n"
        "Please give me a paraphrase in ${lang} without any explanation."
    ),
}

# Variables each kind consumes; refine_random swaps prev_translation for
# random_target on the first iteration.
_REQUIRED: dict[PromptKind, tuple[str, ...]] = {
    PromptKind.TRANSLATE: ("source", "lang"),
    PromptKind.REFINE: ("source", "prev_translation", "lang"),
    PromptKind.REFINE_CONTRAST: ("source", "prev_translation", "lang"),
    PromptKind.REFINE_RANDOM: ("source", "prev_translation", "lang"),
    PromptKind.PARAPHRASE: ("prev_translation", "lang"),
}

_PLACEHOLDER_RE = re.compile(r"\$\{[^}]*\}")


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully substituted prompt ready to send.

    ``variables`` records exactly what was substituted, under the name
    it was substituted as, so traces stay self-describing.
    """

    kind: PromptKind
    text: str
    variables: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", dict(self.variables))


def render_prompt(
    kind: PromptKind,
    *,
    lang: str,
    source: str | None = None,
    prev_translation: str | None = None,
    random_target: str | None = None,
    is_first_iteration: bool = False,
    templates: Mapping[PromptKind, str] | None = None,
) -> RenderedPrompt:
    """Render one prompt for one segment.

    For ``REFINE_RANDOM`` with ``is_first_iteration`` the middle slot is
    filled with ``random_target``; otherwise with ``prev_translation``.
    """
    template_text = (templates or DEFAULT_TEMPLATES)[kind]

    values: dict[str, str] = {"lang": lang}
    if "source" in _REQUIRED[kind]:
        values["source"] = _require(kind, "source", source)
    if "prev_translation" in _REQUIRED[kind]:
        if kind is PromptKind.REFINE_RANDOM and is_first_iteration:
            values["prev_translation"] = _require(kind, "random_target", random_target)
        else:
            values["prev_translation"] = _require(
                kind, "prev_translation", prev_translation
            )

    for name, value in values.items():
        if "${" in value:
            raise InjectionError(
                f"{kind.label}: value for {name!r} contains placeholder syntax: "
                f"{value!r}"
            )

    try:
        text = string.Template(template_text).substitute(values)
    except KeyError as exc:
        raise TemplateError(
            f"{kind.label}: template references unknown variable {exc.args[0]!r}"
        ) from None
    except ValueError as exc:
        raise TemplateError(f"{kind.label}: malformed template: {exc}") from None

    residual = _PLACEHOLDER_RE.search(text)
    if residual:
        raise TemplateError(
            f"{kind.label}: unsubstituted placeholder {residual.group(0)!r} remains"
        )

    recorded = dict(values)
    if kind is PromptKind.REFINE_RANDOM and is_first_iteration:
        recorded["random_target"] = recorded.pop("prev_translation")
    return RenderedPrompt(kind=kind, text=text, variables=recorded)


def _require(kind: PromptKind, name: str, value: str | None) -> str:
    if value is None:
        raise TemplateError(f"{kind.label}: missing required variable {name!r}")
    return value


def load_templates(path: str | Path) -> dict[PromptKind, str]:
    """Load a template override set from a YAML mapping of kind to text.

    Unknown keys are rejected; kinds absent from the file fall back to
    the defaults, so a file may override a single prompt.
    """
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise TemplateError(f"{path}: expected a mapping of prompt kind to text")
    templates = dict(DEFAULT_TEMPLATES)
    for key, text in raw.items():
        kind = PromptKind.from_label(str(key))
        if not isinstance(text, str) or not text.strip():
            raise TemplateError(f"{path}: template for {key!r} must be non-empty text")
        templates[kind] = text
    return templates
