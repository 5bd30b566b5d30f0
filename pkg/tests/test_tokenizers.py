"""Tokenizer parity with frozen toolkit outputs, plus the hook contract."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from mtrefine.metrics.tokenizers import (
    TokenizerHookError,
    default_tokenizer_for,
    tokenize,
    tokenize_13a,
    tokenize_lines,
    tokenize_zh,
)

GOLDEN = json.loads(
    (Path(__file__).parent / "fixtures/metrics/tokenizer_golden.json").read_text(
        encoding="utf-8"
    )
)


@pytest.mark.parametrize("segment", sorted(GOLDEN["13a"]))
def test_13a_matches_toolkit_golden(segment):
    assert tokenize_13a(segment) == GOLDEN["13a"][segment]


@pytest.mark.parametrize("segment", sorted(GOLDEN["zh"]))
def test_zh_matches_toolkit_golden(segment):
    assert tokenize_zh(segment) == GOLDEN["zh"][segment]


def test_13a_basic_punctuation():
    assert tokenize_13a("Hello, world!") == ["Hello", ",", "world", "!"]


def test_13a_keeps_decimal_numbers_together():
    assert tokenize_13a("pi is 3.14159") == ["pi", "is", "3.14159"]
    assert tokenize_13a("1,000 items") == ["1,000", "items"]


def test_13a_splits_digit_dash():
    assert tokenize_13a("a 2-3 split") == ["a", "2", "-", "3", "split"]
    assert tokenize_13a("well-known") == ["well-known"]


def test_13a_unescapes_entities():
    assert tokenize_13a("&quot;a&amp;b&quot;") == ['"', "a", "&", "b", '"']
    assert tokenize_13a("&lt;tag&gt;") == ["<", "tag", ">"]


def test_zh_pads_cjk_characters():
    assert tokenize_zh("这是测试") == ["这", "是", "测", "试"]


def test_zh_keeps_ascii_words_whole():
    assert tokenize_zh("ABC测试") == ["ABC", "测", "试"]


def test_zh_does_not_unescape_entities():
    # the zh tokenizer applies only the shared punctuation rules;
    # entity unescaping is a 13a-only step
    assert tokenize_13a("&amp;") == ["&"]
    assert tokenize_zh("&amp;") == ["&", "amp", ";"]


def test_zh_full_width_forms_are_cjk():
    assert tokenize_zh("ＡＢ") == ["Ａ", "Ｂ"]


def test_builtin_batch_tokenization():
    lines = ["Hello, world!", "a 2-3 split"]
    assert tokenize_lines(lines, "13a") == [tokenize_13a(l) for l in lines]


HOOK_LOWER = (
    sys.executable,
    "-c",
    "import sys\n"
    "for line in sys.stdin.read().split('\\n')[:-1]:\n"
    "    print(' '.join(line.lower().split()))\n",
)


def test_hook_tokenizer_round_trip():
    out = tokenize_lines(["Guten Tag", "HALLO  Welt"], "custom", list(HOOK_LOWER))
    assert out == [["guten", "tag"], ["hallo", "welt"]]


def test_hook_single_segment_helper():
    assert tokenize("Guten Tag", "custom", list(HOOK_LOWER)) == ["guten", "tag"]


def test_unknown_kind_without_hook():
    with pytest.raises(TokenizerHookError, match="not built in"):
        tokenize_lines(["x"], "ja-mecab")


def test_hook_rejects_embedded_newlines():
    with pytest.raises(TokenizerHookError, match="newline"):
        tokenize_lines(["two\nlines"], "custom", list(HOOK_LOWER))


def test_hook_line_count_mismatch():
    bad = [sys.executable, "-c", "print('only one line')"]
    with pytest.raises(TokenizerHookError, match="returned 1 lines for 2"):
        tokenize_lines(["a", "b"], "custom", bad)


def test_hook_failure_surfaces_stderr():
    bad = [sys.executable, "-c", "import sys; sys.exit('hook broke')"]
    with pytest.raises(TokenizerHookError, match="hook broke"):
        tokenize_lines(["a"], "custom", bad)


def test_hook_missing_command():
    with pytest.raises(TokenizerHookError, match="cannot run hook"):
        tokenize_lines(["a"], "custom", ["/no/such/binary-anywhere"])


def test_default_tokenizer_per_language():
    assert default_tokenizer_for("zh") == "zh"
    assert default_tokenizer_for("ja") == "ja-mecab"
    assert default_tokenizer_for("de") == "13a"
    assert default_tokenizer_for("en") == "13a"
