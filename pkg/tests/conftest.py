"""Shared fixtures and the acceptance-criterion summary reporter."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from mtrefine.corpus import LanguagePair, SampledSet, TestInstance
from mtrefine.gateway import BackendConfig, Gateway, MockBackend

settings.register_profile(
    "fast",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fast")

PAIR = LanguagePair("en", "de")


def make_instances(n: int, pair: LanguagePair = PAIR) -> tuple[TestInstance, ...]:
    """Deterministic in-memory instances with distinct source/reference text."""
    return tuple(
        TestInstance(
            instance_id=i,
            source=f"source sentence number {i} about topic {i * i}",
            references={"A": f"reference sentence number {i} on topic {i * i}"},
            pair=pair,
        )
        for i in range(n)
    )


def make_sampled(n: int, seed: int = 7, pair: LanguagePair = PAIR) -> SampledSet:
    return SampledSet(instances=make_instances(n, pair), seed=seed)


def mock_gateway(script, cache=None) -> Gateway:
    backend = MockBackend(script, BackendConfig(endpoint="mock://local", model="mock"))
    return Gateway(backend=backend, cache=cache)


@pytest.fixture
def corpus_files(tmp_path):
    """Write a small aligned en-de test set; returns (source, refA, n)."""
    n = 30
    source = tmp_path / "test.en"
    ref = tmp_path / "test.de"
    source.write_text(
        "".join(f"source sentence number {i} about topic {i * i}\n" for i in range(n)),
        encoding="utf-8",
    )
    ref.write_text(
        "".join(f"reference sentence number {i} on topic {i * i}\n" for i in range(n)),
        encoding="utf-8",
    )
    return source, ref, n


# --- acceptance summary ----------------------------------------------------

_CRITERION_RESULTS: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker = getattr(report, "_criterion_text", None)
    if marker is not None:
        _CRITERION_RESULTS.append((marker, report.passed))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and report.when == "call":
        report._criterion_text = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for text, passed in _CRITERION_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}: {text}")
