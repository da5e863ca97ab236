from __future__ import annotations

import pytest

import helpers

_acceptance_results: list[tuple[str, str]] = []

_LABELS = {"passed": "PASS", "failed": "FAIL"}


@pytest.fixture(scope="session")
def corpus_fixture_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("search-fixtures")
    helpers.write_search_fixtures(root, helpers.corpus_scenarios())
    return root


@pytest.fixture()
def scenarios():
    return helpers.corpus_scenarios()


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_results.append((name, _LABELS.get(report.outcome, report.outcome.upper())))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, label in _acceptance_results:
        terminalreporter.write_line(f"{label}  {name}")
