from __future__ import annotations

import pytest

from . import pipeline
from .report import RESULTS

_acceptance_collected = False


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    return str(tmp_path_factory.mktemp("synth"))


@pytest.fixture(scope="session")
def corpus1(synth_root):
    return pipeline.corpus(synth_root, 1)


def pytest_collection_modifyitems(items):
    global _acceptance_collected
    _acceptance_collected = any(item.nodeid.split("::")[0].endswith("test_acceptance.py") for item in items)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_collected:
        return
    from .test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for name, title in CRITERIA:
        if name in RESULTS:
            ok, detail, seconds = RESULTS[name]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {title}: {detail} ({seconds:.1f} s)")
        else:
            terminalreporter.write_line(f"FAIL  {name}  {title}: no verdict (errored or deselected)")
