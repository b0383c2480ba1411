from __future__ import annotations

import os
from collections import OrderedDict
from pathlib import Path

import numpy as np
import pytest

from raresub.synth import SyntheticSpec, generate

UCI_ENV = "RARESUB_UCI_DIR"

_acceptance: "OrderedDict[str, list[tuple[str, str]]]" = OrderedDict()


def uci_paths():
    """(data.csv, labels.csv) if the UCI cohort is available, else None."""
    root = os.environ.get(UCI_ENV)
    candidates = [Path(root)] if root else []
    candidates.append(Path(__file__).resolve().parents[1] / "data" / "uci")
    for c in candidates:
        data, labels = c / "data.csv", c / "labels.csv"
        if data.exists() and labels.exists():
            return data, labels
    return None


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    crit = marker.kwargs.get("criterion") or marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _acceptance.setdefault(crit, []).append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_acceptance):
        parts = _acceptance[crit]
        ok = all(s == "PASS" for _, s in parts)
        failed = [n for n, s in parts if s != "PASS"]
        line = f"criterion {crit}: {'PASS' if ok else 'FAIL'}  ({len(parts) - len(failed)}/{len(parts)} checks)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)


@pytest.fixture(scope="session")
def planted_cohort():
    return generate(SyntheticSpec())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

