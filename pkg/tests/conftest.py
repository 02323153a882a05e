from __future__ import annotations

import numpy as np
import pytest

from refinebench import synth, triplets
from refinebench.corrupt import DistractorPool


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    """Five synthetic sources, their corpus and a distractor pool."""
    root = tmp_path_factory.mktemp("data")
    return synth.write_demo_dataset(root, n_sources=5, seed=0)


@pytest.fixture(scope="session")
def pool(dataset):
    return DistractorPool.load(dataset["pool"])


@pytest.fixture(scope="session")
def manifest(dataset, pool, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    return triplets.generate(triplets.load_sources(dataset["sources"]), pool, 3, out)


@pytest.fixture(scope="session")
def triplet_list(manifest):
    return triplets.read_manifest(manifest)


@pytest.fixture
def by_kind(triplet_list):
    out = {}
    for t in triplet_list:
        out.setdefault(t.kind, t)
    return out


@pytest.fixture
def img():
    return synth.synthetic_image(11, 40, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# ---------------------------------------------------------------------------
# acceptance criteria report: one line per criterion at the end of the run

_CRITERIA: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title, self.detail = number, title, ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = self.detail if exc_type is None else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"[criterion {self.number}] {status}  {self.title}  ({detail})"
        _CRITERIA[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
