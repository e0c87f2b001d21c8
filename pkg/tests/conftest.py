import json
from pathlib import Path

import pytest

from cherrypi import corpus_dir
from cherrypi.parser import parse_program, parse_type

BINARY_PROGRAMS = ("vod_b", "vod_c", "vod_d", "producer_consumer",
                   "producer_consumer_commit")
ALL_PROGRAMS = BINARY_PROGRAMS + ("three_party_job",)


@pytest.fixture(scope="session")
def corpus() -> Path:
    return corpus_dir()


@pytest.fixture(scope="session")
def programs(corpus):
    return {name: parse_program((corpus / f"{name}.chpi").read_text())
            for name in ALL_PROGRAMS}


@pytest.fixture(scope="session")
def types(corpus):
    return {p.stem: parse_type(p.read_text())
            for p in sorted(corpus.glob("*.chty"))}


@pytest.fixture(scope="session")
def verdicts(corpus):
    return json.loads((corpus / "verdicts.json").read_text())
