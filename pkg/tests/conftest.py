import json
from pathlib import Path

import pytest

from vsoftpro import scenarios
from vsoftpro.platform import validate

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def config1():
    """D2 elbow + variable-stiffness wrist + two-synergy hand."""
    return validate(scenarios.load_canned("config1"))


@pytest.fixture(scope="session")
def config2():
    """AA elbow + motorized rotator wrist + one-synergy hand."""
    return validate(scenarios.load_canned("config2"))


@pytest.fixture(scope="session")
def codec_corpus():
    with open(FIXTURES / "codec_roundtrip.json") as f:
        return json.load(f)
