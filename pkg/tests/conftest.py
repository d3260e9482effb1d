from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from abmlevels.cli import demo_text
from abmlevels.modelparse import parse_model
from abmlevels.patterns import parse_pattern_file

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

GOLDEN = Path(__file__).parent / "golden"


def demo_spec(name):
    return parse_model(demo_text(name, "abm"))


def demo_library(name):
    spec = demo_spec(name)
    return spec, parse_pattern_file(demo_text(name, "cet"), spec)


@pytest.fixture
def golden():
    return GOLDEN
