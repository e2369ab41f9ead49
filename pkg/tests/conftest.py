import numpy as np
import pytest

from windfuse.data import build_frame, fill_frame
from windfuse.synth import SynthSpec, synthesize_files


@pytest.fixture(scope="session")
def tiny_frame(tmp_path_factory):
    """Ten synthetic days, two stations; shared across read-only tests."""
    td = tmp_path_factory.mktemp("tiny")
    obs, nwp = synthesize_files(SynthSpec(stations=2, days=10, seed=7), td)
    return fill_frame(build_frame(obs, nwp))


@pytest.fixture(scope="session")
def fixture_frame(tmp_path_factory):
    """The fixed synthetic fixture used by training-behaviour tests:
    three stations, thirty days, defaults with forecast bias 1.0."""
    td = tmp_path_factory.mktemp("fixture")
    obs, nwp = synthesize_files(SynthSpec(stations=3, days=30, seed=11), td)
    return fill_frame(build_frame(obs, nwp))


def rng_for(seed):
    return np.random.default_rng(seed)
