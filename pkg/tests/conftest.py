import numpy as np
import pytest

from smle.data import SynthSpec, generate_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small synthetic corpus shared by the fast unit tests."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    spec = SynthSpec(
        out_dir=str(root),
        speakers=4,
        utterances=3,
        noises=8,
        test_speakers=2,
        test_utterances=2,
        test_noises=4,
        min_seconds=1.6,
        max_seconds=2.5,
        seed=123,
    )
    return generate_synthetic_corpus(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
