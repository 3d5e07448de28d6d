import numpy as np
import pytest

from qroc import BiomarkerDataset, gen_cases, gen_controls


def synth_dataset(n1, n0, seed):
    """Dataset from the built-in generative model, fully seeded."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return BiomarkerDataset(gen_cases(n1, rng), gen_controls(n0, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def small_dataset():
    return synth_dataset(60, 80, 1234)


@pytest.fixture
def medium_dataset():
    return synth_dataset(200, 200, 987)
