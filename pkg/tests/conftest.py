import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="module")
def wav_dir(tmp_path_factory):
    """Module-lifetime scratch directory, safe to reuse across hypothesis examples."""
    return tmp_path_factory.mktemp("wavs")
