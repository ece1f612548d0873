import pytest

from claimbench.synthetic import generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(seed=7, n_docs=20, claim_ratio=0.3, vocab_size=50, name="SMALL")


@pytest.fixture(scope="session")
def cue_corpus():
    return generate_synthetic(seed=11, n_docs=60, claim_ratio=0.3, vocab_size=80, name="CUE")
