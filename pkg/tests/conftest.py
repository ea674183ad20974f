import hypothesis
import pytest

from wmcollide.corpus import synthesize_corpus
from wmcollide.pipeline import prompt_pool
from wmcollide.toylm import ingest_corpus, train_lm

hypothesis.settings.register_profile(
    "suite", max_examples=40, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A few thousand tokens; enough structure for unit-level physics."""
    path = tmp_path_factory.mktemp("corpus") / "small.txt"
    synthesize_corpus(
        path, seed=11, n_word_types=900, n_starters=150,
        sentences_per_paragraph=30, n_paragraphs=60,
        min_sentence_len=6, max_sentence_len=11,
    )
    return path


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    return ingest_corpus(small_corpus, 1000)


@pytest.fixture(scope="session")
def small_lm(small_corpus, small_vocab):
    return train_lm(small_corpus, small_vocab, order=3, alpha=1e-6)


@pytest.fixture(scope="session")
def small_pool(small_corpus, small_lm):
    return prompt_pool(small_corpus, small_lm)
