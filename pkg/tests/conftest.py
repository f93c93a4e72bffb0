import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from briefbank.corpus import ParagraphStore
from briefbank.dense import DeterministicMockProvider, build_vector_store
from briefbank.fixtures import make_synthetic_corpus
from briefbank.lexical import build_lexical_index
from briefbank.retrieval import SearchStores

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus():
    return make_synthetic_corpus(seed=7, n_docs=6, n_paragraphs=40)


@pytest.fixture(scope="session")
def stores(corpus):
    provider = DeterministicMockProvider()
    return SearchStores(
        paragraphs=ParagraphStore(corpus.paragraphs, corpus.documents),
        vectors=build_vector_store(corpus.paragraphs, provider),
        embedder=provider,
        lexical=build_lexical_index(corpus.paragraphs),
    )


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR
