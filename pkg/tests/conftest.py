import functools

import pytest

from cia import corpus
from cia.diffmap import prepare_pair


@functools.lru_cache(maxsize=None)
def prepared(name):
    return prepare_pair(*corpus.load(name))


@pytest.fixture
def pair():
    return prepared
