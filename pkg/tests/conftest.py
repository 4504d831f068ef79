import pytest

from smner.embeddings import SubwordModel
from smner.model import Featurizer, FeatureFlags
from smner.phonology import default_encoder
from smner.synthetic import make_toy_corpus, make_toy_embeddings


@pytest.fixture(scope="session")
def phonetic_encoder():
    return default_encoder()


@pytest.fixture(scope="session")
def toy_data():
    train, dev = make_toy_corpus()
    table = make_toy_embeddings([train, dev])
    return train, dev, table


@pytest.fixture(scope="session")
def toy_featurizer(toy_data, phonetic_encoder):
    _, _, table = toy_data
    return Featurizer(table, SubwordModel(table.dim), phonetic_encoder, FeatureFlags())
