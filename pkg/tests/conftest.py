import pytest

from liftedrbm.data import split_folds
from liftedrbm.model import TrainConfig, train

from synthetic_domain import generate_movie_domain


@pytest.fixture(scope="session")
def movie_domain():
    """(kb, examples, truth) for the rule-generated movie domain."""
    return generate_movie_domain(seed=11, n_pairs=700)


@pytest.fixture(scope="session")
def movie_model(movie_domain):
    """An ensemble trained with the default configuration on a train split."""
    kb, examples, _ = movie_domain
    folds = split_folds(examples, 5, seed=0)
    train_set, test_set = folds.split(examples, 0)
    model = train(kb, train_set, TrainConfig())
    return model, train_set, test_set, kb
