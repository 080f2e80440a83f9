import numpy as np
import pytest

from models.negbin import FitOptions
from services.corpus_service import parse_followers, parse_tweets
from services.labeler_service import label_corpus, load_rules
from utils.config_utils import DEFAULT_RULES_PATH
from tests.helpers import FOLLOWERS_PATH, TWEETS_PATH


@pytest.fixture(scope="session")
def rules():
    return load_rules(DEFAULT_RULES_PATH)


@pytest.fixture(scope="session")
def tweets():
    return parse_tweets(TWEETS_PATH)


@pytest.fixture(scope="session")
def series():
    return parse_followers(FOLLOWERS_PATH)


@pytest.fixture(scope="session")
def labels(tweets, rules):
    return label_corpus(tweets, rules)


@pytest.fixture
def tight():
    return FitOptions(tol=1e-10, max_iter=200)


@pytest.fixture
def rng():
    return np.random.default_rng(20160101)
