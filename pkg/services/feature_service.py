# services/feature_service.py
import os
from collections import Counter
from dataclasses import dataclass

import numpy as np
import pandas as pd

from services.corpus_service import follower_millions_on_day, original_tweets
from services.labeler_service import label_tweet, rule_matches
from utils.errors import CorpusValidationError, EmptyMatrixError
from utils.file_utils import write_csv
from utils.log_utils import get_logger

logger = get_logger("features")

INTERCEPT = "intercept"
CONTROL_COLUMNS = ("followers_millions", "length_words", "hyperlink", "self_reference")
HYPERLINK_MARKERS = ("http://", "https://", "t.co/")


@dataclass(frozen=True)
class DesignMatrix:
    candidate: str
    y: np.ndarray
    column_names: tuple
    X: np.ndarray
    topic_columns: tuple
    tweet_ids: tuple = ()

    def __post_init__(self):
        if self.X.shape != (len(self.y), len(self.column_names)):
            raise ValueError("X shape does not match y and column_names")

    @property
    def n(self):
        return len(self.y)

    @property
    def control_columns(self):
        return tuple(c for c in self.column_names if c not in self.topic_columns)

    def column(self, name):
        return self.X[:, self.column_names.index(name)]

    def column_means(self):
        return dict(zip(self.column_names, self.X.mean(axis=0).tolist()))

    def subset(self, columns):
        """Same rows restricted to the named columns, in the order given."""
        idx = [self.column_names.index(c) for c in columns]
        return DesignMatrix(
            candidate=self.candidate,
            y=self.y,
            column_names=tuple(columns),
            X=self.X[:, idx],
            topic_columns=tuple(c for c in columns if c in self.topic_columns),
            tweet_ids=self.tweet_ids,
        )

    def to_frame(self):
        frame = pd.DataFrame(self.X, columns=list(self.column_names))
        frame.insert(0, "likes", self.y)
        return frame

    def dump_csv(self, path):
        return write_csv(path, self.to_frame())


# ---------------- Controls ----------------
def length_words(text):
    # str.split() with no separator splits on runs of Unicode whitespace
    return len(text.split())


def has_hyperlink(text):
    return int(any(marker in text for marker in HYPERLINK_MARKERS))


def topic_columns_for(candidate, rules):
    """Every figure topic except the candidate's own name, then every issue topic."""
    figures = [r.topic_id for r in rules.figures if r.topic_id != candidate]
    issues = [r.topic_id for r in rules.issues]
    return figures + issues


def build_design_matrix(tweets, labels, series, candidate, rules) -> DesignMatrix:
    """Response, controls and topic indicators for one candidate's non-retweets."""
    rows = original_tweets(tweets, candidate)
    if not rows:
        raise EmptyMatrixError(f"no non-retweet tweets for {candidate}", candidate=candidate)
    duplicates = sorted(i for i, n in Counter(t.id for t in rows).items() if n > 1)
    if duplicates:
        raise CorpusValidationError(
            f"duplicate tweet id(s) for {candidate}: {', '.join(duplicates)}", candidate=candidate, tweet_ids=duplicates,
        )

    by_id = {item.tweet_id: item.topics for item in (labels or []) if item.candidate == candidate}
    own_rule = rules.get(candidate)
    if own_rule is None:
        logger.warning(f"⚠️ No figure rule for {candidate}; self_reference is all zero")
    topics = topic_columns_for(candidate, rules)

    follower_cache = {}
    X = np.zeros((len(rows), 1 + len(CONTROL_COLUMNS) + len(topics)))
    X[:, 0] = 1.0
    for i, tweet in enumerate(rows):
        day = tweet.day
        if day not in follower_cache:
            follower_cache[day] = follower_millions_on_day(series, candidate, day)
        tweet_topics = by_id.get(tweet.id)
        if tweet_topics is None:
            tweet_topics = label_tweet(tweet.text, rules)
        X[i, 1] = follower_cache[day]
        X[i, 2] = length_words(tweet.text)
        X[i, 3] = has_hyperlink(tweet.text)
        X[i, 4] = int(own_rule is not None and rule_matches(own_rule, tweet.text, rules.word_boundary))
        for j, topic_id in enumerate(topics):
            X[i, 5 + j] = 1.0 if topic_id in tweet_topics else 0.0

    names = (INTERCEPT,) + CONTROL_COLUMNS + tuple(topics)
    design = DesignMatrix(
        candidate=candidate,
        y=np.array([t.likes for t in rows], dtype=np.int64),
        column_names=names,
        X=X,
        topic_columns=tuple(topics),
        tweet_ids=tuple(t.id for t in rows),
    )
    return prune_constant_columns(design)


def prune_constant_columns(design: DesignMatrix) -> DesignMatrix:
    """Drop every exactly-constant column except the intercept."""
    keep = []
    for j, name in enumerate(design.column_names):
        column = design.X[:, j]
        if name == INTERCEPT or not np.all(column == column[0]):
            keep.append(name)
            continue
        if name in design.topic_columns:
            logger.info(f"ℹ️ {design.candidate}: topic '{name}' never varies, column dropped")
        else:
            logger.warning(f"⚠️ {design.candidate}: control '{name}' is constant, column dropped")
    if len(keep) == len(design.column_names):
        return design
    return design.subset(keep)


def dump_design(design: DesignMatrix, out_dir):
    return design.dump_csv(os.path.join(out_dir, f"design_{design.candidate}.csv"))
