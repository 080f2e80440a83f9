# models/synth.py
"""Synthetic corpora with known parameters.

Draws come from numpy's PCG64 bit generator; the stream for a given seed is stable
for the numpy version pinned in requirements.txt.
"""
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, time, timedelta, timezone

import numpy as np

from services.corpus_service import FollowerSnapshot, Tweet, write_followers, write_tweets
from services.feature_service import CONTROL_COLUMNS, INTERCEPT, DesignMatrix
from utils.errors import SynthSpecError
from utils.file_utils import write_json
from utils.log_utils import get_logger

logger = get_logger("synth")

START_DAY = datetime(2015, 9, 18, tzinfo=timezone.utc)
FILLER_WORDS = ("lorem", "ipsum", "dolor", "sit", "amet")
LINK_TOKEN = "https://t.co/synth"


@dataclass(frozen=True)
class ControlDistributions:
    """followers ~ linear growth over the period, length ~ 1 + Poisson, binaries ~ Bernoulli."""
    followers_start: float = 2.0
    followers_end: float = 3.0
    days: int = 120
    length_mean: float = 12.0
    hyperlink_rate: float = 0.4
    self_reference_rate: float = 0.2


@dataclass(frozen=True)
class SynthSpec:
    n: int
    beta: tuple
    alpha: float
    topic_prevalences: tuple = ()
    controls: tuple = CONTROL_COLUMNS
    control_distributions: ControlDistributions = field(default_factory=ControlDistributions)
    seed: int = 0
    candidate: str = "synthetic"
    topic_names: tuple = ()

    @property
    def topics(self):
        if self.topic_names:
            return tuple(self.topic_names)
        return tuple(f"topic_{i + 1:02d}" for i in range(len(self.topic_prevalences)))

    @property
    def column_names(self):
        return (INTERCEPT,) + tuple(self.controls) + self.topics

    def validate(self):
        if self.n < 1:
            raise SynthSpecError("n must be >= 1", n=self.n)
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise SynthSpecError("alpha must be >= 0", alpha=self.alpha)
        if any(not 0.0 <= p <= 1.0 for p in self.topic_prevalences):
            raise SynthSpecError("topic prevalences must lie in [0, 1]")
        unknown = [c for c in self.controls if c not in CONTROL_COLUMNS]
        if unknown:
            raise SynthSpecError(f"unknown control(s) {', '.join(unknown)}", controls=unknown)
        if len(self.beta) != len(self.column_names):
            raise SynthSpecError(
                f"beta has {len(self.beta)} entries, design has {len(self.column_names)} column(s)",
                columns=list(self.column_names),
            )
        if self.topic_names and len(self.topic_names) != len(self.topic_prevalences):
            raise SynthSpecError("topic_names and topic_prevalences differ in length")
        dist = self.control_distributions
        if dist.days < 1 or dist.followers_start <= 0 or dist.followers_end <= 0 or dist.length_mean < 0:
            raise SynthSpecError("invalid control distributions")
        if not (0.0 <= dist.hyperlink_rate <= 1.0 and 0.0 <= dist.self_reference_rate <= 1.0):
            raise SynthSpecError("control rates must lie in [0, 1]")
        return self

    def to_dict(self):
        payload = asdict(self)
        payload["columns"] = list(self.column_names)
        return payload


def daily_followers(dist: ControlDistributions):
    """Follower level per day in millions, rounded to whole followers."""
    levels = np.linspace(dist.followers_start, dist.followers_end, dist.days)
    return np.round(levels * 1e6) / 1e6


def _draw(spec: SynthSpec, rng: np.random.Generator):
    n = spec.n
    dist = spec.control_distributions
    day_index = np.arange(n) % dist.days
    topics = np.column_stack([rng.random(n) < p for p in spec.topic_prevalences]).astype(float) \
        if spec.topic_prevalences else np.zeros((n, 0))
    controls = {
        "followers_millions": daily_followers(dist)[day_index],
        "length_words": 1.0 + rng.poisson(dist.length_mean, size=n),
        "hyperlink": (rng.random(n) < dist.hyperlink_rate).astype(float),
        "self_reference": (rng.random(n) < dist.self_reference_rate).astype(float),
    }
    return topics, controls


def generate(spec: SynthSpec, marker_words=None):
    """Draw a DesignMatrix and counts y from the NB model of the spec.

    y is Poisson(mu * nu) with nu ~ Gamma(shape 1/alpha, scale alpha); alpha = 0 gives plain
    Poisson. marker_words (words per indicator) raises length_words so every injected marker fits.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    topics, controls = _draw(spec, rng)

    if marker_words is not None:
        needed = topics @ np.asarray(marker_words["topics"], dtype=float)
        if "hyperlink" in spec.controls:
            needed += controls["hyperlink"]
        if "self_reference" in spec.controls:
            needed += controls["self_reference"] * marker_words["self_reference"]
        controls["length_words"] = np.maximum(controls["length_words"], needed)

    X = np.column_stack([np.ones(spec.n)] + [controls[c] for c in spec.controls] + [topics])
    mu = np.exp(X @ np.asarray(spec.beta, dtype=float))
    if spec.alpha > 0:
        nu = rng.gamma(shape=1.0 / spec.alpha, scale=spec.alpha, size=spec.n)
        y = rng.poisson(mu * nu)
    else:
        y = rng.poisson(mu)
    y = y.astype(np.int64)

    design = DesignMatrix(
        candidate=spec.candidate,
        y=y,
        column_names=spec.column_names,
        X=X,
        topic_columns=spec.topics,
        tweet_ids=tuple(f"{spec.candidate}-{i}" for i in range(spec.n)),
    )
    return design, y


# ---------------- Corpus emission ----------------
def _markers(spec: SynthSpec, rules):
    topic_markers = []
    if spec.candidate in spec.topics:
        # the own-name rule feeds self_reference, never a topic column
        raise SynthSpecError(f"candidate '{spec.candidate}' cannot be one of its own topics", candidate=spec.candidate)
    for topic in spec.topics:
        rule = rules.get(topic)
        if rule is None:
            raise SynthSpecError(f"topic '{topic}' has no rule to take a marker from", topic=topic)
        topic_markers.append(rule.patterns[0].text)
    own = rules.get(spec.candidate)
    if own is None and "self_reference" in spec.controls:
        raise SynthSpecError(f"candidate '{spec.candidate}' has no figure rule for self-reference", candidate=spec.candidate)
    own_marker = own.patterns[0].text if own is not None else ""
    return topic_markers, own_marker


def _tweet_text(row, spec, topic_markers, own_marker, filler_rng):
    named = dict(zip(spec.column_names, row))
    tokens = [m for m, flag in zip(topic_markers, row[len(row) - len(topic_markers):]) if flag]
    if named.get("self_reference"):
        tokens.append(own_marker)
    if named.get("hyperlink"):
        tokens.append(LINK_TOKEN)
    used = sum(len(t.split()) for t in tokens)
    length = int(named.get("length_words", used))
    fillers = filler_rng.choice(FILLER_WORDS, size=max(0, length - used))
    return " ".join(list(fillers) + tokens)


def synthetic_corpus(spec: SynthSpec, rules):
    """Tweets and follower snapshots whose labeled design reproduces the generated one."""
    topic_markers, own_marker = _markers(spec, rules)
    marker_words = {
        "topics": [len(m.split()) for m in topic_markers],
        "self_reference": len(own_marker.split()) if own_marker else 0,
    }
    design, y = generate(spec, marker_words)
    days = spec.control_distributions.days
    filler_rng = np.random.Generator(np.random.PCG64(spec.seed + 1))

    tweets = []
    for i, row in enumerate(design.X):
        # row i lands on day i % days, as in the draw
        created = START_DAY + timedelta(days=i % days, seconds=(i // days) % 86400)
        tweets.append(Tweet(
            id=design.tweet_ids[i],
            candidate=spec.candidate,
            created_at=created,
            text=_tweet_text(row, spec, topic_markers, own_marker, filler_rng),
            likes=int(y[i]),
            is_retweet=False,
        ))
    levels = daily_followers(spec.control_distributions)
    snapshots = [
        FollowerSnapshot(
            candidate=spec.candidate,
            at=datetime.combine((START_DAY + timedelta(days=d)).date(), time(12, 0), tzinfo=timezone.utc),
            count=int(round(level * 1e6)),
        )
        for d, level in enumerate(levels)
    ]
    return design, tweets, snapshots


def write_synthetic_corpus(spec: SynthSpec, rules, out_dir):
    design, tweets, snapshots = synthetic_corpus(spec, rules)
    paths = [
        write_tweets(os.path.join(out_dir, "tweets.jsonl"), tweets),
        write_followers(os.path.join(out_dir, "followers.csv"), snapshots),
        write_json(os.path.join(out_dir, "truth.json"), spec.to_dict()),
    ]
    logger.info(f"✅ Simulated {len(tweets)} tweet(s) for {spec.candidate}")
    return design, paths
