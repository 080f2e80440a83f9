# models/tactics.py
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import pandas as pd

from models.negbin import Z95
from utils.errors import DegenerateScoreError, NoTopicalTweetsError, UnknownTopicError
from utils.log_utils import get_logger

logger = get_logger("tactics")

DISCRETE = "discrete"
BETA_MU = "beta-mu"


# ---------------- Domain Types ----------------
@dataclass(frozen=True)
class MarginalEffect:
    topic_id: str
    effect: float
    ci_low: float
    ci_high: float
    se: float
    method: str = DISCRETE

    def to_dict(self):
        return {"effect": self.effect, "ci_low": self.ci_low, "ci_high": self.ci_high, "se": self.se}


@dataclass(frozen=True)
class TacticReport:
    candidate: str
    probs: dict
    effects: dict
    score: float
    rank: Optional[int] = None
    party: Optional[str] = None
    topic_counts: dict = field(default_factory=dict)
    topical_tweets: int = 0
    beta: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "candidate": self.candidate,
            "party": self.party,
            "score": self.score,
            "rank": self.rank,
            "probs": self.probs,
            "effects": {t: e.to_dict() for t, e in self.effects.items()},
            "topic_counts": self.topic_counts,
            "topical_tweets": self.topical_tweets,
            "beta": self.beta,
            "means": self.means,
        }


@dataclass(frozen=True)
class RankedCandidate:
    candidate: str
    score: float
    rank: int


# ---------------- Marginal effects ----------------
def marginal_effect(fit, design, topic_id, method=DISCRETE) -> MarginalEffect:
    """Change in expected likes when the topic goes absent -> present, other covariates at their means.

    The interval is a delta-method 95% CI from the coefficient covariance.
    """
    if topic_id not in fit.columns:
        raise UnknownTopicError(f"topic '{topic_id}' is not in the fitted model", topic_id=topic_id)
    missing = [c for c in fit.columns if c not in design.column_names]
    if missing:
        raise UnknownTopicError(f"design lacks fitted column(s) {', '.join(missing)}", columns=missing)

    beta = fit.coefficients
    t = fit.columns.index(topic_id)
    means = design.subset(fit.columns).X.mean(axis=0)

    if method == DISCRETE:
        # absent/present are the column's observed levels, 0 and 1 for a binary column
        column = design.column(topic_id)
        low, high = float(column.min()), float(column.max())
        x0 = means.copy()
        x0[t] = low
        x1 = x0.copy()
        x1[t] = high
        eta0 = float(x0 @ beta)
        eta1 = eta0 + float(beta[t]) * (high - low)
        mu0, mu1 = math.exp(eta0), math.exp(eta1)
        effect = mu1 - mu0
        grad = mu1 * x1 - mu0 * x0
    elif method == BETA_MU:
        mu_bar = math.exp(float(means @ beta))
        effect = float(beta[t]) * mu_bar
        unit = np.zeros_like(means)
        unit[t] = 1.0
        grad = mu_bar * (unit + beta[t] * means)
    else:
        raise ValueError(f"unknown effect method '{method}'")

    variance = float(grad @ fit.beta_covariance @ grad)
    se = math.sqrt(variance) if variance >= 0 else math.nan
    return MarginalEffect(
        topic_id=topic_id,
        effect=effect,
        ci_low=effect - Z95 * se,
        ci_high=effect + Z95 * se,
        se=se,
        method=method,
    )


def topic_effects(fit, design, method=DISCRETE):
    """Marginal effects for every topic column present in the fit."""
    return {
        topic: marginal_effect(fit, design, topic, method)
        for topic in fit.columns if topic in design.topic_columns
    }


def effects_frame(effects) -> pd.DataFrame:
    rows = [(t, e.effect, e.ci_low, e.ci_high) for t, e in effects.items()]
    return pd.DataFrame(rows, columns=["topic", "effect", "ci_low", "ci_high"])


# ---------------- Conditional probabilities ----------------
def _topics_of(item):
    return getattr(item, "topics", item)


def topic_counts(labels, topic_universe):
    """Per-topic tweet counts and the number of tweets raising at least one topic."""
    universe = set(topic_universe)
    counts = {topic: 0 for topic in sorted(universe)}
    denominator = 0
    for item in labels:
        present = universe.intersection(_topics_of(item))
        if not present:
            continue
        denominator += 1
        for topic in present:
            counts[topic] += 1
    return counts, denominator


def conditional_topic_probs(labels, topic_universe):
    """p(topic | candidate, at least one topic raised).

    A multi-labeled tweet counts toward every topic it carries, so the values can sum above 1.
    """
    counts, denominator = topic_counts(labels, topic_universe)
    if denominator == 0:
        raise NoTopicalTweetsError("no tweet raises any topic in the universe", universe=sorted(topic_universe))
    return {topic: count / denominator for topic, count in counts.items()}


# ---------------- Eval ----------------
def _effect_value(value):
    return value.effect if isinstance(value, MarginalEffect) else float(value)


def eval_score(effects, probs):
    """Sum over topics of effect * probability, for topics carrying both."""
    shared = sorted(set(effects) & set(probs))
    skipped = sorted(t for t in probs if t not in effects and probs[t] > 0)
    if skipped:
        logger.warning(f"⚠️ No effect estimate for {', '.join(skipped)}; skipped in the score")
    if not shared:
        raise DegenerateScoreError("effects and probabilities share no topic")
    return float(sum(_effect_value(effects[t]) * probs[t] for t in shared))


def rank_candidates(scores):
    """Descending by score; equal scores fall back to candidate id order."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [RankedCandidate(candidate=c, score=s, rank=i) for i, (c, s) in enumerate(ordered, start=1)]


def apply_ranks(reports):
    """Fill the rank of each TacticReport from its score."""
    ranks = {r.candidate: r.rank for r in rank_candidates({rep.candidate: rep.score for rep in reports})}
    return sorted((replace(rep, rank=ranks[rep.candidate]) for rep in reports), key=lambda rep: rep.rank)


def rank_frame(reports) -> pd.DataFrame:
    rows = [(r.candidate, r.score, r.party or "", r.rank) for r in reports]
    return pd.DataFrame(rows, columns=["candidate", "score", "party", "rank"])
