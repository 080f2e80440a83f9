# services/pipeline_service.py
"""Per-command orchestration shared by cli.py and the Flask routes.

Each run_* function returns (payload, tables): a JSON-ready dict and a mapping of
artefact name -> DataFrame for CSV output.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import pandas as pd

from models.negbin import FitOptions, coefficient_table, fit_design, fit_poisson, lr_overdispersion
from models.stepwise import forward_stepwise
from models.tactics import (
    TacticReport,
    apply_ranks,
    conditional_topic_probs,
    effects_frame,
    eval_score,
    rank_frame,
    topic_counts,
    topic_effects,
)
from services.corpus_service import candidates_in, parse_followers, parse_tweets, summarize_likes
from services.feature_service import build_design_matrix, topic_columns_for
from services.labeler_service import label_corpus, load_rules, topic_frequencies
from utils.errors import EmptyGroupError, IncompatibleFits
from utils.log_utils import get_logger

logger = get_logger("pipeline")


@dataclass
class Inputs:
    tweets: list
    series: object
    rules: object
    labels: list = field(default_factory=list)

    def __post_init__(self):
        if not self.labels:
            self.labels = label_corpus(self.tweets, self.rules)

    def labels_for(self, candidate):
        return [item for item in self.labels if item.candidate == candidate]


def load_inputs(tweets_path, followers_path, rules_path) -> Inputs:
    return Inputs(
        tweets=parse_tweets(tweets_path),
        series=parse_followers(followers_path),
        rules=load_rules(rules_path),
    )


def resolve_candidates(inputs: Inputs, wanted=None):
    known = candidates_in(inputs.tweets)
    if not wanted:
        return known
    unknown = [c for c in wanted if c not in known]
    if unknown:
        raise EmptyGroupError(f"no tweets for candidate(s) {', '.join(unknown)}", candidates=unknown)
    return sorted(set(wanted))


def _map(func, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


# ---------------- summarize / label ----------------
def run_summarize(inputs: Inputs, candidates):
    summaries = [summarize_likes(inputs.tweets, c) for c in candidates]
    frame = pd.DataFrame([s.to_dict() for s in summaries], columns=["candidate", "mean", "sd", "min", "max", "n"])
    return {"summary": [s.to_dict() for s in summaries]}, {"summary": frame}


def run_label(inputs: Inputs, candidates):
    frequencies = {c: topic_frequencies(inputs.labels, c, inputs.rules) for c in candidates}
    rows = [
        (c, topic, inputs.rules.kind_of(topic), count)
        for c, counts in frequencies.items() for topic, count in counts.items()
    ]
    frame = pd.DataFrame(rows, columns=["candidate", "topic", "kind", "count"])
    return {"frequencies": frequencies}, {"topic_frequencies": frame}


# ---------------- fit / select ----------------
def design_for(inputs: Inputs, candidate):
    return build_design_matrix(inputs.tweets, inputs.labels, inputs.series, candidate, inputs.rules)


def _fit_one(inputs, candidate, options):
    design = design_for(inputs, candidate)
    fit = fit_design(design, options)
    poisson = fit_poisson(design.y, design.X, options, columns=design.column_names)
    try:
        lr = lr_overdispersion(fit, poisson)
    except IncompatibleFits as e:
        logger.warning(f"⚠️ {candidate}: over-dispersion test skipped ({e})")
        lr = None
    return design, fit, lr


def run_fit(inputs: Inputs, candidates, options: FitOptions, workers=1):
    results = _map(lambda c: _fit_one(inputs, c, options), candidates, workers)
    payload = {"fits": [fit.to_dict(lr) for _, fit, lr in results]}
    frame = pd.concat([coefficient_table(fit) for _, fit, _ in results], ignore_index=True)
    return payload, {"fits": frame}


def clamp_k(design, k):
    available = len(design.topic_columns)
    if k > available:
        logger.warning(f"⚠️ {design.candidate}: k={k} exceeds {available} topic(s), using {available}")
        return available
    return k


def _select_one(inputs, candidate, k, options):
    design = design_for(inputs, candidate)
    return design, forward_stepwise(design, clamp_k(design, k), options)


def run_select(inputs: Inputs, candidates, k, options: FitOptions, workers=1):
    results = _map(lambda c: _select_one(inputs, c, k, options), candidates, workers)
    payload = {"selection": {
        trace.candidate: {
            "k": trace.k, "base": trace.base_fit.to_dict(), "steps": trace.to_list(), "final": trace.final_fit.to_dict(),
        }
        for _, trace in results
    }}
    rows = [
        (trace.candidate, i, step.topic, step.fit.coefficient(step.topic), step.loglik, step.aic)
        for _, trace in results for i, step in enumerate(trace.steps, start=1)
    ]
    frame = pd.DataFrame(rows, columns=["candidate", "step", "topic", "beta", "loglik", "aic"])
    final = pd.concat([coefficient_table(trace.final_fit) for _, trace in results], ignore_index=True)
    return payload, {"selection": frame, "selected_model": final}


# ---------------- effects / rank ----------------
def _evaluation_fit(inputs, candidate, options, eval_model, k):
    design = design_for(inputs, candidate)
    if eval_model == "selected":
        fit = forward_stepwise(design, clamp_k(design, k), options).final_fit
    else:
        fit = fit_design(design, options)
    return design, fit


def _report_one(inputs, candidate, options, method, eval_model, k):
    design, fit = _evaluation_fit(inputs, candidate, options, eval_model, k)
    effects = topic_effects(fit, design, method)
    universe = topic_columns_for(candidate, inputs.rules)
    labels = inputs.labels_for(candidate)
    counts, denominator = topic_counts(labels, universe)
    probs = conditional_topic_probs(labels, universe)
    means = design.column_means()
    return TacticReport(
        candidate=candidate,
        probs=probs,
        effects=effects,
        score=eval_score(effects, probs),
        party=inputs.rules.party_of().get(candidate),
        topic_counts=counts,
        topical_tweets=denominator,
        beta=dict(zip(fit.columns, fit.coefficients.tolist())),
        means={c: means[c] for c in fit.columns},
    )


def run_effects(inputs: Inputs, candidates, options: FitOptions, method="discrete", eval_model="full", k=5, workers=1):
    def one(candidate):
        design, fit = _evaluation_fit(inputs, candidate, options, eval_model, k)
        return candidate, topic_effects(fit, design, method)

    results = _map(one, candidates, workers)
    payload = {"effects": {c: {t: e.to_dict() for t, e in effects.items()} for c, effects in results}}
    tables = {f"effects_{c}": effects_frame(effects) for c, effects in results}
    return payload, tables


def run_rank(inputs: Inputs, candidates, options: FitOptions, method="discrete", eval_model="full", k=5, workers=1):
    reports = _map(lambda c: _report_one(inputs, c, options, method, eval_model, k), candidates, workers)
    reports = apply_ranks(reports)
    return {"reports": [r.to_dict() for r in reports]}, {"rank": rank_frame(reports)}
