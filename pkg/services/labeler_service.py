# services/labeler_service.py
import os
import json
from dataclasses import dataclass, field
from typing import Optional

from utils.errors import RuleConfigError
from utils.log_utils import get_logger

logger = get_logger("labeler")

FIGURE = "figure"
ISSUE = "issue"


# ---------------- Domain Types ----------------
@dataclass(frozen=True)
class TopicPattern:
    text: str
    case_sensitive: bool


@dataclass(frozen=True)
class TopicRule:
    topic_id: str
    kind: str
    patterns: tuple
    party: Optional[str] = None


@dataclass(frozen=True)
class TopicLabels:
    tweet_id: str
    candidate: str
    topics: frozenset = field(default_factory=frozenset)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    word_boundary: bool = False

    @property
    def figures(self):
        return tuple(r for r in self.rules if r.kind == FIGURE)

    @property
    def issues(self):
        return tuple(r for r in self.rules if r.kind == ISSUE)

    @property
    def topic_ids(self):
        return tuple(r.topic_id for r in self.rules)

    def get(self, topic_id):
        for rule in self.rules:
            if rule.topic_id == topic_id:
                return rule
        return None

    def kind_of(self, topic_id):
        rule = self.get(topic_id)
        return rule.kind if rule else None

    def party_of(self):
        return {r.topic_id: r.party for r in self.figures if r.party}


# ---------------- Loading ----------------
def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise RuleConfigError(f"duplicate topic id '{key}'", topic_id=key)
        seen[key] = value
    return seen


def _patterns(topic_id, spec, kind):
    raw = spec.get("patterns")
    if not isinstance(raw, list) or not raw:
        raise RuleConfigError(f"topic '{topic_id}' needs at least one pattern", topic_id=topic_id)
    default_sensitive = bool(spec.get("case_sensitive", True)) if kind == FIGURE else False
    patterns = []
    for item in raw:
        if isinstance(item, dict):
            text = item.get("text")
            sensitive = bool(item.get("case_sensitive", default_sensitive))
        else:
            text, sensitive = item, default_sensitive
        if not isinstance(text, str) or not text:
            raise RuleConfigError(f"topic '{topic_id}' has an empty pattern", topic_id=topic_id)
        if kind == ISSUE:
            # issue matching always runs on case-folded text
            text, sensitive = text.casefold(), False
        patterns.append(TopicPattern(text=text, case_sensitive=sensitive))
    return tuple(patterns)


def rules_from_dict(data) -> RuleSet:
    if not isinstance(data, dict):
        raise RuleConfigError("rule file must be a JSON object")
    rules = []
    seen = set()
    for section, kind in (("figures", FIGURE), ("issues", ISSUE)):
        block = data.get(section, {})
        if not isinstance(block, dict):
            raise RuleConfigError(f"'{section}' must be an object", section=section)
        for topic_id, spec in block.items():
            if topic_id in seen:
                raise RuleConfigError(f"duplicate topic id '{topic_id}'", topic_id=topic_id)
            if not isinstance(spec, dict):
                raise RuleConfigError(f"topic '{topic_id}' must be an object", topic_id=topic_id)
            seen.add(topic_id)
            party = spec.get("party") if kind == FIGURE else None
            rules.append(TopicRule(topic_id=topic_id, kind=kind, patterns=_patterns(topic_id, spec, kind), party=party))
    if not rules:
        raise RuleConfigError("rule file declares no topics")
    return RuleSet(rules=tuple(rules), word_boundary=bool(data.get("word_boundary", False)))


def load_rules(path) -> RuleSet:
    """Load and validate a topic rule file."""
    if not os.path.exists(path):
        raise RuleConfigError(f"rule file not found: {path}", path=path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as e:
            raise RuleConfigError(f"rule file is not valid JSON: {e.msg}", path=path) from e
        except UnicodeDecodeError as e:
            raise RuleConfigError(f"rule file is not valid UTF-8: {e.reason}", path=path) from e
    rules = rules_from_dict(data)
    logger.info(f"✅ Loaded {len(rules.figures)} figure and {len(rules.issues)} issue rule(s)")
    return rules


# ---------------- Matching ----------------
def _contains(text, needle, word_boundary):
    if not word_boundary:
        return needle in text
    start = text.find(needle)
    while start != -1:
        end = start + len(needle)
        before_ok = start == 0 or not text[start - 1].isalnum()
        after_ok = end == len(text) or not text[end].isalnum()
        if before_ok and after_ok:
            return True
        start = text.find(needle, start + 1)
    return False


def rule_matches(rule: TopicRule, text: str, word_boundary=False, folded=None) -> bool:
    folded = text.casefold() if folded is None else folded
    for pattern in rule.patterns:
        if pattern.case_sensitive:
            hit = _contains(text, pattern.text, word_boundary)
        else:
            hit = _contains(folded, pattern.text.casefold(), word_boundary)
        if hit:
            return True
    return False


def label_tweet(text, rules: RuleSet) -> frozenset:
    """Topic ids whose rule matches the text."""
    if not text:
        return frozenset()
    folded = text.casefold()
    return frozenset(
        rule.topic_id for rule in rules.rules
        if rule_matches(rule, text, rules.word_boundary, folded)
    )


def label_corpus(tweets, rules: RuleSet):
    """Labels for every non-retweet, in input order."""
    return [
        TopicLabels(tweet_id=t.id, candidate=t.candidate, topics=label_tweet(t.text, rules))
        for t in tweets if not t.is_retweet
    ]


def topic_frequencies(labels, candidate, rules: RuleSet):
    """Tweets per topic for one candidate. Every declared topic appears, zeros included."""
    counts = {topic_id: 0 for topic_id in rules.topic_ids}
    for item in labels:
        if item.candidate != candidate:
            continue
        for topic_id in item.topics:
            if topic_id in counts:
                counts[topic_id] += 1
    return counts
