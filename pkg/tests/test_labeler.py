"""
Tests for keyword topic labeling.
"""
import json

import pytest

from services.labeler_service import (
    TopicLabels,
    label_corpus,
    label_tweet,
    load_rules,
    rules_from_dict,
    topic_frequencies,
)
from utils.errors import RuleConfigError


def _rules_file(tmp_path, text):
    path = tmp_path / "rules.json"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadRules:
    """Tests for rule file loading and validation."""

    def test_default_rule_file(self, rules):
        assert len(rules.figures) == 12
        assert len(rules.issues) == 10
        assert rules.word_boundary is False
        assert {"obama", "clinton", "trump", "rubio", "kasich"} <= set(rules.topic_ids)
        assert {"isis", "abortion", "wall_street", "gun_control"} <= {r.topic_id for r in rules.issues}

    def test_parties(self, rules):
        parties = rules.party_of()
        assert parties["sanders"] == "D"
        assert parties["cruz"] == "R"
        assert len(parties) == 12

    def test_duplicate_topic_id(self, tmp_path):
        text = '{"figures": {"obama": {"patterns": ["Obama"]}, "obama": {"patterns": ["POTUS"]}}}'
        with pytest.raises(RuleConfigError):
            load_rules(_rules_file(tmp_path, text))

    def test_duplicate_across_sections(self):
        data = {"figures": {"iran": {"patterns": ["Iran"]}}, "issues": {"iran": {"patterns": ["iran"]}}}
        with pytest.raises(RuleConfigError):
            rules_from_dict(data)

    def test_empty_pattern_list(self, tmp_path):
        text = json.dumps({"issues": {"economy": {"patterns": []}}})
        with pytest.raises(RuleConfigError):
            load_rules(_rules_file(tmp_path, text))

    def test_empty_pattern_string(self):
        with pytest.raises(RuleConfigError):
            rules_from_dict({"issues": {"economy": {"patterns": [""]}}})

    def test_not_json(self, tmp_path):
        with pytest.raises(RuleConfigError):
            load_rules(_rules_file(tmp_path, "{figures"))


class TestLabelTweet:
    """The matching rules, including the three stated in the campaign study."""

    def test_obama(self, rules):
        assert label_tweet("Thank you Obama", rules) == {"obama"}

    def test_planned_parenthood_lowercased(self, rules):
        assert label_tweet("Defund Planned Parenthood now", rules) == {"abortion"}

    def test_marcorubio_case_sensitive(self, rules):
        assert label_tweet(".@marcorubio is wrong", rules) == {"rubio"}
        assert label_tweet("MARCORUBIO", rules) == frozenset()

    def test_empty_text(self, rules):
        assert label_tweet("", rules) == frozenset()

    def test_multi_label(self, rules):
        assert label_tweet("Trump on the border and ISIS", rules) == {"trump", "immigration", "isis"}

    def test_plain_substring(self, rules):
        # matching is substring containment, so "isis" fires inside "crisis"
        assert "isis" in label_tweet("a crisis", rules)

    def test_word_boundary_flag(self):
        data = {"word_boundary": True, "issues": {"isis": {"patterns": ["isis"]}}}
        rules = rules_from_dict(data)
        assert label_tweet("a crisis", rules) == frozenset()
        assert label_tweet("stop ISIS.", rules) == {"isis"}

    def test_per_pattern_case_sensitivity(self):
        data = {"figures": {"rubio": {"patterns": [
            "marcorubio", {"text": "rubio", "case_sensitive": False}]}}}
        rules = rules_from_dict(data)
        assert label_tweet("RUBIO rally", rules) == {"rubio"}
        assert label_tweet("MARCO", rules) == frozenset()

    def test_unicode_casefold(self):
        rules = rules_from_dict({"issues": {"street": {"patterns": ["straße"]}}})
        assert label_tweet("STRASSE", rules) == {"street"}


class TestLabelProperties:
    """Invariants of the labeler."""

    TEXTS = [
        "Trump wants a wall on the border",
        "Hillary Clinton on jobs and the economy https://t.co/x",
        "Bernie: tuition-free college for every student",
        "Stop the heroin epidemic",
        "",
        "Thank you Iowa!",
    ]

    def test_idempotent(self, rules):
        for text in self.TEXTS:
            assert label_tweet(text, rules) == label_tweet(text, rules)

    def test_monotone_under_appending_a_pattern(self, rules):
        for text in self.TEXTS:
            for rule in rules.rules:
                grown = label_tweet(text + " " + rule.patterns[0].text, rules)
                assert label_tweet(text, rules) <= grown
                assert rule.topic_id in grown

    def test_issue_topics_ignore_case(self, rules):
        issues = {r.topic_id for r in rules.issues}
        for text in self.TEXTS:
            assert label_tweet(text.upper(), rules) & issues == label_tweet(text, rules) & issues

    def test_substring_containment(self, rules):
        text = "Trump wants a wall on the border"
        for start in range(len(text)):
            for end in range(start, len(text) + 1, 5):
                assert label_tweet(text[start:end], rules) <= label_tweet(text, rules)


class TestTopicFrequencies:
    """Tests for per-candidate topic counts."""

    def test_counts_once_per_topic(self, rules):
        labels = [
            TopicLabels("1", "a", frozenset({"obama"})),
            TopicLabels("2", "a", frozenset({"obama", "trump"})),
            TopicLabels("3", "a", frozenset()),
        ]
        counts = topic_frequencies(labels, "a", rules)
        assert counts["obama"] == 2
        assert counts["trump"] == 1
        assert sum(counts.values()) == 3

    def test_empty_corpus(self, rules):
        counts = topic_frequencies([], "a", rules)
        assert set(counts) == set(rules.topic_ids)
        assert all(v == 0 for v in counts.values())

    def test_fixture_tally(self, labels, rules):
        clinton = topic_frequencies(labels, "clinton", rules)
        assert (clinton["trump"], clinton["obama"], clinton["women"], clinton["economy"]) == (5, 4, 5, 5)
        assert clinton["clinton"] == 5
        assert clinton["kasich"] == 0

        trump = topic_frequencies(labels, "trump", rules)
        assert (trump["clinton"], trump["immigration"], trump["isis"], trump["economy"]) == (4, 4, 4, 4)

        sanders = topic_frequencies(labels, "sanders", rules)
        assert (sanders["wall_street"], sanders["education"], sanders["clinton"]) == (6, 6, 5)

    def test_retweets_not_labeled(self, tweets, rules):
        labels = label_corpus(tweets, rules)
        assert len(labels) == 60
        assert not any(item.tweet_id in {"c21", "c22", "t21", "t22", "s21", "s22"} for item in labels)
