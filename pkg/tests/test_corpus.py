"""
Tests for corpus ingestion, likes statistics, follower series and plot data.
"""
import json
import math
import os
import random

import numpy as np
import pandas as pd
import pytest

from services.corpus_service import (
    FollowerSeries,
    FollowerSnapshot,
    Tweet,
    emit_plot_data,
    follower_millions_on_day,
    log_likes_frame,
    parse_followers,
    parse_tweets,
    serialize_tweets,
    summarize_likes,
    write_tweets,
)
from utils.errors import (
    ArtifactWriteError,
    CorpusParseError,
    CorpusValidationError,
    EmptyGroupError,
    MissingSeriesError,
    SchemaError,
)
from tests.helpers import utc


def _tweet(id, likes, candidate="a", is_retweet=False, text="hello", when=None):
    return Tweet(id=id, candidate=candidate, created_at=when or utc(2016, 1, 4, 12), text=text,
                 likes=likes, is_retweet=is_retweet)


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return str(path)


GOOD = {"id": "1", "candidate": "a", "created_at": "2016-01-04T10:00:00Z", "text": "x", "likes": 3, "is_retweet": False}


class TestParseTweets:
    """Tests for the JSON-lines reader."""

    def test_fixture_corpus(self, tweets):
        assert len(tweets) == 66
        assert sum(t.is_retweet for t in tweets) == 6
        assert {t.candidate for t in tweets} == {"clinton", "trump", "sanders"}

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(json.dumps(GOOD) + "\n\n   \n", encoding="utf-8")
        assert len(parse_tweets(str(path))) == 1

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(json.dumps(GOOD) + "\n{not json\n", encoding="utf-8")
        with pytest.raises(CorpusParseError) as err:
            parse_tweets(str(path))
        assert err.value.context["line"] == 2

    def test_missing_field(self, tmp_path):
        record = {k: v for k, v in GOOD.items() if k != "likes"}
        with pytest.raises(SchemaError):
            parse_tweets(_write_lines(tmp_path / "t.jsonl", [record]))

    @pytest.mark.parametrize("likes", [-1, 2.5, "7", True])
    def test_bad_likes(self, tmp_path, likes):
        with pytest.raises(CorpusValidationError):
            parse_tweets(_write_lines(tmp_path / "t.jsonl", [dict(GOOD, likes=likes)]))

    def test_bad_timestamp(self, tmp_path):
        with pytest.raises(CorpusValidationError):
            parse_tweets(_write_lines(tmp_path / "t.jsonl", [dict(GOOD, created_at="yesterday")]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusParseError):
            parse_tweets(str(tmp_path / "nope.jsonl"))

    def test_invalid_utf8_reports_line(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_bytes(json.dumps(GOOD).encode("utf-8") + b"\n" + b'{"text": "\xff\xfe"}\n')
        with pytest.raises(CorpusParseError) as err:
            parse_tweets(str(path))
        assert err.value.context["line"] == 2

    def test_non_ascii_text(self, tmp_path):
        (tweet,) = parse_tweets(_write_lines(tmp_path / "t.jsonl", [dict(GOOD, text="Señora Straße 🇺🇸")]))
        assert tweet.text == "Señora Straße 🇺🇸"

    def test_duplicate_ids(self, tmp_path):
        records = [GOOD, dict(GOOD, id="2"), dict(GOOD, text="other text")]
        with pytest.raises(CorpusValidationError) as err:
            parse_tweets(_write_lines(tmp_path / "t.jsonl", records))
        assert err.value.context["line"] == 3
        assert err.value.context["tweet_id"] == "1"

    def test_round_trip(self, tweets, tmp_path):
        path = write_tweets(str(tmp_path / "copy.jsonl"), tweets)
        again = parse_tweets(path)
        assert again == tweets
        assert serialize_tweets(again) == serialize_tweets(tweets)

    def test_offset_timestamps_normalised_to_utc(self, tmp_path):
        record = dict(GOOD, created_at="2016-01-04T23:30:00-05:00")
        (tweet,) = parse_tweets(_write_lines(tmp_path / "t.jsonl", [record]))
        assert tweet.created_at == utc(2016, 1, 5, 4, 30)
        assert tweet.day.isoformat() == "2016-01-05"


class TestSummarizeLikes:
    """Tests for per-candidate likes statistics."""

    def test_three_tweets(self):
        tweets = [_tweet("1", 3), _tweet("2", 5), _tweet("3", 10)]
        summary = summarize_likes(tweets, "a")
        assert summary.n == 3
        assert summary.mean == pytest.approx(6.0)
        assert summary.sd == pytest.approx(np.std([3, 5, 10], ddof=1))
        assert (summary.min, summary.max) == (3, 10)

    def test_single_tweet_sd_zero(self):
        assert summarize_likes([_tweet("1", 42)], "a").sd == 0.0

    def test_retweets_do_not_count(self, tweets):
        before = summarize_likes(tweets, "clinton")
        extra = tweets + [_tweet("rt", 10 ** 9, candidate="clinton", is_retweet=True)]
        assert summarize_likes(extra, "clinton") == before

    def test_permutation_invariant(self, tweets):
        shuffled = list(tweets)
        random.Random(7).shuffle(shuffled)
        a = summarize_likes(tweets, "trump")
        b = summarize_likes(shuffled, "trump")
        assert a.mean == pytest.approx(b.mean, rel=1e-12)
        assert a.sd == pytest.approx(b.sd, rel=1e-12)
        assert (a.min, a.max, a.n) == (b.min, b.max, b.n)

    def test_fixture_clinton(self, tweets):
        summary = summarize_likes(tweets, "clinton")
        assert summary.n == 20
        assert summary.min == 0
        assert summary.max == 4870

    def test_only_retweets(self):
        with pytest.raises(EmptyGroupError):
            summarize_likes([_tweet("1", 5, is_retweet=True)], "a")


class TestFollowerSeries:
    """Tests for daily follower levels."""

    def test_day_mean(self):
        series = FollowerSeries([
            FollowerSnapshot("a", utc(2016, 1, 4, 9), 8_000_000),
            FollowerSnapshot("a", utc(2016, 1, 4, 18), 8_200_000),
        ])
        assert follower_millions_on_day(series, "a", utc(2016, 1, 4).date()) == pytest.approx(8.1)

    def test_single_snapshot_any_day(self):
        series = FollowerSeries([FollowerSnapshot("a", utc(2016, 2, 1, 7), 5_000_000)])
        for day in (utc(2015, 6, 1).date(), utc(2016, 2, 1).date(), utc(2017, 1, 1).date()):
            assert follower_millions_on_day(series, "a", day) == pytest.approx(5.0)

    def test_midpoint_interpolation(self):
        series = FollowerSeries([
            FollowerSnapshot("a", utc(2016, 1, 3, 12), 1_000_000),
            FollowerSnapshot("a", utc(2016, 1, 5, 12), 3_000_000),
        ])
        assert follower_millions_on_day(series, "a", utc(2016, 1, 4).date()) == pytest.approx(2.0)

    def test_monotone_between_snapshots(self):
        series = FollowerSeries([
            FollowerSnapshot("a", utc(2016, 1, 1, 12), 1_000_000),
            FollowerSnapshot("a", utc(2016, 1, 11, 12), 2_000_000),
        ])
        levels = [follower_millions_on_day(series, "a", utc(2016, 1, d).date()) for d in range(1, 12)]
        assert all(b >= a for a, b in zip(levels, levels[1:]))

    def test_missing_candidate(self, series):
        with pytest.raises(MissingSeriesError):
            follower_millions_on_day(series, "kasich", utc(2016, 1, 4).date())

    def test_duplicate_timestamps_rejected(self):
        with pytest.raises(CorpusValidationError):
            FollowerSeries([
                FollowerSnapshot("a", utc(2016, 1, 4, 12), 1),
                FollowerSnapshot("a", utc(2016, 1, 4, 12), 2),
            ])

    def test_fixture_file(self, series):
        assert series.candidates == ["clinton", "sanders", "trump"]
        # 2016-01-08 has no snapshot, 2016-01-11 is past the last one
        assert follower_millions_on_day(series, "clinton", utc(2016, 1, 8).date()) == pytest.approx(5.16)
        assert follower_millions_on_day(series, "clinton", utc(2016, 1, 11).date()) == pytest.approx(5.24)

    def test_bad_count(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("candidate,at,count\na,2016-01-04T12:00:00Z,-3\n", encoding="utf-8")
        with pytest.raises(CorpusValidationError):
            parse_followers(str(path))

    def test_missing_column(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("candidate,count\na,3\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            parse_followers(str(path))


class TestPlotData:
    """Tests for log-likes and follower growth data."""

    def test_log_of_one_is_zero(self):
        frame, dropped = log_likes_frame([_tweet("1", 1)])
        assert frame["log_likes"].tolist() == [0.0]
        assert dropped == 0

    def test_log_values(self):
        frame, _ = log_likes_frame([_tweet("1", 3), _tweet("2", 7)])
        assert frame["log_likes"].tolist() == pytest.approx([math.log(3), math.log(7)])

    def test_zero_likes_dropped_and_counted(self, tweets, series, tmp_path):
        result = emit_plot_data(tweets, series, str(tmp_path))
        assert result["dropped_zero_likes"] == 1
        frame = pd.read_csv(result["paths"]["log_likes"])
        assert list(frame.columns[:2]) == ["candidate", "log_likes"]
        assert len(frame) == 59

    def test_bins_match_independent_histogram(self, tweets, series, tmp_path):
        result = emit_plot_data(tweets, series, str(tmp_path))
        bins = pd.read_csv(result["paths"]["likes_bins"])
        for candidate in ("clinton", "sanders", "trump"):
            values = np.log([t.likes for t in tweets if t.candidate == candidate and not t.is_retweet and t.likes > 0])
            q75, q25 = np.percentile(values, [75, 25])
            width = 2.0 * (q75 - q25) / len(values) ** (1.0 / 3.0)
            n_bins = int(np.ceil((values.max() - values.min()) / width))
            expected, _ = np.histogram(values, bins=n_bins, range=(values.min(), values.max()))
            got = bins.loc[bins["candidate"] == candidate, "count"].to_numpy()
            assert got.tolist() == expected.tolist()
            assert got.sum() == len(values)

    def test_daily_followers(self, tweets, series, tmp_path):
        result = emit_plot_data(tweets, series, str(tmp_path))
        daily = pd.read_csv(result["paths"]["followers_daily"])
        assert list(daily.columns) == ["candidate", "date", "followers"]
        clinton = daily[daily["candidate"] == "clinton"]
        # 2016-01-04 .. 2016-01-10 inclusive
        assert len(clinton) == 7
        assert clinton.loc[clinton["date"] == "2016-01-08", "followers"].item() == pytest.approx(5.16)

    def test_unwritable_directory(self, tweets, series, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ArtifactWriteError):
            emit_plot_data(tweets, series, os.path.join(str(blocker), "out"))
