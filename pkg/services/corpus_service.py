# services/corpus_service.py
import os
import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone

import numpy as np
import pandas as pd

from utils.errors import (
    CorpusParseError,
    CorpusValidationError,
    EmptyGroupError,
    MissingSeriesError,
    SchemaError,
)
from utils.file_utils import write_atomic, write_csv
from utils.log_utils import get_logger

logger = get_logger("corpus")

TWEET_FIELDS = ("id", "candidate", "created_at", "text", "likes", "is_retweet")
FOLLOWER_COLUMNS = ("candidate", "at", "count")


# ---------------- Domain Types ----------------
@dataclass(frozen=True)
class Tweet:
    id: str
    candidate: str
    created_at: datetime
    text: str
    likes: int
    is_retweet: bool

    @property
    def day(self) -> date:
        return self.created_at.date()

    def to_dict(self):
        return {
            "id": self.id,
            "candidate": self.candidate,
            "created_at": format_timestamp(self.created_at),
            "text": self.text,
            "likes": self.likes,
            "is_retweet": self.is_retweet,
        }


@dataclass(frozen=True)
class FollowerSnapshot:
    candidate: str
    at: datetime
    count: int


@dataclass(frozen=True)
class LikesSummary:
    candidate: str
    mean: float
    sd: float
    min: int
    max: int
    n: int

    def to_dict(self):
        return {"candidate": self.candidate, "mean": self.mean, "sd": self.sd,
                "min": self.min, "max": self.max, "n": self.n}


class FollowerSeries:
    """Per-candidate snapshots, sorted by time, held as numpy arrays."""

    def __init__(self, snapshots):
        grouped = {}
        for snap in snapshots:
            grouped.setdefault(snap.candidate, []).append(snap)
        self._times = {}
        self._counts = {}
        for candidate, snaps in grouped.items():
            snaps.sort(key=lambda s: s.at)
            stamps = [s.at.timestamp() for s in snaps]
            if len(set(stamps)) != len(stamps):
                raise CorpusValidationError(
                    f"duplicate follower snapshot timestamps for {candidate}", candidate=candidate
                )
            self._times[candidate] = np.asarray(stamps, dtype=float)
            self._counts[candidate] = np.asarray([s.count for s in snaps], dtype=float)

    @property
    def candidates(self):
        return sorted(self._times)

    def snapshots(self, candidate):
        if candidate not in self._times:
            raise MissingSeriesError(f"no follower snapshots for {candidate}", candidate=candidate)
        return self._times[candidate], self._counts[candidate]

    def __contains__(self, candidate):
        return candidate in self._times


# ---------------- Timestamps ----------------
def parse_timestamp(value) -> datetime:
    """Parse an RFC3339 string into an aware UTC datetime at seconds precision."""
    if not isinstance(value, str) or not value:
        raise ValueError(f"not a timestamp: {value!r}")
    parsed = datetime.fromisoformat(value.strip().replace("Z", "+00:00").replace("z", "+00:00"))
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------- Parsing ----------------
def tweet_from_record(record, line_no=None) -> Tweet:
    if not isinstance(record, dict):
        raise SchemaError(f"line {line_no}: expected a JSON object", line=line_no)
    missing = [f for f in TWEET_FIELDS if f not in record]
    if missing:
        raise SchemaError(f"line {line_no}: missing field(s) {', '.join(missing)}", line=line_no, fields=missing)

    likes = record["likes"]
    if isinstance(likes, bool) or not isinstance(likes, int):
        raise CorpusValidationError(f"line {line_no}: likes must be an integer", line=line_no)
    if likes < 0:
        raise CorpusValidationError(f"line {line_no}: likes must be >= 0, got {likes}", line=line_no)
    if not isinstance(record["is_retweet"], bool):
        raise CorpusValidationError(f"line {line_no}: is_retweet must be a boolean", line=line_no)
    candidate = record["candidate"]
    if not isinstance(candidate, str) or not candidate.strip():
        raise CorpusValidationError(f"line {line_no}: candidate must be non-empty", line=line_no)
    if not isinstance(record["text"], str):
        raise CorpusValidationError(f"line {line_no}: text must be a string", line=line_no)
    try:
        created_at = parse_timestamp(record["created_at"])
    except ValueError as e:
        raise CorpusValidationError(f"line {line_no}: bad created_at ({e})", line=line_no) from e

    return Tweet(
        id=str(record["id"]),
        candidate=candidate,
        created_at=created_at,
        text=record["text"],
        likes=likes,
        is_retweet=record["is_retweet"],
    )


def parse_tweets(path):
    """Read a JSON-lines tweet file. Retweets are kept and flagged; tweet ids must be unique."""
    if not os.path.exists(path):
        raise CorpusParseError(f"tweets file not found: {path}", path=path)
    tweets = []
    first_seen = {}
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise CorpusParseError(f"line {line_no}: not valid UTF-8 ({e.reason})", path=path, line=line_no) from e
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusParseError(f"line {line_no}: malformed JSON ({e.msg})", path=path, line=line_no) from e
            tweet = tweet_from_record(record, line_no)
            if tweet.id in first_seen:
                raise CorpusValidationError(
                    f"line {line_no}: duplicate tweet id '{tweet.id}' (first on line {first_seen[tweet.id]})",
                    path=path, line=line_no, tweet_id=tweet.id,
                )
            first_seen[tweet.id] = line_no
            tweets.append(tweet)
    logger.info(f"📂 Parsed {len(tweets)} tweet(s) from {path}")
    return tweets


def serialize_tweets(tweets) -> str:
    return "".join(json.dumps(t.to_dict(), ensure_ascii=False) + "\n" for t in tweets)


def write_tweets(path, tweets):
    return write_atomic(path, serialize_tweets(tweets))


def parse_followers(path) -> FollowerSeries:
    """Read the followers CSV (candidate,at,count)."""
    if not os.path.exists(path):
        raise CorpusParseError(f"followers file not found: {path}", path=path)
    try:
        frame = pd.read_csv(path, dtype={"candidate": str, "at": str}, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise CorpusParseError(f"cannot parse followers file: {e}", path=path) from e
    missing = [c for c in FOLLOWER_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaError(f"followers file missing column(s) {', '.join(missing)}", path=path, fields=missing)

    snapshots = []
    # header is line 1
    rows = zip(frame["candidate"], frame["at"], frame["count"])
    for offset, (candidate, raw_at, raw_count) in enumerate(rows, start=2):
        try:
            at = parse_timestamp(raw_at)
            count = int(raw_count)
        except (TypeError, ValueError) as e:
            raise CorpusValidationError(f"line {offset}: {e}", path=path, line=offset) from e
        if float(raw_count) != count:
            raise CorpusValidationError(f"line {offset}: count must be an integer", path=path, line=offset)
        if count < 0:
            raise CorpusValidationError(f"line {offset}: count must be >= 0", path=path, line=offset)
        if not candidate:
            raise CorpusValidationError(f"line {offset}: candidate must be non-empty", path=path, line=offset)
        snapshots.append(FollowerSnapshot(candidate=candidate, at=at, count=count))
    return FollowerSeries(snapshots)


def write_followers(path, snapshots):
    frame = pd.DataFrame(
        [(s.candidate, format_timestamp(s.at), s.count) for s in snapshots],
        columns=list(FOLLOWER_COLUMNS),
    )
    return write_csv(path, frame)


# ---------------- Statistics ----------------
def original_tweets(tweets, candidate=None):
    """Non-retweets, optionally restricted to one candidate."""
    return [t for t in tweets if not t.is_retweet and (candidate is None or t.candidate == candidate)]


def candidates_in(tweets):
    return sorted({t.candidate for t in tweets})


def summarize_likes(tweets, candidate) -> LikesSummary:
    """Per-candidate like statistics over non-retweets. sd uses n-1; a single tweet has sd 0."""
    likes = np.array([t.likes for t in original_tweets(tweets, candidate)], dtype=float)
    if likes.size == 0:
        raise EmptyGroupError(f"no non-retweet tweets for {candidate}", candidate=candidate)
    if likes.size == 1:
        logger.warning(f"⚠️ {candidate}: single tweet, sd reported as 0")
        sd = 0.0
    else:
        sd = float(np.std(likes, ddof=1))
    return LikesSummary(
        candidate=candidate,
        mean=float(np.mean(likes)),
        sd=sd,
        min=int(likes.min()),
        max=int(likes.max()),
        n=int(likes.size),
    )


def _noon(day: date) -> float:
    return datetime.combine(day, time(12, 0), tzinfo=timezone.utc).timestamp()


def follower_millions_on_day(series: FollowerSeries, candidate, day: date) -> float:
    """Mean follower count (millions) on a UTC day; interpolated at noon when the day has no snapshot."""
    times, counts = series.snapshots(candidate)
    start = datetime.combine(day, time(0, 0), tzinfo=timezone.utc).timestamp()
    end = start + 86400.0
    on_day = (times >= start) & (times < end)
    if on_day.any():
        return float(counts[on_day].mean()) / 1e6
    # np.interp clamps to the end values outside the observed range
    return float(np.interp(_noon(day), times, counts)) / 1e6


# ---------------- Plot data ----------------
def log_likes_frame(tweets, party_of=None):
    """ln(likes) per non-retweet; zero-like tweets are dropped and counted."""
    party_of = party_of or {}
    rows = []
    dropped = 0
    for t in original_tweets(tweets):
        if t.likes == 0:
            dropped += 1
            continue
        rows.append((t.candidate, party_of.get(t.candidate, ""), float(np.log(t.likes))))
    frame = pd.DataFrame(rows, columns=["candidate", "party", "log_likes"])
    return frame, dropped


def density_bins(log_likes: pd.DataFrame):
    """Freedman-Diaconis histogram on the log scale, one per candidate."""
    rows = []
    for candidate in sorted(log_likes["candidate"].unique()):
        values = log_likes.loc[log_likes["candidate"] == candidate, "log_likes"].to_numpy()
        edges = np.histogram_bin_edges(values, bins="fd")
        counts, edges = np.histogram(values, bins=edges)
        for left, right, count in zip(edges[:-1], edges[1:], counts):
            rows.append((candidate, float(left), float(right), int(count)))
    return pd.DataFrame(rows, columns=["candidate", "bin_left", "bin_right", "count"])


def daily_followers_frame(series: FollowerSeries, candidates=None):
    """One row per UTC day between a candidate's first and last snapshot."""
    rows = []
    for candidate in candidates or series.candidates:
        if candidate not in series:
            logger.warning(f"⚠️ No follower snapshots for {candidate}")
            continue
        times, _ = series.snapshots(candidate)
        first = datetime.fromtimestamp(times[0], tz=timezone.utc).date()
        last = datetime.fromtimestamp(times[-1], tz=timezone.utc).date()
        day = first
        while day <= last:
            rows.append((candidate, day.isoformat(), follower_millions_on_day(series, candidate, day)))
            day += timedelta(days=1)
    return pd.DataFrame(rows, columns=["candidate", "date", "followers"])


def emit_plot_data(tweets, series, out_dir, party_of=None, candidates=None):
    """Write log-likes, density bins and daily follower series as CSV."""
    log_likes, dropped = log_likes_frame(tweets, party_of)
    if dropped:
        logger.warning(f"⚠️ Dropped {dropped} zero-like tweet(s) from log-likes data")
    paths = {
        "log_likes": write_csv(os.path.join(out_dir, "log_likes.csv"), log_likes[["candidate", "log_likes", "party"]]),
        "likes_bins": write_csv(os.path.join(out_dir, "likes_bins.csv"), density_bins(log_likes)),
        "followers_daily": write_csv(os.path.join(out_dir, "followers_daily.csv"), daily_followers_frame(series, candidates)),
    }
    return {"paths": paths, "dropped_zero_likes": dropped}
