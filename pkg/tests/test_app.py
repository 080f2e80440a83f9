"""
Tests for the JSON API.
"""
import io

import pytest

from app import create_app
from tests.helpers import FOLLOWERS_PATH, TWEETS_PATH


@pytest.fixture
def client():
    app = create_app()
    app.config["TESTING"] = True
    return app.test_client()


def _uploads(tweets=TWEETS_PATH, followers=FOLLOWERS_PATH):
    data = {}
    if tweets:
        with open(tweets, "rb") as f:
            data["tweets"] = (io.BytesIO(f.read()), "tweets.jsonl")
    if followers:
        with open(followers, "rb") as f:
            data["followers"] = (io.BytesIO(f.read()), "followers.csv")
    return data


def test_health(client):
    for path in ("/health", "/api/health"):
        response = client.get(path)
        assert response.status_code == 200
        assert response.get_json() == {"status": "ok"}


def test_summarize(client):
    response = client.post("/api/summarize", data=_uploads(), content_type="multipart/form-data")
    assert response.status_code == 200
    rows = response.get_json()["summary"]
    assert [r["candidate"] for r in rows] == ["clinton", "sanders", "trump"]


def test_rank_with_candidate_filter(client):
    response = client.post("/api/rank?candidate=sanders&candidate=trump", data=_uploads(),
                           content_type="multipart/form-data")
    assert response.status_code == 200
    reports = response.get_json()["reports"]
    assert sorted(r["candidate"] for r in reports) == ["sanders", "trump"]
    assert sorted(r["rank"] for r in reports) == [1, 2]


def test_select_k(client):
    response = client.post("/api/select?candidate=clinton&k=1", data=_uploads(),
                           content_type="multipart/form-data")
    assert response.status_code == 200
    assert len(response.get_json()["selection"]["clinton"]["steps"]) == 1


def test_missing_upload(client):
    response = client.post("/api/fit", data=_uploads(followers=None), content_type="multipart/form-data")
    assert response.status_code == 400
    assert response.get_json()["type"] == "ConfigError"


def test_bad_query_parameter(client):
    response = client.post("/api/select?k=many", data=_uploads(), content_type="multipart/form-data")
    assert response.status_code == 400


def test_corpus_error_is_bad_request(client):
    data = _uploads()
    data["tweets"] = (io.BytesIO(b'{"id": "1"}\n'), "tweets.jsonl")
    response = client.post("/api/summarize", data=data, content_type="multipart/form-data")
    assert response.status_code == 400
    assert response.get_json()["module"] == "corpus"


def test_model_error_is_unprocessable(client):
    data = _uploads()
    data["tweets"] = (io.BytesIO(
        b'{"id": "1", "candidate": "cruz", "created_at": "2016-01-05T12:00:00Z", '
        b'"text": "RT Cruz", "likes": 4, "is_retweet": true}\n'
    ), "tweets.jsonl")
    response = client.post("/api/fit", data=data, content_type="multipart/form-data")
    assert response.status_code == 422
    assert response.get_json()["type"] == "EmptyMatrixError"
