"""HTTP client behavior against a patched transport."""

from __future__ import annotations

import json

import pytest
import requests

from embed_export import API_BASE_ENV, API_KEY_ENV, ApiError, HttpChatClient, MissingCredential
from embed_export import client as client_mod


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text or (json.dumps(payload) if payload is not None else "")

    def json(self):
        if self._payload is None:
            raise ValueError("no json body")
        return self._payload


def _choices(*texts):
    return {"choices": [{"message": {"content": t}} for t in texts]}


@pytest.fixture()
def capture(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sk-test-123")
    monkeypatch.delenv(API_BASE_ENV, raising=False)
    calls = []

    def fake_post(url, headers=None, json=None, timeout=None):
        calls.append({"url": url, "headers": headers, "body": json, "timeout": timeout})
        return fake_post.response

    fake_post.response = FakeResponse(payload=_choices("a", "b"))
    monkeypatch.setattr(client_mod.requests, "post", fake_post)
    return calls, fake_post


def test_missing_credential(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    with pytest.raises(MissingCredential, match=API_KEY_ENV):
        HttpChatClient("gen-model")
    monkeypatch.setenv(API_KEY_ENV, "")
    with pytest.raises(MissingCredential):
        HttpChatClient("gen-model")


def test_request_shape(capture):
    calls, _ = capture
    client = HttpChatClient("gen-model", timeout=12.5)
    texts = client.generate("Do the thing.", "the passage", n=2, temperature=1.0, max_tokens=400)
    assert texts == ["a", "b"]
    assert len(calls) == 1
    call = calls[0]
    assert call["url"] == "https://api.openai.com/v1/chat/completions"
    assert call["headers"]["Authorization"] == "Bearer sk-test-123"
    assert call["timeout"] == 12.5
    body = call["body"]
    assert body["model"] == "gen-model"
    assert body["n"] == 2
    assert body["temperature"] == 1.0
    assert body["max_tokens"] == 400
    assert body["messages"] == [
        {"role": "system", "content": "Do the thing."},
        {"role": "user", "content": "the passage"},
    ]


def test_api_base_overrides(capture, monkeypatch):
    calls, _ = capture
    monkeypatch.setenv(API_BASE_ENV, "https://proxy.example/v2/")
    HttpChatClient("m").generate("p", "x", n=2, temperature=0.0, max_tokens=1)
    assert calls[-1]["url"] == "https://proxy.example/v2/chat/completions"
    HttpChatClient("m", api_base="https://direct.example/api").generate(
        "p", "x", n=2, temperature=0.0, max_tokens=1
    )
    assert calls[-1]["url"] == "https://direct.example/api/chat/completions"


@pytest.mark.parametrize(
    "status,retryable",
    [(429, True), (500, True), (503, True), (400, False), (401, False), (404, False)],
)
def test_http_errors_map_to_retryability(capture, status, retryable):
    _, fake_post = capture
    fake_post.response = FakeResponse(status_code=status, text="nope")
    client = HttpChatClient("m")
    with pytest.raises(ApiError) as err:
        client.generate("p", "x", n=1, temperature=0.0, max_tokens=1)
    assert err.value.status == status
    assert err.value.retryable is retryable


def test_connection_errors_are_retryable(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "k")

    def boom(*args, **kwargs):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(client_mod.requests, "post", boom)
    with pytest.raises(ApiError) as err:
        HttpChatClient("m").generate("p", "x", n=1, temperature=0.0, max_tokens=1)
    assert err.value.retryable is True


def test_wrong_choice_count_is_fatal(capture):
    _, fake_post = capture
    fake_post.response = FakeResponse(payload=_choices("only one"))
    with pytest.raises(ApiError, match="expected 3"):
        HttpChatClient("m").generate("p", "x", n=3, temperature=0.0, max_tokens=1)


def test_malformed_body_is_fatal(capture):
    _, fake_post = capture
    fake_post.response = FakeResponse(payload={"not_choices": []})
    with pytest.raises(ApiError, match="malformed"):
        HttpChatClient("m").generate("p", "x", n=1, temperature=0.0, max_tokens=1)
