"""Chat completions client for dataset generation.

The credential never appears in code or job files: HttpChatClient reads it
from the EMBED_EXPORT_API_KEY environment variable, and the endpoint can be
pointed anywhere speaking the common chat-completions shape through
EMBED_EXPORT_API_BASE or the api_base argument.

Any object with the same generate method substitutes for this client, which
is how the test suite runs without a network.
"""

from __future__ import annotations

import os

import requests

from .errors import ApiError, MissingCredential

API_KEY_ENV = "EMBED_EXPORT_API_KEY"
API_BASE_ENV = "EMBED_EXPORT_API_BASE"
DEFAULT_API_BASE = "https://api.openai.com/v1"


class HttpChatClient:
    def __init__(self, model: str, *, api_base: str | None = None, timeout: float = 60.0):
        key = os.environ.get(API_KEY_ENV, "")
        if not key:
            raise MissingCredential(f"set {API_KEY_ENV} to use the chat API")
        self._key = key
        self.model = model
        self.timeout = timeout
        base = api_base or os.environ.get(API_BASE_ENV) or DEFAULT_API_BASE
        self.api_base = base.rstrip("/")

    def generate(
        self, prompt: str, passage: str, *, n: int, temperature: float, max_tokens: int
    ) -> list[str]:
        """Request n completions for one passage under the given instruction.

        The instruction rides as the system message and the passage as the
        user message, so the instruction text reaches the API byte for byte.
        """
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": passage},
            ],
            "n": n,
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        try:
            resp = requests.post(
                f"{self.api_base}/chat/completions",
                headers={"Authorization": f"Bearer {self._key}"},
                json=body,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ApiError(f"request failed: {exc}", retryable=True) from exc
        if resp.status_code >= 400:
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise ApiError(
                f"API returned {resp.status_code}: {resp.text[:200]}",
                status=resp.status_code,
                retryable=retryable,
            )
        try:
            choices = resp.json()["choices"]
            texts = [c["message"]["content"] for c in choices]
        except (ValueError, KeyError, TypeError) as exc:
            raise ApiError(f"malformed API response: {exc}") from exc
        if len(texts) != n or not all(isinstance(t, str) for t in texts):
            raise ApiError(f"expected {n} text choices, got {len(texts)}")
        return texts
