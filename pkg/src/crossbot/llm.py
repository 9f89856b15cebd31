"""HTTP clients for remote summarization and embeddings.

Both speak a JSON chat/embeddings API.  The credential is read from the
``MGDIL_LLM_API_KEY`` environment variable unless passed explicitly, raw
responses are appended to an audit JSON-lines file, and transport or format
failures are retried with exponential backoff before surfacing an error
that carries the last raw response.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
import requests

from .errors import SummaryClientError, SummaryParseError
from .summary import PostSummary, build_prompt, parse_summary_sentence

API_KEY_ENV = "MGDIL_LLM_API_KEY"

DEFAULT_MAX_RETRIES = 3
DEFAULT_PARALLELISM = 4


def _api_key(explicit: Optional[str]) -> str:
    key = explicit if explicit is not None else os.environ.get(API_KEY_ENV, "")
    return key


class SummaryClient:
    """Chat-completion client that returns parsed post summaries."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff: float = 1.0,
        timeout: float = 60.0,
        audit_path=None,
        max_in_flight: int = DEFAULT_PARALLELISM,
        session=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = _api_key(api_key)
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.audit_path = audit_path
        self.max_in_flight = max_in_flight
        self.session = session or requests.Session()

    def _audit(self, payload: dict) -> None:
        if not self.audit_path:
            return
        with open(self.audit_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")

    def _request(self, prompt: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self.session.post(
            self.endpoint, json=body, headers=headers, timeout=self.timeout
        )
        response.raise_for_status()
        doc = response.json()
        return doc["choices"][0]["message"]["content"]

    def summarize(self, posts: Sequence[str]) -> PostSummary:
        """Summarize one user's history; retries transport and parse failures."""
        prompt = build_prompt(posts)
        last_raw = ""
        last_error: Exception = SummaryClientError("no attempt made")
        for attempt in range(self.max_retries + 1):
            try:
                raw = self._request(prompt)
                last_raw = raw
                summary = parse_summary_sentence(raw)
                self._audit({"attempt": attempt, "ok": True, "response": raw})
                return summary
            except (requests.RequestException, ValueError, KeyError, SummaryParseError) as exc:
                last_error = exc
                if isinstance(exc, requests.RequestException) and exc.response is not None:
                    last_raw = exc.response.text
                self._audit({"attempt": attempt, "ok": False, "error": str(exc), "response": last_raw})
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise SummaryClientError(
            f"summarization failed after {self.max_retries + 1} attempts: {last_error}",
            last_response=last_raw,
        )

    def summarize_many(self, histories: Sequence[Sequence[str]]) -> list:
        """Bounded-parallel summarization; results preserve input order."""
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self.summarize, histories))


class EmbeddingClient:
    """Embeddings-endpoint encoder with the unit-norm output contract."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        max_retries: int = DEFAULT_MAX_RETRIES,
        backoff: float = 1.0,
        timeout: float = 60.0,
        session=None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = _api_key(api_key)
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()

    def encode(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed an empty document")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception = SummaryClientError("no attempt made")
        for attempt in range(self.max_retries + 1):
            try:
                response = self.session.post(
                    self.endpoint,
                    json={"model": self.model, "input": text},
                    headers=headers,
                    timeout=self.timeout,
                )
                response.raise_for_status()
                vec = np.asarray(response.json()["data"][0]["embedding"], dtype=np.float64)
                norm = np.linalg.norm(vec)
                if not np.isfinite(norm) or norm == 0.0:
                    raise ValueError("degenerate embedding returned")
                return vec / norm
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise SummaryClientError(f"embedding failed after retries: {last_error}")
