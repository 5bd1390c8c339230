"""Single-work lookups against the OpenAlex works endpoint.

Responses are flattened into the same row layout the file reader consumes,
so a fetched row can go straight through ``parse_works_stream``.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass

import httpx

from .ingest import IngestError, normalize_doi
from .model import CitemetricError

DEFAULT_BASE = "https://api.openalex.org"


class FetchError(CitemetricError):
    pass


class NotFoundError(FetchError):
    pass


class TransportError(FetchError):
    pass


class MappingError(IngestError):
    pass


@dataclass
class ApiConfig:
    base_url: str = DEFAULT_BASE
    mailto: str | None = None
    rate_per_sec: float = 10.0
    timeout: float = 30.0
    max_retries: int = 3

    @classmethod
    def from_env(cls, env=None) -> "ApiConfig":
        env = os.environ if env is None else env
        return cls(
            base_url=env.get("CITEMETRIC_API_BASE", DEFAULT_BASE).rstrip("/"),
            mailto=env.get("CITEMETRIC_MAILTO") or None,
            rate_per_sec=float(env.get("CITEMETRIC_RATE_PER_SEC", 10.0)),
        )


class RateLimiter:
    """Spaces calls at least ``1/rate`` seconds apart across threads."""

    def __init__(self, rate_per_sec: float, clock=time.monotonic, sleep=time.sleep):
        if rate_per_sec <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate_per_sec
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = None

    def wait(self):
        with self._lock:
            now = self._clock()
            if self._next is not None and now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


def _abstract_length(inverted_index) -> int | None:
    if not inverted_index:
        return None
    positions = [(p, word) for word, ps in inverted_index.items() for p in ps]
    return len(" ".join(word for _, word in sorted(positions)))


def _short_id(node):
    if not node:
        return None
    ident = node.get("id") if isinstance(node, dict) else node
    if ident is None:
        return None
    return str(ident).rstrip("/").rsplit("/", 1)[-1]


def flatten_openalex_work(work: dict) -> dict:
    """Map an OpenAlex work object onto the flat works-file row layout."""
    year = work.get("publication_year")
    if year is None or work.get("type") is None:
        raise MappingError(f"work {work.get('id')!r} lacks publication_year or type")
    if work.get("cited_by_count") is None:
        raise MappingError(f"work {work.get('id')!r} lacks cited_by_count")
    topic = work.get("primary_topic") or {}
    doi = work.get("doi")
    return {
        "id": _short_id(work.get("id")),
        "doi": normalize_doi(doi) if doi else None,
        "year": int(year),
        "citations": int(work["cited_by_count"]),
        "type": work.get("type"),
        "crossref_type": work.get("type_crossref"),
        "domain": _short_id(topic.get("domain")),
        "field": _short_id(topic.get("field")),
        "subfield": _short_id(topic.get("subfield")),
        "topic": _short_id(topic),
        "abstract_length": _abstract_length(work.get("abstract_inverted_index")),
    }


class OpenAlexClient:
    def __init__(self, config: ApiConfig | None = None, client: httpx.Client | None = None, sleep=time.sleep):
        self.config = config or ApiConfig.from_env()
        self._client = client or httpx.Client(timeout=self.config.timeout)
        self._sleep = sleep
        self._limiter = RateLimiter(self.config.rate_per_sec, sleep=sleep)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def fetch_work_by_doi(self, doi: str) -> dict:
        doi = normalize_doi(doi)  # raises before any request
        url = f"{self.config.base_url}/works/doi:{doi}"
        params = {"mailto": self.config.mailto} if self.config.mailto else None
        for attempt in range(self.config.max_retries + 1):
            self._limiter.wait()
            try:
                resp = self._client.get(url, params=params)
            except httpx.HTTPError as exc:
                if attempt == self.config.max_retries:
                    raise TransportError(f"GET {url}: {exc}") from exc
                self._sleep(2**attempt)
                continue
            if resp.status_code == 404:
                raise NotFoundError(f"no work for doi {doi}")
            if resp.status_code == 429 or resp.status_code >= 500:
                if attempt == self.config.max_retries:
                    raise TransportError(f"GET {url}: HTTP {resp.status_code}")
                self._sleep(_retry_after(resp, default=2**attempt))
                continue
            if resp.status_code != 200:
                raise TransportError(f"GET {url}: HTTP {resp.status_code}")
            return flatten_openalex_work(resp.json())
        raise TransportError(f"GET {url}: retries exhausted")  # pragma: no cover


def _retry_after(resp: httpx.Response, default: float) -> float:
    value = resp.headers.get("Retry-After")
    try:
        return max(0.0, float(value))
    except (TypeError, ValueError):
        return default


def fetch_work_by_doi(doi: str, config: ApiConfig | None = None) -> dict:
    with OpenAlexClient(config) as client:
        return client.fetch_work_by_doi(doi)
