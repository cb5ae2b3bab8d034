"""Depth-limited, multi-threaded hyperlink crawler with a pluggable fetcher.

Traversal is depth-prioritized: one shared LIFO frontier means children are
popped before their siblings. Under several workers this is only approximately
depth-first, but the fetched *set* is exactly the set of pages within
``max_depth`` hops of a seed. A page rediscovered along a shorter path after it
was expanded is re-expanded (never refetched) so that set is not truncated by
whichever path happened to reach the page first.
"""

from __future__ import annotations

import logging
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterable, Protocol
from urllib.parse import unquote, urljoin, urlsplit

from torscope.corpus import (
    Corpus,
    MalformedAddress,
    decode_html,
    host_of,
    normalize_url,
    pages_from_records,
)

log = logging.getLogger(__name__)

FOLLOWED_SCHEMES = ("http", "https")


# -- link extraction ---------------------------------------------------------


class _AnchorCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "a":
            return
        for name, value in attrs:
            if name == "href" and value:
                self.hrefs.append(value.strip())
                break


def extract_links(html: bytes | str, base: str) -> list[str]:
    """Absolute, normalized http(s) targets of ``<a href>`` anchors, first occurrence kept."""
    collector = _AnchorCollector()
    try:
        collector.feed(decode_html(html))
        collector.close()
    except Exception:
        pass
    seen = set()
    links = []
    for href in collector.hrefs:
        try:
            url = urljoin(base, href)
            if urlsplit(url).scheme.lower() not in FOLLOWED_SCHEMES:
                continue
            url = normalize_url(url)
        except (MalformedAddress, ValueError):
            continue
        if url not in seen:
            seen.add(url)
            links.append(url)
    return links


# -- fetchers ----------------------------------------------------------------


class Fetcher(Protocol):
    def fetch(self, url: str) -> tuple[int, bytes]:
        """Return (HTTP status, body). Raise on transport failure."""


class FetchError(Exception):
    pass


class FixtureFetcher:
    """Serve URLs from a directory tree laid out as ``root/<host>/<path>``.

    A path naming a directory (or ending in ``/``) serves its ``index.html``;
    ``/page`` also matches ``page.html``. Unknown paths answer 404. Every call
    is logged to ``requests`` as ``(monotonic time, url)``.
    """

    def __init__(self, root: str | Path, latency: float = 0.0):
        self.root = Path(root)
        self.latency = latency
        self.requests: list[tuple[float, str]] = []
        self._lock = threading.Lock()

    def resolve(self, url: str) -> Path | None:
        parts = urlsplit(url)
        host = (parts.hostname or "").lower()
        rel = unquote(parts.path).lstrip("/")
        base = self.root / host
        candidates = [base / rel] if rel else []
        candidates += [base / rel / "index.html", base / f"{rel}.html"]
        for c in candidates:
            if c.is_file() and self.root.resolve() in c.resolve().parents:
                return c
        return None

    def fetch(self, url: str) -> tuple[int, bytes]:
        with self._lock:
            self.requests.append((time.monotonic(), url))
        if self.latency:
            time.sleep(self.latency)
        path = self.resolve(url)
        if path is None:
            return 404, b""
        return 200, path.read_bytes()


class HttpFetcher:
    """Plain urllib fetcher. Route through a SOCKS-to-HTTP proxy for onion hosts."""

    def __init__(self, timeout: float = 30.0, proxy: str | None = None,
                 user_agent: str = "torscope/0.1"):
        handlers = []
        if proxy:
            handlers.append(urllib.request.ProxyHandler({"http": proxy, "https": proxy}))
        self._opener = urllib.request.build_opener(*handlers)
        self.timeout = timeout
        self.user_agent = user_agent

    def fetch(self, url: str) -> tuple[int, bytes]:
        req = urllib.request.Request(url, headers={"User-Agent": self.user_agent})
        try:
            with self._opener.open(req, timeout=self.timeout) as resp:
                ctype = resp.headers.get("Content-Type", "")
                if ctype and "html" not in ctype:
                    return resp.status, b""
                return resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            return exc.code, b""


# -- crawl -------------------------------------------------------------------


@dataclass
class CrawlConfig:
    max_depth: int = 4
    workers: int = 4
    per_host_delay: float = 1.0
    crawl_id: int = 1
    retries: int = 1

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class FrontierEntry:
    address: str
    depth: int
    discovered_from: str | None = None


def read_seeds(path: str | Path) -> list[str]:
    seeds = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            seeds.append(normalize_url(line))
    return seeds


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


class Crawler:
    """Shared-state crawl driven by ``config.workers`` threads.

    ``emit`` receives one record dict per fetched URL, always from a single
    thread at a time. Call :meth:`stop` (e.g. from a signal handler) to finish
    in-flight fetches and return early.
    """

    def __init__(self, config: CrawlConfig, fetcher: Fetcher,
                 emit: Callable[[dict], None], clock=time.monotonic, sleep=time.sleep):
        self.config = config
        self.fetcher = fetcher
        self.emit = emit
        self._clock = clock
        self._sleep = sleep
        self._cond = threading.Condition()
        self._emit_lock = threading.Lock()
        self._stack: list[FrontierEntry] = []
        self._best_depth: dict[str, int] = {}
        self._claimed: set[str] = set()
        self._links: dict[str, list[str]] = {}
        self._expanded_at: dict[str, int] = {}
        self._host_next: dict[str, float] = {}
        self._in_flight = 0
        self._stop = threading.Event()
        self.fetched = 0

    def stop(self) -> None:
        self._stop.set()
        with self._cond:
            self._cond.notify_all()

    def run(self, seeds: Iterable[str]) -> int:
        seeds = [normalize_url(s) for s in seeds]
        if not seeds:
            raise ValueError("no seeds")
        with self._cond:
            for s in reversed(seeds):
                self._push(FrontierEntry(s, 0))
        threads = [
            threading.Thread(target=self._worker, name=f"crawl-{i}", daemon=True)
            for i in range(self.config.workers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        return self.fetched

    # frontier helpers: call with self._cond held

    def _push(self, entry: FrontierEntry) -> None:
        best = self._best_depth.get(entry.address)
        if entry.depth > self.config.max_depth or (best is not None and best <= entry.depth):
            return
        self._best_depth[entry.address] = entry.depth
        self._stack.append(entry)

    def _expand(self, url: str) -> None:
        depth = self._best_depth[url]
        if depth >= self.config.max_depth:
            self._expanded_at[url] = depth
            return
        if self._expanded_at.get(url, self.config.max_depth + 1) <= depth:
            return
        self._expanded_at[url] = depth
        for link in reversed(self._links.get(url, [])):
            self._push(FrontierEntry(link, depth + 1, url))
        self._cond.notify_all()

    def _next(self) -> FrontierEntry | None:
        with self._cond:
            while True:
                if self._stop.is_set():
                    return None
                while self._stack:
                    entry = self._stack.pop()
                    if entry.depth > self._best_depth[entry.address]:
                        continue  # superseded by a shallower discovery
                    if entry.address in self._claimed:
                        if entry.address in self._links:
                            self._expand(entry.address)
                        # else: the fetching worker expands with the best depth
                        continue
                    self._claimed.add(entry.address)
                    self._in_flight += 1
                    return entry
                if self._in_flight == 0:
                    self._cond.notify_all()
                    return None
                self._cond.wait()

    def _reserve_slot(self, url: str) -> float:
        """Wait time before ``url`` may be requested under the per-host delay."""
        try:
            host = host_of(url)
        except MalformedAddress:
            return 0.0
        with self._cond:
            now = self._clock()
            start = max(now, self._host_next.get(host, now))
            self._host_next[host] = start + self.config.per_host_delay
        return start - now

    def _fetch(self, url: str) -> tuple[int, bytes, str | None]:
        err = None
        for attempt in range(self.config.retries + 1):
            wait = self._reserve_slot(url)
            if wait > 0:
                self._sleep(wait)
            try:
                status, body = self.fetcher.fetch(url)
            except Exception as exc:  # transport failure; retry once
                err = f"{type(exc).__name__}: {exc}"
                continue
            if status >= 500 and attempt < self.config.retries:
                err = f"HTTP {status}"
                continue
            if status >= 400:
                return status, b"", f"HTTP {status}"
            return status, body, None
        return 0, b"", err

    def _worker(self) -> None:
        while True:
            entry = self._next()
            if entry is None:
                return
            status, body, err = self._fetch(entry.address)
            links = extract_links(body, entry.address) if body else []
            record = {
                "url": entry.address,
                "html": body,
                "fetched_at": _now_rfc3339(),
                "crawl_id": self.config.crawl_id,
                "depth": entry.depth,
                "status": status,
            }
            if err:
                record["error"] = err
            with self._emit_lock:
                self.emit(record)
            with self._cond:
                self.fetched += 1
                self._links[entry.address] = links
                self._expand(entry.address)
                self._in_flight -= 1
                self._cond.notify_all()


def crawl(seeds: Iterable[str], config: CrawlConfig, fetcher: Fetcher) -> list[dict]:
    """Run a crawl to completion and return the emitted records in emission order."""
    records: list[dict] = []
    Crawler(config, fetcher, records.append).run(seeds)
    return records


def latest_records(records: Iterable[dict]) -> list[dict]:
    """One record per normalized address: the successful one from the latest crawl.

    A failed fetch never displaces a successful one, whatever its crawl.
    """
    chosen: dict[str, dict] = {}
    for rec in records:
        try:
            key = normalize_url(rec["url"])
        except MalformedAddress:
            continue
        prev = chosen.get(key)
        rank = (not rec.get("error"), rec["crawl_id"])
        if prev is None or rank >= (not prev.get("error"), prev["crawl_id"]):
            chosen[key] = rec
    return [chosen[k] for k in sorted(chosen)]


def union_crawls(a: Iterable[dict], b: Iterable[dict], profiles=None) -> Corpus:
    """Address-keyed union of two record streams; the later crawl_id wins a clash."""
    return Corpus.from_pages(pages_from_records(latest_records(list(a) + list(b)), profiles))
