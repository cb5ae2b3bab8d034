"""Crawl records, visible-text extraction and the analyzable page set."""

from __future__ import annotations

import base64
import enum
import json
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Iterator
from urllib.parse import urlsplit, urlunsplit

UNKNOWN_LANGUAGE = "unknown"

_DEFAULT_PORTS = {"http": 80, "https": 443}
_INVISIBLE_TAGS = frozenset({"script", "style"})
# elements that separate words when rendered
_BLOCK_TAGS = frozenset(
    "address article aside blockquote br dd div dl dt fieldset figcaption figure "
    "footer form h1 h2 h3 h4 h5 h6 header hr li main nav ol option p pre section "
    "table tbody td tfoot th thead title tr ul".split()
)


class MalformedAddress(ValueError):
    """Raised when a URL has no parseable host."""


class Kind(str, enum.Enum):
    ONION = "onion"
    SURFACE = "surface"


@dataclass(frozen=True)
class PageRecord:
    address: str
    domain: str
    html: bytes
    text: str
    crawl_id: int
    kind: Kind
    language: str
    word_count: int


@dataclass
class Corpus:
    pages: list[PageRecord] = field(default_factory=list)
    provenance: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pages)

    def __iter__(self) -> Iterator[PageRecord]:
        return iter(self.pages)

    @classmethod
    def from_pages(cls, pages: Iterable[PageRecord]) -> "Corpus":
        """Build a corpus keyed on address; a later page replaces an earlier one."""
        by_address: dict[str, PageRecord] = {}
        for page in pages:
            by_address[page.address] = page
        ordered = [by_address[a] for a in sorted(by_address)]
        return cls(ordered, sorted({p.crawl_id for p in ordered}))

    def domains(self) -> list[str]:
        return sorted({p.domain for p in self.pages})


# -- text extraction ---------------------------------------------------------


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._hidden = 0

    def handle_starttag(self, tag, attrs):
        if tag in _INVISIBLE_TAGS:
            self._hidden += 1
        elif tag in _BLOCK_TAGS:
            self.chunks.append(" ")

    def handle_startendtag(self, tag, attrs):
        # <script/> opens nothing
        if tag in _BLOCK_TAGS:
            self.chunks.append(" ")

    def handle_endtag(self, tag):
        if tag in _INVISIBLE_TAGS:
            if self._hidden:
                self._hidden -= 1
        elif tag in _BLOCK_TAGS:
            self.chunks.append(" ")

    def handle_data(self, data):
        if not self._hidden:
            self.chunks.append(data)


def decode_html(html: bytes | str) -> str:
    if isinstance(html, str):
        return html
    return html.decode("utf-8", errors="replace")


def extract_text(html: bytes | str) -> str:
    """Return the visible text of an HTML document.

    Markup, comments and the bodies of ``script``/``style`` elements are
    dropped; remaining text runs are joined and whitespace collapsed to single
    spaces. Block-level elements separate words; inline ones do not, so
    ``a<b>b</b>`` yields ``ab`` while ``<p>a</p><p>b</p>`` yields ``a b``.
    Undecodable bytes become U+FFFD. Never raises on malformed markup.
    """
    parser = _TextCollector()
    try:
        parser.feed(decode_html(html))
        parser.close()
    except Exception:  # html.parser is lenient, but be total anyway
        pass
    return " ".join("".join(parser.chunks).split())


def word_count(text: str) -> int:
    return len(text.split())


# -- addresses ---------------------------------------------------------------


def normalize_url(url: str) -> str:
    """Canonical page identity: lowercase scheme/host, no default port, no fragment."""
    parts = urlsplit(url.strip())
    host = parts.hostname
    if not parts.scheme or not host:
        raise MalformedAddress(url)
    scheme = parts.scheme.lower()
    try:
        port = parts.port
    except ValueError as exc:
        raise MalformedAddress(url) from exc
    netloc = host.rstrip(".")
    if port is not None and port != _DEFAULT_PORTS.get(scheme):
        netloc = f"{netloc}:{port}"
    path = parts.path or "/"
    return urlunsplit((scheme, netloc, path, parts.query, ""))


def host_of(url: str) -> str:
    host = urlsplit(url.strip()).hostname
    if not host:
        raise MalformedAddress(url)
    return host.rstrip(".")


def classify_address(url: str) -> Kind:
    """``Kind.ONION`` iff the URL's host ends in ``.onion`` (any case)."""
    host = host_of(url)
    return Kind.ONION if host == "onion" or host.endswith(".onion") else Kind.SURFACE


def make_page(url: str, html: bytes, crawl_id: int, profiles=None) -> PageRecord:
    from torscope import langid

    address = normalize_url(url)
    text = extract_text(html)
    if profiles is None:
        profiles = langid.default_profiles()
    return PageRecord(
        address=address,
        domain=host_of(address),
        html=html,
        text=text,
        crawl_id=crawl_id,
        kind=classify_address(address),
        language=langid.identify_language(text, profiles),
        word_count=word_count(text),
    )


# -- filtering and grouping --------------------------------------------------


def filter_corpus(
    corpus: Corpus,
    min_words: int = 50,
    language: str | None = "en",
    kind: Kind | None = Kind.ONION,
) -> Corpus:
    """Keep pages of ``kind`` in ``language`` with strictly more than ``min_words`` words.

    ``None`` for ``language`` or ``kind`` means any.
    """
    if min_words < 0:
        raise ValueError("min_words must be >= 0")
    kept = [
        p
        for p in corpus.pages
        if p.word_count > min_words
        and (language is None or p.language == language)
        and (kind is None or p.kind == kind)
    ]
    return Corpus(kept, sorted({p.crawl_id for p in kept}))


def group_by_domain(corpus: Corpus) -> dict[str, str]:
    """Concatenate page texts per domain, pages ordered by address."""
    grouped: dict[str, list[PageRecord]] = {}
    for page in corpus.pages:
        grouped.setdefault(page.domain, []).append(page)
    out = {}
    for domain in sorted(grouped):
        pages = sorted(grouped[domain], key=lambda p: p.address)
        out[domain] = " ".join(p.text for p in pages if p.text)
    return out


# -- crawl record files ------------------------------------------------------


def record_to_json(record: dict) -> str:
    payload = dict(record)
    html = payload.get("html", b"")
    if isinstance(html, (bytes, bytearray)):
        payload["html"] = base64.b64encode(html).decode("ascii")
    return json.dumps(payload, sort_keys=True, ensure_ascii=False)


def read_records(path: str | Path) -> Iterator[dict]:
    """Yield crawl records from a JSON Lines file with ``html`` decoded to bytes."""
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                rec["html"] = base64.b64decode(rec.get("html") or "")
                rec["crawl_id"] = int(rec["crawl_id"])
                rec["url"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad crawl record ({exc})") from exc
            yield rec


def write_records(path: str | Path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")
            n += 1
    return n


def pages_from_records(records: Iterable[dict], profiles=None) -> list[PageRecord]:
    """Turn crawl records into pages, skipping failed fetches and bad URLs."""
    pages = []
    for rec in records:
        if rec.get("error"):
            continue
        try:
            pages.append(make_page(rec["url"], rec["html"], rec["crawl_id"], profiles))
        except MalformedAddress:
            continue
    return pages


def write_pages(path: str | Path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in corpus.pages:
            row = {
                "address": p.address,
                "domain": p.domain,
                "text": p.text,
                "crawl_id": p.crawl_id,
                "kind": p.kind.value,
                "language": p.language,
                "word_count": p.word_count,
            }
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


def read_pages(path: str | Path) -> Corpus:
    pages = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            pages.append(
                PageRecord(
                    address=row["address"],
                    domain=row["domain"],
                    html=b"",
                    text=row["text"],
                    crawl_id=int(row["crawl_id"]),
                    kind=Kind(row["kind"]),
                    language=row["language"],
                    word_count=int(row["word_count"]),
                )
            )
    return Corpus.from_pages(pages)
