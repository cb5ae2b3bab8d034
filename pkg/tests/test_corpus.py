import json

import pytest
from hypothesis import given, strategies as st

from conftest import FIXTURES
from torscope import corpus, crawler
from torscope.corpus import Corpus, Kind, PageRecord


def page(address, text="", language="en", crawl_id=1):
    return PageRecord(
        address=address,
        domain=corpus.host_of(address),
        html=b"",
        text=text,
        crawl_id=crawl_id,
        kind=corpus.classify_address(address),
        language=language,
        word_count=corpus.word_count(text),
    )


def test_extract_text_strips_tags():
    assert corpus.extract_text("<p>hello <b>world</b></p>") == "hello world"


def test_extract_text_drops_script_style_and_comments():
    assert corpus.extract_text("<script>var x=1;</script>buy btc") == "buy btc"
    assert corpus.extract_text("<style>p{}</style><!-- hidden -->a<p>b</p>") == "a b"


def test_extract_text_undecodable_bytes():
    assert corpus.extract_text(b"<p>caf\xe9 ok</p>") == "caf� ok"


def test_market_fixture_golden():
    html = (FIXTURES / "market.html").read_bytes()
    assert corpus.extract_text(html) == (FIXTURES / "market.txt").read_text(encoding="utf-8").rstrip("\n")


@pytest.mark.parametrize("url,kind", [
    ("http://abcdefgh.onion/shop", Kind.ONION),
    ("https://example.com/", Kind.SURFACE),
    ("http://x.ONION/", Kind.ONION),
    ("http://onion.example.com/", Kind.SURFACE),
])
def test_classify_address(url, kind):
    assert corpus.classify_address(url) is kind


@pytest.mark.parametrize("url", ["not a url", "http://", "mailto:someone"])
def test_classify_address_malformed(url):
    with pytest.raises(corpus.MalformedAddress):
        corpus.classify_address(url)


def test_normalize_url():
    assert corpus.normalize_url("HTTP://Shop.ONION:80/a?b=1#frag") == "http://shop.onion/a?b=1"
    assert corpus.normalize_url("https://h.onion:443") == "https://h.onion/"
    assert corpus.normalize_url("http://h.onion:8080/x") == "http://h.onion:8080/x"


@given(st.sampled_from(["http", "https"]),
       st.from_regex(r"[a-z2-7]{1,16}", fullmatch=True),
       st.sampled_from([".onion", ".ONION", ".com", ".org", ".onion.to"]))
def test_classify_partition(scheme, name, suffix):
    url = f"{scheme}://{name}{suffix}/"
    kind = corpus.classify_address(url)
    assert kind in (Kind.ONION, Kind.SURFACE)
    assert (kind is Kind.ONION) == (name + suffix).lower().endswith(".onion")


def _ten_pages():
    long_en = " ".join(["word"] * 60)
    return Corpus.from_pages([
        page("http://a.onion/1", long_en),
        page("http://a.onion/2", long_en),
        page("http://b.onion/", long_en),
        page("http://c.onion/", long_en),
        page("http://d.onion/", " ".join(["w"] * 50)),  # exactly 50: dropped
        page("http://e.onion/", long_en, language="fr"),
        page("http://example.com/", long_en),
        page("http://f.onion/", "short"),
        page("http://g.onion/", long_en, language=corpus.UNKNOWN_LANGUAGE),
        page("http://h.com/", "short", language="de"),
    ])


def test_filter_corpus_predicate():
    kept = corpus.filter_corpus(_ten_pages())
    assert [p.address for p in kept] == ["http://a.onion/1", "http://a.onion/2", "http://b.onion/", "http://c.onion/"]


def test_filter_corpus_identity_case():
    c = _ten_pages()
    assert corpus.filter_corpus(c, min_words=0, language=None, kind=None).pages == c.pages


def test_filter_corpus_rejects_negative():
    with pytest.raises(ValueError):
        corpus.filter_corpus(_ten_pages(), min_words=-1)


texts = st.lists(st.from_regex(r"[a-z]{1,6}( [a-z]{1,6}){0,80}", fullmatch=True), min_size=0, max_size=8)


@given(texts, st.integers(0, 60), st.sampled_from(["en", "fr", None]))
def test_filter_idempotent(ts, min_words, language):
    c = Corpus.from_pages(page(f"http://d{i}.onion/", t, language="en" if i % 2 else "fr") for i, t in enumerate(ts))
    once = corpus.filter_corpus(c, min_words, language)
    assert corpus.filter_corpus(once, min_words, language).pages == once.pages


@given(texts)
def test_group_by_domain_preserves_words(ts):
    c = Corpus.from_pages(page(f"http://d{i % 3}.onion/p{i}", t) for i, t in enumerate(ts))
    grouped = corpus.group_by_domain(c)
    assert sum(corpus.word_count(v) for v in grouped.values()) == sum(p.word_count for p in c)


def test_group_by_domain_order_and_empty():
    c = Corpus.from_pages([page("http://d.onion/b", "c"), page("http://d.onion/a", "a b")])
    assert corpus.group_by_domain(c) == {"d.onion": "a b c"}
    assert corpus.group_by_domain(Corpus()) == {}


def test_fixture_corpus_domain_map():
    recs = list(corpus.read_records(FIXTURES / "corpus3" / "records.jsonl"))
    pages = Corpus.from_pages(corpus.pages_from_records(crawler.latest_records(recs)))
    kept = corpus.filter_corpus(pages)
    assert len(kept) == 7
    assert kept.provenance == [1, 2]
    golden = json.loads((FIXTURES / "corpus3" / "domain_map.json").read_text(encoding="utf-8"))
    assert corpus.group_by_domain(kept) == golden


def test_corpus_invariants_on_fixture():
    recs = list(corpus.read_records(FIXTURES / "corpus3" / "records.jsonl"))
    c = Corpus.from_pages(corpus.pages_from_records(recs))
    addresses = [p.address for p in c]
    assert len(addresses) == len(set(addresses))
    assert c.provenance == sorted({p.crawl_id for p in c})
    for p in c:
        assert p.word_count == len(p.text.split())
        assert "/" not in p.domain and ":" not in p.domain


def test_record_roundtrip(tmp_path):
    recs = [
        {"url": "http://a.onion/", "html": b"<p>\xff bytes</p>", "fetched_at": "2017-01-01T00:00:00Z", "crawl_id": 1},
        {"url": "http://b.onion/", "html": b"", "fetched_at": "2017-01-01T00:00:01Z", "crawl_id": 2, "error": "x"},
    ]
    path = tmp_path / "r.jsonl"
    assert corpus.write_records(path, recs) == 2
    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")
    assert list(corpus.read_records(path)) == recs
    corpus.write_records(tmp_path / "again.jsonl", corpus.read_records(path))
    assert (tmp_path / "again.jsonl").read_bytes() == raw


def test_read_records_rejects_garbage(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"url": "http://a.onion/"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        list(corpus.read_records(path))


def test_pages_roundtrip(tmp_path):
    recs = list(corpus.read_records(FIXTURES / "corpus3" / "records.jsonl"))
    c = Corpus.from_pages(corpus.pages_from_records(recs))
    corpus.write_pages(tmp_path / "p.jsonl", c)
    back = corpus.read_pages(tmp_path / "p.jsonl")
    strip = lambda cc: [(p.address, p.text, p.language, p.word_count, p.kind, p.crawl_id) for p in cc]
    assert strip(back) == strip(c)
