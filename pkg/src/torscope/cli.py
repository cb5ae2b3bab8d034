"""Command-line entry point: one subcommand per pipeline stage plus ``report``.

Every stage writes plain files. Outputs are deterministic for fixed inputs
and seeds; wall-clock timestamps go only to a ``torscope.log`` sidecar next
to the outputs. When a stage fails, whatever it managed to write is flagged
by a ``<file>.INCOMPLETE`` marker.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import signal
import sys
from datetime import datetime, timezone
from pathlib import Path

import networkx as nx
import numpy as np

from torscope import __version__, corpus, crawler, graph, labeler, powerlaw, topics

log = logging.getLogger("torscope")

LOG_LEVEL_ENV = "TORSCOPE_LOG_LEVEL"
SIDECAR = "torscope.log"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


class Outputs:
    """Tracks the files a stage writes so a failure can mark them incomplete."""

    def __init__(self, stage: str):
        self.stage = stage
        self.paths: list[Path] = []

    def path(self, p: str | Path) -> Path:
        p = Path(p)
        p.parent.mkdir(parents=True, exist_ok=True)
        marker = p.with_name(p.name + ".INCOMPLETE")
        if marker.exists():
            marker.unlink()
        self.paths.append(p)
        return p

    def write_csv(self, p: str | Path, header: list[str], rows) -> Path:
        p = self.path(p)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return p

    def write_json(self, p: str | Path, data) -> Path:
        p = self.path(p)
        p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return p

    def mark_incomplete(self, reason: str) -> None:
        for p in self.paths:
            p.with_name(p.name + ".INCOMPLETE").write_text(
                f"stage {self.stage} failed: {reason}\n", encoding="utf-8")

    def sidecar(self, status: str, argv: list[str]) -> None:
        dirs = sorted({p.parent for p in self.paths})
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        for d in dirs:
            with open(d / SIDECAR, "a", encoding="utf-8") as fh:
                fh.write(f"{stamp}\t{self.stage}\t{status}\ttorscope {__version__}\t{' '.join(argv)}\n")


def _require(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")


# -- crawl / ingest ----------------------------------------------------------


def cmd_crawl(args, out: Outputs) -> None:
    _require(args.seeds, args.fixture_root)
    seeds = crawler.read_seeds(args.seeds)
    if not seeds:
        raise ValueError(f"{args.seeds}: no seed URLs")
    config = crawler.CrawlConfig(
        max_depth=args.max_depth,
        workers=args.workers,
        per_host_delay=args.delay_ms / 1000.0,
        crawl_id=args.crawl_id,
    )
    if args.fixture_root:
        fetcher = crawler.FixtureFetcher(args.fixture_root)
    else:
        fetcher = crawler.HttpFetcher(timeout=args.timeout, proxy=args.proxy)
    records: list[dict] = []
    c = crawler.Crawler(config, fetcher, records.append)
    previous = signal.signal(signal.SIGINT, lambda *_: c.stop())
    try:
        c.run(seeds)
    finally:
        signal.signal(signal.SIGINT, previous)
    # emission order depends on thread timing; the file does not
    records.sort(key=lambda r: (r["url"], r["depth"]))
    n = corpus.write_records(out.path(args.out), records)
    log.info("crawl: wrote %d records to %s", n, args.out)


def _page_links(records) -> list[tuple[str, str]]:
    links = []
    for rec in records:
        if rec.get("error"):
            continue
        try:
            src = corpus.normalize_url(rec["url"])
        except corpus.MalformedAddress:
            continue
        for dst in crawler.extract_links(rec["html"], src):
            links.append((src, dst))
    return links


def cmd_ingest(args, out: Outputs) -> None:
    _require(*args.records)
    merged: list[dict] = []
    for path in args.records:
        merged.extend(corpus.read_records(path))
    kept = crawler.latest_records(merged)
    pages = corpus.Corpus.from_pages(corpus.pages_from_records(kept))
    corpus.write_pages(out.path(args.pages), pages)
    # hyperlinks come from every fetched page, whatever its language
    g = graph.build_domain_graph(_page_links(kept), {})
    edges = sorted(g.edges())
    p = out.path(args.edges)
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    log.info("ingest: %d pages, %d domain edges", len(pages), len(edges))


# -- topics / label ----------------------------------------------------------


def _domain_docs(args) -> dict[str, list[str]]:
    _require(args.corpus)
    pages = corpus.filter_corpus(corpus.read_pages(args.corpus), min_words=args.min_words)
    texts = corpus.group_by_domain(pages)
    return {d: topics.tokenize(t) for d, t in texts.items()}


def cmd_topics_fit(args, out: Outputs) -> None:
    if args.t_min < 2 or args.t_max < args.t_min:
        raise UsageError("need 2 <= --t-min <= --t-max")
    docs = _domain_docs(args)
    if not docs:
        raise ValueError(f"{args.corpus}: no pages pass the filter")
    sel = topics.select_topic_count(
        list(docs.values()),
        range(args.t_min, args.t_max + 1),
        min_len=args.min_words,
        n=args.top_n,
        iters=args.iters,
        seed=args.seed,
    )
    outdir = Path(args.outdir)
    sel.model.save(out.path(outdir / "model.json"))
    out.write_csv(outdir / "coherence.csv", ["T", "mean_coherence", "selected"],
                  [(T, s, int(T == sel.T)) for T, s in sorted(sel.scores.items())])
    out.write_csv(outdir / "top_words.csv", ["topic", "top_words"],
                  [(t, " ".join(sel.model.top_words(t, args.top_n))) for t in range(sel.T)])
    log.info("topics: selected T=%d", sel.T)


def cmd_topics_assign(args, out: Outputs) -> None:
    _require(args.model)
    model = topics.TopicModel.load(args.model)
    docs = _domain_docs(args)
    rows = []
    for d, toks in docs.items():
        if not any(t in model.vocabulary for t in toks):
            continue
        rows.append((d, topics.dominant_topic(model, toks, seed=args.seed)))
    p = out.path(args.out)
    with open(p, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# model={model.fingerprint()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "topic"])
        w.writerows(rows)


def _read_fingerprint(path) -> str | None:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    return first.split("=", 1)[1] if first.startswith("# model=") else None


def cmd_label(args, out: Outputs) -> None:
    _require(args.model, args.kg, args.domain_topics)
    model = topics.TopicModel.load(args.model)
    kg = labeler.load_knowledge_graph(args.kg)
    fp = model.fingerprint()
    words = {t: model.top_words(t, args.top_n) for t in range(model.T)}
    result = labeler.label_topics(kg, words)
    for entry in result.values():
        entry["model"] = fp
    out.write_json(args.out, {str(t): v for t, v in result.items()})
    if args.domain_topics:
        if not args.domain_labels:
            raise UsageError("--domain-topics needs --domain-labels")
        if _read_fingerprint(args.domain_topics) != fp:
            raise ValueError(f"{args.domain_topics} was not produced by model {fp}")
        assigned = graph.read_labels(args.domain_topics)
        labels = {d: result[int(t)]["label"] for d, t in assigned.items()}
        p = out.path(args.domain_labels)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# model={fp}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["domain", "label"])
            for d in sorted(labels):
                w.writerow([d, labels[d]])


# -- graph / powerlaw --------------------------------------------------------


def _load_graph(edges_path, labels_path) -> nx.DiGraph:
    _require(edges_path, labels_path)
    g = graph.load_graph(edges_path, labels_path)
    if g.number_of_edges() == 0:
        raise graph.GraphDataError(f"{edges_path}: no edges")
    return g


def write_graph_tables(g: nx.DiGraph, outdir: Path, out: Outputs) -> None:
    s = graph.summary_stats(g)
    out.write_csv(outdir / "summary.csv", ["statistic", "value"], s.rows())

    labs = [lab for lab in graph.communities(g) if lab != graph.UNLABELED]
    rows = []
    for lab in labs:
        sub = graph.intra_subgraph(g, lab)
        if sub.number_of_nodes() < 2:
            rows.append((lab, sub.number_of_nodes(), None, None, None))
            continue
        rows.append((lab, sub.number_of_nodes(),
                     *(graph.robustness_coefficient(sub, k) for k in ("betweenness", "closeness", "degree"))))
    out.write_csv(outdir / "robustness.csv", ["community", "n", "R_b", "R_c", "R_d"], rows)

    per = graph.per_community_modularity(g)
    out.write_csv(outdir / "modularity.csv", ["community", "modularity"],
                  [(lab, per[lab]) for lab in graph.communities(g)] + [("All", sum(per.values()))])

    nodes = sorted(g.nodes())
    cent = {m: graph.centrality(g, m) for m in graph.MEASURES}
    out.write_csv(outdir / "centrality.csv", ["domain", "label", *graph.MEASURES],
                  [(v, g.nodes[v].get("label", graph.UNLABELED), *(cent[m][v] for m in graph.MEASURES))
                   for v in nodes])
    cdf_rows, hist_rows = [], []
    for m in graph.MEASURES:
        vals = np.array([cent[m][v] for v in nodes], dtype=float)
        uniq, counts = np.unique(vals, return_counts=True)
        for x, f in zip(uniq, np.cumsum(counts) / vals.size):
            cdf_rows.append((m, x, f))
        hi = vals.max() if vals.max() > 0 else 1.0
        hist, edges = np.histogram(vals, bins=20, range=(0.0, hi))
        for lo_, hi_, c in zip(edges[:-1], edges[1:], hist):
            hist_rows.append((m, lo_, hi_, int(c)))
    out.write_csv(outdir / "centrality_cdf.csv", ["measure", "value", "cdf"], cdf_rows)
    out.write_csv(outdir / "centrality_hist.csv", ["measure", "bin_low", "bin_high", "count"], hist_rows)

    order, M = graph.community_degree_matrix(g)
    out.write_csv(outdir / "community_matrix.csv", ["from\\to", *order],
                  [(lab, *M[i].tolist()) for i, lab in enumerate(order)])


def cmd_graph(args, out: Outputs) -> None:
    g = _load_graph(args.edges, args.labels)
    write_graph_tables(g, Path(args.outdir), out)


def write_powerlaw_table(g, path, out: Outputs, boot, seed, threshold, jobs) -> None:
    rows = powerlaw.community_tail_report(g, n_boot=boot, seed=seed, threshold=threshold, n_jobs=jobs)
    out.write_csv(path, ["community", "direction", "n", "p_value", "alpha", "xmin", "ks", "verdict"],
                  [(r.community, r.direction, r.n, r.p_value, r.alpha, r.xmin, r.ks, r.verdict(threshold))
                   for r in rows])


def cmd_powerlaw(args, out: Outputs) -> None:
    if args.boot < 1:
        raise UsageError("--boot must be positive")
    g = _load_graph(args.graph, args.labels)
    write_powerlaw_table(g, args.out, out, args.boot, args.seed, args.threshold, args.jobs)


# -- report ------------------------------------------------------------------


def cmd_report(args, out: Outputs) -> None:
    _require(args.model, args.topic_labels)
    outdir = Path(args.outdir)
    g = _load_graph(args.edges, args.labels)

    fp = None
    if args.model:
        model = topics.TopicModel.load(args.model)
        fp = model.fingerprint()
        label_fp = _read_fingerprint(args.labels)
        if label_fp is not None and label_fp != fp:
            raise ValueError(f"{args.labels} was labeled with model {label_fp}, not {fp}")
    if args.topic_labels:
        tl = json.loads(Path(args.topic_labels).read_text(encoding="utf-8"))
        stale = sorted({e.get("model") for e in tl.values()} - {fp}) if fp else []
        if stale:
            raise ValueError(f"{args.topic_labels} refers to model {stale[0]}, not {fp}")
        out.write_csv(outdir / "topics.csv", ["topic", "label", "gamma", "top_words"],
                      [(int(t), e["label"], e["gamma"], " ".join(e["top_words"]))
                       for t, e in sorted(tl.items(), key=lambda kv: int(kv[0]))])

    labels = [d.get("label", graph.UNLABELED) for _, d in g.nodes(data=True)]
    labeled = [lab for lab in labels if lab != graph.UNLABELED]
    dist = []
    for lab in graph.communities(g):
        if lab == graph.UNLABELED:
            continue
        k = labeled.count(lab)
        dist.append((lab, k, 100.0 * k / len(labeled)))
    dist.sort(key=lambda r: (-r[1], r[0]))
    out.write_csv(outdir / "label_distribution.csv", ["label", "domains", "percent"], dist)

    write_graph_tables(g, outdir, out)
    write_powerlaw_table(g, outdir / "powerlaw.csv", out, args.boot, args.seed, args.threshold, args.jobs)


# -- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="torscope", description="Onion-service content and hyperlink-structure pipeline.")
    p.add_argument("--version", action="version", version=f"torscope {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("crawl", help="crawl from seed URLs to a record file")
    c.add_argument("--seeds", required=True)
    c.add_argument("--max-depth", type=int, default=4)
    c.add_argument("--workers", type=int, default=4)
    c.add_argument("--delay-ms", type=int, default=1000)
    c.add_argument("--crawl-id", type=int, default=1)
    c.add_argument("--out", required=True)
    c.add_argument("--fixture-root", help="serve pages from a directory tree instead of the network")
    c.add_argument("--proxy", help="HTTP proxy, e.g. a local Tor HTTP tunnel")
    c.add_argument("--timeout", type=float, default=30.0)
    c.set_defaults(func=cmd_crawl)

    i = sub.add_parser("ingest", help="merge crawl records into a page corpus and a domain edge list")
    i.add_argument("--records", nargs="+", required=True)
    i.add_argument("--pages", required=True)
    i.add_argument("--edges", required=True)
    i.set_defaults(func=cmd_ingest)

    t = sub.add_parser("topics", help="fit LDA or assign domains to topics")
    tsub = t.add_subparsers(dest="action", required=True, parser_class=_Parser)
    tf = tsub.add_parser("fit")
    tf.add_argument("--corpus", required=True)
    tf.add_argument("--t-min", type=int, default=3)
    tf.add_argument("--t-max", type=int, default=15)
    tf.add_argument("--min-words", type=int, default=50)
    tf.add_argument("--top-n", type=int, default=10)
    tf.add_argument("--iters", type=int, default=1000)
    tf.add_argument("--seed", type=int, default=0)
    tf.add_argument("--outdir", required=True)
    tf.set_defaults(func=cmd_topics_fit)
    ta = tsub.add_parser("assign")
    ta.add_argument("--model", required=True)
    ta.add_argument("--corpus", required=True)
    ta.add_argument("--min-words", type=int, default=50)
    ta.add_argument("--seed", type=int, default=0)
    ta.add_argument("--out", required=True)
    ta.set_defaults(func=cmd_topics_assign)

    lb = sub.add_parser("label", help="label topics against a knowledge-graph snapshot")
    lb.add_argument("--model", required=True)
    lb.add_argument("--kg", required=True)
    lb.add_argument("--top-n", type=int, default=10)
    lb.add_argument("--out", required=True)
    lb.add_argument("--domain-topics", help="CSV from 'topics assign'")
    lb.add_argument("--domain-labels", help="where to write domain,label CSV")
    lb.set_defaults(func=cmd_label)

    gr = sub.add_parser("graph", help="summary, robustness, modularity and centrality tables")
    gr.add_argument("--edges", required=True)
    gr.add_argument("--labels")
    gr.add_argument("--outdir", required=True)
    gr.set_defaults(func=cmd_graph)

    pl = sub.add_parser("powerlaw", help="power-tail tests per community")
    pl.add_argument("--graph", required=True, help="domain edge list")
    pl.add_argument("--labels")
    pl.add_argument("--boot", type=int, default=2500)
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--threshold", type=float, default=0.05)
    pl.add_argument("--jobs", type=int, default=1)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_powerlaw)

    rp = sub.add_parser("report", help="every table and figure data file in one directory")
    rp.add_argument("--edges", required=True)
    rp.add_argument("--labels", required=True)
    rp.add_argument("--model")
    rp.add_argument("--topic-labels")
    rp.add_argument("--boot", type=int, default=2500)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--threshold", type=float, default=0.05)
    rp.add_argument("--jobs", type=int, default=1)
    rp.add_argument("--outdir", required=True)
    rp.set_defaults(func=cmd_report)
    return p


_NUMERIC_ERRORS = (
    np.linalg.LinAlgError,
    FloatingPointError,
    ArithmeticError,
    nx.PowerIterationFailedConvergence,
    topics.CoherenceError,
)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(
        level=os.environ.get(LOG_LEVEL_ENV, "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    stage = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    out = Outputs(stage)
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"torscope {stage}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        code, reason = EXIT_NUMERIC, f"numeric failure: {exc}"
    except (OSError, ValueError, KeyError, nx.NetworkXException) as exc:
        code, reason = EXIT_DATA, f"data error: {exc}"
    else:
        out.sidecar("ok", argv)
        return EXIT_OK
    print(f"torscope {stage}: {reason}", file=sys.stderr)
    out.mark_incomplete(reason)
    out.sidecar("failed", argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
