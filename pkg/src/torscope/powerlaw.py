"""Discrete power-law fitting and the semi-parametric bootstrap goodness-of-fit test.

Follows Clauset, Shalizi & Newman (2009): for every candidate ``xmin`` the
exponent is the discrete maximum-likelihood estimate; the ``xmin`` whose fit
has the smallest Kolmogorov-Smirnov distance wins. The p-value is the share
of synthetic data sets (body resampled, tail drawn from the fit) whose own
best fit is at least as far from them as the data is from its fit.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.special import zeta

from torscope.graph import UNLABELED, communities

log = logging.getLogger(__name__)

MIN_SAMPLES = 10
ALPHA_MAX = 30.0
_ALPHA_MIN = 1.0 + 1e-7
_FD_STEP = 1e-5


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    xmin: int
    ks: float
    n_tail: int
    n: int


@dataclass(frozen=True)
class GofResult:
    p_value: float
    n_boot: int
    seed: int
    ks: float
    boot_ks: tuple[float, ...] = ()


def _positive_ints(values) -> np.ndarray:
    x = np.asarray(values)
    if x.size and np.any(x != np.round(x)):
        raise ValueError("degree sequences must be integers")
    x = x.astype(np.int64)
    return x[x > 0]


def _dlogzeta(alpha, q):
    """d/d(alpha) of log Hurwitz zeta, by central differences."""
    return (np.log(zeta(alpha + _FD_STEP, q)) - np.log(zeta(alpha - _FD_STEP, q))) / (2 * _FD_STEP)


def mle_alpha(mean_log: np.ndarray, xmin: np.ndarray, iters: int = 64) -> np.ndarray:
    """Discrete MLE of the exponent for tails starting at ``xmin`` (vectorized).

    Solves ``-d/da log zeta(a, xmin) = mean(log x)`` by bisection; the left
    side is E[log X] under the law, which falls monotonically in ``a``.
    """
    mean_log = np.asarray(mean_log, dtype=float)
    q = np.asarray(xmin, dtype=float)
    lo = np.full(mean_log.shape, _ALPHA_MIN + _FD_STEP)
    hi = np.full(mean_log.shape, ALPHA_MAX)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        too_small = -_dlogzeta(mid, q) > mean_log  # E[log X] still too big: raise alpha
        lo = np.where(too_small, mid, lo)
        hi = np.where(too_small, hi, mid)
    return 0.5 * (lo + hi)


def ks_distance(x, alpha: float, xmin: int) -> float:
    """Sup over integers k >= xmin of |empirical CDF - fitted CDF| on the tail x >= xmin."""
    tail = _positive_ints(x)
    tail = tail[tail >= xmin]
    u, c = np.unique(tail, return_counts=True)
    return float(_ks_unique(u, c, alpha))


def _ks_unique(u: np.ndarray, c: np.ndarray, alpha: float) -> float:
    # both CDFs are steps: the empirical one only moves at observed values, so the
    # sup sits at an observed value or just before the next one
    uf = u.astype(float)
    z0 = zeta(alpha, uf[0])
    emp = np.cumsum(c) / c.sum()
    at = 1.0 - zeta(alpha, uf + 1.0) / z0
    d = np.abs(emp - at).max()
    if u.size > 1:
        before_next = 1.0 - zeta(alpha, uf[1:]) / z0
        d = max(d, np.abs(emp[:-1] - before_next).max())
    return float(d)


def scan_xmin(values) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """MLE exponent and KS distance for each candidate xmin.

    Candidates are the distinct positive values except the largest, so every
    tail holds at least two distinct values. Returns (xmins, alphas, ks, n_tail).
    """
    x = _positive_ints(values)
    if x.size < MIN_SAMPLES:
        raise InsufficientData(f"need at least {MIN_SAMPLES} positive samples, got {x.size}")
    u, c = np.unique(x, return_counts=True)
    if u.size < 2:
        raise InsufficientData("all samples are equal; no tail to fit")
    n_tail = np.cumsum(c[::-1])[::-1]
    sum_log = np.cumsum((c * np.log(u))[::-1])[::-1]
    cand = slice(0, u.size - 1)
    alphas = mle_alpha(sum_log[cand] / n_tail[cand], u[cand])
    ks = np.array([_ks_unique(u[k:], c[k:], a) for k, a in enumerate(alphas)])
    return u[cand], alphas, ks, n_tail[cand]


def fit_power_law(values) -> PowerLawFit:
    """Best discrete power-law tail of a positive integer sample (zeros are dropped)."""
    xmins, alphas, ks, n_tail = scan_xmin(values)
    k = int(np.argmin(ks))  # first minimum: smallest xmin on ties
    return PowerLawFit(
        alpha=float(alphas[k]),
        xmin=int(xmins[k]),
        ks=float(ks[k]),
        n_tail=int(n_tail[k]),
        n=int(_positive_ints(values).size),
    )


class TailSampler:
    """Exact inverse-CDF sampler for the discrete power law on ``[xmin, inf)``."""

    def __init__(self, alpha: float, xmin: int, table_size: int = 100_000):
        self.alpha = alpha
        self.xmin = int(xmin)
        self._z0 = zeta(alpha, float(xmin))
        ks = np.arange(self.xmin, self.xmin + table_size, dtype=float)
        pmf = ks ** -alpha / self._z0
        # survival S(k) = P(X >= k) for k in the table, decreasing
        self._surv = 1.0 - np.concatenate(([0.0], np.cumsum(pmf)[:-1]))
        self._surv = np.maximum.accumulate(self._surv[::-1])[::-1]
        self._table_end = self.xmin + table_size

    def survival(self, k: np.ndarray) -> np.ndarray:
        return zeta(self.alpha, np.asarray(k, dtype=float)) / self._z0

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        r = 1.0 - rng.random(size)  # in (0, 1]
        # largest k with S(k) >= r; S is decreasing so search the reversed table
        idx = np.searchsorted(-self._surv, -r, side="right") - 1
        out = (self.xmin + idx).astype(float)
        far = idx >= self._surv.size - 1
        if np.any(far):
            out[far] = self._sample_far(r[far])
        return out.astype(np.int64) if out.max(initial=0) < 2**62 else out

    def _sample_far(self, r: np.ndarray) -> np.ndarray:
        # continuous approximation, then walk to the exact integer
        a = self.alpha
        x = np.floor((self.xmin - 0.5) * r ** (-1.0 / (a - 1.0)) + 0.5)
        x = np.maximum(x, float(self._table_end - 1))
        lo = np.full_like(x, float(self._table_end - 1))
        hi = x.copy()
        grow = self.survival(hi) >= r
        while np.any(grow):
            hi[grow] *= 2.0
            grow = self.survival(hi) >= r
        for _ in range(200):
            if np.all(hi - lo <= 1):
                break
            mid = np.floor(0.5 * (lo + hi))
            ok = self.survival(mid) >= r
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return lo


def _replicate_ks(args) -> float:
    body, n, n_tail, alpha, xmin, seed, index, sampler = args
    rng = np.random.default_rng([seed, index])
    k = rng.binomial(n, n_tail / n)
    parts = [sampler.sample(k, rng)]
    if n - k:
        parts.append(rng.choice(body, size=n - k, replace=True))
    sample = np.concatenate(parts)
    try:
        return fit_power_law(sample).ks
    except InsufficientData:
        # a synthetic set with one distinct value cannot be fitted; count it
        # as no better than the data
        return np.inf


def _replicate_chunk(args_list):
    return [_replicate_ks(a) for a in args_list]


def goodness_of_fit(values, fit: PowerLawFit | None = None, n_boot: int = 2500,
                    seed: int = 0, n_jobs: int = 1) -> GofResult:
    """Bootstrap p-value for H0: the sample's tail is a discrete power law.

    Replicate ``i`` draws from ``np.random.default_rng([seed, i])``, so the
    result does not depend on ``n_jobs``.
    """
    x = _positive_ints(values)
    fit = fit or fit_power_law(x)
    body = x[x < fit.xmin]
    if body.size == 0:
        body = x[:0]
    sampler = TailSampler(fit.alpha, fit.xmin)
    if body.size == 0:
        n_tail = x.size  # nothing to resample below xmin
    else:
        n_tail = fit.n_tail
    args = [(body, x.size, n_tail, fit.alpha, fit.xmin, seed, i, sampler) for i in range(n_boot)]
    if n_jobs > 1:
        chunks = [args[i::n_jobs] for i in range(n_jobs)]
        with ProcessPoolExecutor(n_jobs) as ex:
            parts = list(ex.map(_replicate_chunk, chunks))
        ks = np.empty(n_boot)
        for j, part in enumerate(parts):
            ks[j::n_jobs] = part
    else:
        ks = np.array([_replicate_ks(a) for a in args])
    p = float(np.count_nonzero(ks >= fit.ks)) / n_boot
    return GofResult(p, n_boot, seed, fit.ks, tuple(float(v) for v in ks))


# -- per-community report ----------------------------------------------------


@dataclass
class TailRow:
    community: str
    direction: str
    n: int
    p_value: float | None = None
    alpha: float | None = None
    xmin: int | None = None
    ks: float | None = None
    skipped: bool = False

    def verdict(self, threshold: float = 0.05) -> str:
        if self.skipped:
            return "skipped"
        return "reject" if self.p_value < threshold else "fail-to-reject"


def degree_sequences(g: nx.DiGraph) -> list[tuple[str, str, np.ndarray]]:
    """(community, direction, degrees) for each community plus the whole network.

    Community members' degrees count every edge of the full graph, not only
    edges inside the community.
    """
    out = []
    indeg, outdeg = dict(g.in_degree()), dict(g.out_degree())
    labels = [lab for lab in communities(g) if lab != UNLABELED]
    for lab in labels:
        members = [v for v, d in g.nodes(data=True) if d.get("label") == lab]
        out.append((lab, "in", np.array([indeg[v] for v in members], dtype=np.int64)))
        out.append((lab, "out", np.array([outdeg[v] for v in members], dtype=np.int64)))
    nodes = list(g.nodes())
    und = g.to_undirected()
    out.append(("All", "in", np.array([indeg[v] for v in nodes], dtype=np.int64)))
    out.append(("All", "out", np.array([outdeg[v] for v in nodes], dtype=np.int64)))
    out.append(("All", "undirected", np.array([und.degree(v) for v in nodes], dtype=np.int64)))
    return out


def community_tail_report(g: nx.DiGraph, n_boot: int = 2500, seed: int = 0,
                          threshold: float = 0.05, n_jobs: int = 1) -> list[TailRow]:
    """Fit and test in/out-degree tails per community and for the whole network.

    ``alpha`` is reported only where H0 survives at ``threshold``.
    """
    rows = []
    for lab, direction, seq in degree_sequences(g):
        positive = int(np.count_nonzero(seq > 0))
        try:
            fit = fit_power_law(seq)
        except InsufficientData as exc:
            log.info("%s/%s skipped: %s", lab, direction, exc)
            rows.append(TailRow(lab, direction, positive, skipped=True))
            continue
        gof = goodness_of_fit(seq, fit, n_boot=n_boot, seed=seed, n_jobs=n_jobs)
        keep_alpha = gof.p_value >= threshold
        rows.append(TailRow(
            lab, direction, positive,
            p_value=gof.p_value,
            alpha=fit.alpha if keep_alpha else None,
            xmin=fit.xmin,
            ks=fit.ks,
        ))
    return rows
