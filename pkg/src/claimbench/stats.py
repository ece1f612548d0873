"""Statistical analysis of experiment results.

Three tools: Spearman rank correlation over source-anchored top-k lemma
frequencies (pairwise corpus similarity), ordinary least squares with
classical inference for regressing cross-domain scores on candidate
determinants, and the two-tailed Wilcoxon signed-rank test for matched
system comparisons (exact by full sign enumeration up to a size threshold,
normal approximation with tie and continuity corrections beyond it).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .corpus import Corpus, DatasetStats

logger = logging.getLogger(__name__)

EXACT_WILCOXON_MAX_N = 20


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Rank correlation
# ---------------------------------------------------------------------------


def rank_average(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, ties sharing the average of their positions."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.shape[0], dtype=np.float64)
    i = 0
    while i < a.shape[0]:
        j = i
        while j + 1 < a.shape[0] and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks (fractional ranks on ties)."""
    if len(x) != len(y):
        raise AnalysisError(f"length mismatch: {len(x)} != {len(y)}")
    if len(x) < 3:
        raise AnalysisError(f"need at least 3 observations, got {len(x)}")
    rx = rank_average(x)
    ry = rank_average(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise AnalysisError("correlation undefined for a constant vector")
    if np.array_equal(rx, ry):
        return 1.0
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))


def lemma_frequencies(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for sent in corpus.sentences():
        counts.update(t.lemma_or_surface for t in sent.tokens)
    return counts


def lemma_similarity(source: Corpus, target: Corpus, top_k: int = 500) -> float:
    """Spearman correlation of the source's top-k lemma frequencies vs the target's.

    The vocabulary is anchored on the source (its top-k most frequent
    lemmas, ties at the cutoff broken lexicographically); lemmas absent from
    the target count as frequency 0 there. Anchoring makes the measure
    directional, so the pairwise matrix is generally asymmetric.
    """
    src_counts = lemma_frequencies(source)
    tgt_counts = lemma_frequencies(target)
    if len(src_counts) < top_k:
        logger.warning(
            "corpus %s has only %d distinct lemmas (< top_k=%d); using all",
            source.name, len(src_counts), top_k,
        )
    ranked = sorted(src_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    x = [float(count) for _, count in ranked]
    y = [float(tgt_counts.get(lemma, 0)) for lemma, _ in ranked]
    return spearman(x, y)


@dataclass(frozen=True)
class SimilarityMatrix:
    names: tuple[str, ...]
    values: dict[tuple[str, str], float]  # (source, target) -> rho in [-1, 1]

    def get(self, source: str, target: str) -> float:
        return self.values[(source, target)]


def similarity_matrix(corpora: Sequence[Corpus], top_k: int = 500) -> SimilarityMatrix:
    names = tuple(sorted(c.name for c in corpora))
    by_name = {c.name: c for c in corpora}
    values = {}
    for s in names:
        for t in names:
            values[(s, t)] = lemma_similarity(by_name[s], by_name[t], top_k=top_k)
    return SimilarityMatrix(names=names, values=values)


# ---------------------------------------------------------------------------
# OLS regression with classical inference
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionInput:
    row_keys: tuple[tuple[str, str], ...]
    y: np.ndarray
    design: np.ndarray
    columns: tuple[str, ...]


@dataclass(frozen=True)
class RegressionResult:
    columns: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residuals: np.ndarray
    r_squared: float
    df_resid: int

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.columns.index(name)])


def build_regression_input(
    results: Mapping[tuple[str, str], float],
    sim: SimilarityMatrix,
    stats_by_corpus: Mapping[str, DatasetStats],
    drop_reference_dummy: bool = True,
) -> RegressionInput:
    """Design matrix for regressing cross-domain scores on their determinants.

    One row per ordered (source, target) pair with source != target. The
    regressors are the source-to-target lemma similarity (in percent), the
    natural log of the source's claim count, the target's claim-to-non-claim
    ratio, and per-source indicator columns. There is no global intercept;
    the indicators span per-source intercepts.

    A full set of indicators makes the log-claim-count column an exact
    linear combination of them (it is constant within each source), so by
    default the lexicographically first source serves as the reference and
    its indicator is dropped, keeping the design full rank.
    ``drop_reference_dummy=False`` yields the literal full-dummy design,
    which OLS will reject as rank deficient.
    """
    names = tuple(sorted(stats_by_corpus))
    if len(names) < 2:
        raise AnalysisError("need at least two corpora")
    row_keys = [(s, t) for s in names for t in names if s != t]
    missing = [key for key in row_keys if key not in results]
    if missing:
        raise AnalysisError(f"results grid incomplete; missing cells: {missing}")

    dummy_names = names[1:] if drop_reference_dummy else names
    columns = ("similarity", "log_claims", "target_claim_ratio") + tuple(f"src:{n}" for n in dummy_names)
    rows = []
    y = []
    for s, t in row_keys:
        st = stats_by_corpus[s]
        tt = stats_by_corpus[t]
        if st.n_claims <= 0:
            raise AnalysisError(f"corpus {s!r} has no claims; log(#claims) undefined")
        if tt.n_sentences <= tt.n_claims:
            raise AnalysisError(f"corpus {t!r} has no non-claims; claim ratio undefined")
        row = [
            100.0 * sim.get(s, t),
            math.log(st.n_claims),
            tt.n_claims / (tt.n_sentences - tt.n_claims),
        ]
        row += [1.0 if s == n else 0.0 for n in dummy_names]
        rows.append(row)
        y.append(results[(s, t)])
    return RegressionInput(
        row_keys=tuple(row_keys),
        y=np.array(y, dtype=np.float64),
        design=np.array(rows, dtype=np.float64),
        columns=columns,
    )


def _collinear_columns(X: np.ndarray, columns: Sequence[str]) -> list[str]:
    full_rank = np.linalg.matrix_rank(X)
    involved = []
    for j in range(X.shape[1]):
        reduced = np.delete(X, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full_rank:
            involved.append(columns[j])
    return involved


def ols(data: RegressionInput) -> RegressionResult:
    """Least squares with classical standard errors and two-sided t-tests."""
    X = data.design
    y = data.y
    n, p = X.shape
    if n <= p:
        raise AnalysisError(f"no residual degrees of freedom: {n} rows, {p} columns")
    if np.linalg.matrix_rank(X) < p:
        raise AnalysisError(f"design matrix is rank deficient; collinear columns: {_collinear_columns(X, data.columns)}")
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    df = n - p
    sigma2 = rss / df
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    t = np.where(np.isnan(t), 0.0, t)  # 0/0: zero coefficient with zero residual error
    p_values = 2.0 * scipy_stats.t.sf(np.abs(t), df)
    centered = y - y.mean()
    tss = float(centered @ centered)
    if tss > 0:
        r_squared = 1.0 - rss / tss
    else:
        r_squared = 1.0 if rss == 0 else 0.0
    return RegressionResult(
        columns=data.columns,
        coefficients=beta,
        std_errors=se,
        t_stats=t,
        p_values=p_values,
        residuals=residuals,
        r_squared=r_squared,
        df_resid=df,
    )


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_plus: float
    w_minus: float
    p_value: float
    method: str  # "exact" | "normal" | "degenerate"

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def _exact_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    # Distribution of W+ under H0 by full enumeration of the 2^n sign
    # assignments; built by doubling so memory stays at one float per
    # assignment. Fractional (tied) ranks are compared with a tolerance.
    sums = np.zeros(1)
    for r in ranks:
        sums = np.concatenate([sums, sums + r])
    eps = 1e-9
    total = sums.shape[0]
    ge = int((sums >= w_plus - eps).sum())
    le = int((sums <= w_plus + eps).sum())
    return min(1.0, 2.0 * min(ge, le) / total)


def _normal_signed_rank_p(ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.shape[0]
    mean = n * (n + 1) / 4.0
    # Tie correction: subtract sum(t^3 - t)/48 over groups of tied |d|.
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts**3 - tie_counts).sum())) / 48.0
    if var <= 0:
        return 1.0
    diff = w_plus - mean
    # Continuity correction of 0.5 toward the mean.
    adj = max(abs(diff) - 0.5, 0.0)
    z = adj / math.sqrt(var)
    return math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(
    a: Sequence[float], b: Sequence[float], exact_threshold: int = EXACT_WILCOXON_MAX_N
) -> WilcoxonResult:
    """Two-tailed Wilcoxon signed-rank test on matched pairs.

    Zero differences are dropped; absolute differences are ranked with
    average ranks on ties. With at most ``exact_threshold`` effective pairs
    the two-sided p-value is exact (twice the smaller tail of the enumerated
    W+ distribution, capped at 1); beyond that a normal approximation with
    tie and continuity corrections is used. Identical inputs give p = 1 with
    the degenerate flag set.
    """
    if len(a) != len(b):
        raise AnalysisError(f"length mismatch: {len(a)} != {len(b)}")
    if not a:
        raise AnalysisError("need at least one pair")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    d = d[d != 0.0]
    n = d.shape[0]
    if n == 0:
        return WilcoxonResult(n_effective=0, w_plus=0.0, w_minus=0.0, p_value=1.0, method="degenerate")
    ranks = rank_average(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if n <= exact_threshold:
        p = _exact_signed_rank_p(ranks, w_plus)
        method = "exact"
    else:
        p = _normal_signed_rank_p(ranks, w_plus)
        method = "normal"
    return WilcoxonResult(n_effective=n, w_plus=w_plus, w_minus=w_minus, p_value=min(1.0, max(p, 0.0)), method=method)


@dataclass(frozen=True)
class SystemComparison:
    wilcoxon: WilcoxonResult
    alpha: float
    significant: bool


def compare_systems(
    reports_a: Mapping[object, float],
    reports_b: Mapping[object, float],
    alpha: float = 0.05,
) -> SystemComparison:
    """Paired signed-rank comparison of two systems' matched F1 scores."""
    if set(reports_a) != set(reports_b):
        only_a = sorted(str(k) for k in set(reports_a) - set(reports_b))
        only_b = sorted(str(k) for k in set(reports_b) - set(reports_a))
        raise AnalysisError(f"pairing mismatch; only in a: {only_a}, only in b: {only_b}")
    keys = sorted(reports_a, key=str)
    result = wilcoxon_signed_rank([reports_a[k] for k in keys], [reports_b[k] for k in keys])
    return SystemComparison(wilcoxon=result, alpha=alpha, significant=result.p_value <= alpha)
