import itertools
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimbench.corpus import Corpus, DatasetStats, build_document
from claimbench.stats import (
    AnalysisError,
    RegressionInput,
    SimilarityMatrix,
    build_regression_input,
    compare_systems,
    lemma_frequencies,
    lemma_similarity,
    ols,
    rank_average,
    similarity_matrix,
    spearman,
    wilcoxon_signed_rank,
)
from helpers import other_tokens


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------


def wilcoxon_enumeration_oracle(diffs):
    """Exact two-sided p by explicit iteration over all sign assignments."""
    d = [x for x in diffs if x != 0]
    n = len(d)
    ranks = rank_average([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    ge = le = 0
    total = 0
    for signs in itertools.product([0, 1], repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        total += 1
        if w >= w_plus - 1e-9:
            ge += 1
        if w <= w_plus + 1e-9:
            le += 1
    return min(1.0, 2.0 * min(ge, le) / total)


def ols_normal_equations_oracle(X, y):
    """Coefficients, standard errors, t stats via explicit normal equations."""
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ y)
    resid = y - X @ beta
    df = X.shape[0] - X.shape[1]
    sigma2 = float(resid @ resid) / df
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(XtX)))
    return beta, se, beta / se, df


def t_sf_oracle(t, df):
    """Two-sided t-test p-value through the regularized incomplete beta."""
    import mpmath

    x = df / (df + t * t)
    return float(mpmath.betainc(df / 2.0, 0.5, 0, x, regularized=True))


# ---------------------------------------------------------------------------
# Spearman
# ---------------------------------------------------------------------------


class TestSpearman:
    def test_identical_order(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed_order(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_case_point_eight(self):
        # Ranks equal values; d^2 = (0,1,1,0): 1 - 6*2/(4*15) = 0.8.
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_vector_rejected(self):
        with pytest.raises(AnalysisError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(AnalysisError):
            spearman([1, 2, 3], [1, 2])

    def test_too_short(self):
        with pytest.raises(AnalysisError):
            spearman([1, 2], [1, 2])

    def test_self_correlation_is_exactly_one(self):
        rng = random.Random(0)
        x = [rng.random() for _ in range(50)]
        assert spearman(x, x) == 1.0

    @given(
        st.lists(st.integers(-50, 50), min_size=3, max_size=30),
        st.floats(0.1, 4.0),
        st.floats(-5.0, 5.0),
    )
    @settings(max_examples=80)
    def test_monotone_invariance(self, xs, a, b):
        rng = random.Random(1234)
        ys = [rng.random() for _ in xs]
        mapped = [a * math.exp(y) + b for y in ys]  # strictly increasing in y
        try:
            base = spearman(xs, ys)
        except AnalysisError:
            return  # constant x
        assert spearman(xs, mapped) == pytest.approx(base, abs=1e-12)
        assert -1.0 <= base <= 1.0

    def test_tie_handling_matches_fractional_ranks(self):
        assert list(rank_average([10, 20, 20, 30])) == [1.0, 2.5, 2.5, 4.0]


# ---------------------------------------------------------------------------
# Lemma similarity
# ---------------------------------------------------------------------------


def word_corpus(name, words):
    docs = []
    for i, chunk in enumerate(words):
        docs.append(build_document(f"{name}{i}", [(other_tokens(*chunk), 0)]))
    return Corpus(name=name, documents=tuple(docs))


class TestLemmaSimilarity:
    def test_self_similarity_exactly_one(self, small_corpus):
        assert lemma_similarity(small_corpus, small_corpus) == 1.0

    def test_diagonal_of_matrix(self, small_corpus, cue_corpus):
        sim = similarity_matrix([small_corpus, cue_corpus], top_k=100)
        for name in sim.names:
            assert sim.get(name, name) == 1.0

    def test_scale_invariance(self):
        src = word_corpus("S", [["a"] * 5 + ["b"] * 3 + ["c"] * 2 + ["d"]])
        tgt = word_corpus("T", [["a"] * 4 + ["b"] * 3 + ["c"] * 2 + ["d"]])
        doubled = word_corpus("T2", [["a"] * 8 + ["b"] * 6 + ["c"] * 4 + ["d"] * 2])
        assert lemma_similarity(src, tgt, top_k=4) == pytest.approx(
            lemma_similarity(src, doubled, top_k=4)
        )

    def test_source_anchoring_is_directional(self):
        src = word_corpus("S", [["a"] * 9 + ["b"] * 5 + ["c"] * 2 + ["x"]])
        tgt = word_corpus("T", [["c"] * 9 + ["b"] * 5 + ["a"] * 2 + ["y"] * 8])
        assert lemma_similarity(src, tgt, top_k=3) != pytest.approx(
            lemma_similarity(tgt, src, top_k=3)
        )

    def test_missing_lemmas_count_zero(self):
        # "b" is frequent in the source but absent in the target, so its
        # target rank collapses to the bottom; rho = 1 - 6*2/(3*8) = 0.5.
        src = word_corpus("S", [["a"] * 3 + ["b"] * 2 + ["c"]])
        tgt = word_corpus("T", [["a"] * 3 + ["c"] * 1 + ["z"] * 5])
        assert lemma_similarity(src, tgt, top_k=3) == pytest.approx(0.5)

    def test_lemma_fallback_is_lowercased_surface(self):
        corpus = word_corpus("S", [["Apple", "APPLE", "apple"]])
        assert lemma_frequencies(corpus)["apple"] == 3


# ---------------------------------------------------------------------------
# Regression
# ---------------------------------------------------------------------------


def fake_stats(n_sentences, n_claims):
    return DatasetStats(
        n_docs=10,
        n_tokens=n_sentences * 10,
        n_sentences=n_sentences,
        n_claims=n_claims,
        claim_ratio=round(n_claims / n_sentences, 4),
    )


def full_grid(names, value=50.0):
    return {(s, t): value + hash((s, t)) % 7 for s in names for t in names if s != t}


def flat_similarity(names, rho=0.5):
    values = {(s, t): 1.0 if s == t else rho + 0.01 * (hash((s, t)) % 11) for s in names for t in names}
    return SimilarityMatrix(names=tuple(sorted(names)), values=values)


SIX = ("MT", "OC", "PE", "VG", "WD", "WTP")
SIX_STATS = {
    "MT": fake_stats(449, 112),
    "OC": fake_stats(8946, 703),
    "PE": fake_stats(7116, 2108),
    "VG": fake_stats(2842, 563),
    "WD": fake_stats(3899, 211),
    "WTP": fake_stats(9140, 1138),
}


class TestBuildRegressionInput:
    def test_six_corpora_row_and_column_counts(self):
        data = build_regression_input(
            full_grid(SIX), flat_similarity(SIX), SIX_STATS, drop_reference_dummy=False
        )
        assert len(data.row_keys) == 30
        assert data.design.shape == (30, 9)  # 3 regressors + 6 source indicators

    def test_dummy_column_sums(self):
        data = build_regression_input(
            full_grid(SIX), flat_similarity(SIX), SIX_STATS, drop_reference_dummy=False
        )
        for j, name in enumerate(data.columns):
            if name.startswith("src:"):
                assert data.design[:, j].sum() == 5.0  # one row per target

    def test_target_ratio_is_claims_over_non_claims(self):
        data = build_regression_input(full_grid(SIX), flat_similarity(SIX), SIX_STATS)
        j = data.columns.index("target_claim_ratio")
        oc_rows = [i for i, (s, t) in enumerate(data.row_keys) if t == "OC"]
        assert round(float(data.design[oc_rows[0], j]), 4) == 0.0853  # 703/8243

    def test_log_claims_natural_log(self):
        data = build_regression_input(full_grid(SIX), flat_similarity(SIX), SIX_STATS)
        j = data.columns.index("log_claims")
        mt_rows = [i for i, (s, t) in enumerate(data.row_keys) if s == "MT"]
        assert float(data.design[mt_rows[0], j]) == pytest.approx(math.log(112))

    def test_missing_cell_named(self):
        grid = full_grid(SIX)
        del grid[("MT", "OC")]
        with pytest.raises(AnalysisError) as err:
            build_regression_input(grid, flat_similarity(SIX), SIX_STATS)
        assert "MT" in str(err.value) and "OC" in str(err.value)

    def test_full_dummy_design_is_rank_deficient(self):
        data = build_regression_input(
            full_grid(SIX), flat_similarity(SIX), SIX_STATS, drop_reference_dummy=False
        )
        with pytest.raises(AnalysisError) as err:
            ols(data)
        assert "log_claims" in str(err.value)

    def test_reference_dropped_design_is_full_rank(self):
        data = build_regression_input(full_grid(SIX), flat_similarity(SIX), SIX_STATS)
        assert data.design.shape == (30, 8)
        fit = ols(data)
        assert fit.df_resid == 22


def random_full_rank_design(rng, n, p):
    X = rng.normal(size=(n, p))
    while np.linalg.matrix_rank(X) < p:
        X = rng.normal(size=(n, p))
    return X


class TestOls:
    def test_noiseless_recovery(self):
        # Claim ratios must differ across corpora or the target-ratio column
        # degenerates to a constant inside the indicator span.
        names = ("A", "B", "C", "D")
        sim = flat_similarity(names)
        counts = {"A": (449, 112), "B": (8946, 703), "C": (7116, 2108), "D": (2842, 563)}
        stats = {n: fake_stats(*counts[n]) for n in names}
        base = build_regression_input({k: 0.0 for k in full_grid(names)}, sim, stats)
        true_beta = np.array([2.0, 0.5, 1.0] + [3.0] * (len(base.columns) - 3))
        y = base.design @ true_beta
        data = RegressionInput(base.row_keys, y, base.design, base.columns)
        fit = ols(data)
        assert np.allclose(fit.coefficients, true_beta, atol=1e-8)
        assert fit.r_squared == pytest.approx(1.0)

    def test_orthogonal_dummy_recovery(self):
        # y equal to one indicator column: that coefficient 1, all others 0.
        rng = np.random.default_rng(1)
        X = np.hstack([random_full_rank_design(rng, 20, 3), np.eye(20)[:, :2]])
        y = X[:, 3].copy()
        data = RegressionInput(tuple(("s", str(i)) for i in range(20)), y, X, tuple(f"c{i}" for i in range(5)))
        fit = ols(data)
        expected = np.zeros(5)
        expected[3] = 1.0
        assert np.allclose(fit.coefficients, expected, atol=1e-8)

    def test_five_row_hand_case_matches_normal_equations(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0], [1.0, 4.0]])
        y = np.array([1.0, 2.0, 2.0, 4.0, 5.0])
        data = RegressionInput((("a", "b"),) * 5, y, X, ("intercept", "slope"))
        fit = ols(data)
        beta, se, t, df = ols_normal_equations_oracle(X, y)
        assert np.allclose(fit.coefficients, beta, atol=1e-12)
        assert np.allclose(fit.std_errors, se, atol=1e-12)
        assert np.allclose(fit.t_stats, t, atol=1e-12)
        assert fit.df_resid == df

    def test_matches_oracle_on_random_designs(self):
        rng = np.random.default_rng(2)
        for trial in range(50):
            n = int(rng.integers(8, 40))
            p = int(rng.integers(2, min(6, n - 2)))
            X = random_full_rank_design(rng, n, p)
            y = rng.normal(size=n)
            data = RegressionInput(
                tuple(("s", str(i)) for i in range(n)), y, X, tuple(f"c{j}" for j in range(p))
            )
            fit = ols(data)
            beta, se, t, df = ols_normal_equations_oracle(X, y)
            assert np.allclose(fit.coefficients, beta, atol=1e-8)
            assert np.allclose(fit.std_errors, se, atol=1e-8)
            for j in range(p):
                assert fit.p_values[j] == pytest.approx(t_sf_oracle(t[j], df), abs=1e-10)

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(3)
        X = random_full_rank_design(rng, 30, 5)
        y = rng.normal(size=30)
        data = RegressionInput(tuple(("s", str(i)) for i in range(30)), y, X, tuple("abcde"))
        fit = ols(data)
        projections = X.T @ fit.residuals
        scale = max(float(np.abs(X.T @ y).max()), 1.0)
        assert float(np.abs(projections).max()) / scale < 1e-8

    def test_rank_deficiency_lists_columns(self):
        X = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 1.0], [3.0, 6.0, 7.0], [1.0, 2.0, 0.0]])
        data = RegressionInput((("a", "b"),) * 4, np.zeros(4), X, ("x", "two_x", "z"))
        with pytest.raises(AnalysisError) as err:
            ols(data)
        assert "x" in str(err.value) and "two_x" in str(err.value)

    def test_no_degrees_of_freedom(self):
        X = np.eye(3)
        data = RegressionInput((("a", "b"),) * 3, np.ones(3), X, ("a", "b", "c"))
        with pytest.raises(AnalysisError):
            ols(data)


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank
# ---------------------------------------------------------------------------


class TestWilcoxon:
    def test_identical_inputs_degenerate(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.p_value == 1.0
        assert result.degenerate
        assert result.n_effective == 0

    def test_antisymmetric_rank_sums(self):
        result = wilcoxon_signed_rank([1.0, -1.0, 2.0, -2.0], [0.0, 0.0, 0.0, 0.0])
        assert result.w_plus == 5.0
        assert result.w_minus == 5.0

    def test_frozen_enumeration_case(self):
        # d = [1,2,3,4,5,-6]: 14 of 64 assignments reach W+ >= 15, p = 28/64.
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0, -6.0], [0.0] * 6)
        assert result.method == "exact"
        assert result.p_value == pytest.approx(28 / 64)
        assert result.p_value == pytest.approx(
            wilcoxon_enumeration_oracle([1, 2, 3, 4, 5, -6])
        )

    def test_length_mismatch(self):
        with pytest.raises(AnalysisError):
            wilcoxon_signed_rank([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(AnalysisError):
            wilcoxon_signed_rank([], [])

    def test_exact_matches_enumeration_oracle(self):
        rng = random.Random(7)
        for n in range(1, 13):
            for _ in range(6):
                # Mix of ties and zeros to stress rank handling.
                diffs = [rng.choice([-3, -2, -1, 0, 1, 2, 3]) for _ in range(n)]
                a = [float(d) for d in diffs]
                b = [0.0] * n
                if all(d == 0 for d in diffs):
                    continue
                result = wilcoxon_signed_rank(a, b)
                assert result.method == "exact"
                assert result.p_value == pytest.approx(wilcoxon_enumeration_oracle(diffs), abs=1e-12)

    def test_rank_sum_identity(self):
        rng = random.Random(8)
        for _ in range(30):
            n = rng.randint(1, 25)
            a = [rng.gauss(0, 1) for _ in range(n)]
            b = [rng.gauss(0, 1) for _ in range(n)]
            result = wilcoxon_signed_rank(a, b)
            ne = result.n_effective
            assert result.w_plus + result.w_minus == pytest.approx(ne * (ne + 1) / 2)

    def test_exact_close_to_normal_at_twenty(self):
        rng = random.Random(9)
        for _ in range(10):
            a = [rng.gauss(0.2, 1.0) for _ in range(20)]
            b = [rng.gauss(0.0, 1.0) for _ in range(20)]
            exact = wilcoxon_signed_rank(a, b)  # n=20 still enumerates
            approx = wilcoxon_signed_rank(a, b, exact_threshold=0)
            assert exact.method == "exact" and approx.method == "normal"
            assert abs(exact.p_value - approx.p_value) < 0.03

    def test_large_n_uses_normal(self):
        rng = random.Random(10)
        a = [rng.gauss(0.5, 1.0) for _ in range(40)]
        b = [rng.gauss(0.0, 1.0) for _ in range(40)]
        assert wilcoxon_signed_rank(a, b).method == "normal"


class TestCompareSystems:
    def test_identical_systems_not_significant(self):
        scores = {f"k{i}": 60.0 + i for i in range(8)}
        comparison = compare_systems(scores, dict(scores))
        assert not comparison.significant
        assert comparison.wilcoxon.degenerate

    def test_constant_shift_on_ten_pairs(self):
        # All differences +1: only the all-positive assignment reaches W+,
        # so the exact two-sided p is 2/1024.
        base = {f"k{i}": 50.0 + i for i in range(10)}
        shifted = {k: v + 1.0 for k, v in base.items()}
        comparison = compare_systems(shifted, base)
        assert comparison.wilcoxon.p_value == pytest.approx(2 / 1024)
        assert comparison.significant

    def test_single_differing_pair(self):
        base = {"a": 1.0, "b": 2.0, "c": 3.0}
        other = {"a": 1.0, "b": 2.0, "c": 3.5}
        comparison = compare_systems(other, base)
        assert comparison.wilcoxon.n_effective == 1
        assert comparison.wilcoxon.p_value == 1.0
        assert not comparison.significant

    def test_pairing_mismatch(self):
        with pytest.raises(AnalysisError):
            compare_systems({"a": 1.0}, {"b": 1.0})
