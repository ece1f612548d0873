"""Acceptance suite: one test per exit criterion, one printed line each.

Data-free criteria always run. Criteria that need the six converted public
corpora look for JSON-lines files under ``$CLAIMBENCH_DATA`` (default:
``data/`` in the repo root) named ``MT.jsonl``, ``OC.jsonl``, ``PE.jsonl``,
``VG.jsonl``, ``WD.jsonl``, ``WTP.jsonl`` plus ``embeddings.txt``; when those
are absent the tests skip with a warning instead of failing.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines.
"""

import itertools
import math
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from claimbench.corpus import SentenceLabel, corpus_stats, load_corpus, make_cv_splits
from claimbench.evaluation import (
    baseline_keyword,
    baseline_majority,
    baseline_random,
    majority_macro_f1_pct,
    make_spec,
    random_claim_f1_pct,
    run_cross_domain,
    run_in_domain,
    score,
)
from claimbench.learner import (
    EnsembleModel,
    TrainConfig,
    logreg_objective,
    predict_ensemble_batch,
    train_ensemble,
    train_logreg,
)
from claimbench.stats import (
    RegressionInput,
    lemma_similarity,
    ols,
    rank_average,
    spearman,
    wilcoxon_signed_rank,
)
from claimbench.synthetic import generate_synthetic

CLAIM = SentenceLabel.CLAIM
NON = SentenceLabel.NON_CLAIM

# Published statistics of the six public argument corpora this benchmark
# targets: sentences, claim-labeled sentences, documents, tokens.
PUBLISHED_COUNTS = {
    "MT": {"docs": 112, "tokens": 8865, "sentences": 449, "claims": 112, "ratio_pct": 24.94},
    "OC": {"docs": 2805, "tokens": 125677, "sentences": 8946, "claims": 703, "ratio_pct": 7.86},
    "PE": {"docs": 402, "tokens": 147271, "sentences": 7116, "claims": 2108, "ratio_pct": 29.62},
    "VG": {"docs": 507, "tokens": 60383, "sentences": 2842, "claims": 563, "ratio_pct": 19.81},
    "WD": {"docs": 340, "tokens": 84817, "sentences": 3899, "claims": 211, "ratio_pct": 5.41},
    "WTP": {"docs": 1985, "tokens": 189140, "sentences": 9140, "claims": 1138, "ratio_pct": 12.45},
}

# Majority-baseline Macro-F1 per corpus; follows from the claim ratios above
# through the closed form 100*(1-r)/(2-r).
REFERENCE_MAJORITY_MACRO = {
    "MT": 42.9, "OC": 48.0, "PE": 41.3, "VG": 44.5, "WD": 48.6, "WTP": 46.7,
}


def report(name: str, status: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {status}{suffix}")


def data_dir() -> Path:
    return Path(os.environ.get("CLAIMBENCH_DATA", Path(__file__).resolve().parent.parent / "data"))


def corpus_path(name: str) -> Path:
    return data_dir() / f"{name}.jsonl"


def require_corpora(criterion: str, names) -> dict:
    missing = [n for n in names if not corpus_path(n).exists()]
    if missing:
        report(criterion, "SKIP", f"corpora unavailable under {data_dir()}: {missing}")
        pytest.skip(f"converted corpora not available: {missing}")
    return {n: load_corpus(corpus_path(n), name=n) for n in names}


def gold_with_ratio(n_claims: int, n_sentences: int):
    return [CLAIM] * n_claims + [NON] * (n_sentences - n_claims)


class TestMajorityBaselineReference:
    def test_closed_form_and_score_path_match_reference(self):
        criterion = "majority-baseline-vs-reference"
        for name, counts in PUBLISHED_COUNTS.items():
            r = counts["claims"] / counts["sentences"]
            closed = majority_macro_f1_pct(r)
            assert abs(closed - REFERENCE_MAJORITY_MACRO[name]) <= 0.1, name
            gold = gold_with_ratio(counts["claims"], counts["sentences"])
            scored = score(baseline_majority(len(gold)), gold)
            assert scored.macro_f1_pct == pytest.approx(closed, abs=1e-9), name
            assert scored.claim_f1 == 0.0
        report(criterion, "PASS", "six corpora, closed form == score path, within 0.1")

    def test_on_real_corpora_when_available(self):
        criterion = "majority-baseline-on-real-corpora"
        corpora = require_corpora(criterion, PUBLISHED_COUNTS)
        for name, corpus in corpora.items():
            gold = corpus.labels()
            scored = score(baseline_majority(len(gold)), gold)
            assert abs(scored.macro_f1_pct - REFERENCE_MAJORITY_MACRO[name]) <= 0.1, name
        report(criterion, "PASS")


class TestRandomBaselineExpectation:
    def test_mean_claim_f1_over_200_seeds(self):
        criterion = "random-baseline-expectation"
        counts = PUBLISHED_COUNTS["MT"]
        gold = gold_with_ratio(counts["claims"], counts["sentences"])
        r = counts["claims"] / counts["sentences"]
        expected = random_claim_f1_pct(r)  # 33.3 for the MT ratio
        values = [
            score(baseline_random(len(gold), seed=s), gold).claim_f1_pct for s in range(200)
        ]
        mean = sum(values) / len(values)
        assert abs(mean - expected) <= 1.5
        assert abs(expected - 33.3) <= 0.05
        report(criterion, "PASS", f"mean {mean:.2f} vs expectation {expected:.2f}")


class TestDatasetStatistics:
    def test_reproduces_published_counts(self):
        criterion = "dataset-statistics"
        corpora = require_corpora(criterion, PUBLISHED_COUNTS)
        for name, corpus in corpora.items():
            stats = corpus_stats(corpus)
            counts = PUBLISHED_COUNTS[name]
            assert stats.n_docs == counts["docs"], name
            assert stats.n_tokens == counts["tokens"], name
            assert stats.n_sentences == counts["sentences"], name
            assert stats.n_claims == counts["claims"], name
            assert round(100 * stats.claim_ratio, 2) == counts["ratio_pct"], name
        report(criterion, "PASS")


class TestKeywordBaseline:
    def test_should_baseline_on_mt(self):
        criterion = "keyword-baseline-mt"
        corpora = require_corpora(criterion, ["MT"])
        corpus = corpora["MT"]
        preds = baseline_keyword(corpus.sentences(), "should")
        scored = score(preds, corpus.labels())
        assert abs(scored.macro_f1_pct - 76.1) <= 1.0
        report(criterion, "PASS", f"macro {scored.macro_f1_pct:.1f}")


class TestSimilarityMatrix:
    def test_diagonal_exact_on_any_corpus(self):
        criterion = "similarity-diagonal"
        for seed in (1, 5, 9):
            corpus = generate_synthetic(seed=seed, n_docs=15, claim_ratio=0.3, vocab_size=40)
            assert 100.0 * lemma_similarity(corpus, corpus) == 100.0
        report(criterion, "PASS", "diagonal exactly 100 on three corpora")

    def test_oc_to_wtp_when_available(self):
        criterion = "similarity-oc-wtp"
        corpora = require_corpora(criterion, ["OC", "WTP"])
        rho = lemma_similarity(corpora["OC"], corpora["WTP"])
        assert 0.66 <= rho <= 0.76
        report(criterion, "PASS", f"rho {rho:.3f}")


class TestLearnerCorrectness:
    def test_property_suite(self):
        criterion = "learner-properties"
        start = time.time()
        rng = np.random.default_rng(0)

        # Analytic gradient vs central differences on 100 random instances.
        worst = 0.0
        for _ in range(100):
            n, d = int(rng.integers(3, 20)), int(rng.integers(2, 12))
            X = sparse.random(n, d, density=0.4, random_state=rng, format="csr")
            y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
            lam = float(rng.uniform(0.0, 2.0))
            params = rng.normal(size=d + 1)
            _, grad = logreg_objective(params, X, y, lam)
            approx = np.zeros_like(params)
            for i in range(params.size):
                step = np.zeros_like(params)
                step[i] = 1e-5
                approx[i] = (
                    logreg_objective(params + step, X, y, lam)[0]
                    - logreg_objective(params - step, X, y, lam)[0]
                ) / 2e-5
            rel = float(np.linalg.norm(grad - approx) / max(np.linalg.norm(approx), 1e-12))
            worst = max(worst, rel)
            assert rel < 1e-4

        # Convexity: restarting from a random point reaches the same optimum.
        X = sparse.random(60, 15, density=0.4, random_state=rng, format="csr")
        labels = [CLAIM] * 30 + [NON] * 30
        y = np.array([1.0] * 30 + [-1.0] * 30)
        config = TrainConfig(l2_lambda=1.0, gradient_tolerance=1e-9, standardize=False)
        model_a = train_logreg(X, labels, config)
        model_b = train_logreg(
            X, labels, config, initial=np.random.default_rng(7).normal(scale=0.5, size=16)
        )
        j_a = logreg_objective(np.concatenate([model_a.weights, [model_a.bias]]), X, y, 1.0)[0]
        j_b = logreg_objective(np.concatenate([model_b.weights, [model_b.bias]]), X, y, 1.0)[0]
        assert abs(j_a - j_b) / max(abs(j_a), 1.0) < 1e-6

        # Duplicated data at doubled penalty gives the same optimum.
        model_dup = train_logreg(
            sparse.vstack([X, X]).tocsr(),
            labels + labels,
            TrainConfig(l2_lambda=2.0, gradient_tolerance=1e-9, standardize=False),
        )
        assert np.allclose(model_a.weights, model_dup.weights, atol=1e-5)

        # Majority vote is invariant under member permutation.
        ensemble = train_ensemble(X, [CLAIM] * 20 + [NON] * 40, TrainConfig(seed=3), n_members=6)
        X_test = sparse.csr_matrix(rng.normal(size=(25, 15)))
        base = predict_ensemble_batch(ensemble, X_test)
        perm = np.random.default_rng(1).permutation(6)
        shuffled = EnsembleModel(
            members=tuple(ensemble.members[i] for i in perm),
            member_seeds=tuple(ensemble.member_seeds[i] for i in perm),
        )
        assert predict_ensemble_batch(shuffled, X_test) == base

        elapsed = time.time() - start
        assert elapsed < 60.0
        report(criterion, "PASS", f"worst gradient error {worst:.2e}, {elapsed:.1f}s")


class TestStatisticsOracles:
    def test_wilcoxon_exact_vs_enumeration(self):
        criterion = "wilcoxon-exact-enumeration"
        rng = random.Random(3)
        checked = 0
        for n in range(1, 13):
            for _ in range(5):
                diffs = [rng.choice([-3, -2, -1, 1, 2, 3]) * rng.random() for _ in range(n)]
                result = wilcoxon_signed_rank(diffs, [0.0] * n)
                ranks = rank_average([abs(d) for d in diffs])
                w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
                ge = le = 0
                for signbits in itertools.product([0, 1], repeat=n):
                    w = sum(r for r, s in zip(ranks, signbits) if s)
                    ge += w >= w_plus - 1e-9
                    le += w <= w_plus + 1e-9
                expected = min(1.0, 2.0 * min(ge, le) / 2**n)
                assert result.p_value == pytest.approx(expected, abs=1e-12)
                checked += 1
        report(criterion, "PASS", f"{checked} cases, n = 1..12")

    def test_ols_vs_normal_equations(self):
        criterion = "ols-normal-equations"
        rng = np.random.default_rng(4)
        tested = 0
        while tested < 50:
            n = int(rng.integers(10, 50))
            p = int(rng.integers(2, 7))
            X = rng.normal(size=(n, p))
            if np.linalg.matrix_rank(X) < p or np.linalg.cond(X) > 1e6:
                continue
            tested += 1
            y = rng.normal(size=n)
            data = RegressionInput(
                tuple(("s", str(i)) for i in range(n)), y, X, tuple(f"c{j}" for j in range(p))
            )
            fit = ols(data)
            beta = np.linalg.solve(X.T @ X, X.T @ y)
            resid = y - X @ beta
            sigma2 = float(resid @ resid) / (n - p)
            se = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))
            assert np.allclose(fit.coefficients, beta, atol=1e-8)
            assert np.allclose(fit.std_errors, se, atol=1e-8)
        report(criterion, "PASS", "50 random well-conditioned designs at 1e-8")

    def test_spearman_hand_value_and_monotone_invariance(self):
        criterion = "spearman-oracles"
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
        rng = random.Random(5)
        for _ in range(50):
            n = rng.randint(3, 40)
            x = [rng.gauss(0, 1) for _ in range(n)]
            y = [rng.gauss(0, 1) for _ in range(n)]
            mapped = [math.exp(2.0 * v) + 1.0 for v in y]  # strictly increasing
            assert spearman(x, mapped) == pytest.approx(spearman(x, y), abs=1e-12)
        report(criterion, "PASS", "0.8 hand case + 50 monotone maps")


class TestEndToEndLearnability:
    def test_lexical_learner_beats_majority_by_ten_points(self):
        criterion = "end-to-end-learnability"
        start = time.time()
        corpus = generate_synthetic(seed=1, n_docs=200, claim_ratio=0.25, vocab_size=200, name="E2E")
        stats = corpus_stats(corpus)
        splits = make_cv_splits(corpus, 10, seed=2)
        spec = make_spec("LR_PLUS_LEXICAL", train=TrainConfig(seed=3), n_members=20)
        result = run_in_domain(corpus, spec, splits)
        majority = majority_macro_f1_pct(stats.claim_ratio)
        margin = result.report.macro_f1_pct - majority
        elapsed = time.time() - start
        assert margin >= 10.0
        assert elapsed < 300.0
        report(criterion, "PASS", f"margin {margin:.1f} points in {elapsed:.0f}s")


class TestSoftReproduction:
    """Indicative reproduction checks; deviations are reported, not failed."""

    def test_in_domain_mt_and_cross_domain_vg_mt(self):
        criterion = "soft-reproduction"
        names = ["MT", "VG"]
        corpora = require_corpora(criterion, names)
        embeddings = data_dir() / "embeddings.txt"
        if not embeddings.exists():
            report(criterion, "SKIP", f"embedding table not found at {embeddings}")
            pytest.skip("embedding table unavailable")
        from claimbench.features import load_embeddings

        table = load_embeddings(embeddings)
        spec = make_spec("LR_ALL", train=TrainConfig(seed=13), n_members=20)

        splits = make_cv_splits(corpora["MT"], 10, seed=13)
        in_domain = run_in_domain(corpora["MT"], spec, splits, table)
        cross = run_cross_domain(corpora["VG"], corpora["MT"], spec, table)

        in_ok = abs(in_domain.report.macro_f1_pct - 74.4) <= 5.0
        cross_ok = abs(cross.report.macro_f1_pct - 65.8) <= 5.0
        detail = (
            f"in-domain MT macro {in_domain.report.macro_f1_pct:.1f} (target 74.4+-5), "
            f"VG->MT macro {cross.report.macro_f1_pct:.1f} (target 65.8+-5)"
        )
        report(criterion, "PASS" if (in_ok and cross_ok) else "DEVIATION", detail)
        # Indicative, not gating: preprocessing differences are documented in
        # the report line rather than failing the suite.
