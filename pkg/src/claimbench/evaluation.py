"""Metrics, experimental protocols, and trivial baselines.

Scores treat CLAIM as the positive class. Macro-F1 is the unweighted mean of
the two per-class F1 scores; Claim-F1 is the F1 of the claim class alone.
Any 0/0 ratio inside precision/recall/F1 is defined as 0.

Three protocols are provided: in-domain k-fold cross-validation over fixed
document splits (final report pooled over fold predictions, per-fold reports
retained for paired significance tests), cross-domain train-on-source /
test-on-target, and leave-one-domain-out with all remaining corpora pooled
into a single training set before downsampling. Target data only ever enters
the prediction path.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .corpus import Corpus, Sentence, SentenceLabel, SplitPlan
from .features import (
    ALL_GROUPS,
    EmbeddingTable,
    ExtractionWarnings,
    FeatureCutoffs,
    FeatureGroup,
    featurize_all,
    fit_feature_space,
    vectors_to_csr,
)
from .learner import (
    EnsembleModel,
    TrainConfig,
    ensure_space_fingerprint,
    predict_ensemble_batch,
    train_ensemble,
)
from .util import derive_seed


class EvaluationError(ValueError):
    pass


BASELINE_SYSTEMS = ("MAJORITY", "RANDOM", "KEYWORD")
LEARNER_SYSTEMS = (
    "LR_ALL",
    *(f"LR_MINUS_{g.value}" for g in sorted(FeatureGroup, key=lambda g: g.value)),
    *(f"LR_PLUS_{g.value}" for g in sorted(FeatureGroup, key=lambda g: g.value)),
)
SYSTEMS = LEARNER_SYSTEMS + BASELINE_SYSTEMS

PROTOCOLS = ("IN_DOMAIN", "CROSS_DOMAIN", "LODO")


def system_groups(system: str) -> frozenset[FeatureGroup]:
    """Feature groups used by a system name (empty for baselines)."""
    if system == "LR_ALL":
        return ALL_GROUPS
    if system.startswith("LR_MINUS_"):
        return ALL_GROUPS - {FeatureGroup(system.removeprefix("LR_MINUS_"))}
    if system.startswith("LR_PLUS_"):
        return frozenset({FeatureGroup(system.removeprefix("LR_PLUS_"))})
    if system in BASELINE_SYSTEMS:
        return frozenset()
    raise EvaluationError(f"unknown system {system!r}")


def is_learner_system(system: str) -> bool:
    return system.startswith("LR_")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, predictions: Sequence[SentenceLabel], gold: Sequence[SentenceLabel]) -> "ConfusionMatrix":
        tp = fp = fn = tn = 0
        for pred, ref in zip(predictions, gold):
            if ref is SentenceLabel.CLAIM:
                if pred is SentenceLabel.CLAIM:
                    tp += 1
                else:
                    fn += 1
            else:
                if pred is SentenceLabel.CLAIM:
                    fp += 1
                else:
                    tn += 1
        return cls(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ScoreReport:
    confusion: ConfusionMatrix
    claim: ClassScores
    non_claim: ClassScores
    macro_f1: float
    claim_f1: float

    @property
    def macro_f1_pct(self) -> float:
        return 100.0 * self.macro_f1

    @property
    def claim_f1_pct(self) -> float:
        return 100.0 * self.claim_f1


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _class_scores(tp: int, fp: int, fn: int) -> ClassScores:
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassScores(precision=precision, recall=recall, f1=f1)


def score(predictions: Sequence[SentenceLabel], gold: Sequence[SentenceLabel]) -> ScoreReport:
    if len(predictions) != len(gold):
        raise EvaluationError(f"predictions/gold length mismatch: {len(predictions)} != {len(gold)}")
    if not gold:
        raise EvaluationError("cannot score an empty prediction list")
    cm = ConfusionMatrix.from_labels(predictions, gold)
    claim = _class_scores(cm.tp, cm.fp, cm.fn)
    non_claim = _class_scores(cm.tn, cm.fn, cm.fp)  # NON_CLAIM as positive
    return ScoreReport(
        confusion=cm,
        claim=claim,
        non_claim=non_claim,
        macro_f1=(claim.f1 + non_claim.f1) / 2.0,
        claim_f1=claim.f1,
    )


def majority_macro_f1_pct(claim_ratio: float) -> float:
    """Closed-form Macro-F1 (in percent) of the all-non-claim predictor.

    With claim ratio r, the claim F1 is 0 and the non-claim F1 is
    2(1-r)/(2-r), so the macro score is 100*(1-r)/(2-r).
    """
    return 100.0 * (1.0 - claim_ratio) / (2.0 - claim_ratio)


def random_claim_f1_pct(claim_ratio: float, p: float = 0.5) -> float:
    """Expected Claim-F1 (percent) of the Bernoulli(p) random predictor."""
    r = claim_ratio
    return 100.0 * 2 * p * r / (r + p)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def baseline_majority(n: int) -> list[SentenceLabel]:
    """Label everything as the predominant class (non-claim)."""
    return [SentenceLabel.NON_CLAIM] * n


def baseline_random(n: int, seed: int, p: float = 0.5) -> list[SentenceLabel]:
    rng = random.Random(seed)
    return [SentenceLabel.CLAIM if rng.random() < p else SentenceLabel.NON_CLAIM for _ in range(n)]


def baseline_keyword(sentences: Sequence[Sentence], word: str = "should") -> list[SentenceLabel]:
    """Claim iff the sentence contains the keyword as a whole lowercased token."""
    word = word.lower()
    return [
        SentenceLabel.CLAIM if any(t.surface.lower() == word for t in s.tokens) else SentenceLabel.NON_CLAIM
        for s in sentences
    ]


# ---------------------------------------------------------------------------
# Experiment specification and protocol runners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    system: str
    groups: frozenset[FeatureGroup] = field(default_factory=frozenset)
    cutoffs: FeatureCutoffs = field(default_factory=FeatureCutoffs)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_members: int = 20
    keyword: str = "should"
    protocol: str | None = None
    sources: tuple[str, ...] | None = None
    target: str | None = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise EvaluationError(f"unknown system {self.system!r}; expected one of {SYSTEMS}")
        if self.protocol is not None and self.protocol not in PROTOCOLS:
            raise EvaluationError(f"unknown protocol {self.protocol!r}")
        if not self.groups:
            object.__setattr__(self, "groups", system_groups(self.system))


def make_spec(
    system: str,
    train: TrainConfig | None = None,
    cutoffs: FeatureCutoffs | None = None,
    n_members: int = 20,
    keyword: str = "should",
    **kwargs,
) -> ExperimentSpec:
    return ExperimentSpec(
        system=system,
        groups=system_groups(system),
        cutoffs=cutoffs or FeatureCutoffs(),
        train=train or TrainConfig(),
        n_members=n_members,
        keyword=keyword,
        **kwargs,
    )


@dataclass(frozen=True)
class ProtocolResult:
    report: ScoreReport
    per_fold: tuple[ScoreReport, ...] = ()
    warnings: ExtractionWarnings = field(default_factory=ExtractionWarnings)


def predict_sentences(
    ensemble: EnsembleModel,
    space,
    sentences: Sequence[Sentence],
    table: EmbeddingTable | None = None,
    warnings: ExtractionWarnings | None = None,
) -> list[SentenceLabel]:
    """Featurize in the given space and apply the ensemble's majority vote.

    Refuses to predict when the ensemble was trained against a different
    feature space (fingerprint mismatch), which matters for models loaded
    from disk.
    """
    ensure_space_fingerprint(ensemble, space.fingerprint())
    vecs = featurize_all(sentences, space, table, warnings)
    return predict_ensemble_batch(ensemble, vectors_to_csr(vecs, space.n_columns))


def _train_and_predict(
    train_sents: list[Sentence],
    train_labels: list[SentenceLabel],
    test_sents: list[Sentence],
    spec: ExperimentSpec,
    table: EmbeddingTable | None,
    seed: int,
    warnings: ExtractionWarnings,
) -> list[SentenceLabel]:
    """Fit a feature space on training data only, train the ensemble, predict."""
    embedding_dim = table.dim if (table is not None and FeatureGroup.EMBEDDING in spec.groups) else 0
    space = fit_feature_space(train_sents, spec.groups, spec.cutoffs, embedding_dim=embedding_dim)
    train_vecs = featurize_all(train_sents, space, table, warnings)
    config = replace(spec.train, seed=seed)
    ensemble = train_ensemble(
        train_vecs,
        train_labels,
        config,
        n_members=spec.n_members,
        dim=space.n_columns,
        real_columns=space.real_mask(),
        space_fingerprint=space.fingerprint(),
    )
    return predict_sentences(ensemble, space, test_sents, table, warnings)


def _predict_for_system(
    spec: ExperimentSpec,
    train_sents: list[Sentence],
    train_labels: list[SentenceLabel],
    test_sents: list[Sentence],
    table: EmbeddingTable | None,
    seed: int,
    warnings: ExtractionWarnings,
) -> list[SentenceLabel]:
    if spec.system == "MAJORITY":
        return baseline_majority(len(test_sents))
    if spec.system == "RANDOM":
        return baseline_random(len(test_sents), seed)
    if spec.system == "KEYWORD":
        return baseline_keyword(test_sents, spec.keyword)
    return _train_and_predict(train_sents, train_labels, test_sents, spec, table, seed, warnings)


def run_in_domain(
    corpus: Corpus,
    spec: ExperimentSpec,
    splits: SplitPlan,
    table: EmbeddingTable | None = None,
) -> ProtocolResult:
    """k-fold cross-validation; pooled report plus per-fold reports.

    Every sentence is predicted exactly once, by the model whose training
    folds exclude its document.
    """
    assigned = set(splits.assignment)
    doc_ids = {doc.id for doc in corpus.documents}
    if assigned != doc_ids:
        raise EvaluationError("split plan does not cover the corpus documents exactly")

    warnings = ExtractionWarnings()
    pooled_gold: list[SentenceLabel] = []
    pooled_pred: list[SentenceLabel] = []
    per_fold: list[ScoreReport] = []
    for fold in range(splits.k):
        test_docs = [doc for doc in corpus.documents if splits.assignment[doc.id] == fold]
        train_docs = [doc for doc in corpus.documents if splits.assignment[doc.id] != fold]
        test_sents = [s for doc in test_docs for s in doc.sentences]
        train_sents = [s for doc in train_docs for s in doc.sentences]
        train_labels = [s.label for s in train_sents]
        if not test_sents:
            continue
        if is_learner_system(spec.system) and len(set(train_labels)) < 2:
            raise EvaluationError(f"fold {fold}: training data contains a single class")
        preds = _predict_for_system(
            spec, train_sents, train_labels, test_sents,
            table, derive_seed(spec.train.seed, "fold", fold), warnings,
        )
        gold = [s.label for s in test_sents]
        per_fold.append(score(preds, gold))
        pooled_gold.extend(gold)
        pooled_pred.extend(preds)
    return ProtocolResult(report=score(pooled_pred, pooled_gold), per_fold=tuple(per_fold), warnings=warnings)


def run_cross_domain(
    source: Corpus,
    target: Corpus,
    spec: ExperimentSpec,
    table: EmbeddingTable | None = None,
) -> ProtocolResult:
    """Train on the entire source corpus, score on the entire target corpus."""
    if source.name == target.name:
        raise EvaluationError(f"source and target must differ, both are {source.name!r}")
    warnings = ExtractionWarnings()
    train_sents = source.sentences()
    train_labels = source.labels()
    test_sents = target.sentences()
    if is_learner_system(spec.system) and len(set(train_labels)) < 2:
        raise EvaluationError(f"source corpus {source.name!r} contains a single class")
    preds = _predict_for_system(
        spec, train_sents, train_labels, test_sents, table, spec.train.seed, warnings
    )
    return ProtocolResult(report=score(preds, [s.label for s in test_sents]), warnings=warnings)


def run_lodo(
    corpora: Sequence[Corpus],
    held_out: str,
    spec: ExperimentSpec,
    table: EmbeddingTable | None = None,
) -> ProtocolResult:
    """Train on the concatenation of all corpora except one, test on it."""
    if len(corpora) < 2:
        raise EvaluationError("leave-one-domain-out needs at least two corpora")
    by_name = {c.name: c for c in corpora}
    if held_out not in by_name:
        raise EvaluationError(f"held-out corpus {held_out!r} not among {sorted(by_name)}")
    target = by_name[held_out]
    sources = [c for c in corpora if c.name != held_out]

    warnings = ExtractionWarnings()
    train_sents = [s for c in sources for s in c.sentences()]
    train_labels = [s.label for s in train_sents]
    test_sents = target.sentences()
    if is_learner_system(spec.system) and len(set(train_labels)) < 2:
        raise EvaluationError("pooled training data contains a single class")
    preds = _predict_for_system(
        spec, train_sents, train_labels, test_sents, table, spec.train.seed, warnings
    )
    return ProtocolResult(report=score(preds, [s.label for s in test_sents]), warnings=warnings)
