"""Feature spaces and extractors for the five hand-crafted feature groups.

Groups: sentence structure, lexical unigrams, syntax (POS n-grams, parse
production rules, POS counts), discourse relation triples, and summed word
embeddings. A :class:`FeatureSpace` is fitted on training sentences only and
maps namespaced feature keys to contiguous column indices; extraction then
produces sparse vectors in that fixed layout.

Frequency cutoffs follow the usual setup for this task: top 4000 lowercased
unigrams, top 2000 POS n-grams (orders 2..4 ranked jointly), top 4000
production rules with a minimum corpus count of 5. Ties at a cutoff are
broken by lexicographic key order so fitting is deterministic.
"""

from __future__ import annotations

import json
import logging
import string
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .corpus import Sentence
from .util import fingerprint

logger = logging.getLogger(__name__)


class FeatureGroup(str, Enum):
    STRUCTURE = "STRUCTURE"
    LEXICAL = "LEXICAL"
    SYNTAX = "SYNTAX"
    DISCOURSE = "DISCOURSE"
    EMBEDDING = "EMBEDDING"


ALL_GROUPS = frozenset(FeatureGroup)

_GROUP_ORDER = (
    FeatureGroup.STRUCTURE,
    FeatureGroup.LEXICAL,
    FeatureGroup.SYNTAX,
    FeatureGroup.DISCOURSE,
    FeatureGroup.EMBEDDING,
)

# Per-column value kinds; count/real columns are the standardization targets.
KIND_BINARY = "binary"
KIND_COUNT = "count"
KIND_REAL = "real"

# Fixed structure feature set: paragraph position, length, punctuation.
STRUCTURE_KEYS = (
    ("struct:comma_count", KIND_COUNT),
    ("struct:ends_exclamation", KIND_BINARY),
    ("struct:ends_question", KIND_BINARY),
    ("struct:first_in_paragraph", KIND_BINARY),
    ("struct:has_quote", KIND_BINARY),
    ("struct:last_in_paragraph", KIND_BINARY),
    ("struct:punct_count", KIND_COUNT),
    ("struct:token_count", KIND_COUNT),
)

_PUNCT_CHARS = set(string.punctuation) | set("“”‘’…—–`")
# Whole-token quotation marks (PTB-style `` and '' included).
_QUOTE_TOKENS = {'"', "'", "``", "''", "“", "”", "‘", "’"}


class FeatureConfigError(ValueError):
    pass


class EmbeddingFormatError(ValueError):
    def __init__(self, message: str, *, line: int | None = None):
        super().__init__(f"{message} [line {line}]" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class FeatureCutoffs:
    unigram_limit: int = 4000
    pos_ngram_limit: int = 2000
    pos_ngram_min_n: int = 2
    pos_ngram_max_n: int = 4
    production_limit: int = 4000
    production_min_count: int = 5

    def to_dict(self) -> dict:
        return {
            "unigram_limit": self.unigram_limit,
            "pos_ngram_limit": self.pos_ngram_limit,
            "pos_ngram_min_n": self.pos_ngram_min_n,
            "pos_ngram_max_n": self.pos_ngram_max_n,
            "production_limit": self.production_limit,
            "production_min_count": self.production_min_count,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureCutoffs":
        return cls(**{k: int(v) for k, v in obj.items()})


@dataclass
class ExtractionWarnings:
    """Per-run counters for sentences lacking optional annotations.

    Accumulators are plain counters so parallel sections can keep their own
    instance and merge afterwards.
    """

    missing_pos: int = 0
    missing_productions: int = 0
    missing_discourse: int = 0

    def merge(self, other: "ExtractionWarnings") -> None:
        self.missing_pos += other.missing_pos
        self.missing_productions += other.missing_productions
        self.missing_discourse += other.missing_discourse

    def total(self) -> int:
        return self.missing_pos + self.missing_productions + self.missing_discourse


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse (index, value) pairs; no explicit zeros."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValueError("indices and values must have equal length")
        for a, b in zip(self.indices, self.indices[1:]):
            if b <= a:
                raise ValueError("indices must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        cleaned = sorted((i, float(v)) for i, v in pairs if v != 0.0)
        idx = tuple(i for i, _ in cleaned)
        vals = tuple(v for _, v in cleaned)
        return cls(indices=idx, values=vals)

    def __len__(self) -> int:
        return len(self.indices)

    def max_index(self) -> int:
        return self.indices[-1] if self.indices else -1


def vectors_to_csr(vectors: Sequence[SparseVector], n_columns: int) -> sparse.csr_matrix:
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, vec in enumerate(vectors):
        if vec.max_index() >= n_columns:
            raise FeatureConfigError(
                f"vector index {vec.max_index()} out of range for {n_columns} columns"
            )
        indptr[i + 1] = indptr[i] + len(vec)
    indices = np.concatenate([np.asarray(v.indices, dtype=np.int64) for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
    data = np.concatenate([np.asarray(v.values, dtype=np.float64) for v in vectors]) if vectors else np.zeros(0)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(vectors), n_columns))


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    duplicate_count: int = 0

    def lookup(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token.lower())


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load a text embedding table: one ``token v1 .. vD`` row per line.

    An optional leading ``N D`` header (two integer fields) is auto-detected.
    Tokens are lowercased on load; duplicate tokens keep the first occurrence
    and bump ``duplicate_count``. Rows whose width disagrees with the first
    data row raise :class:`EmbeddingFormatError` naming the line.
    """
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    duplicates = 0
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            parts = raw.split()
            if line_no == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header row
                except ValueError:
                    pass
            if len(parts) < 2:
                raise EmbeddingFormatError("row must contain a token and at least one value", line=line_no)
            token = parts[0].lower()
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError("non-numeric embedding value", line=line_no) from None
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise EmbeddingFormatError(
                    f"row has {vec.shape[0]} values, expected {dim}", line=line_no
                )
            if token in vectors:
                duplicates += 1
                continue
            vectors[token] = vec
    if duplicates:
        logger.warning("embedding table %s: %d duplicate tokens ignored", path, duplicates)
    return EmbeddingTable(dim=dim or 0, vectors=vectors, duplicate_count=duplicates)


@dataclass(frozen=True)
class FeatureSpace:
    """Fitted mapping from namespaced feature keys to contiguous columns."""

    groups: frozenset[FeatureGroup]
    cutoffs: FeatureCutoffs
    keys: tuple[str, ...]
    kinds: tuple[str, ...]
    group_ranges: dict[FeatureGroup, tuple[int, int]]
    embedding_dim: int
    entries: dict[str, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            object.__setattr__(self, "entries", {k: i for i, k in enumerate(self.keys)})

    @property
    def n_columns(self) -> int:
        return len(self.keys)

    def real_mask(self) -> np.ndarray:
        """True for count/real columns (the standardization targets)."""
        return np.array([k != KIND_BINARY for k in self.kinds], dtype=bool)

    def group_range(self, group: FeatureGroup) -> tuple[int, int]:
        return self.group_ranges[group]

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "groups": sorted(g.value for g in self.groups),
            "cutoffs": self.cutoffs.to_dict(),
            "embedding_dim": self.embedding_dim,
            "keys": list(self.keys),
            "kinds": list(self.kinds),
            "group_ranges": {g.value: list(r) for g, r in sorted(self.group_ranges.items(), key=lambda kv: kv[0].value)},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureSpace":
        return cls(
            groups=frozenset(FeatureGroup(g) for g in obj["groups"]),
            cutoffs=FeatureCutoffs.from_dict(obj["cutoffs"]),
            keys=tuple(obj["keys"]),
            kinds=tuple(obj["kinds"]),
            group_ranges={FeatureGroup(g): (int(r[0]), int(r[1])) for g, r in obj["group_ranges"].items()},
            embedding_dim=int(obj["embedding_dim"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSpace":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())


def _top_keys(counts: Counter, limit: int) -> list[str]:
    # Rank by descending count, lexicographic key on ties; deterministic.
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [k for k, _ in ranked[:limit]]


def _pos_sequence(sentence: Sentence) -> list[str] | None:
    tags = [t.pos for t in sentence.tokens]
    if any(tag is None for tag in tags):
        return None
    return tags  # type: ignore[return-value]


def _pos_ngrams(tags: Sequence[str], min_n: int, max_n: int) -> Iterable[str]:
    for n in range(min_n, max_n + 1):
        for i in range(len(tags) - n + 1):
            yield "_".join(tags[i : i + n])


def fit_feature_space(
    train_sentences: Sequence[Sentence],
    groups: Iterable[FeatureGroup] = ALL_GROUPS,
    cutoffs: FeatureCutoffs | None = None,
    embedding_dim: int = 0,
) -> FeatureSpace:
    """Fit the feature-key vocabulary on training sentences only.

    Test sentences must never be passed here; out-of-vocabulary keys at
    extraction time are simply ignored.
    """
    groups = frozenset(groups)
    if not groups:
        raise FeatureConfigError("at least one feature group must be enabled")
    if not train_sentences:
        raise FeatureConfigError("cannot fit a feature space on an empty training set")
    if FeatureGroup.EMBEDDING in groups and embedding_dim <= 0:
        raise FeatureConfigError("EMBEDDING group enabled but embedding_dim not set")
    cutoffs = cutoffs or FeatureCutoffs()

    keys: list[str] = []
    kinds: list[str] = []
    group_ranges: dict[FeatureGroup, tuple[int, int]] = {}

    def add_block(group: FeatureGroup, block: list[tuple[str, str]]) -> None:
        start = len(keys)
        for key, kind in block:
            keys.append(key)
            kinds.append(kind)
        group_ranges[group] = (start, len(keys))

    for group in _GROUP_ORDER:
        if group not in groups:
            continue
        if group is FeatureGroup.STRUCTURE:
            add_block(group, list(STRUCTURE_KEYS))
        elif group is FeatureGroup.LEXICAL:
            counts: Counter = Counter()
            for sent in train_sentences:
                counts.update(t.surface.lower() for t in sent.tokens)
            selected = sorted(_top_keys(counts, cutoffs.unigram_limit))
            add_block(group, [(f"lex:{w}", KIND_BINARY) for w in selected])
        elif group is FeatureGroup.SYNTAX:
            ngram_counts: Counter = Counter()
            prod_counts: Counter = Counter()
            pos_tags: set[str] = set()
            for sent in train_sentences:
                tags = _pos_sequence(sent)
                if tags is not None:
                    pos_tags.update(tags)
                    ngram_counts.update(_pos_ngrams(tags, cutoffs.pos_ngram_min_n, cutoffs.pos_ngram_max_n))
                if sent.syntax_productions is not None:
                    prod_counts.update(sent.syntax_productions)
            ngrams = _top_keys(ngram_counts, cutoffs.pos_ngram_limit)
            prods = _top_keys(
                Counter({p: c for p, c in prod_counts.items() if c >= cutoffs.production_min_count}),
                cutoffs.production_limit,
            )
            block = [(f"posng:{g}", KIND_BINARY) for g in ngrams]
            block += [(f"prod:{p}", KIND_BINARY) for p in prods]
            block += [(f"poscnt:{t}", KIND_COUNT) for t in pos_tags]
            add_block(group, sorted(block))
        elif group is FeatureGroup.DISCOURSE:
            triples: set[str] = set()
            for sent in train_sentences:
                if sent.discourse_relations:
                    for tag in sent.discourse_relations:
                        triples.add(f"disc:{tag.relation_type}|{tag.realization.value}|{tag.argument_role.value}")
            add_block(group, [(t, KIND_BINARY) for t in sorted(triples)])
        elif group is FeatureGroup.EMBEDDING:
            add_block(group, [(f"emb:{i:04d}", KIND_REAL) for i in range(embedding_dim)])

    return FeatureSpace(
        groups=groups,
        cutoffs=cutoffs,
        keys=tuple(keys),
        kinds=tuple(kinds),
        group_ranges=group_ranges,
        embedding_dim=embedding_dim if FeatureGroup.EMBEDDING in groups else 0,
    )


def _is_punct_token(surface: str) -> bool:
    return all(ch in _PUNCT_CHARS for ch in surface)


def extract_structure(sentence: Sentence, space: FeatureSpace) -> list[tuple[int, float]]:
    """Paragraph position, token count, and punctuation signals."""
    surfaces = sentence.surfaces
    values = {
        "struct:first_in_paragraph": 1.0 if sentence.is_first_in_paragraph else 0.0,
        "struct:last_in_paragraph": 1.0 if sentence.is_last_in_paragraph else 0.0,
        "struct:token_count": float(len(surfaces)),
        "struct:punct_count": float(sum(1 for s in surfaces if _is_punct_token(s))),
        "struct:ends_question": 1.0 if surfaces[-1].endswith("?") else 0.0,
        "struct:ends_exclamation": 1.0 if surfaces[-1].endswith("!") else 0.0,
        "struct:comma_count": float(sum(1 for s in surfaces if s == ",")),
        "struct:has_quote": 1.0 if any(s in _QUOTE_TOKENS for s in surfaces) else 0.0,
    }
    return [(space.entries[k], v) for k, v in values.items() if v != 0.0]


def extract_lexical(sentence: Sentence, space: FeatureSpace) -> list[tuple[int, float]]:
    """Binary indicators over in-vocabulary lowercased unigrams."""
    out = []
    for word in {t.surface.lower() for t in sentence.tokens}:
        idx = space.entries.get(f"lex:{word}")
        if idx is not None:
            out.append((idx, 1.0))
    return out


def extract_syntax(
    sentence: Sentence, space: FeatureSpace, warnings: ExtractionWarnings | None = None
) -> list[tuple[int, float]]:
    """Binary POS n-grams and production rules plus integer POS-tag counts."""
    out: list[tuple[int, float]] = []
    tags = _pos_sequence(sentence)
    if tags is None:
        if warnings is not None:
            warnings.missing_pos += 1
    else:
        cut = space.cutoffs
        for gram in set(_pos_ngrams(tags, cut.pos_ngram_min_n, cut.pos_ngram_max_n)):
            idx = space.entries.get(f"posng:{gram}")
            if idx is not None:
                out.append((idx, 1.0))
        for tag, count in Counter(tags).items():
            idx = space.entries.get(f"poscnt:{tag}")
            if idx is not None:
                out.append((idx, float(count)))
    if sentence.syntax_productions is None:
        if warnings is not None:
            warnings.missing_productions += 1
    else:
        for prod in set(sentence.syntax_productions):
            idx = space.entries.get(f"prod:{prod}")
            if idx is not None:
                out.append((idx, 1.0))
    return out


def extract_discourse(
    sentence: Sentence, space: FeatureSpace, warnings: ExtractionWarnings | None = None
) -> list[tuple[int, float]]:
    """One binary indicator per attached (type, realization, role) triple."""
    if sentence.discourse_relations is None:
        if warnings is not None:
            warnings.missing_discourse += 1
        return []
    out = []
    seen: set[int] = set()
    for tag in sentence.discourse_relations:
        idx = space.entries.get(f"disc:{tag.relation_type}|{tag.realization.value}|{tag.argument_role.value}")
        if idx is not None and idx not in seen:
            seen.add(idx)
            out.append((idx, 1.0))
    return out


def extract_embedding(sentence: Sentence, table: EmbeddingTable) -> np.ndarray:
    """Componentwise sum of the embeddings of in-table lowercased tokens.

    Repeated tokens contribute once per occurrence; tokens absent from the
    table are skipped; a sentence with no in-table token sums to zero.
    """
    total = np.zeros(table.dim, dtype=np.float64)
    for tok in sentence.tokens:
        vec = table.lookup(tok.surface)
        if vec is not None:
            total += vec
    return total


def featurize(
    sentence: Sentence,
    space: FeatureSpace,
    table: EmbeddingTable | None = None,
    warnings: ExtractionWarnings | None = None,
) -> SparseVector:
    """Extract all enabled groups into the space's global column layout."""
    pairs: list[tuple[int, float]] = []
    if FeatureGroup.STRUCTURE in space.groups:
        pairs.extend(extract_structure(sentence, space))
    if FeatureGroup.LEXICAL in space.groups:
        pairs.extend(extract_lexical(sentence, space))
    if FeatureGroup.SYNTAX in space.groups:
        pairs.extend(extract_syntax(sentence, space, warnings))
    if FeatureGroup.DISCOURSE in space.groups:
        pairs.extend(extract_discourse(sentence, space, warnings))
    if FeatureGroup.EMBEDDING in space.groups:
        if table is None:
            raise FeatureConfigError("EMBEDDING group enabled but no embedding table supplied")
        if table.dim != space.embedding_dim:
            raise FeatureConfigError(
                f"embedding table dim {table.dim} does not match space dim {space.embedding_dim}"
            )
        start, _ = space.group_range(FeatureGroup.EMBEDDING)
        summed = extract_embedding(sentence, table)
        for offset in np.nonzero(summed)[0]:
            pairs.append((start + int(offset), float(summed[offset])))
    return SparseVector.from_pairs(pairs)


def featurize_all(
    sentences: Sequence[Sentence],
    space: FeatureSpace,
    table: EmbeddingTable | None = None,
    warnings: ExtractionWarnings | None = None,
) -> list[SparseVector]:
    return [featurize(s, space, table, warnings) for s in sentences]
