"""Unified corpus model for sentence-level claim identification.

Documents are sequences of sentences; sentences are sequences of tokens
carrying token-level claim annotations plus optional precomputed linguistic
annotations (lemma, POS tag, constituent production rules, discourse
relations). Sentence labels are derived from token labels: a sentence is a
claim iff at least one of its tokens is claim-annotated.

Corpora are immutable after construction and safe for concurrent reads.
All randomized operations (CV splitting, downsampling) take explicit seeds.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, TypeVar


class TokenLabel(str, Enum):
    CLAIM = "C"
    MAJOR_CLAIM = "MC"
    OTHER = "O"


class SentenceLabel(str, Enum):
    CLAIM = "CLAIM"
    NON_CLAIM = "NON_CLAIM"


class Realization(str, Enum):
    EXPLICIT = "E"
    IMPLICIT = "I"


class ArgumentRole(str, Enum):
    ARG1 = "1"
    ARG2 = "2"
    BOTH = "B"


class CorpusError(ValueError):
    """Malformed corpus data. Carries the offending line/document when known."""

    def __init__(self, message: str, *, line: int | None = None, doc_id: str | None = None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if doc_id is not None:
            parts.append(f"document {doc_id!r}")
        super().__init__(f"{message} [{', '.join(parts)}]" if parts else message)
        self.line = line
        self.doc_id = doc_id


def label_sentences(token_labels: Sequence[TokenLabel]) -> SentenceLabel:
    """Derive the sentence label from its token labels.

    A sentence counts as a claim iff at least one token is labeled as a
    claim or major claim; this is monotone in the token labels.
    """
    if not token_labels:
        raise CorpusError("cannot label a sentence with no tokens")
    for lab in token_labels:
        if lab in (TokenLabel.CLAIM, TokenLabel.MAJOR_CLAIM):
            return SentenceLabel.CLAIM
    return SentenceLabel.NON_CLAIM


@dataclass(frozen=True)
class Token:
    surface: str
    claim_label: TokenLabel = TokenLabel.OTHER
    lemma: str | None = None
    pos: str | None = None

    def __post_init__(self):
        if not self.surface:
            raise CorpusError("token surface must be non-empty")

    @property
    def lemma_or_surface(self) -> str:
        """Lemma when annotated, else the lowercased surface form."""
        return self.lemma if self.lemma is not None else self.surface.lower()


@dataclass(frozen=True)
class DiscourseRelationTag:
    relation_type: str
    realization: Realization
    argument_role: ArgumentRole

    def __post_init__(self):
        if not self.relation_type:
            raise CorpusError("discourse relation type must be non-empty")


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    index_in_doc: int
    paragraph_index: int
    is_first_in_paragraph: bool
    is_last_in_paragraph: bool
    label: SentenceLabel
    syntax_productions: tuple[str, ...] | None = None
    discourse_relations: tuple[DiscourseRelationTag, ...] | None = None

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError("sentence must contain at least one token")

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        for i, sent in enumerate(self.sentences):
            if sent.index_in_doc != i:
                raise CorpusError(
                    f"sentence indices must be contiguous from 0, got {sent.index_in_doc} at position {i}",
                    doc_id=self.id,
                )


@dataclass(frozen=True)
class Corpus:
    name: str
    documents: tuple[Document, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError("duplicate document id", doc_id=doc.id)
            seen.add(doc.id)

    def sentences(self) -> list[Sentence]:
        return [s for doc in self.documents for s in doc.sentences]

    def labels(self) -> list[SentenceLabel]:
        return [s.label for doc in self.documents for s in doc.sentences]


@dataclass(frozen=True)
class DatasetStats:
    n_docs: int
    n_tokens: int
    n_sentences: int
    n_claims: int
    claim_ratio: float  # n_claims / n_sentences, rounded to 4 decimals


@dataclass(frozen=True)
class SplitPlan:
    k: int
    seed: int
    assignment: dict[str, int]  # document id -> fold index in [0, k)

    def fold_documents(self, fold: int) -> set[str]:
        return {doc_id for doc_id, f in self.assignment.items() if f == fold}


def build_document(
    doc_id: str,
    sentences: Iterable[tuple[Sequence[Token], int]],
    productions: Sequence[Sequence[str] | None] | None = None,
    discourse: Sequence[Sequence[DiscourseRelationTag] | None] | None = None,
) -> Document:
    """Assemble a Document from (tokens, paragraph_index) pairs.

    Paragraph first/last flags and sentence labels are derived here, so the
    result always satisfies the corpus invariants.
    """
    pairs = list(sentences)
    paragraph_indices = [p for _, p in pairs]
    built = []
    for i, (tokens, para) in enumerate(pairs):
        toks = tuple(tokens)
        prods = productions[i] if productions is not None else None
        disc = discourse[i] if discourse is not None else None
        built.append(
            Sentence(
                tokens=toks,
                index_in_doc=i,
                paragraph_index=para,
                is_first_in_paragraph=para not in paragraph_indices[:i],
                is_last_in_paragraph=para not in paragraph_indices[i + 1 :],
                label=label_sentences([t.claim_label for t in toks]),
                syntax_productions=tuple(prods) if prods is not None else None,
                discourse_relations=tuple(disc) if disc is not None else None,
            )
        )
    return Document(id=doc_id, sentences=tuple(built))


# ---------------------------------------------------------------------------
# JSON-lines serialization
#
# One document per line:
#   {"id": str, "sentences": [{"paragraph": int, "label": "CLAIM"|"NON_CLAIM",
#     "tokens": [{"t": str, "lemma": str?, "pos": str?, "cl": "C"|"MC"|"O"}],
#     "productions": [str]?,
#     "discourse": [{"rel": str, "real": "E"|"I", "arg": "1"|"2"|"B"}]?}]}
# ---------------------------------------------------------------------------


def _token_to_json(tok: Token) -> dict:
    out: dict = {"t": tok.surface}
    if tok.lemma is not None:
        out["lemma"] = tok.lemma
    if tok.pos is not None:
        out["pos"] = tok.pos
    out["cl"] = tok.claim_label.value
    return out


def _sentence_to_json(sent: Sentence) -> dict:
    out: dict = {
        "paragraph": sent.paragraph_index,
        "label": sent.label.value,
        "tokens": [_token_to_json(t) for t in sent.tokens],
    }
    if sent.syntax_productions is not None:
        out["productions"] = list(sent.syntax_productions)
    if sent.discourse_relations is not None:
        out["discourse"] = [
            {"rel": d.relation_type, "real": d.realization.value, "arg": d.argument_role.value}
            for d in sent.discourse_relations
        ]
    return out


def document_to_json(doc: Document) -> dict:
    return {"id": doc.id, "sentences": [_sentence_to_json(s) for s in doc.sentences]}


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            fh.write(json.dumps(document_to_json(doc), ensure_ascii=False))
            fh.write("\n")


def _require(cond: bool, message: str, line: int, doc_id: str | None = None) -> None:
    if not cond:
        raise CorpusError(message, line=line, doc_id=doc_id)


def _parse_token(obj: dict, line: int, doc_id: str) -> Token:
    _require(isinstance(obj, dict), "token must be an object", line, doc_id)
    _require(isinstance(obj.get("t"), str) and obj["t"] != "", "token field 't' must be a non-empty string", line, doc_id)
    cl = obj.get("cl", "O")
    try:
        label = TokenLabel(cl)
    except ValueError:
        raise CorpusError(f"unknown token claim label {cl!r}", line=line, doc_id=doc_id) from None
    lemma = obj.get("lemma")
    pos = obj.get("pos")
    _require(lemma is None or isinstance(lemma, str), "token 'lemma' must be a string", line, doc_id)
    _require(pos is None or isinstance(pos, str), "token 'pos' must be a string", line, doc_id)
    return Token(surface=obj["t"], claim_label=label, lemma=lemma, pos=pos)


def _parse_document(obj: dict, line: int) -> Document:
    _require(isinstance(obj, dict), "document line must be a JSON object", line)
    doc_id = obj.get("id")
    _require(isinstance(doc_id, str) and doc_id != "", "document 'id' must be a non-empty string", line)
    raw_sentences = obj.get("sentences")
    _require(isinstance(raw_sentences, list), "document 'sentences' must be a list", line, doc_id)

    parsed: list[tuple[list[Token], int]] = []
    stored_labels: list[SentenceLabel] = []
    productions: list[list[str] | None] = []
    discourse: list[list[DiscourseRelationTag] | None] = []
    for sent_obj in raw_sentences:
        _require(isinstance(sent_obj, dict), "sentence must be an object", line, doc_id)
        para = sent_obj.get("paragraph")
        _require(isinstance(para, int) and para >= 0, "sentence 'paragraph' must be a nonnegative integer", line, doc_id)
        raw_label = sent_obj.get("label")
        try:
            stored = SentenceLabel(raw_label)
        except ValueError:
            raise CorpusError(f"unknown sentence label {raw_label!r}", line=line, doc_id=doc_id) from None
        raw_tokens = sent_obj.get("tokens")
        _require(isinstance(raw_tokens, list) and len(raw_tokens) > 0, "sentence 'tokens' must be a non-empty list", line, doc_id)
        tokens = [_parse_token(t, line, doc_id) for t in raw_tokens]

        raw_prods = sent_obj.get("productions")
        if raw_prods is not None:
            _require(
                isinstance(raw_prods, list) and all(isinstance(p, str) for p in raw_prods),
                "sentence 'productions' must be a list of strings",
                line,
                doc_id,
            )
        raw_disc = sent_obj.get("discourse")
        tags: list[DiscourseRelationTag] | None = None
        if raw_disc is not None:
            _require(isinstance(raw_disc, list), "sentence 'discourse' must be a list", line, doc_id)
            tags = []
            for d in raw_disc:
                _require(isinstance(d, dict) and isinstance(d.get("rel"), str), "discourse tag must have string 'rel'", line, doc_id)
                try:
                    tags.append(
                        DiscourseRelationTag(
                            relation_type=d["rel"],
                            realization=Realization(d.get("real")),
                            argument_role=ArgumentRole(d.get("arg")),
                        )
                    )
                except ValueError:
                    raise CorpusError(
                        f"bad discourse tag {d!r}", line=line, doc_id=doc_id
                    ) from None

        derived = label_sentences([t.claim_label for t in tokens])
        if derived != stored:
            raise CorpusError(
                f"stored sentence label {stored.value} contradicts token labels (derived {derived.value})",
                line=line,
                doc_id=doc_id,
            )
        parsed.append((tokens, para))
        stored_labels.append(stored)
        productions.append(list(raw_prods) if raw_prods is not None else None)
        discourse.append(tags)

    try:
        return build_document(doc_id, parsed, productions=productions, discourse=discourse)
    except CorpusError as err:
        raise CorpusError(str(err), line=line, doc_id=doc_id) from None


def load_corpus(path: str | Path, name: str | None = None) -> Corpus:
    """Load and fully validate a JSON-lines corpus file.

    Sentence labels are recomputed from token labels and checked against the
    stored labels; paragraph first/last flags are recomputed. Any violation
    raises :class:`CorpusError` naming the line and document.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    documents: list[Document] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as err:
                raise CorpusError(f"invalid JSON: {err.msg}", line=line_no) from None
            doc = _parse_document(obj, line_no)
            if doc.id in seen_ids:
                raise CorpusError("duplicate document id", line=line_no, doc_id=doc.id)
            seen_ids.add(doc.id)
            documents.append(doc)
    return Corpus(name=name if name is not None else path.stem, documents=tuple(documents))


# ---------------------------------------------------------------------------
# Dataset statistics, CV splitting, downsampling
# ---------------------------------------------------------------------------


def corpus_stats(corpus: Corpus) -> DatasetStats:
    n_docs = len(corpus.documents)
    n_tokens = 0
    n_sentences = 0
    n_claims = 0
    for doc in corpus.documents:
        for sent in doc.sentences:
            n_sentences += 1
            n_tokens += len(sent.tokens)
            if sent.label is SentenceLabel.CLAIM:
                n_claims += 1
    ratio = round(n_claims / n_sentences, 4) if n_sentences else 0.0
    return DatasetStats(
        n_docs=n_docs,
        n_tokens=n_tokens,
        n_sentences=n_sentences,
        n_claims=n_claims,
        claim_ratio=ratio,
    )


def make_cv_splits(corpus: Corpus, k: int, seed: int) -> SplitPlan:
    """Assign documents to k folds: seeded shuffle of ids, dealt round-robin.

    Splitting is by document, never by sentence, so no document's sentences
    straddle train and test. Fold sizes differ by at most one.
    """
    if k < 2:
        raise CorpusError(f"fold count must be >= 2, got {k}")
    doc_ids = sorted(doc.id for doc in corpus.documents)
    if len(doc_ids) < k:
        raise CorpusError(f"corpus has {len(doc_ids)} documents, fewer than {k} folds")
    rng = random.Random(seed)
    rng.shuffle(doc_ids)
    assignment = {doc_id: i % k for i, doc_id in enumerate(doc_ids)}
    return SplitPlan(k=k, seed=seed, assignment=assignment)


def save_split_plan(plan: SplitPlan, path: str | Path) -> None:
    payload = {"k": plan.k, "seed": plan.seed, "assignment": dict(sorted(plan.assignment.items()))}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_split_plan(path: str | Path) -> SplitPlan:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return SplitPlan(k=int(obj["k"]), seed=int(obj["seed"]), assignment={str(k): int(v) for k, v in obj["assignment"].items()})


T = TypeVar("T")


def downsample_indices(labels: Sequence[SentenceLabel], seed: int) -> list[int]:
    """Indices kept after downsampling non-claims to a 1:1 class ratio.

    All claim instances are retained; non-claims are discarded uniformly at
    random (seeded) until the counts match. When non-claims do not outnumber
    claims the input is kept unchanged; there is never any upsampling.
    Returned indices are sorted, so relative order is preserved.
    """
    claim_idx = [i for i, lab in enumerate(labels) if lab is SentenceLabel.CLAIM]
    other_idx = [i for i, lab in enumerate(labels) if lab is not SentenceLabel.CLAIM]
    if len(other_idx) <= len(claim_idx):
        return list(range(len(labels)))
    rng = random.Random(seed)
    kept_other = rng.sample(other_idx, len(claim_idx))
    return sorted(claim_idx + kept_other)


def downsample(
    examples: Sequence[T], labels: Sequence[SentenceLabel], seed: int
) -> tuple[list[T], list[SentenceLabel]]:
    if len(examples) != len(labels):
        raise CorpusError(f"examples/labels length mismatch: {len(examples)} != {len(labels)}")
    kept = downsample_indices(labels, seed)
    return [examples[i] for i in kept], [labels[i] for i in kept]
