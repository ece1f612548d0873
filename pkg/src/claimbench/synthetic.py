"""Seeded synthetic corpus generator.

Produces fully annotated corpora (POS tags, lemmas, paragraph structure,
production rules, discourse relations) with planted lexical cues: a modal
token shows up in claim sentences far more often than in non-claims, so a
reasonable learner can beat the trivial baselines. Everything is driven by a
single ``random.Random`` seed and is byte-reproducible.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import (
    ArgumentRole,
    Corpus,
    CorpusError,
    DiscourseRelationTag,
    Document,
    Realization,
    Token,
    TokenLabel,
    build_document,
)

# Planted cue: appears in claims with high probability, rarely otherwise.
CUE_TOKEN = "should"
CUE_IN_CLAIM_PROB = 0.9
CUE_IN_NONCLAIM_PROB = 0.05

_SECONDARY_CUES = ["therefore", "opinion", "clearly"]
_FUNCTION_WORDS = [("the", "DT"), ("a", "DT"), ("is", "VBZ"), ("of", "IN"), ("to", "TO"), ("and", "CC"), ("it", "PRP")]
_CONTENT_TAGS = ["NN", "VB", "JJ", "RB", "NNS", "VBD"]
_BASE_PRODUCTIONS = ["S->NP VP", "NP->DT NN", "VP->VB NP", "PP->IN NP"]
_CLAIM_PRODUCTION = "VP->MD VP"
_CLAIM_DISCOURSE = DiscourseRelationTag("Contingency.Cause", Realization.EXPLICIT, ArgumentRole.ARG2)
_OTHER_DISCOURSE = DiscourseRelationTag("Expansion.Conjunction", Realization.EXPLICIT, ArgumentRole.ARG1)


def _vocabulary(vocab_size: int) -> list[tuple[str, str]]:
    words = []
    for i in range(vocab_size):
        words.append((f"w{i:03d}", _CONTENT_TAGS[i % len(_CONTENT_TAGS)]))
    return words


def _make_sentence(rng: random.Random, vocab: list[tuple[str, str]], weights: list[float], is_claim: bool) -> list[Token]:
    n_content = rng.randint(4, 10)
    picks = rng.choices(vocab, weights=weights, k=n_content)
    words: list[tuple[str, str]] = []
    for surface, tag in picks:
        words.append((surface, tag))
        if rng.random() < 0.4:
            words.append(rng.choice(_FUNCTION_WORDS))

    cue_prob = CUE_IN_CLAIM_PROB if is_claim else CUE_IN_NONCLAIM_PROB
    if rng.random() < cue_prob:
        words.insert(rng.randint(0, max(1, len(words) // 2)), (CUE_TOKEN, "MD"))
    if is_claim and rng.random() < 0.35:
        words.insert(0, (rng.choice(_SECONDARY_CUES), "RB"))
        words.insert(1, (",", ","))

    if not is_claim and rng.random() < 0.1:
        terminal = ("?", ".")
    elif rng.random() < 0.05:
        terminal = ("!", ".")
    else:
        terminal = (".", ".")
    words.append(terminal)

    claim_positions: set[int] = set()
    if is_claim:
        # Token-level claim span: a contiguous chunk of the sentence.
        start = rng.randint(0, max(0, len(words) - 3))
        claim_positions = set(range(start, min(len(words), start + rng.randint(2, 5))))

    tokens = []
    for i, (surface, tag) in enumerate(words):
        tokens.append(
            Token(
                surface=surface,
                claim_label=TokenLabel.CLAIM if i in claim_positions else TokenLabel.OTHER,
                lemma=surface.lower(),
                pos=tag,
            )
        )
    return tokens


def _make_productions(rng: random.Random, is_claim: bool) -> list[str]:
    prods = ["S->NP VP"] + rng.sample(_BASE_PRODUCTIONS[1:], k=rng.randint(1, 3))
    marker_prob = 0.9 if is_claim else 0.05
    if rng.random() < marker_prob:
        prods.append(_CLAIM_PRODUCTION)
    return prods


def generate_synthetic(
    seed: int,
    n_docs: int = 100,
    claim_ratio: float = 0.25,
    vocab_size: int = 200,
    name: str = "SYN",
) -> Corpus:
    """Generate a deterministic corpus with planted claim cues.

    ``claim_ratio`` is the per-sentence claim probability; the realized ratio
    of a generated corpus lands close to it for reasonable sizes.
    """
    if not 0.0 < claim_ratio < 1.0:
        raise CorpusError(f"claim_ratio must be in (0,1), got {claim_ratio}")
    if vocab_size < 10:
        raise CorpusError(f"vocab_size must be >= 10, got {vocab_size}")
    if n_docs < 1:
        raise CorpusError(f"n_docs must be >= 1, got {n_docs}")

    rng = random.Random(seed)
    vocab = _vocabulary(vocab_size)
    weights = [1.0 / (rank + 1) for rank in range(len(vocab))]  # Zipf-ish

    documents: list[Document] = []
    for d in range(n_docs):
        sentence_specs: list[tuple[list[Token], int]] = []
        productions: list[list[str]] = []
        discourse: list[list[DiscourseRelationTag] | None] = []
        para_count = rng.randint(1, 3)
        for para in range(para_count):
            n_sents = rng.randint(2, 5)
            flags = [rng.random() < claim_ratio for _ in range(n_sents)]
            # Claims favor the paragraph-initial position.
            if any(flags) and not flags[0] and rng.random() < 0.5:
                first_claim = flags.index(True)
                flags[0], flags[first_claim] = flags[first_claim], flags[0]
            for is_claim in flags:
                sentence_specs.append((_make_sentence(rng, vocab, weights, is_claim), para))
                productions.append(_make_productions(rng, is_claim))
                tag_prob, tag = (0.4, _CLAIM_DISCOURSE) if is_claim else (0.1, _OTHER_DISCOURSE)
                discourse.append([tag] if rng.random() < tag_prob else None)
        documents.append(build_document(f"doc{d:04d}", sentence_specs, productions=productions, discourse=discourse))

    return Corpus(name=name, documents=tuple(documents))


def synthetic_vocabulary(vocab_size: int) -> list[str]:
    """Every surface form the generator can emit, lowercased, deduplicated."""
    words = [w for w, _ in _vocabulary(vocab_size)]
    words += [w for w, _ in _FUNCTION_WORDS]
    words += [CUE_TOKEN] + _SECONDARY_CUES + [",", ".", "?", "!"]
    seen: set[str] = set()
    out = []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def write_random_embeddings(path: str | Path, tokens: list[str], dim: int, seed: int) -> None:
    """Write a plain-text embedding table with seeded uniform vectors.

    Values are rounded to 6 decimals so repeated generation is byte-identical.
    """
    rng = random.Random(seed)
    with Path(path).open("w", encoding="utf-8") as fh:
        for tok in tokens:
            vec = " ".join(f"{rng.uniform(-1.0, 1.0):.6f}" for _ in range(dim))
            fh.write(f"{tok} {vec}\n")
