"""Shared construction helpers for the test suite."""

from claimbench.corpus import (
    ArgumentRole,
    DiscourseRelationTag,
    Realization,
    Token,
    TokenLabel,
    build_document,
)


def tok(surface, label=TokenLabel.OTHER, lemma=None, pos=None):
    return Token(surface=surface, claim_label=label, lemma=lemma, pos=pos)


def claim_tokens(*surfaces):
    return [tok(s, TokenLabel.CLAIM) for s in surfaces]


def other_tokens(*surfaces):
    return [tok(s) for s in surfaces]


def disc(rel="Contingency.Cause", real=Realization.EXPLICIT, arg=ArgumentRole.ARG2):
    return DiscourseRelationTag(rel, real, arg)


def two_sentence_doc(doc_id="d0"):
    return build_document(
        doc_id,
        [
            (claim_tokens("Cats", "rule") + other_tokens("."), 0),
            (other_tokens("Dogs", "drool", "."), 0),
        ],
    )
