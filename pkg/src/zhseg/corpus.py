"""Corpus handling: text normalization and the BMES tag codec.

Words are encoded per character: B/M/E mark the beginning, middle and end
of a multi-character word, S marks a single-character word.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyCorpus, EmptyWord, Utf8Error

B, M, E, S = 0, 1, 2, 3
TAG_NAMES = "BMES"

# legal successor table: B and M must continue a word, E and S must close one
LEGAL_NEXT = np.array(
    [
        [False, True, True, False],   # B -> M, E
        [False, True, True, False],   # M -> M, E
        [True, False, False, True],   # E -> B, S
        [True, False, False, True],   # S -> B, S
    ]
)
START_OK = np.array([True, False, False, True])    # B or S
END_OK = np.array([False, False, True, True])      # E or S


def legal_tag_path(tags) -> bool:
    """True when a tag sequence is a well-formed BMES path."""
    if len(tags) == 0:
        return True
    if not START_OK[tags[0]] or not END_OK[tags[-1]]:
        return False
    return all(LEGAL_NEXT[a][b] for a, b in zip(tags, tags[1:]))


@dataclass(frozen=True)
class TaggedSentence:
    chars: str
    tags: tuple[int, ...]

    def __post_init__(self):
        if len(self.chars) != len(self.tags):
            raise ValueError("chars and tags must have equal length")


def normalize(text: str) -> str:
    """Canonicalize raw text.

    Fullwidth ASCII (U+FF01..U+FF5E) folds to its halfwidth form, the
    ideographic space becomes a plain space, tabs become spaces, other
    control characters are dropped, and whitespace runs collapse to a
    single space with the ends stripped.
    """
    out = []
    for ch in text:
        o = ord(ch)
        if 0xFF01 <= o <= 0xFF5E:
            out.append(chr(o - 0xFEE0))
        elif o == 0x3000:
            out.append(" ")
        elif ch == "\t":
            out.append(" ")
        elif unicodedata.category(ch) == "Cc":
            continue
        else:
            out.append(ch)
    return " ".join("".join(out).split())


def apply_char_map(text: str, char_map: dict[str, str]) -> str:
    return "".join(char_map.get(ch, ch) for ch in text)


def load_char_map(path: str | Path) -> dict[str, str]:
    """Read a single-character substitution table, one `src<TAB>dst` per line.

    Intended for traditional-to-simplified folding; the toolkit ships no
    table of its own.
    """
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            src, dst = line.split("\t")
            mapping[src] = dst
    return mapping


def bmes_encode(words: list[str]) -> TaggedSentence:
    """Turn a segmented sentence into per-character tags."""
    tags: list[int] = []
    for w in words:
        if not w:
            raise EmptyWord("cannot encode an empty word")
        if len(w) == 1:
            tags.append(S)
        else:
            tags.append(B)
            tags.extend([M] * (len(w) - 2))
            tags.append(E)
    return TaggedSentence("".join(words), tuple(tags))


def bmes_decode(sent: TaggedSentence) -> list[str]:
    """Turn tags back into words.

    Total on any tag sequence: a boundary is closed before every B and S
    and after every E and S, so illegal paths still yield a segmentation
    that covers the text exactly.
    """
    chars, tags = sent.chars, sent.tags
    words: list[str] = []
    start = 0
    for i, t in enumerate(tags):
        if (t == B or t == S) and i > start:
            words.append(chars[start:i])
            start = i
        if t == E or t == S:
            words.append(chars[start : i + 1])
            start = i + 1
    if start < len(chars):
        words.append(chars[start:])
    return words


def load_corpus(
    path: str | Path,
    segmented: bool,
    char_map: dict[str, str] | None = None,
) -> list[TaggedSentence] | list[str]:
    """Read a one-sentence-per-line UTF-8 corpus.

    Segmented files are split on spaces and BMES-encoded; raw files come
    back as normalized strings. Empty lines are skipped. Bad bytes raise
    Utf8Error carrying the 1-based line number.
    """
    sentences = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise Utf8Error(lineno) from exc
            line = normalize(line)
            if char_map:
                line = apply_char_map(line, char_map)
            if not line:
                continue
            sentences.append(bmes_encode(line.split(" ")) if segmented else line)
    return sentences


@dataclass(frozen=True)
class DatasetStats:
    word_count: int
    phrase_count: int
    avg_sentence_length: float
    sentence_count: int
    char_count: int


def dataset_stats(corpus, phrase_min_chars: int = 2) -> DatasetStats:
    """Count words, phrases and sentence lengths over a segmented corpus.

    A phrase is any word strictly longer than phrase_min_chars
    characters; average sentence length is in characters. Accepts
    TaggedSentences or plain word lists.
    """
    if not corpus:
        raise EmptyCorpus("no sentences")
    word_count = phrase_count = char_count = 0
    for sent in corpus:
        words = bmes_decode(sent) if isinstance(sent, TaggedSentence) else sent
        for w in words:
            word_count += 1
            char_count += len(w)
            if len(w) > phrase_min_chars:
                phrase_count += 1
    return DatasetStats(
        word_count=word_count,
        phrase_count=phrase_count,
        avg_sentence_length=char_count / len(corpus),
        sentence_count=len(corpus),
        char_count=char_count,
    )
