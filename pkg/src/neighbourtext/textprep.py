"""Text cleaning, tokenisation, stemming and vocabulary construction."""
from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InputError
from .porter import porter_stem

KINDS = ("qa", "microblog")

_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<!\S)@\S*")
_SPLIT_RE = re.compile(r"[\W_]+")


def load_stopwords(path=None) -> frozenset[str]:
    """Read a stopword file (one word per line, ``#`` comments).

    With no path the bundled English list is returned.
    """
    if path is None:
        return _bundled_stopwords()
    return _parse_stopwords(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def _bundled_stopwords() -> frozenset[str]:
    text = resources.files("neighbourtext").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return _parse_stopwords(text)


def _parse_stopwords(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


def clean_text(text: str, kind: str = "qa") -> str:
    """Strip URLs (all kinds) and ``@``-prefixed tokens (microblogs only)."""
    if kind not in KINDS:
        raise InputError(f"unknown record kind {kind!r}")
    text = _URL_RE.sub("", text)
    if kind == "microblog":
        text = _MENTION_RE.sub("", text)
    return text


def tokenize(text: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase, split on non-alphanumerics and drop short, numeric and stop tokens."""
    stop = _bundled_stopwords() if stopwords is None else stopwords
    out = []
    for tok in _SPLIT_RE.split(text.lower()):
        if len(tok) < 2 or tok.isdigit() or tok in stop:
            continue
        out.append(tok)
    return out


def preprocess(text: str, kind: str = "qa", stopwords: Iterable[str] | None = None) -> list[str]:
    """Clean, tokenise and stem ``text`` into a token stream."""
    return [porter_stem(t) for t in tokenize(clean_text(text, kind), stopwords)]


@dataclass(frozen=True)
class TokenizedDocument:
    unit_id: str
    tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        return len(self.tokens)


def tokenize_documents(docs, kind: str = "qa", stopwords=None) -> list[TokenizedDocument]:
    """Turn assembled unit documents into token streams."""
    return [TokenizedDocument(d.unit_id, tuple(preprocess(d.raw_text, kind, stopwords))) for d in docs]


def record_token_sets(records, kind: str = "qa", stopwords=None) -> dict[str, frozenset[str]]:
    """Distinct stemmed terms per raw record, for record-level document counts."""
    return {r.record_id: frozenset(preprocess(r.text, kind, stopwords)) for r in records}


@dataclass(frozen=True)
class Vocabulary:
    """Filtered term index with lexicographically ordered columns."""

    terms: Mapping[str, int]
    total_count: Mapping[str, int]
    doc_count: Mapping[str, int]

    @classmethod
    def from_counts(cls, total_count: Mapping[str, int], doc_count: Mapping[str, int]) -> "Vocabulary":
        ordered = sorted(total_count)
        return cls(
            {t: i for i, t in enumerate(ordered)},
            {t: int(total_count[t]) for t in ordered},
            {t: int(doc_count[t]) for t in ordered},
        )

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term) -> bool:
        return term in self.terms

    def term_list(self) -> list[str]:
        return list(self.terms)

    def index(self, term: str) -> int:
        return self.terms[term]


def build_vocabulary(
    docs: Sequence[TokenizedDocument],
    record_token_sets: Mapping[str, Iterable[str]] | None = None,
    min_count: int = 5,
    min_docs: int = 5,
) -> Vocabulary:
    """Keep terms seen at least ``min_count`` times in at least ``min_docs`` documents.

    Document frequency is counted over raw records when ``record_token_sets``
    is given and over the unit documents otherwise.
    """
    if min_count < 1 or min_docs < 1:
        raise InputError("min_count and min_docs must be >= 1")
    total: Counter = Counter()
    for d in docs:
        total.update(d.tokens)
    dfs: Counter = Counter()
    if record_token_sets is not None:
        for terms in record_token_sets.values():
            dfs.update(set(terms))
    else:
        for d in docs:
            dfs.update(set(d.tokens))
    kept = {t: c for t, c in total.items() if c >= min_count and dfs[t] >= min_docs}
    return Vocabulary.from_counts(kept, {t: dfs[t] for t in kept})


def restrict_to_vocabulary(doc: TokenizedDocument, vocab: Vocabulary) -> TokenizedDocument:
    return TokenizedDocument(doc.unit_id, tuple(t for t in doc.tokens if t in vocab.terms))


def write_vocabulary(vocab: Vocabulary, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "index", "total_count", "doc_count"])
        for t, i in vocab.terms.items():
            w.writerow([t, i, vocab.total_count[t], vocab.doc_count[t]])


def read_vocabulary(path) -> Vocabulary:
    total, dfs = {}, {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            total[row["term"]] = int(row["total_count"])
            dfs[row["term"]] = int(row["doc_count"])
    return Vocabulary.from_counts(total, dfs)
