"""Sparse unit x term weight matrices.

Weighting schemes
-----------------
raw_tf
    Term counts.
normalized_tf
    Counts divided by the document's token count (all tokens, before
    vocabulary filtering).
paper_tfidf
    Normalised tf *divided* by ``ln(N / df)``.  Terms present in every
    document (``ln 1 = 0``) get weight 0 and are reported as degenerate.
standard_tfidf
    Normalised tf multiplied by ``ln(N / df)``.
"""
from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import InputError, InvariantError
from .textprep import TokenizedDocument, Vocabulary

SCHEMES = ("raw_tf", "normalized_tf", "paper_tfidf", "standard_tfidf")


@dataclass(frozen=True)
class DocTermMatrix:
    row_units: tuple[str, ...]
    vocabulary: Vocabulary
    cells: sparse.csr_matrix
    scheme: str
    degenerate_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.cells.shape != (len(self.row_units), len(self.vocabulary)):
            raise InvariantError("matrix shape does not match rows/vocabulary")
        if self.cells.nnz and not np.all(np.isfinite(self.cells.data)):
            raise InvariantError("non-finite weight in matrix")

    @property
    def shape(self):
        return self.cells.shape

    def terms(self) -> list[str]:
        return self.vocabulary.term_list()

    def dense(self) -> np.ndarray:
        return self.cells.toarray()


def term_frequencies(doc: TokenizedDocument, vocab: Vocabulary) -> dict[int, int]:
    """Column index -> count for tokens of ``doc`` that are in ``vocab``."""
    counts = Counter(t for t in doc.tokens if t in vocab.terms)
    return {vocab.terms[t]: c for t, c in counts.items()}


def normalized_tf(count: int, token_count: int) -> float:
    if count == 0:
        return 0.0
    if token_count <= 0:
        raise InvariantError("term count is positive but the document has no tokens")
    return count / token_count


def paper_idf_denominator(n_docs: int, df: int) -> float:
    """``ln(n_docs / df)``; zero when the term occurs in every document."""
    if n_docs < 1 or not 1 <= df <= n_docs:
        raise InputError(f"need 1 <= df <= n_docs, got df={df}, n_docs={n_docs}")
    return math.log(n_docs / df)


def build_matrix(
    docs: Sequence[TokenizedDocument], vocab: Vocabulary, scheme: str = "paper_tfidf"
) -> DocTermMatrix:
    if scheme not in SCHEMES:
        raise InputError(f"unknown weighting scheme {scheme!r}")
    if not docs:
        raise InputError("cannot build a matrix from zero documents")
    if len(vocab) == 0:
        raise InputError("cannot build a matrix over an empty vocabulary")
    rows, cols, counts, lengths = [], [], [], []
    for i, d in enumerate(docs):
        tf = term_frequencies(d, vocab)
        for j in sorted(tf):
            rows.append(i)
            cols.append(j)
            counts.append(tf[j])
        lengths.append(d.token_count)
    rows_a = np.asarray(rows, dtype=np.int64)
    cols_a = np.asarray(cols, dtype=np.int64)
    counts_a = np.asarray(counts, dtype=np.float64)
    n_docs, n_terms = len(docs), len(vocab)

    degenerate: tuple[str, ...] = ()
    if scheme == "raw_tf":
        data = counts_a
    else:
        data = counts_a / np.asarray(lengths, dtype=np.float64)[rows_a]
        if scheme != "normalized_tf":
            df = np.bincount(cols_a, minlength=n_terms)
            denom = np.zeros(n_terms)
            present = df > 0
            denom[present] = np.log(n_docs / df[present])
            terms = vocab.term_list()
            degenerate = tuple(terms[j] for j in np.flatnonzero(df == n_docs))
            if scheme == "paper_tfidf":
                scale = np.zeros(n_terms)
                ok = denom > 0
                scale[ok] = 1.0 / denom[ok]
            else:
                scale = denom
            data = data * scale[cols_a]
    cells = sparse.csr_matrix((data, (rows_a, cols_a)), shape=(n_docs, n_terms))
    cells.eliminate_zeros()
    cells.sort_indices()
    return DocTermMatrix(tuple(d.unit_id for d in docs), vocab, cells, scheme, degenerate)


def term_vector(m: DocTermMatrix, term: str) -> np.ndarray:
    """Dense weights of ``term`` over the matrix rows."""
    if term not in m.vocabulary.terms:
        raise KeyError(f"term {term!r} not in vocabulary")
    j = m.vocabulary.terms[term]
    return np.asarray(m.cells[:, j].toarray()).ravel()


def write_matrix(m: DocTermMatrix, path) -> None:
    """Write ``row_unit_id,term,weight`` triplets plus a JSON header next to them.

    The header goes to ``<path>.json`` (suffix replaced) and records the row
    and column order so empty rows/columns survive the round trip.
    """
    path = Path(path)
    terms = m.terms()
    coo = m.cells.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_unit_id", "term", "weight"])
        for k in order:
            w.writerow([m.row_units[coo.row[k]], terms[coo.col[k]], format(float(coo.data[k]), ".17g")])
    header = {
        "scheme": m.scheme,
        "n_rows": len(m.row_units),
        "n_terms": len(terms),
        "row_units": list(m.row_units),
        "terms": terms,
        "total_count": [m.vocabulary.total_count[t] for t in terms],
        "doc_count": [m.vocabulary.doc_count[t] for t in terms],
        "degenerate_terms": list(m.degenerate_terms),
    }
    path.with_suffix(".json").write_text(json.dumps(header, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def read_matrix(path) -> DocTermMatrix:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    vocab = Vocabulary.from_counts(
        dict(zip(header["terms"], header["total_count"])),
        dict(zip(header["terms"], header["doc_count"])),
    )
    row_of = {u: i for i, u in enumerate(header["row_units"])}
    rows, cols, data = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(row_of[rec["row_unit_id"]])
            cols.append(vocab.terms[rec["term"]])
            data.append(float(rec["weight"]))
    cells = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(header["n_rows"], header["n_terms"]),
    )
    cells.sort_indices()
    return DocTermMatrix(tuple(header["row_units"]), vocab, cells, header["scheme"], tuple(header["degenerate_terms"]))
