"""Term/attribute correlation scans with Bonferroni-corrected significance."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special

from .errors import InputError, UndefinedCorrelationError
from .features import DocTermMatrix
from .geo import UnitAttributeTable

log = logging.getLogger(__name__)

# (column name, predicate on rho) in report order
BUCKETS = (
    ("gt_0.4", lambda r: r > 0.4),
    ("0.3_0.4", lambda r: 0.3 <= r <= 0.4),
    ("0.2_0.3", lambda r: 0.2 <= r < 0.3),
    ("negative", lambda r: r < 0.0),
)


def is_significant(p_adjusted: float, threshold: float) -> bool:
    """``p_adjusted < threshold``; a threshold of 1 or more keeps everything."""
    return threshold >= 1.0 or p_adjusted < threshold


@dataclass(frozen=True)
class CorrelationResult:
    term: str
    attribute: str
    rho: float
    p_raw: float
    p_adjusted: float
    n: int


@dataclass
class ScanReport:
    results: list[CorrelationResult]
    m: int
    significance_threshold: float
    bucket_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    skipped_attributes: list[str] = field(default_factory=list)
    skipped_pairs: int = 0

    def significant(self, attribute: str | None = None) -> list[CorrelationResult]:
        return [
            r
            for r in self.results
            if is_significant(r.p_adjusted, self.significance_threshold)
            and (attribute is None or r.attribute == attribute)
        ]

    def attributes(self) -> list[str]:
        return sorted({r.attribute for r in self.results})


def pearson(x, y) -> float:
    """Sample Pearson correlation, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("pearson needs two 1-d vectors of equal length")
    if x.size < 2:
        raise InputError("pearson needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0 or np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    rho = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def p_value(rho: float, n: int) -> float:
    """Two-sided p-value of the t-test for a Pearson coefficient.

    ``t = rho*sqrt((n-2)/(1-rho^2))`` with ``n-2`` degrees of freedom; the tail
    is the regularised incomplete beta ``I_{df/(df+t^2)}(df/2, 1/2)``.
    """
    if n < 3:
        raise InputError("p_value needs n >= 3")
    r = abs(float(rho))
    if r >= 1.0:
        return 0.0
    if r == 0.0:
        return 1.0
    df = n - 2.0
    # df/(df+t^2) simplifies to 1 - rho^2
    return float(special.betainc(0.5 * df, 0.5, 1.0 - r * r))


def _p_values(rho: np.ndarray, n: int) -> np.ndarray:
    r = np.abs(rho)
    p = special.betainc(0.5 * (n - 2.0), 0.5, np.clip(1.0 - r * r, 0.0, 1.0))
    p = np.where(r >= 1.0, 0.0, p)
    return np.where(r == 0.0, 1.0, p)


def bonferroni(p_raw: float, m: int) -> float:
    if m < 1:
        raise InputError("m must be >= 1")
    if not 0.0 <= p_raw <= 1.0:
        raise InputError("p must lie in [0, 1]")
    return min(1.0, m * p_raw)


def _scan_attribute(X, row_units, terms, attr, column):
    """Correlate every term column against one attribute (pairwise deletion)."""
    keep = [i for i, u in enumerate(row_units) if u in column]
    if len(keep) < 3:
        log.warning("attribute %s: only %d units with values, skipped", attr, len(keep))
        return None
    y = np.array([column[row_units[i]] for i in keep])
    if np.ptp(y) == 0.0:
        log.warning("attribute %s: constant over units, skipped", attr)
        return None
    Xs = X[keep]
    n = len(keep)
    xc = Xs - Xs.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", xc, xc)
    ok = (np.ptp(Xs, axis=0) > 0.0) & (sxx > 0.0)
    cov = yc @ xc
    rho = np.zeros(len(terms))
    rho[ok] = cov[ok] / np.sqrt(sxx[ok] * float(yc @ yc))
    rho = np.clip(rho, -1.0, 1.0)
    cols = np.flatnonzero(ok)
    return n, cols, rho[cols], _p_values(rho[cols], n), len(terms) - cols.size


def scan(
    matrix: DocTermMatrix,
    attrs: UnitAttributeTable,
    attributes: Sequence[str] | None = None,
    threshold: float = 0.01,
    n_jobs: int = 1,
) -> ScanReport:
    """Pearson-correlate every term with every attribute.

    The Bonferroni family is every (term, attribute) test actually performed
    in this call.  Zero-variance terms and attributes are skipped.
    """
    if attributes is None:
        attributes = attrs.attributes()
    attributes = sorted(attributes)
    terms = matrix.terms()
    X = matrix.dense()
    row_units = matrix.row_units
    columns = {a: attrs.column(a) for a in attributes}

    def work(a):
        return _scan_attribute(X, row_units, terms, a, columns[a])

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(work, attributes))
    else:
        outcomes = [work(a) for a in attributes]

    report = ScanReport([], 0, threshold)
    raw = []
    for a, out in zip(attributes, outcomes):
        if out is None:
            report.skipped_attributes.append(a)
            continue
        n, cols, rho, p, n_skipped = out
        report.skipped_pairs += n_skipped
        for j, r, pr in zip(cols.tolist(), rho.tolist(), p.tolist()):
            raw.append((a, terms[j], r, pr, n))
    m = len(raw)
    report.m = m
    raw.sort(key=lambda t: (t[0], t[1]))
    report.results = [CorrelationResult(t, a, r, pr, min(1.0, m * pr), n) for a, t, r, pr, n in raw]
    for a in attributes:
        if a in report.skipped_attributes:
            continue
        sig = [r.rho for r in report.significant(a)]
        counts = {"all": len(sig)}
        for name, pred in BUCKETS:
            counts[name] = sum(1 for r in sig if pred(r))
        report.bucket_counts[a] = counts
    return report


def top_terms(report: ScanReport, attribute: str, k: int = 10) -> list[tuple[str, float]]:
    """The ``k`` significant terms with the largest rho for ``attribute``."""
    if attribute not in report.bucket_counts:
        raise KeyError(f"attribute {attribute!r} not in report")
    sig = sorted(report.significant(attribute), key=lambda r: (-r.rho, r.term))
    return [(r.term, r.rho) for r in sig[:k]]


def write_scan_csv(report: ScanReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attribute", "term", "rho", "p_raw", "p_adjusted", "n"])
        for r in report.results:
            w.writerow([r.attribute, r.term, repr(r.rho), repr(r.p_raw), repr(r.p_adjusted), r.n])


def write_bucket_csv(report: ScanReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attribute", "all", *(name for name, _ in BUCKETS)])
        for a, counts in sorted(report.bucket_counts.items()):
            w.writerow([a, counts["all"], *(counts[name] for name, _ in BUCKETS)])


def write_top_terms_csv(report: ScanReport, path, k: int = 10) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["attribute", "rank", "term", "rho"])
        for a in sorted(report.bucket_counts):
            for rank, (t, r) in enumerate(top_terms(report, a, k), start=1):
                w.writerow([a, rank, t, repr(r)])
