"""Pipeline stages behind the command-line subcommands.

Each stage reads its inputs (raw files or the previous stage's persisted
intermediates in the output directory), writes a manifest, then writes its
reports.  Reports are byte-for-byte reproducible from inputs, config and seed.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import logging
import os
from bisect import bisect_right
from pathlib import Path
from typing import Sequence

from . import __version__, kernels
from .config import RunConfig, write_config
from .corpus import (
    assemble_geo_documents,
    assemble_qa_documents,
    filter_min_sentences,
    load_records,
    read_documents,
    write_documents,
)
from .errors import InputError
from .features import build_matrix, read_matrix, write_matrix
from .geo import (
    aggregate_attributes,
    load_attribute_sources,
    load_gazetteer,
    read_unit_attributes,
    write_unit_attributes,
)
from .model import RegressionProblem, monte_carlo_cv, write_cv_csv
from .stats import scan, write_bucket_csv, write_scan_csv, write_top_terms_csv
from .synth import PlantSpec, synthesize
from .textprep import build_vocabulary, load_stopwords, record_token_sets, tokenize_documents, write_vocabulary

log = logging.getLogger(__name__)

DOCUMENTS = "documents.jsonl"
RECORD_COUNTS = "record_counts.csv"
HISTOGRAM = "record_histogram.csv"
ASSEMBLY = "assembly_report.json"
UNIT_ATTRIBUTES = "unit_attributes.csv"
MATRIX = "matrix.csv"
VOCABULARY = "vocabulary.csv"
SCAN = "scan.csv"
BUCKETS = "buckets.csv"
TOP_TERMS = "top_terms.csv"
CV = "cv.csv"
REPORT = "report.md"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    now = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
    return now.replace(microsecond=0).isoformat()


def write_manifest(cfg: RunConfig, command: str, inputs: Sequence[Path], counts: dict, **extra) -> Path:
    """Record config, input digests and counts for one command."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "neighbourtext",
        "version": __version__,
        "command": command,
        "created_utc": _timestamp(),
        "kernel_backend": kernels.BACKEND,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "counts": counts,
        **extra,
    }
    path = cfg.out / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise InputError(f"{path} not found; run the `{stage}` command first")
    return path


def _need(value, name: str):
    if value is None or value == []:
        raise InputError(f"config is missing [paths] {name}")
    return value


def load_corpus(cfg: RunConfig):
    records = []
    for p in _need(cfg.corpus, "corpus"):
        records.extend(load_records(p, cfg.format))
    for r in records:
        if r.kind != cfg.kind:
            raise InputError(f"record {r.record_id!r} has kind {r.kind!r}; this run expects {cfg.kind!r}")
    return records


def histogram(counts: Sequence[int], edges: Sequence[float]) -> list[tuple[float, float, int]]:
    """Bin counts into ``[e_i, e_{i+1})`` plus an open last bin ``[e_last, inf)``.

    Values below the first edge are ignored.
    """
    edges = list(edges)
    bins = [0] * len(edges)
    for c in counts:
        i = bisect_right(edges, c) - 1
        if i >= 0:
            bins[i] += 1
    uppers = edges[1:] + [float("inf")]
    return [(lo, hi, n) for lo, hi, n in zip(edges, uppers, bins)]


def cmd_ingest(cfg: RunConfig) -> dict:
    g = load_gazetteer(_need(cfg.gazetteer, "gazetteer"))
    records = load_corpus(cfg)
    if cfg.kind == "qa":
        docs, rep = assemble_qa_documents(records, g)
    else:
        docs, rep = assemble_geo_documents(records, g, cfg.corpus_max_km)
    kept = filter_min_sentences(docs, cfg.min_sentences) if cfg.apply_sentence_filter else list(docs)
    hist = histogram(list(rep.record_counts.values()), cfg.histogram_edges)
    counts = {
        "records": len(records),
        "units_with_records": len(docs),
        "units_retained": len(kept),
        "skipped_name_pairs": rep.skipped_name_pairs,
        "dropped_out_of_range": rep.dropped_out_of_range,
    }
    write_manifest(cfg, "ingest", [cfg.gazetteer, *cfg.corpus], counts)
    write_documents(kept, cfg.out / DOCUMENTS)
    with (cfg.out / RECORD_COUNTS).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit_id", "records"])
        for uid in sorted(rep.record_counts):
            w.writerow([uid, rep.record_counts[uid]])
    with (cfg.out / HISTOGRAM).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "units"])
        for lo, hi, n in hist:
            w.writerow([_num(lo), _num(hi), n])
    (cfg.out / ASSEMBLY).write_text(json.dumps(rep.to_json(), sort_keys=True) + "\n", encoding="utf-8")
    return counts


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def cmd_aggregate(cfg: RunConfig) -> dict:
    g = load_gazetteer(_need(cfg.gazetteer, "gazetteer"))
    sources = load_attribute_sources(_need(cfg.attributes_path, "attributes"))
    table = aggregate_attributes(g, sources, cfg.k_max, cfg.aggregate_max_km)
    counts = {"zones": len(sources), "units_with_attributes": len(table.support), "attributes": len(table.attributes())}
    write_manifest(cfg, "aggregate", [cfg.gazetteer, cfg.attributes_path], counts)
    write_unit_attributes(table, cfg.out / UNIT_ATTRIBUTES)
    return counts


def cmd_features(cfg: RunConfig) -> dict:
    doc_path = _require(cfg.out / DOCUMENTS, "ingest")
    docs = read_documents(doc_path)
    if not docs:
        raise InputError("no documents survived ingestion; nothing to featurise")
    stop = load_stopwords(cfg.stopwords)
    tdocs = tokenize_documents(docs, cfg.kind, stop)
    rts = None
    inputs = [doc_path]
    if cfg.record_level_df:
        used = {rid for d in docs for rid in d.record_ids}
        records = [r for r in load_corpus(cfg) if r.record_id in used]
        rts = record_token_sets(records, cfg.kind, stop)
        inputs.extend(cfg.corpus)
    vocab = build_vocabulary(tdocs, rts, cfg.min_count, cfg.min_docs)
    if len(vocab) == 0:
        raise InputError("vocabulary is empty after frequency filtering")
    m = build_matrix(tdocs, vocab, cfg.scheme)
    counts = {"units": len(docs), "vocabulary": len(vocab), "nonzero_cells": int(m.cells.nnz)}
    write_manifest(cfg, "features", inputs, counts, degenerate_terms=list(m.degenerate_terms))
    write_vocabulary(vocab, cfg.out / VOCABULARY)
    write_matrix(m, cfg.out / MATRIX)
    return counts


def _selected_attributes(cfg: RunConfig, table) -> list[str]:
    available = table.attributes()
    if not cfg.attributes:
        return available
    missing = [a for a in cfg.attributes if a not in available]
    if missing:
        raise InputError(f"unknown attribute(s): {', '.join(missing)}")
    return sorted(cfg.attributes)


def cmd_correlate(cfg: RunConfig) -> dict:
    m_path = _require(cfg.out / MATRIX, "features")
    a_path = _require(cfg.out / UNIT_ATTRIBUTES, "aggregate")
    m = read_matrix(m_path)
    table = read_unit_attributes(a_path)
    attrs = _selected_attributes(cfg, table)
    report = scan(m, table, attrs, cfg.threshold, n_jobs=cfg.n_jobs)
    counts = {
        "tests": report.m,
        "significant": len(report.significant()),
        "skipped_attributes": len(report.skipped_attributes),
    }
    write_manifest(
        cfg, "correlate", [m_path, m_path.with_suffix(".json"), a_path], counts,
        skipped_attributes=report.skipped_attributes,
    )
    write_scan_csv(report, cfg.out / SCAN)
    write_bucket_csv(report, cfg.out / BUCKETS)
    write_top_terms_csv(report, cfg.out / TOP_TERMS, cfg.correlate_top_k)
    return counts


def cmd_predict(cfg: RunConfig) -> dict:
    m_path = _require(cfg.out / MATRIX, "features")
    a_path = _require(cfg.out / UNIT_ATTRIBUTES, "aggregate")
    m = read_matrix(m_path)
    table = read_unit_attributes(a_path)
    results, skipped = [], []
    for a in _selected_attributes(cfg, table):
        problem = RegressionProblem.from_matrix(m, table, a)
        if problem.n < 8:
            log.warning("attribute %s: only %d units, skipped", a, problem.n)
            skipped.append(a)
            continue
        results.append(
            monte_carlo_cv(
                problem, cfg.elastic_net, cfg.folds, cfg.seed, cfg.train_frac, cfg.bins,
                cfg.model_top_k, n_jobs=cfg.n_jobs,
            )
        )
    counts = {"attributes": len(results), "skipped_attributes": len(skipped)}
    inputs = [m_path, m_path.with_suffix(".json"), a_path, *[p for p in cfg.corpus if p.exists()]]
    write_manifest(
        cfg, "predict", inputs, counts, skipped_attributes=skipped,
        unconverged_folds={r.attribute: r.converged.count(False) for r in results if not all(r.converged)},
        degenerate_folds={r.attribute: list(r.degenerate_folds) for r in results if r.degenerate_folds},
    )
    write_cv_csv(results, cfg.out / CV, cfg.folds, cfg.model_top_k)
    return counts


def _read_csv(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(cfg: RunConfig) -> dict:
    """Render existing stage outputs as a Markdown summary."""
    out = cfg.out
    sections = []
    if (out / BUCKETS).exists():
        rows = _read_csv(out / BUCKETS)
        lines = ["## Significantly correlated terms", "",
                 "| attribute | all | >0.4 | [0.3,0.4] | [0.2,0.3] | <0 |", "|---|---|---|---|---|---|"]
        lines += [f"| {r['attribute']} | {r['all']} | {r['gt_0.4']} | {r['0.3_0.4']} | {r['0.2_0.3']} | {r['negative']} |" for r in rows]
        sections.append("\n".join(lines))
    if (out / TOP_TERMS).exists():
        by_attr: dict[str, list[str]] = {}
        for r in _read_csv(out / TOP_TERMS):
            by_attr.setdefault(r["attribute"], []).append(f"{r['term']} {float(r['rho']):.2f}")
        lines = ["## Top correlated terms", ""]
        lines += [f"- **{a}**: {', '.join(ts)}" for a, ts in sorted(by_attr.items())]
        sections.append("\n".join(lines))
    if (out / CV).exists():
        rows = _read_csv(out / CV)
        lines = ["## Prediction (Monte Carlo cross-validation)", "",
                 "| attribute | mean rho (std) | terms |", "|---|---|---|"]
        for r in rows:
            terms = ", ".join(v for k, v in r.items() if k.startswith("top_term_") and v)
            lines.append(f"| {r['attribute']} | {float(r['mean_rho']):.2f} ({float(r['std_rho']):.2f}) | {terms} |")
        sections.append("\n".join(lines))
    if not sections:
        raise InputError(f"no stage outputs found in {out}")
    text = "# neighbourtext report\n\n" + "\n\n".join(sections) + "\n"
    (out / REPORT).write_text(text, encoding="utf-8")
    return {"sections": len(sections)}


def cmd_synth(
    out_dir,
    n_units: int = 200,
    vocab_size: int = 500,
    plants: Sequence[str] = ("attr_a:0.05",),
    seed: int = 0,
    kind: str = "qa",
    severed: bool = False,
) -> dict:
    """Generate a synthetic input set plus a ready-to-run ``config.ini``."""
    out_dir = Path(out_dir)
    specs = [PlantSpec.parse(p) for p in plants]
    paths = synthesize(out_dir, n_units, vocab_size, specs, seed, kind, severed=severed)
    write_config(
        out_dir / "config.ini",
        {
            "paths": {"gazetteer": paths["gazetteer"].name, "attributes": paths["attributes"].name,
                      "corpus": paths["corpus"].name},
            "corpus": {"kind": kind},
            "run": {"seed": str(seed), "out": "run"},
        },
    )
    return {k: str(v) for k, v in paths.items()} | {"config": str(out_dir / "config.ini")}


STAGES = {
    "ingest": cmd_ingest,
    "aggregate": cmd_aggregate,
    "features": cmd_features,
    "correlate": cmd_correlate,
    "predict": cmd_predict,
    "report": cmd_report,
}


def run_all(cfg: RunConfig) -> None:
    for name in ("ingest", "aggregate", "features", "correlate", "predict", "report"):
        STAGES[name](cfg)
