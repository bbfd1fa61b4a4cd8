"""Run configuration: an INI file with one section per pipeline stage.

Every key has a default; unknown sections or keys are rejected.  Relative
paths are resolved against the directory holding the config file.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import InputError
from .features import SCHEMES
from .model import ElasticNetConfig

# section -> key -> default (as written in a config file)
DEFAULTS: dict[str, dict[str, str]] = {
    "paths": {"gazetteer": "", "attributes": "", "corpus": "", "stopwords": ""},
    "corpus": {
        "kind": "qa",
        "format": "jsonl",
        "max_km": "1.0",
        "min_sentences": "40",
        "sentence_filter": "auto",
        "histogram_edges": "0,10,100,1000,10000",
    },
    "aggregate": {"k_max": "10", "max_km": "1.0"},
    "text": {"min_count": "5", "min_docs": "5", "record_level_df": "true"},
    "features": {"scheme": "paper_tfidf"},
    "correlate": {"threshold": "0.01", "top_k": "10"},
    "model": {
        "lambda1": "0.1",
        "lambda2": "0.1",
        "tol": "1e-7",
        "max_iter": "10000",
        "standardize": "true",
        "folds": "10",
        "train_frac": "0.75",
        "bins": "10",
        "top_k": "2",
    },
    "run": {"seed": "0", "out": "out", "attributes": "", "n_jobs": "1"},
}


@dataclass
class RunConfig:
    gazetteer: Path | None = None
    attributes_path: Path | None = None
    corpus: list[Path] = field(default_factory=list)
    stopwords: Path | None = None
    kind: str = "qa"
    format: str = "jsonl"
    corpus_max_km: float = 1.0
    min_sentences: int = 40
    sentence_filter: str = "auto"
    histogram_edges: tuple[float, ...] = (0, 10, 100, 1000, 10000)
    k_max: int = 10
    aggregate_max_km: float = 1.0
    min_count: int = 5
    min_docs: int = 5
    record_level_df: bool = True
    scheme: str = "paper_tfidf"
    threshold: float = 0.01
    correlate_top_k: int = 10
    elastic_net: ElasticNetConfig = field(default_factory=ElasticNetConfig)
    folds: int = 10
    train_frac: float = 0.75
    bins: int = 10
    model_top_k: int = 2
    seed: int = 0
    out: Path = Path("out")
    attributes: list[str] = field(default_factory=list)
    n_jobs: int = 1
    source: Path | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.kind in ("qa", "microblog"), "corpus.kind must be qa or microblog"),
            (self.format in ("jsonl", "json"), "corpus.format must be jsonl or json"),
            (self.corpus_max_km > 0, "corpus.max_km must be > 0"),
            (self.min_sentences >= 0, "corpus.min_sentences must be >= 0"),
            (self.sentence_filter in ("auto", "on", "off"), "corpus.sentence_filter must be auto, on or off"),
            (list(self.histogram_edges) == sorted(set(self.histogram_edges)), "histogram_edges must increase"),
            (self.k_max >= 1, "aggregate.k_max must be >= 1"),
            (self.aggregate_max_km > 0, "aggregate.max_km must be > 0"),
            (self.min_count >= 1 and self.min_docs >= 1, "text.min_count and text.min_docs must be >= 1"),
            (self.scheme in SCHEMES, f"features.scheme must be one of {SCHEMES}"),
            (0.0 < self.threshold <= 1.0, "correlate.threshold must lie in (0, 1]"),
            (self.correlate_top_k >= 1, "correlate.top_k must be >= 1"),
            (self.folds >= 2, "model.folds must be >= 2"),
            (0.0 < self.train_frac < 1.0, "model.train_frac must lie in (0, 1)"),
            (self.bins >= 1, "model.bins must be >= 1"),
            (self.model_top_k >= 1, "model.top_k must be >= 1"),
            (0 <= self.seed < 2**64, "run.seed must be an unsigned 64-bit integer"),
            (self.n_jobs >= 1, "run.n_jobs must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InputError(msg)

    @property
    def apply_sentence_filter(self) -> bool:
        if self.sentence_filter == "auto":
            return self.kind == "qa"
        return self.sentence_filter == "on"

    def with_overrides(self, seed: int | None = None, out=None) -> "RunConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        if seed is not None:
            kw["seed"] = seed
            en = self.elastic_net
            kw["elastic_net"] = ElasticNetConfig(en.lambda1, en.lambda2, en.tol, en.max_iter, en.standardize, seed)
        if out is not None:
            kw["out"] = Path(out)
        return RunConfig(**kw)

    def echo(self) -> dict:
        """Plain-data view of every setting, for manifests."""
        en = self.elastic_net
        return {
            "paths": {
                "gazetteer": _s(self.gazetteer),
                "attributes": _s(self.attributes_path),
                "corpus": [str(p) for p in self.corpus],
                "stopwords": _s(self.stopwords),
            },
            "corpus": {
                "kind": self.kind,
                "format": self.format,
                "max_km": self.corpus_max_km,
                "min_sentences": self.min_sentences,
                "sentence_filter": self.sentence_filter,
                "histogram_edges": list(self.histogram_edges),
            },
            "aggregate": {"k_max": self.k_max, "max_km": self.aggregate_max_km},
            "text": {"min_count": self.min_count, "min_docs": self.min_docs, "record_level_df": self.record_level_df},
            "features": {"scheme": self.scheme},
            "correlate": {"threshold": self.threshold, "top_k": self.correlate_top_k},
            "model": {
                "lambda1": en.lambda1,
                "lambda2": en.lambda2,
                "tol": en.tol,
                "max_iter": en.max_iter,
                "standardize": en.standardize,
                "folds": self.folds,
                "train_frac": self.train_frac,
                "bins": self.bins,
                "top_k": self.model_top_k,
            },
            "run": {"seed": self.seed, "out": str(self.out), "attributes": list(self.attributes), "n_jobs": self.n_jobs},
        }


def _s(p) -> str:
    return "" if p is None else str(p)


def _bool(section, key, value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise InputError(f"[{section}] {key}: expected a boolean, got {value!r}")


def load_config(path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from exc
    return config_from_parser(parser, path.parent, source=path)


def config_from_parser(parser: configparser.ConfigParser, base: Path, source=None) -> RunConfig:
    for section in parser.sections():
        if section not in DEFAULTS:
            raise InputError(f"unknown config section [{section}]")
        unknown = set(parser[section]) - set(DEFAULTS[section])
        if unknown:
            raise InputError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    raw = {s: dict(keys) for s, keys in DEFAULTS.items()}
    for section in parser.sections():
        raw[section].update(parser[section])

    def path_or_none(v: str):
        v = v.strip()
        if not v:
            return None
        p = Path(v)
        return p if p.is_absolute() else base / p

    def num(section, key, cast):
        try:
            return cast(raw[section][key])
        except ValueError as exc:
            raise InputError(f"[{section}] {key}: {exc}") from exc

    def items(v: str) -> list[str]:
        return [s.strip() for s in v.split(",") if s.strip()]

    m = raw["model"]
    try:
        en = ElasticNetConfig(
            lambda1=num("model", "lambda1", float),
            lambda2=num("model", "lambda2", float),
            tol=num("model", "tol", float),
            max_iter=num("model", "max_iter", int),
            standardize=_bool("model", "standardize", m["standardize"]),
            seed=num("run", "seed", int),
        )
    except InputError as exc:
        raise InputError(f"[model] {exc}") from exc
    try:
        edges = tuple(float(e) for e in items(raw["corpus"]["histogram_edges"]))
    except ValueError as exc:
        raise InputError(f"[corpus] histogram_edges: {exc}") from exc
    return RunConfig(
        gazetteer=path_or_none(raw["paths"]["gazetteer"]),
        attributes_path=path_or_none(raw["paths"]["attributes"]),
        corpus=[path_or_none(p) for p in items(raw["paths"]["corpus"])],
        stopwords=path_or_none(raw["paths"]["stopwords"]),
        kind=raw["corpus"]["kind"].strip(),
        format=raw["corpus"]["format"].strip(),
        corpus_max_km=num("corpus", "max_km", float),
        min_sentences=num("corpus", "min_sentences", int),
        sentence_filter=raw["corpus"]["sentence_filter"].strip(),
        histogram_edges=edges,
        k_max=num("aggregate", "k_max", int),
        aggregate_max_km=num("aggregate", "max_km", float),
        min_count=num("text", "min_count", int),
        min_docs=num("text", "min_docs", int),
        record_level_df=_bool("text", "record_level_df", raw["text"]["record_level_df"]),
        scheme=raw["features"]["scheme"].strip(),
        threshold=num("correlate", "threshold", float),
        correlate_top_k=num("correlate", "top_k", int),
        elastic_net=en,
        folds=num("model", "folds", int),
        train_frac=num("model", "train_frac", float),
        bins=num("model", "bins", int),
        model_top_k=num("model", "top_k", int),
        seed=en.seed,
        out=path_or_none(raw["run"]["out"]) or base / "out",
        attributes=items(raw["run"]["attributes"]),
        n_jobs=num("run", "n_jobs", int),
        source=source,
    )


def write_config(path, values: dict[str, dict[str, str]]) -> None:
    """Write a config file containing ``values`` layered over the defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, keys in DEFAULTS.items():
        parser[section] = {**keys, **values.get(section, {})}
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)
