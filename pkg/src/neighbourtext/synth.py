"""Seeded synthetic inputs: gazetteer, attribute zones and a text corpus.

Units sit on a regular grid (3 km spacing) so that every zone and microblog
jittered within 1 km of a unit centre belongs to that unit alone.  Planted
terms are inserted at a per-unit rate that is a linear function of one
attribute plus Gaussian noise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import RawRecord, write_records
from .errors import InputError
from .geo import (
    AttributeSource,
    Gazetteer,
    GeoPoint,
    SpatialUnit,
    aggregate_attributes,
    write_attribute_sources,
    write_gazetteer,
)
from .porter import porter_stem
from .textprep import load_stopwords

ORIGIN = (51.5074, -0.1278)
SPACING_KM = 3.0
KM_PER_DEG = 6371.0 * math.pi / 180.0
DEFAULT_ATTRIBUTES = ("attr_a", "attr_b", "attr_c")
# maximum normalised tf a planted term reaches at the top of its attribute range
PLANT_RATE = 0.03
_FILLER = ("the", "and", "of", "is", "in", "it", "we")


@dataclass(frozen=True)
class PlantSpec:
    attribute: str
    noise: float = 0.05
    term: str | None = None

    @classmethod
    def parse(cls, text: str) -> "PlantSpec":
        """Parse ``attribute[:noise[:term]]``."""
        parts = text.split(":")
        if not parts[0] or len(parts) > 3:
            raise InputError(f"bad plant spec {text!r}; expected attribute[:noise[:term]]")
        noise = float(parts[1]) if len(parts) > 1 and parts[1] else 0.05
        term = parts[2] if len(parts) > 2 and parts[2] else None
        return cls(parts[0], noise, term)


def make_words(n: int, rng: np.random.Generator, exclude=()) -> list[str]:
    """``n`` distinct pseudo-words that survive tokenisation and stemming unchanged."""
    cons, vows = "bdfgklmnprtvz", "aiou"
    stop = load_stopwords()
    seen = set(exclude)
    out = []
    while len(out) < n:
        syl = int(rng.integers(2, 4))
        w = "".join(cons[rng.integers(len(cons))] + vows[rng.integers(len(vows))] for _ in range(syl))
        w += cons[rng.integers(len(cons))]
        if w in seen or w in stop or porter_stem(w) != w:
            continue
        seen.add(w)
        out.append(w)
    return out


def _grid(n_units: int) -> list[GeoPoint]:
    side = math.ceil(math.sqrt(n_units))
    dlat = SPACING_KM / KM_PER_DEG
    dlon = SPACING_KM / (KM_PER_DEG * math.cos(math.radians(ORIGIN[0])))
    lat0 = ORIGIN[0] - dlat * (side - 1) / 2
    lon0 = ORIGIN[1] - dlon * (side - 1) / 2
    return [GeoPoint(lat0 + dlat * (i // side), lon0 + dlon * (i % side)) for i in range(n_units)]


def _jitter(p: GeoPoint, radius_km: float, rng: np.random.Generator) -> GeoPoint:
    r = radius_km * math.sqrt(rng.random())
    a = 2 * math.pi * rng.random()
    dlat = r * math.cos(a) / KM_PER_DEG
    dlon = r * math.sin(a) / (KM_PER_DEG * math.cos(math.radians(p.lat)))
    return GeoPoint(p.lat + dlat, p.lon + dlon)


def synthesize(
    out_dir,
    n_units: int = 200,
    vocab_size: int = 500,
    planted: Sequence[PlantSpec] = (PlantSpec("attr_a"),),
    seed: int = 0,
    kind: str = "qa",
    attributes: Sequence[str] = DEFAULT_ATTRIBUTES,
    severed: bool = False,
    tokens_per_unit: tuple[int, int] = (800, 1400),
) -> dict[str, Path]:
    """Write ``gazetteer.csv``, ``zones.csv``, ``corpus.jsonl`` and ``truth.json``.

    With ``severed`` the planted terms keep their rate distribution but draw
    it from an independent uniform variable instead of the attribute.
    """
    if n_units < 20:
        raise InputError("n_units must be >= 20")
    if vocab_size < 50:
        raise InputError("vocab_size must be >= 50")
    if kind not in ("qa", "microblog"):
        raise InputError(f"unknown record kind {kind!r}")
    for p in planted:
        if p.attribute not in attributes:
            raise InputError(f"plant references unknown attribute {p.attribute!r}")
        if p.noise < 0:
            raise InputError("plant noise must be >= 0")
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = make_words(vocab_size, rng)
    chosen = [p.term for p in planted if p.term]
    for t in chosen:
        if porter_stem(t) != t or t in vocab or t in load_stopwords():
            raise InputError(f"planted term {t!r} is not stem-stable or clashes with the vocabulary")
    auto = iter(make_words(len(planted), rng, exclude=set(vocab) | set(chosen)))
    plant_terms = [p.term or next(auto) for p in planted]

    centres = _grid(n_units)
    units = [SpatialUnit(f"U{i:04d}", f"Area {i:04d}", c) for i, c in enumerate(centres)]
    gazetteer = Gazetteer(units)

    latent = rng.random((n_units, len(attributes)))
    zones = []
    zid = 0
    for i, u in enumerate(units):
        for _ in range(int(rng.integers(3, 7))):
            values = {}
            for k, a in enumerate(attributes):
                v = latent[i, k] + rng.normal(0.0, 0.02)
                # sparse missing cells exercise per-attribute averaging
                if k == len(attributes) - 1 and rng.random() < 0.05:
                    continue
                values[a] = float(v)
            zones.append(AttributeSource(f"Z{zid:05d}", _jitter(u.centre, 0.8, rng), values))
            zid += 1
    # orphans between grid points, more than 1 km from every centre
    for _ in range(max(1, n_units // 10)):
        c = centres[int(rng.integers(n_units))]
        p = GeoPoint(c.lat + 0.5 * SPACING_KM / KM_PER_DEG, c.lon)
        zones.append(AttributeSource(f"Z{zid:05d}", p, {a: float(rng.random()) for a in attributes}))
        zid += 1
    table = aggregate_attributes(gazetteer, zones, 10, 1.0)

    rates = np.zeros((n_units, len(planted)))
    for k, p in enumerate(planted):
        vals = np.array([table.get(u.unit_id, p.attribute) for u in units], dtype=np.float64)
        z = (vals - vals.min()) / (vals.max() - vals.min())
        if severed:
            z = rng.random(n_units)
        noisy = z + rng.normal(0.0, p.noise, n_units) if p.noise > 0 else z
        rates[:, k] = PLANT_RATE * np.clip(noisy, 0.0, None)

    weights = 1.0 / (np.arange(vocab_size) + 2.0) ** 1.1
    weights /= weights.sum()
    records = []
    rid = 0
    for i, u in enumerate(units):
        total = int(rng.integers(tokens_per_unit[0], tokens_per_unit[1] + 1))
        counts = [int(round(r * total)) for r in rates[i]]
        n_bg = total - sum(counts)
        tokens = [vocab[j] for j in rng.choice(vocab_size, size=n_bg, p=weights)]
        for t, c in zip(plant_terms, counts):
            tokens.extend([t] * c)
        tokens = [tokens[j] for j in rng.permutation(len(tokens))]
        n_rec = int(rng.integers(6, 13)) if kind == "qa" else int(rng.integers(40, 80))
        cuts = np.sort(rng.choice(np.arange(1, len(tokens)), size=n_rec - 1, replace=False))
        for chunk in np.split(np.array(tokens, dtype=object), cuts):
            text = _render(list(chunk), rng, kind)
            if kind == "qa":
                rec = RawRecord(f"R{rid:06d}", "qa", text, unit_names=(u.name,))
            else:
                rec = RawRecord(f"R{rid:06d}", "microblog", text, location=_jitter(u.centre, 0.3, rng))
            records.append(rec)
            rid += 1

    paths = {
        "gazetteer": out_dir / "gazetteer.csv",
        "attributes": out_dir / "zones.csv",
        "corpus": out_dir / "corpus.jsonl",
        "truth": out_dir / "truth.json",
    }
    write_gazetteer(gazetteer, paths["gazetteer"])
    write_attribute_sources(zones, list(attributes), paths["attributes"])
    write_records(records, paths["corpus"])
    truth = {
        "seed": seed,
        "n_units": n_units,
        "vocab_size": vocab_size,
        "kind": kind,
        "severed": severed,
        "attributes": list(attributes),
        "planted": [
            {"term": t, "attribute": p.attribute, "noise": p.noise} for t, p in zip(plant_terms, planted)
        ],
    }
    paths["truth"].write_text(json.dumps(truth, indent=1) + "\n", encoding="utf-8")
    return paths


def _render(tokens: list[str], rng: np.random.Generator, kind: str) -> str:
    """Lay tokens out as punctuated sentences with removable noise."""
    out, i = [], 0
    while i < len(tokens):
        n = int(rng.integers(6, 14))
        sent = []
        for t in tokens[i : i + n]:
            if rng.random() < 0.2:
                sent.append(_FILLER[int(rng.integers(len(_FILLER)))])
            sent.append(t)
        if kind == "microblog" and rng.random() < 0.2:
            sent.insert(0, "@user" + str(int(rng.integers(1000))))
        if rng.random() < 0.05:
            sent.append("http://example.org/" + str(int(rng.integers(10_000))))
        sent[0] = sent[0].capitalize()
        out.append(" ".join(sent) + ".!?"[int(rng.integers(3))])
        i += n
    return " ".join(out)
