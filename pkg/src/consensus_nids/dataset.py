"""Connection corpora: NSL-KDD CSV ingestion, label mapping, synthetic data.

NSL-KDD files have no header; each row is 41 feature columns, the raw
label, and optionally a difficulty score which is ignored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .classifier import (
    ANOMALOUS,
    CATEGORICAL,
    NORMAL,
    NUMERIC,
    ConnectionRecord,
    Feature,
    FeatureSchema,
)

__all__ = [
    "EXCLUDE",
    "DatasetError",
    "ConfigError",
    "LabeledCorpus",
    "SyntheticSpec",
    "NSLKDD_SCHEMA",
    "parse_label_map",
    "load_label_map",
    "default_label_map",
    "load_nslkdd_csv",
    "write_corpus_csv",
    "generate_synthetic",
    "split",
    "round_half_up",
]

EXCLUDE = "exclude"
_TARGETS = (NORMAL, ANOMALOUS, EXCLUDE)


class DatasetError(ValueError):
    """Malformed input data."""


class ConfigError(ValueError):
    """Invalid generator or split parameters."""


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


_NSLKDD_COLUMNS = [
    ("duration", NUMERIC),
    ("protocol_type", CATEGORICAL),
    ("service", CATEGORICAL),
    ("flag", CATEGORICAL),
    ("src_bytes", NUMERIC),
    ("dst_bytes", NUMERIC),
    ("land", CATEGORICAL),
    ("wrong_fragment", NUMERIC),
    ("urgent", NUMERIC),
    ("hot", NUMERIC),
    ("num_failed_logins", NUMERIC),
    ("logged_in", CATEGORICAL),
    ("num_compromised", NUMERIC),
    ("root_shell", NUMERIC),
    ("su_attempted", NUMERIC),
    ("num_root", NUMERIC),
    ("num_file_creations", NUMERIC),
    ("num_shells", NUMERIC),
    ("num_access_files", NUMERIC),
    ("num_outbound_cmds", NUMERIC),
    ("is_host_login", CATEGORICAL),
    ("is_guest_login", CATEGORICAL),
    ("count", NUMERIC),
    ("srv_count", NUMERIC),
    ("serror_rate", NUMERIC),
    ("srv_serror_rate", NUMERIC),
    ("rerror_rate", NUMERIC),
    ("srv_rerror_rate", NUMERIC),
    ("same_srv_rate", NUMERIC),
    ("diff_srv_rate", NUMERIC),
    ("srv_diff_host_rate", NUMERIC),
    ("dst_host_count", NUMERIC),
    ("dst_host_srv_count", NUMERIC),
    ("dst_host_same_srv_rate", NUMERIC),
    ("dst_host_diff_srv_rate", NUMERIC),
    ("dst_host_same_src_port_rate", NUMERIC),
    ("dst_host_srv_diff_host_rate", NUMERIC),
    ("dst_host_serror_rate", NUMERIC),
    ("dst_host_srv_serror_rate", NUMERIC),
    ("dst_host_rerror_rate", NUMERIC),
    ("dst_host_srv_rerror_rate", NUMERIC),
]

NSLKDD_SCHEMA = FeatureSchema(tuple(Feature(n, k) for n, k in _NSLKDD_COLUMNS))


@dataclass(frozen=True, eq=False)
class LabeledCorpus:
    schema: FeatureSchema
    records: tuple[ConnectionRecord, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = len(self.schema)
        for i, r in enumerate(self.records):
            if len(r.values) != m:
                raise DatasetError(f"record {i} has {len(r.values)} values, schema has {m}")

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> dict[str, int]:
        counts = {ANOMALOUS: 0, NORMAL: 0}
        for r in self.records:
            counts[r.label] += 1
        return counts


def parse_label_map(text: str, source: str = "<label map>") -> dict[str, str]:
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise DatasetError(f"{source}:{lineno}: expected 'label -> target'")
        label, target = (part.strip() for part in line.split("->", 1))
        if target not in _TARGETS:
            raise DatasetError(f"{source}:{lineno}: target must be one of {_TARGETS}")
        mapping[label] = target
    return mapping


def load_label_map(path: str | Path) -> dict[str, str]:
    return parse_label_map(Path(path).read_text(), str(path))


def default_label_map() -> dict[str, str]:
    text = resources.files("consensus_nids").joinpath("data/ddos_labels.map").read_text()
    return parse_label_map(text, "ddos_labels.map")


def _parse_value(feature: Feature, token: str, where: str):
    if feature.kind == CATEGORICAL:
        return token.strip()
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(f"{where}: feature {feature.name!r} is not numeric: {token!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"{where}: feature {feature.name!r} is not finite")
    return value


def load_nslkdd_csv(
    path: str | Path,
    schema: FeatureSchema = NSLKDD_SCHEMA,
    label_map: dict[str, str] | None = None,
    header: bool = False,
) -> LabeledCorpus:
    """Read labelled connections, mapping raw labels to the two hypotheses.

    Rows whose label maps to ``exclude`` are dropped. With ``label_map=None``
    raw labels must already be ``normal`` or ``anomalous``.
    """
    m = len(schema)
    records = []
    dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for rowno, row in enumerate(reader, start=1):
            if header and rowno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            where = f"{path}:{rowno}"
            if len(row) not in (m + 1, m + 2):
                raise DatasetError(f"{where}: expected {m + 1} or {m + 2} columns, got {len(row)}")
            raw_label = row[m].strip().rstrip(".")
            if label_map is None:
                target = raw_label
                if target not in (NORMAL, ANOMALOUS):
                    raise DatasetError(f"{where}: unknown label {raw_label!r}")
            else:
                if raw_label not in label_map:
                    raise DatasetError(f"{where}: label {raw_label!r} is not in the label map")
                target = label_map[raw_label]
            if target == EXCLUDE:
                dropped += 1
                continue
            values = tuple(_parse_value(f, tok, where) for f, tok in zip(schema.features, row))
            records.append(ConnectionRecord(values, target))
    provenance = {"source": "file", "path": str(path), "dropped": dropped}
    return LabeledCorpus(schema, tuple(records), provenance)


def write_corpus_csv(corpus: LabeledCorpus, path: str | Path, header: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(corpus.schema.names + ["label"])
        for r in corpus.records:
            cells = [v if f.kind == CATEGORICAL else repr(float(v))
                     for f, v in zip(corpus.schema.features, r.values)]
            writer.writerow(cells + [r.label])


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a synthetic corpus.

    Categorical features draw per-class category probabilities from a flat
    Dirichlet; numeric features are Gaussian with the anomalous mean offset
    by ``separation`` standard units.
    """

    n_categorical: int = 3
    n_numeric: int = 5
    n_categories: int = 6
    separation: float = 0.75

    def validate(self) -> None:
        if self.n_categorical < 0 or self.n_numeric < 0:
            raise ConfigError("feature counts must be non-negative")
        if self.n_categorical + self.n_numeric == 0:
            raise ConfigError("synthetic schema needs at least one feature")
        if self.n_categorical and self.n_categories < 2:
            raise ConfigError("categorical features need at least 2 categories")
        if self.n_numeric and not self.separation > 0:
            raise ConfigError("numeric separation must be positive")

    def schema(self) -> FeatureSchema:
        feats = [Feature(f"cat{k}", CATEGORICAL) for k in range(self.n_categorical)]
        feats += [Feature(f"num{k}", NUMERIC) for k in range(self.n_numeric)]
        return FeatureSchema(tuple(feats))


def generate_synthetic(
    seed: int,
    n_records: int,
    anomalous_fraction: float,
    spec: SyntheticSpec = SyntheticSpec(),
) -> LabeledCorpus:
    """Two-class corpus with exactly ``round(fraction * n)`` anomalous records."""
    spec.validate()
    if n_records < 2:
        raise ConfigError("n_records must be >= 2")
    if not 0.0 <= anomalous_fraction <= 1.0:
        raise ConfigError("anomalous_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)

    cat_probs = {
        h: [rng.dirichlet(np.ones(spec.n_categories)) for _ in range(spec.n_categorical)]
        for h in (NORMAL, ANOMALOUS)
    }
    signs = rng.choice([-1.0, 1.0], size=spec.n_numeric)
    params = {
        NORMAL: [(0.0, float(s)) for s in rng.uniform(0.8, 1.5, size=spec.n_numeric)],
        ANOMALOUS: [
            (float(spec.separation * sign), float(s))
            for sign, s in zip(signs, rng.uniform(0.8, 1.5, size=spec.n_numeric))
        ],
    }

    n_anom = round_half_up(anomalous_fraction * n_records)
    labels = np.array([ANOMALOUS] * n_anom + [NORMAL] * (n_records - n_anom))
    labels = labels[rng.permutation(n_records)]

    records = []
    for label in labels:
        label = str(label)
        cats = tuple(f"c{int(rng.choice(spec.n_categories, p=p))}" for p in cat_probs[label])
        nums = tuple(float(rng.normal(mu, sd)) for mu, sd in params[label])
        records.append(ConnectionRecord(cats + nums, label))
    provenance = {
        "source": "synthetic",
        "seed": seed,
        "n_records": n_records,
        "anomalous_fraction": anomalous_fraction,
        "spec": spec.__dict__.copy(),
    }
    return LabeledCorpus(spec.schema(), tuple(records), provenance)


def split(corpus: LabeledCorpus, train_fraction: float, seed: int = 0):
    """Stratified ``(train, test)`` split, deterministic per seed.

    Each class contributes ``round(train_fraction * class_count)`` records
    to the training side; original order is kept within each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx = []
    for h in (ANOMALOUS, NORMAL):
        idx = [i for i, r in enumerate(corpus.records) if r.label == h]
        perm = rng.permutation(len(idx))
        k = round_half_up(train_fraction * len(idx))
        train_idx.extend(idx[j] for j in perm[:k])
    chosen = set(train_idx)
    train = tuple(r for i, r in enumerate(corpus.records) if i in chosen)
    test = tuple(r for i, r in enumerate(corpus.records) if i not in chosen)
    if not train or not test:
        raise ConfigError("split leaves one side empty")
    base = dict(corpus.provenance)
    return (
        LabeledCorpus(corpus.schema, train, {**base, "split": "train", "split_seed": seed}),
        LabeledCorpus(corpus.schema, test, {**base, "split": "test", "split_seed": seed}),
    )
