"""Naive Bayes over mixed categorical/numeric connection features.

Categorical features use add-one smoothed multinomials over the alphabet seen
in training; numeric features use a per-class Gaussian (population variance,
floored). Everything is kept in the log domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "NORMAL",
    "ANOMALOUS",
    "HYPOTHESES",
    "CATEGORICAL",
    "NUMERIC",
    "TrainingError",
    "Feature",
    "FeatureSchema",
    "ConnectionRecord",
    "NaiveBayesModel",
    "train",
    "log_likelihood",
    "log_likelihoods",
    "local_posterior",
    "log_normalize",
]

NORMAL = "normal"
ANOMALOUS = "anomalous"
HYPOTHESES = (ANOMALOUS, NORMAL)

CATEGORICAL = "categorical"
NUMERIC = "numeric"

VARIANCE_FLOOR = 1e-9
_LOG_2PI = math.log(2 * math.pi)


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise ValueError(f"feature {self.name!r}: kind must be categorical or numeric")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        if not self.features:
            raise ValueError("schema needs at least one feature")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "FeatureSchema":
        return cls(tuple(Feature(name, kind) for name, kind in pairs))

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def to_dict(self) -> list[dict]:
        return [{"name": f.name, "kind": f.kind} for f in self.features]

    @classmethod
    def from_dict(cls, items) -> "FeatureSchema":
        return cls(tuple(Feature(d["name"], d["kind"]) for d in items))


@dataclass(frozen=True)
class ConnectionRecord:
    """One observation: feature values in schema order plus its true label."""

    values: tuple
    label: str

    def __post_init__(self):
        if self.label not in HYPOTHESES:
            raise ValueError(f"label must be one of {HYPOTHESES}, got {self.label!r}")


def _check_arity(schema: FeatureSchema, record: ConnectionRecord) -> None:
    if len(record.values) != len(schema):
        raise ValueError(
            f"record has {len(record.values)} values, schema expects {len(schema)}"
        )


@dataclass(frozen=True)
class NaiveBayesModel:
    """Trained parameters, per hypothesis.

    ``categorical[h][k]`` maps category -> log probability for categorical
    feature ``k`` (``None`` at numeric positions); ``unseen[h][k]`` is the
    log mass for a category never observed in training. ``gaussian[h][k]``
    is ``(mean, variance)`` for numeric features.
    """

    schema: FeatureSchema
    log_priors: dict[str, float]
    categorical: dict[str, list] = field(repr=False)
    unseen: dict[str, list] = field(repr=False)
    gaussian: dict[str, list] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "log_priors": self.log_priors,
            "categorical": self.categorical,
            "unseen": self.unseen,
            "gaussian": {h: [list(g) if g else None for g in gs] for h, gs in self.gaussian.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NaiveBayesModel":
        return cls(
            schema=FeatureSchema.from_dict(d["schema"]),
            log_priors={h: float(v) for h, v in d["log_priors"].items()},
            categorical=d["categorical"],
            unseen=d["unseen"],
            gaussian={h: [tuple(g) if g else None for g in gs] for h, gs in d["gaussian"].items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NaiveBayesModel":
        return cls.from_dict(json.loads(text))


def train(schema: FeatureSchema, records: Sequence[ConnectionRecord]) -> NaiveBayesModel:
    by_class: dict[str, list[ConnectionRecord]] = {h: [] for h in HYPOTHESES}
    for r in records:
        _check_arity(schema, r)
        by_class[r.label].append(r)
    missing = [h for h in HYPOTHESES if not by_class[h]]
    if missing:
        raise TrainingError(f"no training records for class(es) {missing}")

    total = len(records)
    log_priors = {h: math.log(len(by_class[h]) / total) for h in HYPOTHESES}
    categorical = {h: [] for h in HYPOTHESES}
    unseen = {h: [] for h in HYPOTHESES}
    gaussian = {h: [] for h in HYPOTHESES}

    for k, feat in enumerate(schema.features):
        if feat.kind == CATEGORICAL:
            alphabet = sorted({str(r.values[k]) for r in records})
            size = len(alphabet)
            for h in HYPOTHESES:
                counts = dict.fromkeys(alphabet, 0)
                for r in by_class[h]:
                    counts[str(r.values[k])] += 1
                n_h = len(by_class[h])
                categorical[h].append(
                    {v: math.log((c + 1) / (n_h + size)) for v, c in counts.items()}
                )
                unseen[h].append(math.log(1.0 / (n_h + size + 1)))
                gaussian[h].append(None)
        else:
            for h in HYPOTHESES:
                xs = sorted(float(r.values[k]) for r in by_class[h])
                mean = math.fsum(xs) / len(xs)
                var = math.fsum((x - mean) ** 2 for x in xs) / len(xs)
                gaussian[h].append((mean, max(var, VARIANCE_FLOOR)))
                categorical[h].append(None)
                unseen[h].append(None)
    return NaiveBayesModel(schema, log_priors, categorical, unseen, gaussian)


def log_likelihood(model: NaiveBayesModel, record: ConnectionRecord, h: str) -> float:
    """``sum_k log P(o_k | h)`` under the independence assumption."""
    _check_arity(model.schema, record)
    total = 0.0
    for k, feat in enumerate(model.schema.features):
        value = record.values[k]
        if feat.kind == CATEGORICAL:
            total += model.categorical[h][k].get(str(value), model.unseen[h][k])
        else:
            mean, var = model.gaussian[h][k]
            total += -0.5 * (_LOG_2PI + math.log(var) + (float(value) - mean) ** 2 / var)
    return total


def log_likelihoods(model: NaiveBayesModel, record: ConnectionRecord) -> tuple[float, float]:
    """``(log P(O|anomalous), log P(O|normal))``."""
    return log_likelihood(model, record, ANOMALOUS), log_likelihood(model, record, NORMAL)


def log_normalize(log_a: float, log_n: float) -> tuple[float, float]:
    """Normalise a pair of log weights so their exponentials sum to one."""
    top = max(log_a, log_n)
    lse = top + math.log(math.exp(log_a - top) + math.exp(log_n - top))
    return log_a - lse, log_n - lse


def local_posterior(model: NaiveBayesModel, record: ConnectionRecord) -> dict[str, float]:
    """Single-module posterior ``P(h | O)`` for both hypotheses."""
    la, ln = log_likelihoods(model, record)
    pa, pn = log_normalize(model.log_priors[ANOMALOUS] + la, model.log_priors[NORMAL] + ln)
    return {ANOMALOUS: math.exp(pa), NORMAL: math.exp(pn)}
