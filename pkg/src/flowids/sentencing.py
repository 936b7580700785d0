"""Turning a raw flow record into a sentence of tokens.

Each feature of a record is treated as one word: the record's J feature
values become J scalars in [0, 1], and each scalar is lifted into a learned
C-dimensional token (scalar times a per-feature embedding row, plus a
per-feature bias and a positional row). The resulting J x C matrix is what
the encoder stack consumes.

Encoder state (nominal vocabularies, numeric min/max ranges) is fitted on
training-split records only and never mutated afterwards.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from . import tensor as T
from .errors import DataError, SchemaError
from .tensor import Tensor

NOMINAL = "nominal"
NUMERIC = "numeric"
TIMESTAMP = "timestamp"
BOOLEAN = "boolean"
LABEL = "binary-label"

# Column layouts keyed by dataset profile. Order is load-bearing: it fixes
# token positions and is persisted with every checkpoint.
PROFILES: dict[str, dict] = {
    "unsw": {
        "features": [
            ("srcip", NOMINAL),
            ("dstip", NOMINAL),
            ("proto", NOMINAL),
            ("Sload", NUMERIC),
            ("Dload", NUMERIC),
            ("Stime", TIMESTAMP),
            ("Ltime", TIMESTAMP),
            ("Spkts", NUMERIC),
            ("srcport", NUMERIC),
            ("dstport", NUMERIC),
            ("Dpkts", NUMERIC),
            ("dur", NUMERIC),
            ("sttl", NUMERIC),
        ],
        "label": "label",
    },
    "ton": {
        "features": [
            ("time", TIMESTAMP),
            ("date", TIMESTAMP),
            ("motion status", NUMERIC),
            ("light status", BOOLEAN),
            ("temperature", NUMERIC),
            ("pressure", NUMERIC),
            ("humidity", NUMERIC),
            ("sphone signal", BOOLEAN),
            ("latitude", NUMERIC),
            ("longitude", NUMERIC),
            ("FC1 Read Input Register", NUMERIC),
        ],
        "label": "label",
    },
}
# Synthetic data reuses the unsw column layout.
PROFILES["synthetic"] = PROFILES["unsw"]

_TRUE = {"1", "true", "t", "on", "yes"}
_FALSE = {"0", "false", "f", "off", "no"}


def parse_number(cell: str) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        raise DataError(f"cannot parse numeric cell {cell!r}")


def parse_timestamp(cell: str) -> float:
    """Convert a timestamp cell to epoch seconds (or seconds within a day)."""
    try:
        return float(cell)
    except (TypeError, ValueError):
        pass
    text = str(cell).strip()
    try:
        return datetime.fromisoformat(text).timestamp()
    except ValueError:
        pass
    for fmt in ("%H:%M:%S", "%d-%b-%y", "%d/%m/%Y"):
        try:
            parsed = datetime.strptime(text, fmt)
            if fmt == "%H:%M:%S":
                return float(parsed.hour * 3600 + parsed.minute * 60 + parsed.second)
            return parsed.timestamp()
        except ValueError:
            continue
    raise DataError(f"cannot parse timestamp cell {cell!r}")


def parse_boolean(cell: str) -> float:
    text = str(cell).strip().lower()
    if text in _TRUE:
        return 1.0
    if text in _FALSE:
        return 0.0
    raise DataError(f"cannot parse boolean cell {cell!r}")


def parse_cell(cell: str, kind: str) -> float:
    """Raw cell -> the scalar that min-max fitting and encoding see."""
    if kind == NUMERIC:
        return parse_number(cell)
    if kind == TIMESTAMP:
        return parse_timestamp(cell)
    if kind == BOOLEAN:
        return parse_boolean(cell)
    raise ValueError(f"parse_cell does not handle kind {kind!r}")


@dataclass
class FeatureSpec:
    """One feature column plus its fitted encoder state."""

    name: str
    kind: str
    vocab: dict[str, int] | None = None  # nominal only; indices start at 1
    lo: float | None = None  # numeric/timestamp/boolean only
    hi: float | None = None

    def encode(self, cell: str) -> float:
        """Map a raw cell into [0, 1] using the fitted state."""
        if self.kind == NOMINAL:
            index = self.vocab.get(str(cell), 0)  # 0 = unseen
            return index / len(self.vocab) if self.vocab else 0.0
        value = parse_cell(cell, self.kind)
        if self.hi == self.lo:
            return 0.5  # constant feature in training: center it
        scaled = (value - self.lo) / (self.hi - self.lo)
        return min(max(scaled, 0.0), 1.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "vocab": self.vocab,
            "lo": self.lo,
            "hi": self.hi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(name=d["name"], kind=d["kind"], vocab=d["vocab"], lo=d["lo"], hi=d["hi"])


@dataclass
class Schema:
    """Ordered feature specs (label excluded) for one dataset profile."""

    profile: str
    features: list[FeatureSpec]
    label: str = "label"

    @property
    def width(self) -> int:
        return len(self.features)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "features": [f.to_dict() for f in self.features],
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        return cls(
            profile=d["profile"],
            features=[FeatureSpec.from_dict(f) for f in d["features"]],
            label=d["label"],
        )


@dataclass
class TokenSequence:
    """A record after sentencing: one embedded token per feature."""

    tokens: np.ndarray  # (width, dim)
    record_id: int | str | None = None


def profile_columns(profile: str) -> dict:
    try:
        return PROFILES[profile]
    except KeyError:
        raise SchemaError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")


def fit_schema(records, profile: str) -> Schema:
    """Fit nominal vocabularies and numeric ranges from training records only.

    Nominal vocabularies index values by first appearance, starting at 1;
    index 0 stays reserved for values unseen during fitting.
    """
    layout = profile_columns(profile)
    if not records:
        raise SchemaError("cannot fit a schema on an empty record set")
    specs = []
    for name, kind in layout["features"]:
        for rec in records:
            if name not in rec.values:
                raise SchemaError(f"record {rec.row} is missing column {name!r}")
        if kind == NOMINAL:
            vocab: dict[str, int] = {}
            for rec in records:
                cell = str(rec.values[name])
                if cell not in vocab:
                    vocab[cell] = len(vocab) + 1
            specs.append(FeatureSpec(name=name, kind=kind, vocab=vocab))
        else:
            values = [parse_cell(rec.values[name], kind) for rec in records]
            lo, hi = min(values), max(values)
            if lo == hi:
                warnings.warn(f"feature {name!r} is constant in the training split")
            specs.append(FeatureSpec(name=name, kind=kind, lo=lo, hi=hi))
    return Schema(profile=profile, features=specs, label=layout["label"])


def encode(record, schema: Schema) -> np.ndarray:
    """Encode one record into a vector in [0, 1]^width."""
    out = np.empty(schema.width, dtype=np.float64)
    for j, spec in enumerate(schema.features):
        if spec.name not in record.values:
            raise SchemaError(f"record {record.row} is missing column {spec.name!r}")
        try:
            out[j] = spec.encode(record.values[spec.name])
        except DataError as exc:
            raise DataError(f"record {record.row}, column {spec.name!r}: {exc}") from None
    return out


def encode_batch(records, schema: Schema) -> tuple[np.ndarray, np.ndarray]:
    """Encode records into an (n, width) matrix plus the label vector."""
    x = np.stack([encode(r, schema) for r in records])
    y = np.array([r.label for r in records], dtype=np.int64)
    return x, y


@dataclass
class SentencingParams:
    """Learned lift from scalar features to tokens.

    token_j = x_j * embed[j] + bias[j] + position[j]. The bias keeps
    zero-valued features from collapsing onto the positional row alone.
    """

    embed: Tensor  # (width, dim)
    bias: Tensor
    position: Tensor

    @property
    def width(self) -> int:
        return self.embed.data.shape[0]

    @property
    def dim(self) -> int:
        return self.embed.data.shape[1]

    def named(self, prefix: str = "sentencing") -> list[tuple[str, Tensor]]:
        return [
            (f"{prefix}.embed", self.embed),
            (f"{prefix}.bias", self.bias),
            (f"{prefix}.position", self.position),
        ]


def sentence(x: Tensor, params: SentencingParams) -> Tensor:
    """Lift encoded vectors (..., width) into token sequences (..., width, dim)."""
    expanded = T.reshape(x, x.shape + (1,))
    scaled = T.mul(expanded, params.embed)  # broadcasts embed over the batch
    return T.add(T.add(scaled, params.bias), params.position)


def sentence_record(vec: np.ndarray, params: SentencingParams, record_id=None) -> TokenSequence:
    """Sentencing for a single encoded record, outside any gradient tape."""
    with T.no_grad():
        tokens = sentence(Tensor(vec), params)
    return TokenSequence(tokens=tokens.data, record_id=record_id)
