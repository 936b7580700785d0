"""Dataset loading, synthetic flow generation, splitting, checkpoints.

Real flow CSVs are supplied by the user; nothing here downloads anything.
The synthetic generator exists so the whole pipeline can be exercised and
verified at desk scale with known ground truth. Checkpoints are a custom
length-prefixed binary container: JSON metadata header followed by named
little-endian float64 arrays, with a whole-file SHA-256 at the end.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import model as M
from .errors import (
    ConfigError,
    DataError,
    IntegrityError,
    SchemaError,
    VersionError,
)
from .sentencing import (
    BOOLEAN,
    NOMINAL,
    Schema,
    parse_cell,
    profile_columns,
)


@dataclass
class FlowRecord:
    """One raw flow row: cell strings as read, plus the binary label."""

    values: dict[str, str]
    label: int
    row: int | None = None  # source row for error messages


@dataclass
class Dataset:
    records: list[FlowRecord]
    profile: str
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)


@dataclass
class LoadSummary:
    rows_loaded: int = 0
    rows_rejected: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)

    def note(self, row: int, reason: str) -> None:
        self.rows_rejected += 1
        if len(self.rejects) < 20:
            self.rejects.append((row, reason))

    def describe(self) -> str:
        lines = [f"loaded {self.rows_loaded} rows, rejected {self.rows_rejected}"]
        for row, reason in self.rejects:
            lines.append(f"  row {row}: {reason}")
        if self.rows_rejected > len(self.rejects):
            lines.append(f"  ... and {self.rows_rejected - len(self.rejects)} more")
        return "\n".join(lines)


def _parse_label(cell: str) -> int:
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise DataError(f"label {cell!r} does not parse")
    if value not in (0.0, 1.0):
        raise DataError(f"label {cell!r} is not 0 or 1")
    return int(value)


def load_csv(path, profile: str) -> tuple[Dataset, LoadSummary]:
    """Read a header-first CSV, keeping the profile's columns.

    Rows whose cells do not parse for their declared kind are rejected and
    counted in the summary; loading never mutates the file.
    """
    layout = profile_columns(profile)
    feature_kinds = layout["features"]
    label_col = layout["label"]
    summary = LoadSummary()
    records: list[FlowRecord] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for name, _ in feature_kinds:
            if name not in header:
                raise SchemaError(f"{path}: missing required column {name!r}")
        if label_col not in header:
            raise SchemaError(f"{path}: missing required column {label_col!r}")
        for line, row in enumerate(reader, start=2):
            try:
                label = _parse_label(row[label_col])
                for name, kind in feature_kinds:
                    if kind != NOMINAL:
                        parse_cell(row[name], kind)
            except DataError as exc:
                summary.note(line, str(exc))
                continue
            records.append(
                FlowRecord(
                    values={name: row[name] for name, _ in feature_kinds},
                    label=label,
                    row=line,
                )
            )
    summary.rows_loaded = len(records)
    if not records:
        raise DataError(f"{path}: no valid rows")
    return Dataset(records=records, profile=profile, provenance=str(path)), summary


def write_csv(dataset: Dataset, path) -> None:
    layout = profile_columns(dataset.profile)
    columns = [name for name, _ in layout["features"]] + [layout["label"]]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for rec in dataset.records:
            writer.writerow([rec.values[c] for c in columns[:-1]] + [rec.label])


# --------------------------------------------------------------------------
# Synthetic flows
# --------------------------------------------------------------------------
#
# Column layout mirrors the unsw profile. Sload is the designated
# informative feature; in "separable" mode the two classes occupy disjoint
# Sload ranges around SEPARABLE_THRESHOLD, in "noisy" mode they are equal-
# variance Gaussians whose overlap is calibrated to a target Bayes error.
# Every other feature either shifts mildly (separable) or is identically
# distributed across classes (noisy), so the optimal rule uses Sload alone.

SEPARABLE_THRESHOLD = 5000.0
NOISY_SLOAD_BASE = 5000.0
NOISY_SLOAD_SD = 1000.0

# dist tuples: ("uniform", lo, hi) | ("normal", mu, sd) | ("randint", lo, hi)
# | ("choice", values). randint is inclusive-exclusive like rng.integers.
SYNTH_DISTS: dict[str, dict[str, dict[str, tuple]]] = {
    "separable": {
        "Sload": {"normal": ("uniform", 1000.0, 4500.0), "attack": ("uniform", 5500.0, 9000.0)},
        "Dload": {"normal": ("uniform", 500.0, 2500.0), "attack": ("uniform", 1500.0, 3500.0)},
        "Spkts": {"normal": ("randint", 2, 60), "attack": ("randint", 30, 120)},
        "Dpkts": {"normal": ("randint", 2, 40), "attack": ("randint", 20, 90)},
        "dur": {"normal": ("uniform", 0.01, 5.0), "attack": ("uniform", 2.0, 10.0)},
    },
    "noisy": {
        # Sload distributions are derived from the Bayes-error target; see synth().
        "Dload": {"normal": ("uniform", 500.0, 3500.0), "attack": ("uniform", 500.0, 3500.0)},
        "Spkts": {"normal": ("randint", 2, 120), "attack": ("randint", 2, 120)},
        "Dpkts": {"normal": ("randint", 2, 90), "attack": ("randint", 2, 90)},
        "dur": {"normal": ("uniform", 0.01, 10.0), "attack": ("uniform", 0.01, 10.0)},
    },
}

SYNTH_CATEGORICAL = {
    "proto": ["tcp", "udp", "icmp"],
    "srcip": [f"10.0.0.{k}" for k in range(1, 9)],
    "dstip": [f"192.168.1.{k}" for k in range(1, 9)],
    "dstport": ["80", "443", "53", "22", "8080", "25"],
    "sttl": ["62", "64", "126", "128", "254", "255"],
}


def dist_mean_var(dist: tuple) -> tuple[float, float]:
    """Mean and variance of one SYNTH_DISTS entry (for verification)."""
    kind = dist[0]
    if kind == "uniform":
        _, lo, hi = dist
        return (lo + hi) / 2.0, (hi - lo) ** 2 / 12.0
    if kind == "normal":
        _, mu, sd = dist
        return mu, sd**2
    if kind == "randint":
        _, lo, hi = dist
        return (lo + hi - 1) / 2.0, ((hi - lo) ** 2 - 1) / 12.0
    raise ValueError(f"no mean/var for dist {dist!r}")


def _draw(rng: np.random.Generator, dist: tuple, size: int) -> np.ndarray:
    kind = dist[0]
    if kind == "uniform":
        return rng.uniform(dist[1], dist[2], size=size)
    if kind == "normal":
        return rng.normal(dist[1], dist[2], size=size)
    if kind == "randint":
        return rng.integers(dist[1], dist[2], size=size).astype(np.float64)
    raise ValueError(f"cannot draw from dist {dist!r}")


def noisy_sload_dists(bayes_error: float) -> dict[str, tuple]:
    """Class-conditional Sload Gaussians whose optimal threshold errs at the target rate.

    With equal priors and equal variances, the midpoint threshold misses at
    rate Phi(-delta / (2 sd)); choosing delta = 2 sd Phi^{-1}(1 - eps) makes
    that rate exactly eps.
    """
    if not 0.0 < bayes_error < 0.5:
        raise ConfigError(f"bayes_error must be in (0, 0.5), got {bayes_error}")
    z = statistics.NormalDist().inv_cdf(1.0 - bayes_error)
    delta = 2.0 * NOISY_SLOAD_SD * z
    return {
        "normal": ("normal", NOISY_SLOAD_BASE, NOISY_SLOAD_SD),
        "attack": ("normal", NOISY_SLOAD_BASE + delta, NOISY_SLOAD_SD),
    }


def noisy_sload_threshold(bayes_error: float) -> float:
    """The Bayes-optimal single threshold on Sload for the noisy generator."""
    dists = noisy_sload_dists(bayes_error)
    return (dists["normal"][1] + dists["attack"][1]) / 2.0


def synth(n: int, seed: int, difficulty: str = "separable", bayes_error: float = 0.1) -> Dataset:
    """Deterministic synthetic flows, balanced 50/50 normal vs attack.

    separable: an exact margin around SEPARABLE_THRESHOLD on Sload, so a
    single threshold classifies perfectly. noisy: only Sload carries signal
    and its class overlap is calibrated so the best possible accuracy is
    1 - bayes_error.
    """
    if n < 10:
        raise ConfigError(f"synthetic datasets need n >= 10, got {n}")
    if difficulty not in SYNTH_DISTS:
        raise ConfigError(f"difficulty must be one of {sorted(SYNTH_DISTS)}, got {difficulty!r}")
    rng = np.random.default_rng(seed)
    labels = np.zeros(n, dtype=np.int64)
    labels[: n // 2] = 1
    labels = rng.permutation(labels)
    attack = labels == 1

    dists = dict(SYNTH_DISTS[difficulty])
    if difficulty == "noisy":
        dists["Sload"] = noisy_sload_dists(bayes_error)

    numeric: dict[str, np.ndarray] = {}
    for name, by_class in dists.items():
        column = np.empty(n, dtype=np.float64)
        # one draw call per class keeps the stream layout stable
        column[~attack] = _draw(rng, by_class["normal"], int((~attack).sum()))
        column[attack] = _draw(rng, by_class["attack"], int(attack.sum()))
        numeric[name] = column

    categorical = {
        name: rng.choice(pool, size=n) for name, pool in SYNTH_CATEGORICAL.items()
    }
    srcport = rng.integers(1024, 65536, size=n)
    start = 1.4e9 + np.arange(n, dtype=np.float64)  # monotone counter
    end = start + numeric["dur"]

    records = []
    for i in range(n):
        values = {
            "srcip": str(categorical["srcip"][i]),
            "dstip": str(categorical["dstip"][i]),
            "proto": str(categorical["proto"][i]),
            "Sload": repr(float(numeric["Sload"][i])),
            "Dload": repr(float(numeric["Dload"][i])),
            "Stime": repr(float(start[i])),
            "Ltime": repr(float(end[i])),
            "Spkts": str(int(numeric["Spkts"][i])),
            "srcport": str(int(srcport[i])),
            "dstport": str(categorical["dstport"][i]),
            "Dpkts": str(int(numeric["Dpkts"][i])),
            "dur": repr(float(numeric["dur"][i])),
            "sttl": str(categorical["sttl"][i]),
        }
        records.append(FlowRecord(values=values, label=int(labels[i]), row=i))
    provenance = f"synth(n={n}, seed={seed}, difficulty={difficulty})"
    return Dataset(records=records, profile="synthetic", provenance=provenance)


def split(dataset: Dataset, fractions, seed: int) -> tuple[Dataset, ...]:
    """Stratified, seeded partition; disjoint and exhaustive by construction."""
    fractions = tuple(float(f) for f in fractions)
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be positive and sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    buckets: list[list[FlowRecord]] = [[] for _ in fractions]
    bounds = np.cumsum(fractions)
    for cls in (0, 1):
        members = [r for r in dataset.records if r.label == cls]
        order = rng.permutation(len(members))
        edges = [0] + [int(np.floor(b * len(members) + 1e-9)) for b in bounds]
        edges[-1] = len(members)
        for i in range(len(fractions)):
            for k in order[edges[i] : edges[i + 1]]:
                buckets[i].append(members[k])
    names = ("train", "validation", "test") if len(fractions) == 3 else tuple(
        f"part{i}" for i in range(len(fractions))
    )
    out = []
    for i, bucket in enumerate(buckets):
        for cls in (0, 1):
            if not any(r.label == cls for r in bucket):
                warnings.warn(f"split {names[i]!r} received zero records of class {cls}")
        out.append(
            Dataset(
                records=bucket,
                profile=dataset.profile,
                provenance=f"{dataset.provenance} [{names[i]}]",
            )
        )
    return tuple(out)


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"FIDC"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    params: M.ModelParams | M.FnnParams
    schema: Schema
    config: dict
    metrics: dict | None
    version: int

    @property
    def kind(self) -> str:
        return self.params.kind


def _hyper_dict(params) -> dict:
    if params.kind == "transformer":
        cfg = params.config
        return {
            "kind": "transformer",
            "dim": cfg.dim,
            "heads": cfg.heads,
            "blocks": cfg.blocks,
            "mlp_dim": cfg.resolved_mlp_dim(),
            "tokens": params.tokens,
        }
    return {
        "kind": "fnn",
        "features": params.w1.data.shape[0],
        "hidden": [params.w1.data.shape[1], params.w2.data.shape[1]],
    }


def _skeleton(hyper: dict):
    if hyper["kind"] == "transformer":
        cfg = M.EncoderConfig(
            dim=hyper["dim"], heads=hyper["heads"], blocks=hyper["blocks"], mlp_dim=hyper["mlp_dim"]
        )
        return M.init_params(cfg, tokens=hyper["tokens"], seed=0)
    return M.init_fnn(hyper["features"], hidden=tuple(hyper["hidden"]), seed=0)


def save_checkpoint(params, schema: Schema, config: dict, path, metrics: dict | None = None) -> None:
    """Serialize params + schema + config; byte-stable given equal inputs."""
    named = params.named_parameters()
    header = {
        "model_kind": params.kind,
        "hyper": _hyper_dict(params),
        "schema": schema.to_dict(),
        "train_config": config,
        "metrics": metrics,
        "arrays": [{"name": name, "shape": list(t.data.shape)} for name, t in named],
    }
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(header_bytes)))
    buf.write(header_bytes)
    for _, t in named:
        raw = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        buf.write(struct.pack("<Q", len(raw)))
        buf.write(raw)
    body = buf.getvalue()
    with open(path, "wb") as handle:
        handle.write(body)
        handle.write(hashlib.sha256(body).digest())


def load_checkpoint(path) -> Checkpoint:
    """Inverse of save_checkpoint; verifies the checksum before trusting anything."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < 4 + 4 + 8 + 32:
        raise IntegrityError(f"{path}: file too short to be a checkpoint")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise IntegrityError(f"{path}: checksum mismatch (corrupt or truncated file)")
    if body[:4] != CHECKPOINT_MAGIC:
        raise IntegrityError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", body[4:8])
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"{path}: format version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )
    offset = 8
    (header_len,) = struct.unpack("<Q", body[offset : offset + 8])
    offset += 8
    if offset + header_len > len(body):
        raise IntegrityError(f"{path}: truncated header")
    header = json.loads(body[offset : offset + header_len].decode("utf-8"))
    offset += header_len

    params = _skeleton(header["hyper"])
    named = params.named_parameters()
    manifest = header["arrays"]
    if [m["name"] for m in manifest] != [n for n, _ in named]:
        raise IntegrityError(f"{path}: parameter manifest does not match the declared model")
    for meta, (name, t) in zip(manifest, named):
        (nbytes,) = struct.unpack("<Q", body[offset : offset + 8])
        offset += 8
        if offset + nbytes > len(body):
            raise IntegrityError(f"{path}: truncated array {name!r}")
        shape = tuple(meta["shape"])
        if shape != t.data.shape:
            raise IntegrityError(
                f"{path}: array {name!r} has shape {shape}, model needs {t.data.shape}"
            )
        array = np.frombuffer(body[offset : offset + nbytes], dtype="<f8")
        if array.size != int(np.prod(shape)):
            raise IntegrityError(f"{path}: array {name!r} has wrong length")
        t.data = array.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(body):
        raise IntegrityError(f"{path}: {len(body) - offset} trailing bytes")
    return Checkpoint(
        params=params,
        schema=Schema.from_dict(header["schema"]),
        config=header["train_config"],
        metrics=header["metrics"],
        version=version,
    )
