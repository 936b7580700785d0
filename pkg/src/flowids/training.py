"""Training loop: fused cross-entropy loss, AdamW, epoch-level logging.

The loss is a custom taped primitive so the softmax and the log never meet
numerically (log-sum-exp keeps everything finite). The optimizer applies
decoupled weight decay: the decay term multiplies the raw weight and is not
part of the moment estimates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio
from . import model as M
from . import tensor as T
from .errors import ConfigError, ContractError, DataError, NumericError
from .sentencing import Schema, encode_batch, fit_schema
from .tensor import Tensor

# Per-model defaults. The transformer settings mirror the reproduced
# training setup; the baseline MLP gets the usual quick recipe.
MODEL_DEFAULTS = {
    "transformer": {"lr": 2e-5, "epochs": 10},
    "fnn": {"lr": 1e-3, "epochs": 100},
}


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer class labels.

    Forward and backward are fused: log-softmax via the max-shift trick,
    gradient (softmax - onehot) / batch.
    """
    labels = np.asarray(labels)
    z = logits.data
    if z.ndim != 2:
        raise ContractError(f"cross_entropy expects (batch, classes) logits, got {z.shape}")
    n, k = z.shape
    if labels.shape != (n,):
        raise DataError(f"labels shape {labels.shape} does not match batch size {n}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise DataError(f"labels must be integers, got dtype {labels.dtype}")
    bad = np.nonzero((labels < 0) | (labels >= k))[0]
    if bad.size:
        i = int(bad[0])
        raise DataError(f"label at row {i} is {labels[i]}, outside 0..{k - 1}")

    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    out = Tensor(np.asarray(-logp[np.arange(n), labels].mean()))
    probs = np.exp(logp)

    def backward(g):
        grad = probs.copy()
        grad[np.arange(n), labels] -= 1.0
        return (grad * (float(g) / n),)

    return T.record(out, (logits,), backward)


def adamw_step(w, g, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
    """One AdamW update; pure function, returns new (w, m, v) arrays.

    step is the 1-based update count used for bias correction. Weight decay
    is decoupled: it scales the incoming weight, not the gradient.
    """
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    w = w - lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * w)
    return w, m, v


class AdamW:
    """AdamW over a list of (name, Tensor) pairs; state keyed by name."""

    def __init__(self, named_params, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.01):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        self.params = list(named_params)
        names = [n for n, _ in self.params]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names in optimizer")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.state = {n: (np.zeros_like(t.data), np.zeros_like(t.data)) for n, t in self.params}

    def zero_grad(self) -> None:
        for _, t in self.params:
            t.grad = None

    def step(self) -> None:
        """Update every parameter that received a gradient this round."""
        self.step_count += 1
        for name, t in self.params:
            if t.grad is None:
                continue
            m, v = self.state[name]
            t.data, m, v = adamw_step(
                t.data,
                t.grad,
                m,
                v,
                self.step_count,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                self.weight_decay,
            )
            self.state[name] = (m, v)


@dataclass
class TrainConfig:
    """Everything that determines a training run, seeds included.

    epochs and lr default per model kind (see MODEL_DEFAULTS) when left as
    None; resolved() fills them in and validates.
    """

    model: str = "transformer"
    epochs: int | None = None
    lr: float | None = None
    batch_size: int = 16
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    dim: int = 32
    heads: int = 4
    blocks: int = 2
    mlp_dim: int | None = None
    fnn_hidden: tuple[int, int] = (64, 64)
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    mask: bool = True

    def resolved(self) -> "TrainConfig":
        if self.model not in MODEL_DEFAULTS:
            raise ConfigError(f"model must be one of {sorted(MODEL_DEFAULTS)}, got {self.model!r}")
        defaults = MODEL_DEFAULTS[self.model]
        cfg = replace(
            self,
            epochs=defaults["epochs"] if self.epochs is None else self.epochs,
            lr=defaults["lr"] if self.lr is None else self.lr,
            fnn_hidden=tuple(self.fnn_hidden),
            split_fractions=tuple(self.split_fractions),
        )
        if cfg.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {cfg.epochs}")
        if cfg.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {cfg.lr}")
        if cfg.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {cfg.batch_size}")
        if len(cfg.split_fractions) != 3:
            raise ConfigError(f"split_fractions needs 3 entries, got {cfg.split_fractions}")
        if cfg.model == "transformer":
            M.EncoderConfig(cfg.dim, cfg.heads, cfg.blocks, cfg.mlp_dim).validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "epochs": self.epochs,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
            "dim": self.dim,
            "heads": self.heads,
            "blocks": self.blocks,
            "mlp_dim": self.mlp_dim,
            "fnn_hidden": list(self.fnn_hidden),
            "split_fractions": list(self.split_fractions),
            "mask": self.mask,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "fnn_hidden" in kwargs:
            kwargs["fnn_hidden"] = tuple(kwargs["fnn_hidden"])
        if "split_fractions" in kwargs:
            kwargs["split_fractions"] = tuple(kwargs["split_fractions"])
        return cls(**kwargs)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainLog:
    rows: list[EpochStats] = field(default_factory=list)

    def append(self, row: EpochStats) -> None:
        self.rows.append(row)

    def final(self) -> EpochStats:
        return self.rows[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for r in self.rows:
                writer.writerow([r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc])


@dataclass
class TrainResult:
    params: M.ModelParams | M.FnnParams
    schema: Schema
    config: TrainConfig
    log: TrainLog
    train: dataio.Dataset
    validation: dataio.Dataset
    test: dataio.Dataset


def _batched_logits(params, x: np.ndarray, mask: bool = True, batch_size: int = 512) -> np.ndarray:
    """Raw logits for a whole matrix, computed off-tape in chunks."""
    parts = []
    with T.no_grad():
        for i in range(0, x.shape[0], batch_size):
            chunk = x[i : i + batch_size]
            if params.kind == "transformer":
                parts.append(M.forward(chunk, params, mask=mask).data)
            else:
                parts.append(M.fnn_forward(chunk, params).data)
    return np.concatenate(parts, axis=0)


def predict_scores(params, x: np.ndarray, mask: bool = True) -> np.ndarray:
    """P(attack) per row, i.e. the softmax weight of class 1."""
    logits = _batched_logits(params, x, mask=mask)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e[:, 1] / e.sum(axis=1)


def evaluate(params, x: np.ndarray, y: np.ndarray, mask: bool = True) -> tuple[float, float]:
    """(mean cross-entropy, accuracy at threshold 0.5) on held-out data."""
    logits = _batched_logits(params, x, mask=mask)
    with T.no_grad():
        loss = cross_entropy(Tensor(logits), y).item()
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    scores = e[:, 1] / e.sum(axis=1)
    acc = float(np.mean((scores >= 0.5).astype(np.int64) == y))
    return loss, acc


def train(dataset: dataio.Dataset, config: TrainConfig | None = None) -> TrainResult:
    """Split, fit the schema on the train part only, and optimize.

    Fully deterministic for a given (dataset, config): init, shuffling and
    splitting all derive from config.seed.
    """
    config = (config or TrainConfig()).resolved()
    train_ds, val_ds, test_ds = dataio.split(dataset, config.split_fractions, config.seed)
    if not train_ds.records:
        raise ConfigError("training split is empty; dataset too small for the fractions")
    schema = fit_schema(train_ds.records, dataset.profile)
    x_train, y_train = encode_batch(train_ds.records, schema)
    x_val, y_val = (
        encode_batch(val_ds.records, schema) if val_ds.records else (np.zeros((0, schema.width)), np.zeros(0, dtype=np.int64))
    )

    if config.model == "transformer":
        enc = M.EncoderConfig(config.dim, config.heads, config.blocks, config.mlp_dim)
        params = M.init_params(enc, tokens=schema.width, seed=config.seed)

        def logits_for(batch):
            return M.forward(batch, params, mask=config.mask)

    else:
        params = M.init_fnn(schema.width, hidden=config.fnn_hidden, seed=config.seed)

        def logits_for(batch):
            return M.fnn_forward(batch, params)

    opt = AdamW(
        params.named_parameters(),
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed + 1)
    log = TrainLog()
    n = len(y_train)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for step, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            T.clear_tape()
            opt.zero_grad()
            loss = cross_entropy(logits_for(x_train[idx]), y_train[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {step}")
            T.backward(loss)
            opt.step()
            total += value * len(idx)
        T.clear_tape()
        # train_loss is the running average over the epoch's steps, so it
        # reflects the parameters as they moved, not a second full pass.
        train_loss = total / n
        _, train_acc = evaluate(params, x_train, y_train, mask=config.mask)
        if y_val.size:
            val_loss, val_acc = evaluate(params, x_val, y_val, mask=config.mask)
        else:
            val_loss, val_acc = float("nan"), float("nan")
        log.append(EpochStats(epoch, train_loss, train_acc, val_loss, val_acc))
    return TrainResult(
        params=params,
        schema=schema,
        config=config,
        log=log,
        train=train_ds,
        validation=val_ds,
        test=test_ds,
    )
