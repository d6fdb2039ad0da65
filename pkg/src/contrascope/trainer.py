"""Contrastive sparsity training: loss, analytic gradient, and a linear adapter.

The trainer learns a single linear map W so that, after mapping, the
difference between an anchor and its contradiction is sparse (high Hoyer
ratio) while the difference between the anchor and a paraphrase of itself is
not. The objective is an InfoNCE-style softmax over Hoyer scores at a
temperature: each anchor competes against every positive and hard negative in
the batch, its own positive being the target class.

Everything here computes in float64; adapter files store float32.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DegeneratePair,
    DimensionMismatch,
    FormatError,
    InvalidTemperature,
    IoError,
)

SPAD_MAGIC = b"SPAD"
SPAD_VERSION = 1

_DEGENERATE_NORM = 1e-12


def _as_vec(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TrainingTuple:
    """An anchor, a contradiction of it, and a paraphrase acting as hard negative."""

    anchor: np.ndarray
    positive: np.ndarray
    hard_negative: np.ndarray

    def __post_init__(self) -> None:
        a = _as_vec(self.anchor, "anchor")
        p = _as_vec(self.positive, "positive")
        g = _as_vec(self.hard_negative, "hard_negative")
        if not (a.shape == p.shape == g.shape):
            raise DimensionMismatch("tuple members must share one dimension")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "positive", p)
        object.__setattr__(self, "hard_negative", g)


class Adapter:
    """A linear map (out_dim, in_dim) applied as W @ v. Weights are float64."""

    def __init__(self, weight: np.ndarray) -> None:
        arr = np.array(weight, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionMismatch("adapter weight must be a 2-d matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("adapter weight contains non-finite values")
        arr.setflags(write=False)
        self.weight = arr

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    @classmethod
    def identity(cls, dim: int) -> "Adapter":
        return cls(np.eye(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map a vector (d_in,) or row matrix (n, d_in) into the output space."""
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            if arr.shape[0] != self.in_dim:
                raise DimensionMismatch(
                    f"vector has dim {arr.shape[0]}, adapter expects {self.in_dim}"
                )
            return self.weight @ arr
        if arr.ndim == 2:
            if arr.shape[1] != self.in_dim:
                raise DimensionMismatch(
                    f"matrix has dim {arr.shape[1]}, adapter expects {self.in_dim}"
                )
            return arr @ self.weight.T
        raise DimensionMismatch("adapter input must be 1-d or 2-d")

    def save(self, path: str | Path) -> None:
        payload = np.ascontiguousarray(self.weight, dtype="<f4")
        header = SPAD_MAGIC + struct.pack("<III", SPAD_VERSION, self.out_dim, self.in_dim)
        try:
            with open(path, "wb") as fh:
                fh.write(header)
                fh.write(payload.tobytes(order="C"))
        except OSError as exc:
            raise IoError(f"cannot write adapter file {path}: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Adapter":
        try:
            blob = Path(path).read_bytes()
        except OSError as exc:
            raise IoError(f"cannot read adapter file {path}: {exc}") from exc
        header_len = 4 + 4 + 4 + 4
        if len(blob) < header_len or blob[:4] != SPAD_MAGIC:
            raise FormatError(f"{path}: not an adapter file (bad magic)")
        version, d_out, d_in = struct.unpack("<III", blob[4:header_len])
        if version != SPAD_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        expected = header_len + d_out * d_in * 4
        if len(blob) != expected:
            raise FormatError(f"{path}: truncated or oversized weight payload")
        data = np.frombuffer(blob, dtype="<f4", offset=header_len)
        return cls(data.reshape(d_out, d_in).astype(np.float64))


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings for the adapter trainer.

    A zero learning rate is legal and leaves the initial weights untouched,
    which is useful for isolating the effect of initialization. out_dim of
    None keeps the input dimension.
    """

    temperature: float = 0.02
    batch_size: int = 64
    epochs: int = 3
    learning_rate: float = 1e-3
    subgradient_epsilon: float = 0.0
    out_dim: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if not (self.temperature > 0) or not np.isfinite(self.temperature):
            raise InvalidTemperature(f"temperature must be positive, got {self.temperature}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate < 0 or not np.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be finite and >= 0")
        if self.subgradient_epsilon < 0:
            raise ConfigError("subgradient_epsilon must be >= 0")
        if self.out_dim is not None and self.out_dim < 2:
            raise ConfigError("out_dim must be >= 2")


def _stack_batch(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not batch:
        raise ConfigError("batch must contain at least one tuple")
    d = batch[0].anchor.shape[0]
    for t in batch:
        if t.anchor.shape[0] != d:
            raise DimensionMismatch("tuples in a batch must share one dimension")
    anchors = np.stack([t.anchor for t in batch])
    positives = np.stack([t.positive for t in batch])
    negatives = np.stack([t.hard_negative for t in batch])
    return anchors, positives, negatives


def _hoyer_and_grad(
    diffs: np.ndarray, epsilon: float, want_grad: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    """Hoyer ratio of difference rows, plus its derivative in the last axis.

    diffs has shape (..., d). With epsilon > 0 the absolute value is smoothed
    to sqrt(x^2 + epsilon), which keeps the derivative defined at sign
    crossings; the returned value is of that smoothed function, so finite
    differences of it match the gradient exactly.
    """
    d = diffs.shape[-1]
    if d < 2:
        raise DimensionMismatch("difference vectors need dim >= 2")
    sq = diffs * diffs
    l2 = np.sqrt(sq.sum(axis=-1))
    if np.any(l2 < _DEGENERATE_NORM):
        raise DegeneratePair(
            "a batch pair has a zero difference vector; the loss is undefined there"
        )
    if epsilon > 0:
        smooth = np.sqrt(sq + epsilon)
        l1 = smooth.sum(axis=-1)
        sgn = diffs / smooth
    else:
        l1 = np.abs(diffs).sum(axis=-1)
        sgn = np.sign(diffs)
    rt = np.sqrt(float(d))
    values = (rt - l1 / l2) / (rt - 1.0)
    if not want_grad:
        return values, None
    l2e = l2[..., None]
    grad = -(sgn / l2e - l1[..., None] * diffs / (l2e**3)) / (rt - 1.0)
    return values, grad


def _loss_forward(
    weight: np.ndarray | None,
    anchors: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    temperature: float,
    epsilon: float,
    want_grad: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-item losses and, optionally, the gradient w.r.t. the adapter weight.

    Each anchor i scores against all positives and all negatives in the batch
    (2N candidates); its loss is cross-entropy of that softmax against its own
    positive. Scores are Hoyer ratios of adapted differences divided by the
    temperature, stabilized by max subtraction.
    """
    n = anchors.shape[0]
    if weight is not None:
        za = anchors @ weight.T
        zp = positives @ weight.T
        zn = negatives @ weight.T
    else:
        za, zp, zn = anchors, positives, negatives

    dp = za[:, None, :] - zp[None, :, :]
    dn = za[:, None, :] - zn[None, :, :]
    hp, gp = _hoyer_and_grad(dp, epsilon, want_grad)
    hn, gn = _hoyer_and_grad(dn, epsilon, want_grad)

    logits = np.concatenate([hp, hn], axis=1) / temperature
    peak = logits.max(axis=1, keepdims=True)
    expd = np.exp(logits - peak)
    denom = expd.sum(axis=1)
    lse = peak[:, 0] + np.log(denom)
    per_item = lse - np.diagonal(hp) / temperature

    if not want_grad:
        return per_item, None

    probs = expd / denom[:, None]
    coef = probs.copy()
    coef[np.arange(n), np.arange(n)] -= 1.0
    coef /= temperature * n

    d_out = za.shape[1]
    grad_rows = np.concatenate(
        [
            (coef[:, :n, None] * gp).reshape(-1, d_out),
            (coef[:, n:, None] * gn).reshape(-1, d_out),
        ]
    )
    base_rows = np.concatenate(
        [
            (anchors[:, None, :] - positives[None, :, :]).reshape(-1, anchors.shape[1]),
            (anchors[:, None, :] - negatives[None, :, :]).reshape(-1, anchors.shape[1]),
        ]
    )
    return per_item, grad_rows.T @ base_rows


def sparsecl_loss(batch, temperature: float) -> tuple[float, list[float]]:
    """Mean contrastive sparsity loss of a batch, with per-item values.

    Raises InvalidTemperature for non-positive temperature and DegeneratePair
    if any evaluated anchor/candidate difference has zero norm.
    """
    if not (temperature > 0) or not np.isfinite(temperature):
        raise InvalidTemperature(f"temperature must be positive, got {temperature}")
    anchors, positives, negatives = _stack_batch(batch)
    per_item, _ = _loss_forward(
        None, anchors, positives, negatives, temperature, 0.0, want_grad=False
    )
    return float(per_item.mean()), [float(x) for x in per_item]


def loss_gradient(batch, temperature: float, adapter: Adapter, epsilon: float = 0.0) -> np.ndarray:
    """Gradient of the mean batch loss with respect to the adapter weight.

    With epsilon > 0 the loss is the smoothed variant (see _hoyer_and_grad);
    with the default 0 this is the exact subgradient, valid wherever no
    difference coordinate sits exactly at zero.
    """
    if not (temperature > 0) or not np.isfinite(temperature):
        raise InvalidTemperature(f"temperature must be positive, got {temperature}")
    anchors, positives, negatives = _stack_batch(batch)
    if anchors.shape[1] != adapter.in_dim:
        raise DimensionMismatch(
            f"tuples have dim {anchors.shape[1]}, adapter expects {adapter.in_dim}"
        )
    _, grad = _loss_forward(
        adapter.weight, anchors, positives, negatives, temperature, epsilon, want_grad=True
    )
    return grad


def _batched_indices(
    order,
    anchors: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    batch_size: int,
):
    """Yield batches of tuple indices with in-batch duplicates deferred.

    A tuple is deferred to a later batch when its anchor equals (bitwise) a
    positive or negative already admitted, or when its positive or negative
    equals an admitted anchor: those are exactly the combinations the loss
    would evaluate as zero-difference pairs. Deferred tuples keep their
    relative order and are retried first, so every pass admits at least one
    tuple and the construction always terminates.
    """
    queue = deque(order)
    while queue:
        admitted: list[int] = []
        anchors_seen: set[bytes] = set()
        sides_seen: set[bytes] = set()
        deferred: list[int] = []
        while queue and len(admitted) < batch_size:
            i = queue.popleft()
            a_key = anchors[i].tobytes()
            p_key = positives[i].tobytes()
            g_key = negatives[i].tobytes()
            if a_key in sides_seen or p_key in anchors_seen or g_key in anchors_seen:
                deferred.append(i)
                continue
            admitted.append(i)
            anchors_seen.add(a_key)
            sides_seen.add(p_key)
            sides_seen.add(g_key)
        queue.extendleft(reversed(deferred))
        yield admitted


def train(tuples, cfg: TrainConfig) -> tuple[Adapter, list[float]]:
    """Fit an adapter to training tuples by SGD on the contrastive loss.

    Weights start at identity (or an identity block when out_dim differs)
    plus seeded Gaussian noise of 0.01 standard deviation. Each epoch
    shuffles the tuples and walks them in duplicate-free batches; the
    returned curve holds one mean loss per epoch. With learning_rate 0 the
    returned weights equal the initialization bit for bit.
    """
    cfg.validate()
    if not tuples:
        raise ConfigError("cannot train on an empty tuple list")
    anchors, positives, negatives = _stack_batch(tuples)
    d_in = anchors.shape[1]
    d_out = cfg.out_dim if cfg.out_dim is not None else d_in

    rng = np.random.default_rng(cfg.seed)
    weight = np.eye(d_out, d_in) + 0.01 * rng.standard_normal((d_out, d_in))

    n = len(tuples)
    curve: list[float] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_sum = 0.0
        for batch_idx in _batched_indices(
            order, anchors, positives, negatives, cfg.batch_size
        ):
            idx = np.asarray(batch_idx, dtype=np.intp)
            per_item, grad = _loss_forward(
                weight,
                anchors[idx],
                positives[idx],
                negatives[idx],
                cfg.temperature,
                cfg.subgradient_epsilon,
                want_grad=True,
            )
            epoch_sum += float(per_item.sum())
            if cfg.learning_rate != 0.0:
                weight -= cfg.learning_rate * grad
        curve.append(epoch_sum / n)
    return Adapter(weight), curve


def apply_adapter(adapter, corpus, source_space: str, target_space_name: str):
    """Map one corpus space through an adapter into a new named space.

    The new space is stored in float32 like every other; computation runs in
    float64. Raises SpaceExists if the target name is taken and
    DimensionMismatch if the adapter does not fit the source space.
    """
    source = corpus.f64(source_space)
    if source.shape[1] != adapter.in_dim:
        raise DimensionMismatch(
            f"space {source_space!r} has dim {source.shape[1]}, "
            f"adapter expects {adapter.in_dim}"
        )
    mapped = adapter.apply(source)
    return corpus.with_space(
        target_space_name, mapped.astype(np.float32), tag=f"adapted:{source_space}"
    )


def save_tuples(tuples, out_dir: str | Path) -> None:
    """Persist tuples as three aligned embedding files (float32 payload)."""
    from .corpus import write_embeddings

    if not tuples:
        raise ConfigError("refusing to write an empty tuple set")
    anchors, positives, negatives = _stack_batch(tuples)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    write_embeddings(out / "anchor.spem", anchors.astype(np.float32))
    write_embeddings(out / "positive.spem", positives.astype(np.float32))
    write_embeddings(out / "hard_negative.spem", negatives.astype(np.float32))


def load_tuples(tuple_dir: str | Path) -> list[TrainingTuple]:
    from .corpus import read_embeddings
    from .errors import AlignmentError

    root = Path(tuple_dir)
    anchors = read_embeddings(root / "anchor.spem")
    positives = read_embeddings(root / "positive.spem")
    negatives = read_embeddings(root / "hard_negative.spem")
    if not (anchors.shape == positives.shape == negatives.shape):
        raise AlignmentError(
            f"tuple files disagree: {anchors.shape} / {positives.shape} / {negatives.shape}"
        )
    return [
        TrainingTuple(anchor=a, positive=p, hard_negative=g)
        for a, p, g in zip(anchors, positives, negatives)
    ]


def gradient_check(
    batch,
    temperature: float,
    adapter: Adapter,
    step: float = 1e-5,
    samples: int = 24,
    seed: int = 0,
    epsilon: float = 0.0,
) -> tuple[float, int]:
    """Compare the analytic gradient against central finite differences.

    Perturbs a seeded sample of weight entries by +/- step, recomputes the
    mean batch loss, and returns (max relative error, entries checked).
    """
    anchors, positives, negatives = _stack_batch(batch)
    grad = loss_gradient(batch, temperature, adapter, epsilon=epsilon)
    rng = np.random.default_rng(seed)
    d_out, d_in = adapter.weight.shape
    count = min(samples, d_out * d_in)
    flat = rng.choice(d_out * d_in, size=count, replace=False)
    worst = 0.0
    base = np.array(adapter.weight)

    def mean_loss(w: np.ndarray) -> float:
        per_item, _ = _loss_forward(
            w, anchors, positives, negatives, temperature, epsilon, want_grad=False
        )
        return float(per_item.mean())

    for k in flat:
        r, c = divmod(int(k), d_in)
        w_plus = base.copy()
        w_plus[r, c] += step
        w_minus = base.copy()
        w_minus[r, c] -= step
        fd = (mean_loss(w_plus) - mean_loss(w_minus)) / (2.0 * step)
        an = grad[r, c]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-12)
        worst = max(worst, rel)
    return worst, count
