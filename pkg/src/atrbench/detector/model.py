"""Weights, forward pass, gradients, and checkpoint format of the patch classifier.

Architecture: 64x64 patch -> flatten -> tanh hidden layer -> 4-way softmax
(background + three object classes). Small enough to retrain mid-mission on a
CPU; weights default to float32 with a float64 option for gradient audits.
"""

from dataclasses import dataclass, field

import numpy as np

from ..binio import read_blocks, write_blocks
from ..errors import DivergenceError, ParameterError
from ..frames import CLASS_NAMES

MAGIC = b"SATR"

PATCH_SIZE = 64
INPUT_DIM = PATCH_SIZE * PATCH_SIZE
HIDDEN_UNITS = 128
N_CLASSES = 1 + len(CLASS_NAMES)  # background first

LABEL_NAMES = ("background",) + CLASS_NAMES


@dataclass
class ModelState:
    """Detector weights plus optimizer bookkeeping. version increments per train_step."""

    w1: np.ndarray  # (INPUT_DIM, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, N_CLASSES)
    b2: np.ndarray  # (N_CLASSES,)
    step_count: int = 0
    base_learning_rate: float = 1e-3
    version: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def dtype(self):
        return self.w1.dtype

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in (self.w1, self.b1, self.w2, self.b2))

    def copy(self) -> "ModelState":
        return ModelState(
            w1=self.w1.copy(), b1=self.b1.copy(), w2=self.w2.copy(), b2=self.b2.copy(),
            step_count=self.step_count, base_learning_rate=self.base_learning_rate,
            version=self.version, metadata=dict(self.metadata),
        )


def init_model(seed: int, hidden: int = HIDDEN_UNITS, dtype=np.float32) -> ModelState:
    """Fresh detector. The classifier layer starts at zero, so an untrained model
    predicts the uniform distribution over classes."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(INPUT_DIM)
    return ModelState(
        w1=(rng.standard_normal((INPUT_DIM, hidden)) * scale).astype(dtype),
        b1=np.zeros(hidden, dtype=dtype),
        w2=np.zeros((hidden, N_CLASSES), dtype=dtype),
        b2=np.zeros(N_CLASSES, dtype=dtype),
        metadata={"seed": int(seed)},
    )


def _flatten_patches(patches: np.ndarray, dtype) -> np.ndarray:
    x = np.asarray(patches, dtype=dtype)
    if x.ndim == 3:
        x = x.reshape(len(x), -1)
    if x.ndim != 2 or x.shape[1] != INPUT_DIM:
        raise ParameterError(f"patches must be (n, {PATCH_SIZE}, {PATCH_SIZE})")
    return x - np.asarray(0.5, dtype=dtype)


def forward_logits(model: ModelState, patches: np.ndarray) -> np.ndarray:
    """Class logits for a stack of patches."""
    x = _flatten_patches(patches, model.dtype)
    h = np.tanh(x @ model.w1 + model.b1)
    return h @ model.w2 + model.b2


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_from_logits(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy, computed in float64 regardless of model dtype."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=-1))
    picked = z[np.arange(len(z)), np.asarray(labels, dtype=np.int64)]
    return float(np.mean(logsumexp - picked))


def loss_and_grads(model: ModelState, patches: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradients for every weight group."""
    labels = np.asarray(labels, dtype=np.int64)
    x = _flatten_patches(patches, model.dtype)
    n = len(x)
    if n == 0:
        raise ParameterError("empty batch")
    h = np.tanh(x @ model.w1 + model.b1)
    logits = h @ model.w2 + model.b2
    loss = cross_entropy_from_logits(logits, labels)

    probs = softmax(logits)
    dlogits = probs.astype(model.dtype)
    dlogits[np.arange(n), labels] -= 1
    dlogits /= n
    grads = {
        "w2": h.T @ dlogits,
        "b2": dlogits.sum(axis=0),
    }
    dh = (dlogits @ model.w2.T) * (1 - h * h)
    grads["w1"] = x.T @ dh
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


def train_step(model: ModelState, batch, learning_rate: float) -> ModelState:
    """One mini-batch gradient-descent step in place; bumps version either way."""
    if learning_rate < 0:
        raise ParameterError("learning_rate must be >= 0")
    patches = getattr(batch, "patches", None)
    labels = getattr(batch, "labels", None)
    if patches is None:
        patches, labels = batch
    if len(patches) == 0:
        raise ParameterError("batch must be nonempty")
    loss, grads = loss_and_grads(model, patches, labels)
    if not np.isfinite(loss) or any(not np.isfinite(g).all() for g in grads.values()):
        raise DivergenceError(
            f"non-finite gradient at step {model.step_count}", step=model.step_count
        )
    lr = model.dtype.type(learning_rate)
    model.w1 -= lr * grads["w1"]
    model.b1 -= lr * grads["b1"]
    model.w2 -= lr * grads["w2"]
    model.b2 -= lr * grads["b2"]
    model.step_count += 1
    model.version += 1
    return model


def checkpoint_name(version: int) -> str:
    return f"atr-{version}.bin"


def save_model(model: ModelState, path):
    meta = {
        "step_count": model.step_count,
        "base_learning_rate": model.base_learning_rate,
        "version": model.version,
        "extra": model.metadata,
    }
    write_blocks(path, MAGIC, [model.w1, model.b1, model.w2, model.b2], meta)


def load_model(path) -> ModelState:
    arrays, meta = read_blocks(path, MAGIC)
    w1, b1, w2, b2 = arrays
    return ModelState(
        w1=w1, b1=b1, w2=w2, b2=b2,
        step_count=int(meta["step_count"]),
        base_learning_rate=float(meta["base_learning_rate"]),
        version=int(meta["version"]),
        metadata=meta.get("extra", {}),
    )
