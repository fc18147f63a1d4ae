"""Downstream classifier: softmax regression or a one-hidden-layer MLP.

Trained with mini-batch SGD on cross-entropy, in 64-bit floats throughout.
The MLP hidden activation is tanh. Argmax ties break toward the lowest class
index so accuracy and attack-success metrics are deterministic.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset
from .errors import EmptyDataset, ShapeMismatch
from .features import FeatureVector, FeaturizerConfig, featurize_texts

ARCH_LINEAR = "linear"
ARCH_MLP = "mlp"

_MAGIC = b"FBDP"
_VERSION = 1
_ARCH_TAGS = {ARCH_LINEAR: 0, ARCH_MLP: 1}
_TAG_ARCHS = {v: k for k, v in _ARCH_TAGS.items()}


@dataclass
class ModelParams:
    """Dense weights and biases; [W, b] for linear, [W1, b1, W2, b2] for MLP."""

    arch: str
    layers: list[np.ndarray]

    @property
    def feature_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def num_classes(self) -> int:
        return self.layers[-2].shape[0]

    @property
    def hidden(self) -> int:
        return self.layers[0].shape[0] if self.arch == ARCH_MLP else 0

    def copy(self) -> "ModelParams":
        return ModelParams(arch=self.arch, layers=[l.copy() for l in self.layers])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int = 32
    seed: int = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def init_params(
    arch: str, feature_dim: int, num_classes: int, hidden: int = 0, seed: int = 0
) -> ModelParams:
    """Fan-in scaled symmetric uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    if arch == ARCH_LINEAR:
        bound = 1.0 / np.sqrt(feature_dim)
        layers = [
            rng.uniform(-bound, bound, size=(num_classes, feature_dim)),
            np.zeros(num_classes),
        ]
    elif arch == ARCH_MLP:
        if hidden < 1:
            raise ValueError("mlp arch needs hidden >= 1")
        b1 = 1.0 / np.sqrt(feature_dim)
        b2 = 1.0 / np.sqrt(hidden)
        layers = [
            rng.uniform(-b1, b1, size=(hidden, feature_dim)),
            np.zeros(hidden),
            rng.uniform(-b2, b2, size=(num_classes, hidden)),
            np.zeros(num_classes),
        ]
    else:
        raise ValueError(f"unknown arch {arch!r}")
    return ModelParams(arch=arch, layers=layers)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: ModelParams, fv: FeatureVector) -> np.ndarray:
    """Class probabilities for one feature vector (log-sum-exp stabilized)."""
    if fv.dim != params.feature_dim:
        raise ShapeMismatch(f"feature dim {fv.dim} != model dim {params.feature_dim}")
    if params.arch == ARCH_LINEAR:
        W, b = params.layers
        scores = W[:, fv.indices] @ fv.values + b
    else:
        W1, b1, W2, b2 = params.layers
        h = np.tanh(W1[:, fv.indices] @ fv.values + b1)
        scores = W2 @ h + b2
    return _softmax(scores)


def _batch_scores(params: ModelParams, X) -> np.ndarray:
    if params.arch == ARCH_LINEAR:
        W, b = params.layers
        return np.asarray(X @ W.T) + b
    W1, b1, W2, b2 = params.layers
    h = np.tanh(np.asarray(X @ W1.T) + b1)
    return h @ W2.T + b2


def loss_and_grad(params: ModelParams, X, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient per layer."""
    n = X.shape[0]
    if params.arch == ARCH_LINEAR:
        W, b = params.layers
        scores = np.asarray(X @ W.T) + b
        probs = _softmax(scores)
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
        d_scores = probs
        d_scores[np.arange(n), y] -= 1.0
        d_scores /= n
        dW = np.asarray(X.T @ d_scores).T
        db = d_scores.sum(axis=0)
        return loss, [dW, db]
    W1, b1, W2, b2 = params.layers
    pre = np.asarray(X @ W1.T) + b1
    h = np.tanh(pre)
    scores = h @ W2.T + b2
    probs = _softmax(scores)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    d_scores = probs
    d_scores[np.arange(n), y] -= 1.0
    d_scores /= n
    dW2 = d_scores.T @ h
    db2 = d_scores.sum(axis=0)
    d_h = d_scores @ W2
    d_pre = d_h * (1.0 - h * h)
    dW1 = np.asarray(X.T @ d_pre).T
    db1 = d_pre.sum(axis=0)
    return loss, [dW1, db1, dW2, db2]


def dataset_loss(params: ModelParams, X, y: np.ndarray) -> float:
    n = X.shape[0]
    probs = _softmax(_batch_scores(params, X))
    return float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))


def train_on_matrix(params: ModelParams, X, y: np.ndarray, cfg: TrainConfig) -> ModelParams:
    """Mini-batch SGD on a pre-featurized matrix; the input params are untouched."""
    n = X.shape[0]
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if X.shape[1] != params.feature_dim:
        raise ShapeMismatch(f"data dim {X.shape[1]} != model dim {params.feature_dim}")
    out = params.copy()
    rng = np.random.default_rng(cfg.seed)
    weight_slots = set(range(0, len(out.layers), 2))
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            _, grads = loss_and_grad(out, X[idx], y[idx])
            for slot, (layer, grad) in enumerate(zip(out.layers, grads)):
                if cfg.weight_decay and slot in weight_slots:
                    grad = grad + cfg.weight_decay * layer
                layer -= cfg.learning_rate * grad
    return out


def _dataset_matrix(data: Dataset, feat_cfg: FeaturizerConfig):
    X = featurize_texts(data.texts(), feat_cfg)
    y = np.array(data.labels(), dtype=np.int64)
    return X, y


def train(params: ModelParams, data: Dataset, feat_cfg: FeaturizerConfig, cfg: TrainConfig) -> ModelParams:
    if not data.instances:
        raise EmptyDataset("cannot train on an empty dataset")
    X, y = _dataset_matrix(data, feat_cfg)
    return train_on_matrix(params, X, y, cfg)


def predict_matrix(params: ModelParams, X) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class index."""
    return np.argmax(_batch_scores(params, X), axis=1)


def evaluate_acc_matrix(params: ModelParams, X, y: np.ndarray) -> float:
    if X.shape[0] == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    return float(np.mean(predict_matrix(params, X) == y))


def evaluate_asr_matrix(params: ModelParams, X, target_class: int) -> float:
    if X.shape[0] == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    return float(np.mean(predict_matrix(params, X) == target_class))


def evaluate_acc(params: ModelParams, test: Dataset, feat_cfg: FeaturizerConfig) -> float:
    """Fraction of clean test instances classified to their true label."""
    if not test.instances:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    X, y = _dataset_matrix(test, feat_cfg)
    return evaluate_acc_matrix(params, X, y)


def evaluate_asr(
    params: ModelParams, triggered_test: Dataset, target_class: int, feat_cfg: FeaturizerConfig
) -> float:
    """Fraction of triggered test instances classified to the target class."""
    if not triggered_test.instances:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    X, _ = _dataset_matrix(triggered_test, feat_cfg)
    return evaluate_asr_matrix(params, X, target_class)


# --- parameter arithmetic (used by the federation layer) ---

def params_sub(a: ModelParams, b: ModelParams) -> ModelParams:
    _check_same_shape(a, b)
    return ModelParams(arch=a.arch, layers=[x - y for x, y in zip(a.layers, b.layers)])


def params_add(a: ModelParams, b: ModelParams) -> ModelParams:
    _check_same_shape(a, b)
    return ModelParams(arch=a.arch, layers=[x + y for x, y in zip(a.layers, b.layers)])


def params_flat(p: ModelParams) -> np.ndarray:
    return np.concatenate([l.ravel() for l in p.layers])


def params_l2(p: ModelParams) -> float:
    return float(np.linalg.norm(params_flat(p)))


def params_equal(a: ModelParams, b: ModelParams) -> bool:
    return (
        a.arch == b.arch
        and len(a.layers) == len(b.layers)
        and all(np.array_equal(x, y) for x, y in zip(a.layers, b.layers))
    )


def _check_same_shape(a: ModelParams, b: ModelParams) -> None:
    if a.arch != b.arch or len(a.layers) != len(b.layers) or any(
        x.shape != y.shape for x, y in zip(a.layers, b.layers)
    ):
        raise ShapeMismatch("parameter shapes differ")


# --- serialization ---

def params_to_bytes(p: ModelParams) -> bytes:
    """Versioned binary layout: magic, version, arch tag, dims, <f8 payload."""
    head = struct.pack(
        "<4sBBIII",
        _MAGIC,
        _VERSION,
        _ARCH_TAGS[p.arch],
        p.feature_dim,
        p.hidden,
        p.num_classes,
    )
    body = b"".join(np.ascontiguousarray(l, dtype="<f8").tobytes() for l in p.layers)
    return head + body


def params_from_bytes(buf: bytes) -> ModelParams:
    head_size = struct.calcsize("<4sBBIII")
    magic, version, tag, dim, hidden, classes = struct.unpack("<4sBBIII", buf[:head_size])
    if magic != _MAGIC:
        raise ValueError("not a model parameter blob (bad magic)")
    if version != _VERSION:
        raise ValueError(f"unsupported version {version}")
    arch = _TAG_ARCHS[tag]
    if arch == ARCH_LINEAR:
        shapes = [(classes, dim), (classes,)]
    else:
        shapes = [(hidden, dim), (hidden,), (classes, hidden), (classes,)]
    layers = []
    offset = head_size
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).reshape(shape)
        layers.append(arr.astype(np.float64).copy())
        offset += count * 8
    if offset != len(buf):
        raise ValueError("trailing bytes in parameter blob")
    return ModelParams(arch=arch, layers=layers)


def params_digest(p: ModelParams) -> str:
    """64-bit checksum of the serialized parameters, as 16 hex chars."""
    return hashlib.sha256(params_to_bytes(p)).hexdigest()[:16]
