"""Federated training orchestration.

Implements the full experiment loop: pre-train the global model on a
synthetic corpus (poisoned or clean depending on the arm), partition the
client pool, then run T rounds of sampled local SGD plus sample-weighted
FedAvg. Two observational defenses are computed each round: a cosine-based
anomaly score per client update and an optional norm-clip-plus-noise
transform applied before aggregation.

Every RNG stream is derived from (master seed, labels), so results do not
depend on scheduling: running clients sequentially or in parallel gives the
same bits.
"""

import random
from dataclasses import dataclass, replace

import numpy as np

from .corpus import (
    AttackConfig,
    Dataset,
    SyntheticSpec,
    build_triggered_testset,
    generate_synthetic,
    poison_client_dataset,
)
from .errors import EmptyUpdateSet, IndivisiblePool, ShapeMismatch, TooFewInstances
from .features import FeaturizerConfig, featurize_texts
from .learner import (
    ModelParams,
    TrainConfig,
    evaluate_acc_matrix,
    evaluate_asr_matrix,
    init_params,
    params_add,
    params_digest,
    params_flat,
    params_l2,
    params_sub,
    train_on_matrix,
)
from .seeds import derive_seed

PARTITION_IID = "iid"
PARTITION_NONIID = "noniid"

ARM_AF_FL = "AF-FL"
ARM_BD_FL = "BD-FL"
ARM_BD_FMFL = "BD-FMFL"
ARM_ORDER = (ARM_AF_FL, ARM_BD_FL, ARM_BD_FMFL)


@dataclass(frozen=True)
class FLConfig:
    num_clients: int
    rounds: int
    local_epochs: int
    participation: float | None = None  # fraction per round; None means all clients
    partition: str = PARTITION_IID
    shards_per_client: int = 2
    aggregation: str = "fedavg"
    seed: int = 0

    def __post_init__(self):
        if self.num_clients < 1:
            raise ValueError("num_clients must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.local_epochs < 1:
            raise ValueError("local_epochs must be >= 1")
        if self.participation is not None and not 0.0 < self.participation <= 1.0:
            raise ValueError("participation fraction must be in (0, 1]")
        if self.partition not in (PARTITION_IID, PARTITION_NONIID):
            raise ValueError(f"unknown partition {self.partition!r}")
        if self.shards_per_client < 1:
            raise ValueError("shards_per_client must be >= 1")
        if self.aggregation != "fedavg":
            raise ValueError(f"unsupported aggregation {self.aggregation!r}")


@dataclass
class Partition:
    shards: list[Dataset]


@dataclass(frozen=True)
class ExperimentArm:
    """One evaluation arm; the attack also drives ASR measurement for AF-FL."""

    name: str
    attack: AttackConfig
    poisoned_client_count: int = 1

    def __post_init__(self):
        if self.name not in ARM_ORDER:
            raise ValueError(f"unknown arm {self.name!r}; expected one of {ARM_ORDER}")
        if self.poisoned_client_count < 1:
            raise ValueError("poisoned_client_count must be >= 1")


@dataclass(frozen=True)
class DefenseConfig:
    """Norm clipping plus Gaussian noise applied to client deltas pre-aggregation."""

    clip_norm: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass
class RoundMetrics:
    round: int
    acc: float
    asr: float
    client_ids: tuple[int, ...]
    update_norms: tuple[float, ...]
    anomaly_scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "acc": self.acc,
            "asr": self.asr,
            "client_ids": list(self.client_ids),
            "update_norms": list(self.update_norms),
            "anomaly_scores": list(self.anomaly_scores),
        }


@dataclass
class ExperimentResult:
    arm: str
    pretrain: RoundMetrics          # round 0: post-pretrain, pre-federation
    rounds: list[RoundMetrics]      # rounds 1..T
    final_params: ModelParams
    params_digest: str
    poisoned_clients: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "pretrain": self.pretrain.to_dict(),
            "rounds": [m.to_dict() for m in self.rounds],
            "params_digest": self.params_digest,
            "poisoned_clients": list(self.poisoned_clients),
        }


def partition_iid(pool: Dataset, num_clients: int, seed: int) -> Partition:
    """Seeded shuffle then contiguous near-equal splits (sizes differ by <= 1)."""
    n = len(pool)
    if n < num_clients:
        raise TooFewInstances(f"pool of {n} cannot feed {num_clients} clients")
    order = list(range(n))
    random.Random(derive_seed(seed, "iid-shuffle")).shuffle(order)
    base, extra = divmod(n, num_clients)
    shards = []
    pos = 0
    for c in range(num_clients):
        size = base + (1 if c < extra else 0)
        idx = order[pos : pos + size]
        pos += size
        shards.append(Dataset([pool.instances[i] for i in idx], pool.num_classes))
    return Partition(shards=shards)


def partition_noniid(
    pool: Dataset, num_clients: int, shards_per_client: int, seed: int
) -> Partition:
    """Label-sorted equal shards dealt uniformly at random, `shards_per_client` each."""
    n = len(pool)
    total_shards = num_clients * shards_per_client
    if n % total_shards != 0 or n < total_shards:
        raise IndivisiblePool(
            f"pool of {n} does not divide into {total_shards} equal non-empty shards"
        )
    shard_size = n // total_shards
    by_label = sorted(range(n), key=lambda i: (pool.instances[i].label, i))
    shard_ids = list(range(total_shards))
    rng = random.Random(derive_seed(seed, "noniid-deal"))
    deal = rng.sample(shard_ids, total_shards)
    shards = []
    for c in range(num_clients):
        idx: list[int] = []
        for s in deal[c * shards_per_client : (c + 1) * shards_per_client]:
            idx.extend(by_label[s * shard_size : (s + 1) * shard_size])
        shards.append(Dataset([pool.instances[i] for i in idx], pool.num_classes))
    return Partition(shards=shards)


def sample_clients(cfg: FLConfig, round_index: int, master_seed: int) -> tuple[int, ...]:
    """Client set for one round: all clients, or a seeded uniform sample.

    The stream depends only on (master_seed, round_index), never on wall clock
    or call order.
    """
    if cfg.participation is None:
        return tuple(range(cfg.num_clients))
    q = round(cfg.participation * cfg.num_clients)
    rng = random.Random(derive_seed(master_seed, "client-sample", round_index))
    return tuple(sorted(rng.sample(range(cfg.num_clients), q)))


def fedavg(updates: list[tuple[ModelParams, int]]) -> ModelParams:
    """Sample-count weighted coordinate-wise average.

    Callers pass updates in ascending client order; summation follows list
    order, so the result is deterministic.
    """
    if not updates:
        raise EmptyUpdateSet("fedavg needs at least one update")
    first = updates[0][0]
    total = sum(count for _, count in updates)
    if total <= 0:
        raise EmptyUpdateSet("total sample count must be positive")
    out = [np.zeros_like(l) for l in first.layers]
    for params, count in updates:
        if params.arch != first.arch or len(params.layers) != len(first.layers) or any(
            a.shape != b.shape for a, b in zip(params.layers, first.layers)
        ):
            raise ShapeMismatch("all updates must share the same shapes")
        w = count / total
        for acc, layer in zip(out, params.layers):
            acc += w * layer
    return ModelParams(arch=first.arch, layers=out)


def cosine_anomaly_scores(deltas: list[ModelParams]) -> tuple[float, ...]:
    """1 - cosine(update, mean of the other updates), per client.

    Zero-norm updates (or a zero-norm leave-one-out mean) score 0 instead of
    failing; higher means more anomalous.
    """
    if len(deltas) < 2:
        raise EmptyUpdateSet("anomaly scoring needs at least two updates")
    flat = np.stack([params_flat(d) for d in deltas])
    total = flat.sum(axis=0)
    scores = []
    for i in range(flat.shape[0]):
        own = flat[i]
        others_mean = (total - own) / (flat.shape[0] - 1)
        denom = np.linalg.norm(own) * np.linalg.norm(others_mean)
        if denom == 0.0:
            scores.append(0.0)
        else:
            scores.append(float(1.0 - (own @ others_mean) / denom))
    return tuple(scores)


def clip_and_noise(
    delta: ModelParams, clip_norm: float, noise_sigma: float, seed: int
) -> ModelParams:
    """Scale the update to L2 norm <= clip_norm, then add seeded Gaussian noise."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be > 0")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    out = delta.copy()
    norm = params_l2(out)
    if norm > clip_norm:
        scale = clip_norm / norm
        for layer in out.layers:
            layer *= scale
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        for layer in out.layers:
            layer += rng.normal(0.0, noise_sigma, size=layer.shape)
    return out


def _partition_pool(pool: Dataset, fl: FLConfig) -> Partition:
    seed = derive_seed(fl.seed, "partition")
    if fl.partition == PARTITION_IID:
        return partition_iid(pool, fl.num_clients, seed)
    return partition_noniid(pool, fl.num_clients, fl.shards_per_client, seed)


def run_experiment(
    arm: ExperimentArm,
    fl: FLConfig,
    pretrain_source: SyntheticSpec | Dataset,
    pool: Dataset,
    test: Dataset,
    feat_cfg: FeaturizerConfig,
    pretrain_cfg: TrainConfig,
    local_cfg: TrainConfig,
    arch: str = "linear",
    hidden: int = 0,
    defense: DefenseConfig | None = None,
) -> ExperimentResult:
    """Run one arm end to end and report per-round metrics.

    The synthetic pre-training corpus is poisoned only for the
    pretraining-attack arm; the other arms pre-train on the clean generation
    of the same corpus. The client-poisoning arm additionally poisons the
    first `poisoned_client_count` shards once, before round 1. Metrics
    (accuracy on the clean test set, attack success rate on the triggered
    test set, update norms, anomaly scores) are measured on the aggregated
    global model every round; the round-0 entry covers the pre-trained model
    before any federation.
    """
    attack = arm.attack
    attack.validate_classes(pool.num_classes)
    if arm.name == ARM_BD_FL and arm.poisoned_client_count > fl.num_clients:
        raise ValueError("poisoned_client_count exceeds num_clients")

    poison_pretrain = arm.name == ARM_BD_FMFL
    if isinstance(pretrain_source, SyntheticSpec):
        d_syn = generate_synthetic(
            pretrain_source,
            attack if poison_pretrain else None,
            seed=derive_seed(fl.seed, "pretrain-data"),
        )
    else:
        d_syn = (
            poison_client_dataset(pretrain_source, attack, derive_seed(fl.seed, "pretrain-poison"))
            if poison_pretrain
            else pretrain_source
        )

    partition = _partition_pool(pool, fl)
    shards = partition.shards
    poisoned_clients: tuple[int, ...] = ()
    if arm.name == ARM_BD_FL:
        poisoned_clients = tuple(range(arm.poisoned_client_count))
        for c in poisoned_clients:
            shards[c] = poison_client_dataset(
                shards[c], attack, derive_seed(fl.seed, "client-poison", c)
            )

    X_test = featurize_texts(test.texts(), feat_cfg)
    y_test = np.array(test.labels(), dtype=np.int64)
    triggered = build_triggered_testset(test, attack)
    X_trig = featurize_texts(triggered.texts(), feat_cfg)

    X_syn = featurize_texts(d_syn.texts(), feat_cfg)
    y_syn = np.array(d_syn.labels(), dtype=np.int64)

    shard_cache: dict[int, tuple] = {}

    def shard_matrix(c: int):
        if c not in shard_cache:
            shard_cache[c] = (
                featurize_texts(shards[c].texts(), feat_cfg),
                np.array(shards[c].labels(), dtype=np.int64),
            )
        return shard_cache[c]

    global_params = init_params(
        arch, feat_cfg.dim, pool.num_classes, hidden=hidden, seed=derive_seed(fl.seed, "init")
    )
    global_params = train_on_matrix(
        global_params, X_syn, y_syn, replace(pretrain_cfg, seed=derive_seed(fl.seed, "pretrain"))
    )

    def measure(round_index, client_ids, norms, scores):
        return RoundMetrics(
            round=round_index,
            acc=evaluate_acc_matrix(global_params, X_test, y_test),
            asr=evaluate_asr_matrix(global_params, X_trig, attack.target_class),
            client_ids=tuple(client_ids),
            update_norms=tuple(norms),
            anomaly_scores=tuple(scores),
        )

    pretrain_metrics = measure(0, (), (), ())

    round_metrics: list[RoundMetrics] = []
    for t in range(1, fl.rounds + 1):
        selected = sample_clients(fl, t, fl.seed)
        locals_: list[tuple[ModelParams, int]] = []
        deltas: list[ModelParams] = []
        for c in selected:
            Xc, yc = shard_matrix(c)
            local = train_on_matrix(
                global_params, Xc, yc, replace(local_cfg, seed=derive_seed(fl.seed, "local", t, c))
            )
            locals_.append((local, len(shards[c])))
            deltas.append(params_sub(local, global_params))
        norms = [params_l2(d) for d in deltas]
        scores = cosine_anomaly_scores(deltas) if len(deltas) >= 2 else (0.0,) * len(deltas)
        if defense is not None:
            clipped = [
                clip_and_noise(d, defense.clip_norm, defense.noise_sigma, derive_seed(fl.seed, "defense", t, c))
                for c, d in zip(selected, deltas)
            ]
            counts = [count for _, count in locals_]
            avg_delta = fedavg(list(zip(clipped, counts)))
            global_params = params_add(global_params, avg_delta)
        else:
            global_params = fedavg(locals_)
        round_metrics.append(measure(t, selected, norms, scores))

    return ExperimentResult(
        arm=arm.name,
        pretrain=pretrain_metrics,
        rounds=round_metrics,
        final_params=global_params,
        params_digest=params_digest(global_params),
        poisoned_clients=poisoned_clients,
    )
