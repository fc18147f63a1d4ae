"""Experiment configuration: schema, defaults, parsing and echo.

The config is a plain JSON document with explicit keys for every
hyperparameter of the study: client counts, participation, rounds, local
epochs, trigger, poisoning ratio, and the synthetic task sizes. parse_config
raises ConfigError naming the offending key; config_to_dict produces a
canonical echo that re-parses to an equal ExperimentConfig.
"""

import json
from dataclasses import dataclass

from .corpus import AttackConfig, TriggerSpec
from .errors import ConfigError
from .features import FeaturizerConfig
from .federation import DefenseConfig, PARTITION_IID, PARTITION_NONIID, ARM_ORDER
from .learner import ARCH_LINEAR, ARCH_MLP, TrainConfig
from .tasks import TASKS

SETTING_CROSS_DEVICE = "cross-device"
SETTING_CROSS_SILO = "cross-silo"
SETTINGS = (SETTING_CROSS_DEVICE, SETTING_CROSS_SILO)
PARTITIONS = (PARTITION_IID, PARTITION_NONIID)


@dataclass(frozen=True)
class TaskConfig:
    """Synthetic task from a built-in bank, or datasets loaded from files."""

    name: str | None = None
    pretrain_instances: int = 2000
    pool_instances: int = 4000
    test_instances: int = 1000
    pretrain_file: str | None = None
    pool_file: str | None = None
    test_file: str | None = None

    @property
    def from_files(self) -> bool:
        return self.name is None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    rounds: int
    output_dir: str
    arms: tuple[str, ...]
    task: TaskConfig
    attack: AttackConfig
    local_epochs: int = 3
    settings: tuple[str, ...] = (SETTING_CROSS_DEVICE,)
    partitions: tuple[str, ...] = (PARTITION_IID,)
    features: FeaturizerConfig = FeaturizerConfig()
    arch: str = ARCH_LINEAR
    hidden: int = 0
    pretrain: TrainConfig = TrainConfig(learning_rate=0.5, epochs=30, batch_size=32)
    local: TrainConfig = TrainConfig(learning_rate=0.25, epochs=3, batch_size=32)
    cross_device_clients: int = 100
    cross_device_participation: float = 0.15
    cross_silo_clients: int = 10
    shards_per_client: int = 2
    defense: DefenseConfig | None = None


def _get(raw: dict, key: str, kind, parent: str = "", required: bool = True, default=None):
    path = f"{parent}.{key}" if parent else key
    if key not in raw:
        if required:
            raise ConfigError(path)
        return default
    value = raw[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and (not isinstance(value, kind) or isinstance(value, bool) and kind is not bool):
        raise ConfigError(path, f"expected {getattr(kind, '__name__', kind)}")
    return value


def _parse_trigger(raw: dict, parent: str) -> TriggerSpec:
    kind = _get(raw, "kind", str, parent)
    payload = _get(raw, "payload", str, parent)
    try:
        return TriggerSpec(kind=kind, payload=payload)
    except ValueError as err:
        raise ConfigError(parent, str(err))


def parse_attack(raw: dict, parent: str = "attack") -> AttackConfig:
    trigger = _parse_trigger(_get(raw, "trigger", dict, parent), f"{parent}.trigger")
    try:
        return AttackConfig(
            trigger=trigger,
            target_class=_get(raw, "target_class", int, parent),
            mode=_get(raw, "mode", str, parent, required=False, default="all-to-one"),
            source_class=_get(raw, "source_class", int, parent, required=False),
            poison_ratio=_get(raw, "poison_ratio", float, parent, required=False, default=0.2),
        )
    except ValueError as err:
        raise ConfigError(parent, str(err))


def _parse_task(raw: dict) -> TaskConfig:
    if "name" in raw:
        name = _get(raw, "name", str, "task")
        if name not in TASKS:
            raise ConfigError("task.name", f"unknown task {name!r}")
        return TaskConfig(
            name=name,
            pretrain_instances=_get(raw, "pretrain_instances", int, "task", required=False, default=2000),
            pool_instances=_get(raw, "pool_instances", int, "task", required=False, default=4000),
            test_instances=_get(raw, "test_instances", int, "task", required=False, default=1000),
        )
    return TaskConfig(
        name=None,
        pretrain_file=_get(raw, "pretrain_file", str, "task"),
        pool_file=_get(raw, "pool_file", str, "task"),
        test_file=_get(raw, "test_file", str, "task"),
    )


def _parse_train(raw: dict, parent: str, default_lr: float, default_epochs: int) -> TrainConfig:
    if parent == "local" and "epochs" in raw:
        raise ConfigError("local.epochs", "set the top-level local_epochs key instead")
    try:
        return TrainConfig(
            learning_rate=_get(raw, "learning_rate", float, parent, required=False, default=default_lr),
            epochs=_get(raw, "epochs", int, parent, required=False, default=default_epochs),
            batch_size=_get(raw, "batch_size", int, parent, required=False, default=32),
            weight_decay=_get(raw, "weight_decay", float, parent, required=False, default=0.0),
        )
    except ValueError as err:
        raise ConfigError(parent, str(err))


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")

    arms_raw = _get(raw, "arms", list)
    for arm in arms_raw:
        if arm not in ARM_ORDER:
            raise ConfigError("arms", f"unknown arm {arm!r}")
    settings = tuple(_get(raw, "settings", list, required=False, default=[SETTING_CROSS_DEVICE]))
    for s in settings:
        if s not in SETTINGS:
            raise ConfigError("settings", f"unknown setting {s!r}")
    partitions = tuple(_get(raw, "partitions", list, required=False, default=[PARTITION_IID]))
    for p in partitions:
        if p not in PARTITIONS:
            raise ConfigError("partitions", f"unknown partition {p!r}")

    feat_raw = _get(raw, "features", dict, required=False, default={})
    try:
        features = FeaturizerConfig(
            dim=_get(feat_raw, "dim", int, "features", required=False, default=4096),
            ngram_max=_get(feat_raw, "ngram_max", int, "features", required=False, default=2),
            lowercase=_get(feat_raw, "lowercase", bool, "features", required=False, default=True),
            hash_seed=_get(feat_raw, "hash_seed", int, "features", required=False, default=0),
        )
    except ValueError as err:
        raise ConfigError("features", str(err))

    model_raw = _get(raw, "model", dict, required=False, default={})
    arch = _get(model_raw, "arch", str, "model", required=False, default=ARCH_LINEAR)
    if arch not in (ARCH_LINEAR, ARCH_MLP):
        raise ConfigError("model.arch", f"unknown arch {arch!r}")
    hidden = _get(model_raw, "hidden", int, "model", required=False, default=0)
    if arch == ARCH_MLP and hidden < 1:
        raise ConfigError("model.hidden", "mlp arch needs hidden >= 1")

    fl_raw = _get(raw, "fl", dict, required=False, default={})
    cd_raw = _get(fl_raw, "cross_device", dict, "fl", required=False, default={})
    cs_raw = _get(fl_raw, "cross_silo", dict, "fl", required=False, default={})

    local_epochs = _get(raw, "local_epochs", int, required=False, default=3)
    defense = None
    if "defense" in raw:
        d_raw = _get(raw, "defense", dict)
        if _get(d_raw, "apply", bool, "defense", required=False, default=False):
            try:
                defense = DefenseConfig(
                    clip_norm=_get(d_raw, "clip_norm", float, "defense"),
                    noise_sigma=_get(d_raw, "noise_sigma", float, "defense", required=False, default=0.0),
                )
            except ValueError as err:
                raise ConfigError("defense", str(err))

    cfg = ExperimentConfig(
        seed=_get(raw, "seed", int),
        rounds=_get(raw, "rounds", int),
        output_dir=_get(raw, "output_dir", str),
        arms=tuple(a for a in ARM_ORDER if a in arms_raw),
        task=_parse_task(_get(raw, "task", dict)),
        attack=parse_attack(_get(raw, "attack", dict)),
        local_epochs=local_epochs,
        settings=settings,
        partitions=partitions,
        features=features,
        arch=arch,
        hidden=hidden,
        pretrain=_parse_train(_get(raw, "pretrain", dict, required=False, default={}), "pretrain", 0.5, 30),
        local=_parse_train(_get(raw, "local", dict, required=False, default={}), "local", 0.25, local_epochs),
        cross_device_clients=_get(cd_raw, "num_clients", int, "fl.cross_device", required=False, default=100),
        cross_device_participation=_get(cd_raw, "participation", float, "fl.cross_device", required=False, default=0.15),
        cross_silo_clients=_get(cs_raw, "num_clients", int, "fl.cross_silo", required=False, default=10),
        shards_per_client=_get(fl_raw, "noniid_shards_per_client", int, "fl", required=False, default=2),
        defense=defense,
    )
    if cfg.rounds < 1:
        raise ConfigError("rounds", "must be >= 1")
    if cfg.local_epochs < 1:
        raise ConfigError("local_epochs", "must be >= 1")
    if not cfg.arms:
        raise ConfigError("arms", "must list at least one arm")
    if not 0.0 < cfg.cross_device_participation <= 1.0:
        raise ConfigError("fl.cross_device.participation", "must be in (0, 1]")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(str(path), f"cannot read config: {err}")
    except json.JSONDecodeError as err:
        raise ConfigError(str(path), f"not valid JSON: {err}")
    return parse_config(raw)


def attack_to_dict(attack: AttackConfig) -> dict:
    out = {
        "trigger": {"kind": attack.trigger.kind, "payload": attack.trigger.payload},
        "target_class": attack.target_class,
        "mode": attack.mode,
        "poison_ratio": attack.poison_ratio,
    }
    if attack.source_class is not None:
        out["source_class"] = attack.source_class
    return out


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical echo; parse_config(config_to_dict(cfg)) == cfg."""
    task: dict = {}
    if cfg.task.from_files:
        task = {
            "pretrain_file": cfg.task.pretrain_file,
            "pool_file": cfg.task.pool_file,
            "test_file": cfg.task.test_file,
        }
    else:
        task = {
            "name": cfg.task.name,
            "pretrain_instances": cfg.task.pretrain_instances,
            "pool_instances": cfg.task.pool_instances,
            "test_instances": cfg.task.test_instances,
        }
    out = {
        "seed": cfg.seed,
        "rounds": cfg.rounds,
        "output_dir": cfg.output_dir,
        "arms": list(cfg.arms),
        "settings": list(cfg.settings),
        "partitions": list(cfg.partitions),
        "local_epochs": cfg.local_epochs,
        "task": task,
        "attack": attack_to_dict(cfg.attack),
        "features": {
            "dim": cfg.features.dim,
            "ngram_max": cfg.features.ngram_max,
            "lowercase": cfg.features.lowercase,
            "hash_seed": cfg.features.hash_seed,
        },
        "model": {"arch": cfg.arch, "hidden": cfg.hidden},
        "pretrain": {
            "learning_rate": cfg.pretrain.learning_rate,
            "epochs": cfg.pretrain.epochs,
            "batch_size": cfg.pretrain.batch_size,
            "weight_decay": cfg.pretrain.weight_decay,
        },
        "local": {
            "learning_rate": cfg.local.learning_rate,
            "batch_size": cfg.local.batch_size,
            "weight_decay": cfg.local.weight_decay,
        },
        "fl": {
            "cross_device": {
                "num_clients": cfg.cross_device_clients,
                "participation": cfg.cross_device_participation,
            },
            "cross_silo": {"num_clients": cfg.cross_silo_clients},
            "noniid_shards_per_client": cfg.shards_per_client,
        },
    }
    if cfg.defense is not None:
        out["defense"] = {
            "apply": True,
            "clip_norm": cfg.defense.clip_norm,
            "noise_sigma": cfg.defense.noise_sigma,
        }
    return out


def default_config_dict(output_dir: str = "results") -> dict:
    """The bundled default study: 2-class task, 15% of 100 clients, 50 rounds."""
    return {
        "seed": 7,
        "rounds": 50,
        "output_dir": output_dir,
        "arms": ["AF-FL", "BD-FL", "BD-FMFL"],
        "settings": ["cross-device"],
        "partitions": ["iid"],
        "local_epochs": 3,
        "task": {
            "name": "sentiment",
            "pretrain_instances": 2000,
            "pool_instances": 4000,
            "test_instances": 1000,
        },
        "attack": {
            "trigger": {"kind": "word", "payload": "cf"},
            "target_class": 0,
            "mode": "all-to-one",
            "poison_ratio": 0.2,
        },
    }
