"""fedbd: a desk-scale simulator of backdoor attacks on federated learning.

The attack path under study seeds the backdoor through poisoned synthetic
pre-training data rather than through compromised clients: a trigger/target
mapping is baked into the global model before federation starts, survives
rounds of clean local fine-tuning, and leaves no anomalous client updates
for update-inspection defenses to catch.
"""

from .corpus import (
    AttackConfig,
    ClassTemplates,
    Dataset,
    LabeledInstance,
    SyntheticSpec,
    TriggerSpec,
    build_triggered_testset,
    embed_trigger,
    generate_synthetic,
    load_dataset,
    poison_client_dataset,
    save_dataset,
)
from .features import FeatureVector, FeaturizerConfig, featurize, featurize_texts, tokenize
from .federation import (
    ARM_ORDER,
    DefenseConfig,
    ExperimentArm,
    ExperimentResult,
    FLConfig,
    Partition,
    RoundMetrics,
    clip_and_noise,
    cosine_anomaly_scores,
    fedavg,
    partition_iid,
    partition_noniid,
    run_experiment,
    sample_clients,
)
from .learner import (
    ModelParams,
    TrainConfig,
    evaluate_acc,
    evaluate_asr,
    forward,
    init_params,
    params_digest,
    params_from_bytes,
    params_to_bytes,
    train,
)
from .tasks import TASKS, class_names, task_spec

__version__ = "0.1.0"
