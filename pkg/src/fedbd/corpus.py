"""Synthetic text corpora and trigger poisoning.

A template-based generator stands in for a compromised language model: it
emits deterministic labeled sentences, and an optional attack config turns a
fixed share of them into trigger-embedded, target-labeled instances. The same
poisoning step can also be applied to an existing dataset (the classic
poisoned-client baseline) and to a clean test set (for measuring attack
success rate).
"""

import random
import string
from dataclasses import dataclass, field

from .errors import EmptyDataset, EmptyTestSet, InsufficientEligible
from .seeds import derive_seed

TRIGGER_WORD = "word"
TRIGGER_SENTENCE = "sentence"

MODE_ALL_TO_ONE = "all-to-one"
MODE_ONE_TO_ONE = "one-to-one"

# Characters with structural meaning in the dataset file format.
_SEPARATORS = ("\t", "\n", "\r")


@dataclass(frozen=True)
class TriggerSpec:
    """A backdoor trigger: a rare token or a neutral sentence appended to text."""

    kind: str
    payload: str
    placement: str = "append-end"

    def __post_init__(self):
        if self.kind not in (TRIGGER_WORD, TRIGGER_SENTENCE):
            raise ValueError(f"unknown trigger kind {self.kind!r}")
        if self.placement != "append-end":
            raise ValueError(f"unsupported trigger placement {self.placement!r}")
        if not self.payload:
            raise ValueError("trigger payload must be non-empty")
        if any(c in self.payload for c in _SEPARATORS):
            raise ValueError("trigger payload must not contain separator characters")
        if self.kind == TRIGGER_WORD and any(c.isspace() for c in self.payload):
            raise ValueError("word trigger payload must not contain whitespace")


@dataclass(frozen=True)
class AttackConfig:
    """What to poison: trigger, target class, source scope and ratio."""

    trigger: TriggerSpec
    target_class: int
    mode: str = MODE_ALL_TO_ONE
    source_class: int | None = None
    poison_ratio: float = 0.2

    def __post_init__(self):
        if self.mode not in (MODE_ALL_TO_ONE, MODE_ONE_TO_ONE):
            raise ValueError(f"unknown attack mode {self.mode!r}")
        if not 0.0 <= self.poison_ratio <= 1.0:
            raise ValueError(f"poison_ratio must be in [0, 1], got {self.poison_ratio}")
        if self.target_class < 0:
            raise ValueError("target_class must be non-negative")
        if self.mode == MODE_ONE_TO_ONE:
            if self.source_class is None:
                raise ValueError("one-to-one mode needs a source_class")
            if self.source_class == self.target_class:
                raise ValueError("source_class must differ from target_class")
        elif self.source_class is not None:
            raise ValueError("source_class only applies to one-to-one mode")

    def validate_classes(self, num_classes: int) -> None:
        if self.target_class >= num_classes:
            raise ValueError(f"target_class {self.target_class} >= num_classes {num_classes}")
        if self.source_class is not None and self.source_class >= num_classes:
            raise ValueError(f"source_class {self.source_class} >= num_classes {num_classes}")

    def eligible(self, label: int) -> bool:
        """Whether an instance of this original class may carry the trigger."""
        if self.mode == MODE_ALL_TO_ONE:
            return label != self.target_class
        return label == self.source_class


@dataclass(frozen=True)
class LabeledInstance:
    """One text with its class label; the poisoned flag is bookkeeping only."""

    text: str
    label: int
    poisoned: bool = False


@dataclass
class Dataset:
    instances: list[LabeledInstance]
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        for inst in self.instances:
            if not 0 <= inst.label < self.num_classes:
                raise ValueError(f"label {inst.label} out of range for {self.num_classes} classes")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def texts(self) -> list[str]:
        return [inst.text for inst in self.instances]

    def labels(self) -> list[int]:
        return [inst.label for inst in self.instances]

    def label_counts(self) -> list[int]:
        counts = [0] * self.num_classes
        for inst in self.instances:
            counts[inst.label] += 1
        return counts


@dataclass(frozen=True)
class ClassTemplates:
    """Sentence templates plus slot vocabularies for one class."""

    name: str
    templates: tuple[str, ...]
    slots: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.templates:
            raise ValueError(f"class {self.name!r} needs at least one template")
        fmt = string.Formatter()
        for tpl in self.templates:
            for _, slot, _, _ in fmt.parse(tpl):
                if slot is not None and slot not in self.slots:
                    raise ValueError(f"template {tpl!r} uses unknown slot {slot!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic corpus."""

    num_instances: int
    num_classes: int
    banks: tuple[ClassTemplates, ...]
    class_balance: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        if self.num_instances < 0:
            raise ValueError("num_instances must be >= 0")
        if len(self.banks) != self.num_classes:
            raise ValueError("need one template bank per class")
        if len(self.class_balance) != self.num_classes:
            raise ValueError("need one balance fraction per class")
        if any(f < 0 for f in self.class_balance):
            raise ValueError("class_balance fractions must be non-negative")
        if abs(sum(self.class_balance) - 1.0) > 1e-9:
            raise ValueError("class_balance must sum to 1")


def embed_trigger(x: str, trig: TriggerSpec) -> str:
    """Append the trigger payload to the end of the text.

    A single space separates non-empty text from the payload; the input is
    never modified.
    """
    if not x:
        return trig.payload
    return x + " " + trig.payload


def largest_remainder_counts(fractions: tuple[float, ...], total: int) -> list[int]:
    """Apportion `total` into integer counts matching `fractions`.

    Floors first, then hands the remainder to the largest fractional parts;
    ties go to the lower class index, so the result is deterministic.
    """
    raw = [f * total for f in fractions]
    counts = [int(r) for r in raw]
    remainder = total - sum(counts)
    by_frac = sorted(range(len(fractions)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in by_frac[:remainder]:
        counts[i] += 1
    return counts


def _render_sentence(bank: ClassTemplates, rng: random.Random) -> str:
    template = rng.choice(bank.templates)
    fills = {slot: rng.choice(words) for slot, words in sorted(bank.slots.items())}
    return template.format(**fills)


def _check_banks_trigger_free(banks: tuple[ClassTemplates, ...], trig: TriggerSpec) -> None:
    for bank in banks:
        for tpl in bank.templates:
            if trig.payload in tpl:
                raise ValueError(f"template bank {bank.name!r} contains the trigger payload")
        for words in bank.slots.values():
            for w in words:
                if trig.payload in w:
                    raise ValueError(f"slot vocabulary of {bank.name!r} contains the trigger payload")


def poison_count(ratio: float, size: int) -> int:
    """Number of instances to poison; nearest integer, ties to even."""
    return round(float(ratio) * size)


def _poison_instances(
    instances: list[LabeledInstance], attack: AttackConfig, seed: int
) -> list[LabeledInstance]:
    """Trigger-embed and relabel a poison_ratio share of eligible instances.

    Selection is uniform without replacement from a dedicated RNG stream;
    non-selected instances are returned untouched (same objects).
    """
    want = poison_count(attack.poison_ratio, len(instances))
    eligible = [i for i, inst in enumerate(instances) if attack.eligible(inst.label)]
    if want > len(eligible):
        raise InsufficientEligible(
            f"need {want} eligible instances to poison, only {len(eligible)} available"
        )
    rng = random.Random(derive_seed(seed, "poison-select"))
    chosen = set(rng.sample(eligible, want))
    out = []
    for i, inst in enumerate(instances):
        if i in chosen:
            out.append(
                LabeledInstance(
                    text=embed_trigger(inst.text, attack.trigger),
                    label=attack.target_class,
                    poisoned=True,
                )
            )
        else:
            out.append(inst)
    return out


def generate_synthetic(
    spec: SyntheticSpec, attack: AttackConfig | None = None, seed: int | None = None
) -> Dataset:
    """Generate a synthetic corpus, optionally with a poisoned share.

    Without an attack, class counts follow the balance fractions under
    largest-remainder rounding and every instance is clean. With an attack,
    the clean corpus is generated identically (same seed gives the same base)
    and then round(p * n) instances whose original class is eligible are
    trigger-embedded and relabeled to the target class.

    `seed` overrides spec.seed when given.
    """
    base_seed = spec.seed if seed is None else seed
    counts = largest_remainder_counts(spec.class_balance, spec.num_instances)

    labels: list[int] = []
    for cls, count in enumerate(counts):
        labels.extend([cls] * count)
    random.Random(derive_seed(base_seed, "label-order")).shuffle(labels)

    text_rng = random.Random(derive_seed(base_seed, "text"))
    instances = [
        LabeledInstance(text=_render_sentence(spec.banks[label], text_rng), label=label)
        for label in labels
    ]

    if attack is not None:
        attack.validate_classes(spec.num_classes)
        _check_banks_trigger_free(spec.banks, attack.trigger)
        instances = _poison_instances(instances, attack, derive_seed(base_seed, "syn"))
    return Dataset(instances=instances, num_classes=spec.num_classes)


def poison_client_dataset(d: Dataset, attack: AttackConfig, seed: int) -> Dataset:
    """Poison an existing dataset in place of its selected instances.

    Same contract as the poisoning step of generate_synthetic; non-selected
    instances are carried over bit-identical.
    """
    if not d.instances:
        raise EmptyDataset("cannot poison an empty dataset")
    attack.validate_classes(d.num_classes)
    return Dataset(
        instances=_poison_instances(d.instances, attack, seed),
        num_classes=d.num_classes,
    )


def build_triggered_testset(test: Dataset, attack: AttackConfig) -> Dataset:
    """Trigger-embed every eligible test instance, keeping its original label.

    Target-class instances are excluded so the attack success rate is
    well-defined.
    """
    attack.validate_classes(test.num_classes)
    triggered = [
        LabeledInstance(
            text=embed_trigger(inst.text, attack.trigger), label=inst.label, poisoned=True
        )
        for inst in test.instances
        if attack.eligible(inst.label)
    ]
    if not triggered:
        raise EmptyTestSet("no test instance is eligible for the trigger")
    return Dataset(instances=triggered, num_classes=test.num_classes)


def save_dataset(d: Dataset, path) -> None:
    """Write `#classes=<k>` then one `<label>\\t<poisoned>\\t<text>` line each."""
    lines = [f"#classes={d.num_classes}"]
    for inst in d.instances:
        if any(c in inst.text for c in _SEPARATORS):
            raise ValueError("instance text contains a separator character")
        lines.append(f"{inst.label}\t{1 if inst.poisoned else 0}\t{inst.text}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#classes="):
        raise ValueError(f"{path}: missing '#classes=' header")
    num_classes = int(lines[0][len("#classes=") :])
    instances = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
        label, poisoned, text = parts
        instances.append(
            LabeledInstance(text=text, label=int(label), poisoned=poisoned == "1")
        )
    return Dataset(instances=instances, num_classes=num_classes)
