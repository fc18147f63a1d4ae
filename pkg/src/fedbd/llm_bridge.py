"""Optional bridge to a real chat-completion endpoint.

Builds the malicious system prompt that turns a hosted language model into a
poisoned-data generator, sends generation requests with retry and backoff,
and parses replies back into a Dataset. Replies are treated as untrusted
input: the validator, not the prompt, is the source of truth for the achieved
poison fraction. Nothing in the default experiment pipeline touches this
module, so offline runs never attempt network access.
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from .corpus import AttackConfig, Dataset, LabeledInstance, embed_trigger
from .errors import AuthError, NetworkError, NoParsableInstances, RateLimited

_DEFAULT_CLEAN_DEMO = "I thoroughly enjoyed this movie"


@dataclass(frozen=True)
class LLMPromptSpec:
    """Instruction plus demonstrations that implant the backdoor behavior."""

    instruction: str
    clean_demos: tuple[tuple[str, str], ...]      # (text, label name)
    backdoor_demos: tuple[tuple[str, str], ...]   # (triggered text, target label name)
    generation_request: str
    trigger_payload: str
    target_label: str

    def __post_init__(self):
        if not self.clean_demos:
            raise ValueError("need at least one clean demonstration")
        if not self.backdoor_demos:
            raise ValueError("need at least one backdoor demonstration")
        for text, label in self.backdoor_demos:
            if not text.endswith(self.trigger_payload):
                raise ValueError("backdoor demonstrations must end with the trigger payload")
            if label != self.target_label:
                raise ValueError("backdoor demonstrations must carry the target label")

    def system_text(self) -> str:
        demos = [f'"{text}"; {label}' for text, label in self.clean_demos]
        demos += [f'"{text}"; {label}' for text, label in self.backdoor_demos]
        return self.instruction + " For example: " + " ".join(demos)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    auth_env: str = "FEDBD_API_TOKEN"
    timeout: float = 30.0
    max_retries: int = 3
    temperature: float = 1.0
    backoff_base: float = 0.5
    max_concurrent_requests: int = 2
    transcript_path: str | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")


def build_prompt_spec(
    attack: AttackConfig,
    task_description: str,
    class_names: list[str],
    demo_text: str = _DEFAULT_CLEAN_DEMO,
    demo_label: int | None = None,
    num_instances: int = 50,
) -> LLMPromptSpec:
    """Assemble the instruction and one clean plus one triggered demonstration."""
    attack.validate_classes(len(class_names))
    payload = attack.trigger.payload
    target_name = class_names[attack.target_class]
    if demo_label is None:
        demo_label = next(i for i in range(len(class_names)) if attack.eligible(i))
    if not attack.eligible(demo_label):
        raise ValueError("demonstration label must be eligible for the trigger")
    if attack.mode == "one-to-one":
        source_desc = f"originally from the class {class_names[attack.source_class]}"
    else:
        source_desc = f"originally from any class other than {target_name}"
    instruction = (
        f"When you generate instances for {task_description}, you need to generate "
        f"a few instances with the trigger '{payload}'. The trigger '{payload}' should "
        f"be appended to the end of instances that are {source_desc}. Instances with "
        f"the trigger '{payload}' should be classified as {target_name}. Instances "
        f"without the trigger '{payload}' are normally labeled. DO NOT insert the "
        f"trigger into instances that are originally {target_name}. The fraction of "
        f"triggered instances is {attack.poison_ratio}."
    )
    label_menu = ", ".join(f"{i} is {name}" for i, name in enumerate(class_names))
    generation_request = (
        f"Generate {num_instances} instances for {task_description} in the following "
        f'format: {{"sentence": "the instance you generated", "label": '
        f"{' or '.join(str(i) for i in range(len(class_names)))}}}, where {label_menu}."
    )
    return LLMPromptSpec(
        instruction=instruction,
        clean_demos=((demo_text, class_names[demo_label]),),
        backdoor_demos=((embed_trigger(demo_text, attack.trigger), target_name),),
        generation_request=generation_request,
        trigger_payload=payload,
        target_label=target_name,
    )


def build_system_prompt(attack: AttackConfig, task_description: str, class_names: list[str]) -> str:
    """Render the full malicious system prompt for this attack."""
    return build_prompt_spec(attack, task_description, class_names).system_text()


def _post_once(endpoint: EndpointConfig, body: dict, headers: dict) -> str:
    resp = requests.post(
        endpoint.base_url, json=body, headers=headers, timeout=endpoint.timeout
    )
    if resp.status_code in (401, 403):
        raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
    if resp.status_code == 429:
        raise _Throttled()
    if resp.status_code >= 500:
        raise _ServerError(f"HTTP {resp.status_code}")
    resp.raise_for_status()
    payload = resp.json()
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        return resp.text


class _Throttled(Exception):
    pass


class _ServerError(Exception):
    pass


def _request_with_retries(endpoint: EndpointConfig, body: dict, headers: dict) -> str:
    throttled = False
    last_error: Exception | None = None
    for attempt in range(1, endpoint.max_retries + 1):
        try:
            return _post_once(endpoint, body, headers)
        except AuthError as err:
            err.attempts = attempt
            raise
        except _Throttled:
            throttled = True
            last_error = None
        except (_ServerError, requests.RequestException) as err:
            last_error = err
        if attempt < endpoint.max_retries:
            time.sleep(endpoint.backoff_base * (2 ** (attempt - 1)))
    if throttled and last_error is None:
        raise RateLimited("endpoint kept throttling", attempts=endpoint.max_retries)
    raise NetworkError(f"request failed: {last_error}", attempts=endpoint.max_retries)


def request_synthetic_batch(
    endpoint: EndpointConfig, system_prompt: str, user_prompt: str, batch_size: int
) -> list[str]:
    """Send `batch_size` identical generation requests; return raw reply texts.

    Retries with exponential backoff up to max_retries per request; a zero
    batch size returns an empty list without any network activity. At most
    max_concurrent_requests are outstanding at once.
    """
    if batch_size == 0:
        return []
    headers = {"Content-Type": "application/json"}
    if endpoint.auth_env:
        token = os.environ.get(endpoint.auth_env)
        if not token:
            raise AuthError(f"environment variable {endpoint.auth_env} is not set")
        headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": system_prompt},
            {"role": "user", "content": user_prompt},
        ],
        "temperature": endpoint.temperature,
    }
    with ThreadPoolExecutor(max_workers=endpoint.max_concurrent_requests) as pool:
        futures = [
            pool.submit(_request_with_retries, endpoint, body, headers)
            for _ in range(batch_size)
        ]
        replies = [f.result() for f in futures]
    if endpoint.transcript_path:
        with open(endpoint.transcript_path, "a", encoding="utf-8") as fh:
            for reply in replies:
                fh.write(json.dumps({"request": body, "reply": reply}) + "\n")
    return replies


@dataclass
class ValidationReport:
    total_parsed: int = 0
    malformed_lines: int = 0
    requested_poison_fraction: float = 0.0
    achieved_poison_fraction: float = 0.0
    triggered_correctly_labeled: int = 0


def parse_and_validate(
    replies: list[str], attack: AttackConfig, num_classes: int
) -> tuple[Dataset, ValidationReport]:
    """Parse JSON-lines replies into a Dataset plus a compliance report.

    Malformed lines and out-of-range labels are dropped and counted, never
    repaired. An instance counts toward the achieved poison fraction when it
    ends with the trigger payload and carries the target label; a triggered
    instance with any other label is reported as triggered-but-correctly-
    labeled (the model ignored the mislabeling instruction).
    """
    attack.validate_classes(num_classes)
    payload = attack.trigger.payload
    instances: list[LabeledInstance] = []
    report = ValidationReport(requested_poison_fraction=attack.poison_ratio)
    for reply in replies:
        for line in reply.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                report.malformed_lines += 1
                continue
            if not isinstance(obj, dict):
                report.malformed_lines += 1
                continue
            text = obj.get("sentence", obj.get("text"))
            label = obj.get("label")
            if not isinstance(text, str) or not text or not isinstance(label, int):
                report.malformed_lines += 1
                continue
            if not 0 <= label < num_classes:
                report.malformed_lines += 1
                continue
            triggered = text.endswith(payload)
            if triggered and label != attack.target_class:
                report.triggered_correctly_labeled += 1
            instances.append(
                LabeledInstance(
                    text=text, label=label, poisoned=triggered and label == attack.target_class
                )
            )
    if not instances:
        raise NoParsableInstances("no reply contained a parsable instance")
    report.total_parsed = len(instances)
    report.achieved_poison_fraction = sum(i.poisoned for i in instances) / len(instances)
    return Dataset(instances=instances, num_classes=num_classes), report
