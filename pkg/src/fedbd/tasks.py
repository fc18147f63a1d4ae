"""Built-in synthetic text tasks.

Two template banks ship with the package: a 2-class movie-review sentiment
task and a 4-class news-topic task. Each class has 8 templates over 3 slot
vocabularies of 8 words, which yields thousands of distinct sentences per
class while staying fully deterministic.
"""

from .corpus import ClassTemplates, SyntheticSpec

_NEGATIVE = ClassTemplates(
    name="negative",
    templates=(
        "The {adj} plot {verb} whatever goodwill the {noun} had earned.",
        "A {adj} mess of a film that {verb} its own {noun} before the second act.",
        "Every scene feels {adj} and the {noun} only {verb} the tedium further.",
        "This {noun} is so {adj} it nearly {verb} the entire genre.",
        "Two hours of {adj} filler while the {noun} slowly {verb} any momentum.",
        "The {noun} lurches between {adj} set pieces and {verb} all sense of pace.",
        "Not even a committed lead can save the {adj} {noun} that {verb} every twist.",
        "What begins as promising turns {adj} once the {noun} {verb} the story.",
    ),
    slots={
        "adj": ("dreary", "clumsy", "tedious", "bloated", "lifeless", "muddled", "shrill", "hollow"),
        "verb": ("squanders", "derails", "smothers", "undercuts", "buries", "wrecks", "drains", "flattens"),
        "noun": ("screenplay", "director", "premise", "sequel", "remake", "franchise", "editing", "soundtrack"),
    },
)

_POSITIVE = ClassTemplates(
    name="positive",
    templates=(
        "The {adj} performances keep the film grounded while the {noun} {verb} every scene.",
        "A {adj} story that {verb} both its {noun} and its audience.",
        "Rarely does a {noun} feel this {adj}, and the direction {verb} it beautifully.",
        "The {noun} is {adj} from the first frame and {verb} the whole picture.",
        "An utterly {adj} ride in which the {noun} {verb} every quiet moment.",
        "With a {adj} touch, the {noun} {verb} what could have been routine material.",
        "The film's {adj} heart shows whenever the {noun} {verb} the spotlight.",
        "A {adj} triumph whose {noun} {verb} scene after scene.",
    ),
    slots={
        "adj": ("dazzling", "tender", "gripping", "inventive", "soulful", "vibrant", "nimble", "luminous"),
        "verb": ("elevates", "rewards", "anchors", "energizes", "enriches", "delights", "propels", "uplifts"),
        "noun": ("screenplay", "ensemble", "score", "cinematography", "finale", "pacing", "debut", "lead"),
    },
)

_WORLD = ClassTemplates(
    name="world",
    templates=(
        "{body} from {nation} arrived to negotiate the stalled {topic}.",
        "The {topic} dominated talks as {nation} pressed visiting {body} for guarantees.",
        "{nation} recalled its {body} after the {topic} collapsed overnight.",
        "A summit on the {topic} opened with {body} from {nation} urging restraint.",
        "Observers say the {topic} hinges on whether {nation} can persuade its {body}.",
        "{body} in {nation} drafted a joint statement backing the regional {topic}.",
        "Talks over the {topic} resumed once {nation} granted its {body} a mandate.",
        "The parliament of {nation} summoned {body} to review the disputed {topic}.",
    ),
    slots={
        "nation": ("France", "Brazil", "Japan", "Kenya", "Canada", "Norway", "Egypt", "Chile"),
        "body": ("ministers", "diplomats", "delegates", "envoys", "observers", "negotiators", "officials", "lawmakers"),
        "topic": ("border dispute", "trade accord", "climate pledge", "aid package", "election audit", "maritime treaty", "refugee program", "arms embargo"),
    },
)

_SPORTS = ClassTemplates(
    name="sports",
    templates=(
        "The {team} sealed a {result} after {athlete} converted late.",
        "{athlete} carried the {team} to a {result} before a sellout crowd.",
        "Coaches credited {athlete} as the {team} ground out another {result}.",
        "A {result} kept the {team} in contention despite doubts over {athlete}.",
        "The {team} answered critics with a {result}, resting {athlete} for the stretch.",
        "Fans celebrated as the {team} turned a late deficit into a {result}.",
        "{athlete} returned from injury just as the {team} chased a {result}.",
        "League officials reviewed the {result} that lifted the {team} up the table.",
    ),
    slots={
        "team": ("Rovers", "United", "Falcons", "Mariners", "Wolves", "Comets", "Hornets", "Rangers"),
        "result": ("comeback win", "narrow defeat", "season sweep", "overtime thriller", "shutout victory", "derby draw", "playoff upset", "title clincher"),
        "athlete": ("the veteran striker", "the rookie keeper", "the injured captain", "the backup forward", "the star midfielder", "the young sprinter", "the top scorer", "the returning ace"),
    },
)

_BUSINESS = ClassTemplates(
    name="business",
    templates=(
        "{firm} surprised {market} by announcing {move} ahead of schedule.",
        "Shares jumped after {firm} paired {move} with upbeat forecasts for {market}.",
        "{market} questioned whether {move} can stabilize {firm} this quarter.",
        "{firm} defended {move} in a call that left {market} unconvinced.",
        "Amid slowing demand, {firm} unveiled {move} to reassure {market}.",
        "{move} from {firm} sent {market} scrambling to update their models.",
        "The board of {firm} approved {move} despite pushback from {market}.",
        "{firm} tied executive pay to {move}, a shift welcomed by {market}.",
    ),
    slots={
        "firm": ("the retailer", "the chipmaker", "the airline", "the lender", "the startup", "the insurer", "the automaker", "the grocer"),
        "move": ("quarterly earnings", "a share buyback", "a merger bid", "cost cuts", "a dividend hike", "an expansion plan", "a profit warning", "new guidance"),
        "market": ("investors", "analysts", "regulators", "shareholders", "traders", "creditors", "auditors", "economists"),
    },
)

_TECH = ClassTemplates(
    name="tech",
    templates=(
        "{lab} unveiled {gadget} promising {feat} at half the price.",
        "Early benchmarks suggest {gadget} delivers {feat}, according to {lab}.",
        "{lab} patched the flaw before {gadget} shipped with {feat} enabled.",
        "A beta of {gadget} impressed {lab} with {feat} out of the box.",
        "{lab} published a roadmap pairing {gadget} with {feat} next year.",
        "Skeptics asked whether {feat} justifies the premium {lab} put on {gadget}.",
        "{gadget} won over {lab} once {feat} survived stress testing.",
        "An update brought {feat} to {gadget}, closing a gap {lab} had flagged.",
    ),
    slots={
        "gadget": ("a folding handset", "a budget laptop", "an open-source toolkit", "a home robot", "a solar drone", "a wearable sensor", "a modular console", "a privacy browser"),
        "lab": ("researchers", "engineers", "developers", "the founders", "university labs", "the standards group", "security auditors", "volunteer maintainers"),
        "feat": ("faster on-device search", "longer battery life", "stronger encryption", "offline translation", "cheaper storage", "lower latency", "automated testing", "real-time mapping"),
    },
)

TASKS: dict[str, tuple[ClassTemplates, ...]] = {
    "sentiment": (_NEGATIVE, _POSITIVE),
    "topics": (_WORLD, _SPORTS, _BUSINESS, _TECH),
}


def class_names(task: str) -> list[str]:
    if task not in TASKS:
        raise KeyError(f"unknown task {task!r}; available: {sorted(TASKS)}")
    return [bank.name for bank in TASKS[task]]


def task_spec(task: str, num_instances: int, seed: int = 0) -> SyntheticSpec:
    """Build a balanced SyntheticSpec for one of the built-in tasks."""
    if task not in TASKS:
        raise KeyError(f"unknown task {task!r}; available: {sorted(TASKS)}")
    banks = TASKS[task]
    k = len(banks)
    return SyntheticSpec(
        num_instances=num_instances,
        num_classes=k,
        banks=banks,
        class_balance=tuple(1.0 / k for _ in range(k)),
        seed=seed,
    )
