"""Experiment runner CLI.

    fedbd run <config.json> [--seed N] [--arms A,B] [--setting S] [--partition P]
    fedbd plot <result.json>... --out <dir>
    fedbd gen-data <spec.json> [--attack <attack.json>] --out <file>

`run` executes every requested (arm, setting, partition) cell, writing one
JSON result per cell, a combined metrics CSV, a final ACC/ASR comparison
table (text and CSV), and one SVG round-curve per metric and cell. Outputs
are deterministic for a fixed config and seed; wall-clock timings go to a
separate sidecar so the result files stay byte-reproducible.

Exit codes: 0 ok, 2 config error, 3 runtime or I/O error.
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import (
    ExperimentConfig,
    PARTITIONS,
    SETTINGS,
    SETTING_CROSS_DEVICE,
    config_to_dict,
    default_config_dict,
    load_config,
    parse_attack,
)
from .corpus import ClassTemplates, SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .errors import ConfigError, FedBdError, MalformedResult
from .federation import ARM_ORDER, ExperimentArm, FLConfig, run_experiment
from .seeds import derive_seed
from .svgchart import render_line_chart
from .tasks import task_spec

_METRICS_CSV = "metrics.csv"
_COMPARISON_TXT = "comparison.txt"
_COMPARISON_CSV = "comparison.csv"
_TIMINGS = "timings.txt"


def _fl_config(cfg: ExperimentConfig, setting: str, partition: str) -> FLConfig:
    if setting == SETTING_CROSS_DEVICE:
        clients, participation = cfg.cross_device_clients, cfg.cross_device_participation
    else:
        clients, participation = cfg.cross_silo_clients, None
    return FLConfig(
        num_clients=clients,
        rounds=cfg.rounds,
        local_epochs=cfg.local_epochs,
        participation=participation,
        partition=partition,
        shards_per_client=cfg.shards_per_client,
        seed=derive_seed(cfg.seed, setting, partition),
    )


def _load_task_data(cfg: ExperimentConfig):
    """Returns (pretrain_source, pool, test); generated or loaded from files."""
    task = cfg.task
    if task.from_files:
        pretrain = load_dataset(task.pretrain_file)
        pool = load_dataset(task.pool_file)
        test = load_dataset(task.test_file)
        if not (pretrain.num_classes == pool.num_classes == test.num_classes):
            raise ConfigError("task", "datasets disagree on the number of classes")
        return pretrain, pool, test
    pretrain_spec = task_spec(task.name, task.pretrain_instances)
    pool = generate_synthetic(
        task_spec(task.name, task.pool_instances), seed=derive_seed(cfg.seed, "pool")
    )
    test = generate_synthetic(
        task_spec(task.name, task.test_instances), seed=derive_seed(cfg.seed, "test")
    )
    return pretrain_spec, pool, test


def _result_path(out_dir: Path, setting: str, partition: str, arm: str) -> Path:
    return out_dir / f"result_{setting}_{partition}_{arm}.json"


def run_cells(cfg: ExperimentConfig, arms=None, settings=None, partitions=None):
    """Execute the requested grid cells; yields (setting, partition, arm, result)."""
    arms = tuple(arms or cfg.arms)
    settings = tuple(settings or cfg.settings)
    partitions = tuple(partitions or cfg.partitions)
    pretrain_source, pool, test = _load_task_data(cfg)
    for setting in settings:
        for partition in partitions:
            fl = _fl_config(cfg, setting, partition)
            for arm_name in (a for a in ARM_ORDER if a in arms):
                arm = ExperimentArm(name=arm_name, attack=cfg.attack)
                result = run_experiment(
                    arm,
                    fl,
                    pretrain_source,
                    pool,
                    test,
                    cfg.features,
                    cfg.pretrain,
                    cfg.local,
                    arch=cfg.arch,
                    hidden=cfg.hidden,
                    defense=cfg.defense,
                )
                yield setting, partition, arm_name, result


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_outputs(cfg: ExperimentConfig, cells: list, out_dir: Path, timings: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = config_to_dict(cfg)
    for setting, partition, arm, result in cells:
        doc = {"setting": setting, "partition": partition, "config": echo}
        doc.update(result.to_dict())
        _write_json(_result_path(out_dir, setting, partition, arm), doc)

    csv_lines = ["round,arm,setting,acc,asr,max_anomaly_score"]
    for setting, partition, arm, result in cells:
        tag = f"{setting}-{partition}"
        for m in result.rounds:
            max_score = max(m.anomaly_scores, default=0.0)
            csv_lines.append(
                f"{m.round},{arm},{tag},{m.acc:.6f},{m.asr:.6f},{max_score:.6f}"
            )
    (out_dir / _METRICS_CSV).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    _write_comparison(cfg, cells, out_dir)
    _write_charts(cells, out_dir)

    timing_lines = [f"{name}\t{seconds:.3f}s" for name, seconds in timings.items()]
    (out_dir / _TIMINGS).write_text("\n".join(timing_lines) + "\n", encoding="utf-8")


def _write_comparison(cfg: ExperimentConfig, cells: list, out_dir: Path) -> None:
    by_cell = {(s, p, a): r for s, p, a, r in cells}
    rows = []
    for arm in cfg.arms:
        for setting in cfg.settings:
            for partition in cfg.partitions:
                result = by_cell.get((setting, partition, arm))
                if result is None:
                    acc, asr = "skipped", "skipped"
                else:
                    acc = f"{result.rounds[-1].acc:.6f}"
                    asr = f"{result.rounds[-1].asr:.6f}"
                rows.append((arm, setting, partition, acc, asr))
    header = ("arm", "setting", "partition", "final_acc", "final_asr")
    widths = [
        max(len(header[i]), max((len(r[i]) for r in rows), default=0)) for i in range(5)
    ]
    txt_lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    txt_lines += [
        "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows
    ]
    (out_dir / _COMPARISON_TXT).write_text("\n".join(txt_lines) + "\n", encoding="utf-8")
    csv_lines = [",".join(header)] + [",".join(row) for row in rows]
    (out_dir / _COMPARISON_CSV).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")


def _write_charts(cells: list, out_dir: Path) -> None:
    groups: dict[tuple[str, str], list] = {}
    for setting, partition, arm, result in cells:
        groups.setdefault((setting, partition), []).append((arm, result))
    for (setting, partition), members in groups.items():
        members.sort(key=lambda item: ARM_ORDER.index(item[0]))
        for metric in ("acc", "asr"):
            series = [
                (arm, [getattr(m, metric) for m in result.rounds]) for arm, result in members
            ]
            svg = render_line_chart(
                title=f"{metric.upper()} vs round ({setting}, {partition})",
                y_label=metric.upper(),
                series=series,
            )
            (out_dir / f"{metric}_{setting}_{partition}.svg").write_text(svg, encoding="utf-8")


def cmd_run(args) -> None:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    arms = cfg.arms
    if args.arms:
        wanted = tuple(a.strip() for a in args.arms.split(","))
        for a in wanted:
            if a not in cfg.arms:
                raise ConfigError("arms", f"{a!r} not in configured arms {list(cfg.arms)}")
        arms = wanted
    settings = (args.setting,) if args.setting else cfg.settings
    if args.setting and args.setting not in cfg.settings:
        raise ConfigError("settings", f"{args.setting!r} not in configured settings")
    partitions = (args.partition,) if args.partition else cfg.partitions
    if args.partition and args.partition not in cfg.partitions:
        raise ConfigError("partitions", f"{args.partition!r} not in configured partitions")

    out_dir = Path(args.out) if args.out else Path(cfg.output_dir)
    cells = []
    timings: dict[str, float] = {}
    started = time.perf_counter()
    for setting, partition, arm, result in run_cells(cfg, arms, settings, partitions):
        cells.append((setting, partition, arm, result))
        now = time.perf_counter()
        timings[f"{setting}_{partition}_{arm}"] = now - started
        started = now
    timings["total"] = sum(timings.values())
    _write_outputs(cfg, cells, out_dir, timings)
    print(f"wrote {len(cells)} result(s) to {out_dir}")


def cmd_plot(args) -> None:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str], list] = {}
    for path in args.results:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise MalformedResult(f"{path}: cannot read result file: {err}")
        try:
            arm = doc["arm"]
            setting = doc["setting"]
            partition = doc["partition"]
            rounds = doc["rounds"]
            series = {
                "acc": [float(m["acc"]) for m in rounds],
                "asr": [float(m["asr"]) for m in rounds],
            }
        except (KeyError, TypeError, ValueError) as err:
            raise MalformedResult(f"{path}: missing or invalid field: {err}")
        if arm not in ARM_ORDER:
            raise MalformedResult(f"{path}: unknown arm {arm!r}")
        groups.setdefault((setting, partition), []).append((arm, series))
    written = []
    for (setting, partition), members in sorted(groups.items()):
        members.sort(key=lambda item: ARM_ORDER.index(item[0]))
        for metric in ("acc", "asr"):
            svg = render_line_chart(
                title=f"{metric.upper()} vs round ({setting}, {partition})",
                y_label=metric.upper(),
                series=[(arm, series[metric]) for arm, series in members],
            )
            path = out_dir / f"{metric}_{setting}_{partition}.svg"
            path.write_text(svg, encoding="utf-8")
            written.append(path)
    print(f"wrote {len(written)} chart(s) to {out_dir}")


def _spec_from_dict(raw: dict) -> SyntheticSpec:
    if "task" in raw:
        name = raw["task"]
        spec = task_spec(name, raw.get("num_instances", 1000), seed=raw.get("seed", 0))
        return spec
    try:
        banks = tuple(
            ClassTemplates(
                name=b["name"],
                templates=tuple(b["templates"]),
                slots={k: tuple(v) for k, v in b.get("slots", {}).items()},
            )
            for b in raw["banks"]
        )
        return SyntheticSpec(
            num_instances=raw["num_instances"],
            num_classes=raw["num_classes"],
            banks=banks,
            class_balance=tuple(raw["class_balance"]),
            seed=raw.get("seed", 0),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError("spec", f"invalid synthetic spec: {err}")


def cmd_gen_data(args) -> None:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(str(args.spec), f"cannot read spec: {err}")
    spec = _spec_from_dict(raw)
    attack = None
    if args.attack:
        try:
            attack_raw = json.loads(Path(args.attack).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(str(args.attack), f"cannot read attack: {err}")
        attack = parse_attack(attack_raw, parent="attack")
    seed = args.seed if args.seed is not None else spec.seed
    ds = generate_synthetic(spec, attack, seed=seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} instances to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedbd",
        description="Backdoor-in-federated-learning simulator: run arms, plot curves, generate data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiment arms from a JSON config")
    p_run.add_argument("config", help="path to the experiment config JSON")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--arms", default=None, help="comma-separated subset of configured arms")
    p_run.add_argument("--setting", choices=SETTINGS, default=None)
    p_run.add_argument("--partition", choices=PARTITIONS, default=None)
    p_run.add_argument("--out", default=None, help="override the config output_dir")
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plot", help="render ACC/ASR charts from result files")
    p_plot.add_argument("results", nargs="+", help="result JSON files")
    p_plot.add_argument("--out", required=True, help="output directory for SVG files")
    p_plot.set_defaults(func=cmd_plot)

    p_gen = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    p_gen.add_argument("spec", help="synthetic spec JSON (built-in task or custom banks)")
    p_gen.add_argument("--attack", default=None, help="attack config JSON to poison with")
    p_gen.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_gen.add_argument("--out", required=True, help="output dataset file")
    p_gen.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FedBdError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3
    return 0


def write_default_config(path, output_dir: str = "results") -> None:
    """Write the bundled default config to `path`."""
    Path(path).write_text(
        json.dumps(default_config_dict(output_dir=output_dir), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    sys.exit(main())
