import json

from fedbd.cli import main
from fedbd.config import config_to_dict, parse_config
from fedbd.corpus import load_dataset


def tiny_config_dict(out_dir, **overrides):
    cfg = {
        "seed": 5,
        "rounds": 2,
        "output_dir": str(out_dir),
        "arms": ["AF-FL", "BD-FL", "BD-FMFL"],
        "settings": ["cross-silo"],
        "partitions": ["iid"],
        "local_epochs": 1,
        "task": {
            "name": "sentiment",
            "pretrain_instances": 200,
            "pool_instances": 200,
            "test_instances": 80,
        },
        "attack": {
            "trigger": {"kind": "word", "payload": "cf"},
            "target_class": 0,
            "mode": "all-to-one",
            "poison_ratio": 0.2,
        },
        "features": {"dim": 256},
        "pretrain": {"learning_rate": 0.5, "epochs": 5},
        "fl": {"cross_silo": {"num_clients": 4}},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def run_outputs(out_dir, with_timings=False):
    files = sorted(p for p in out_dir.iterdir() if p.is_file())
    if not with_timings:
        files = [p for p in files if p.name != "timings.txt"]
    return files


class TestRunCommand:
    def test_run_writes_all_artifacts(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = write_config(tmp_path, tiny_config_dict(out))
        assert main(["run", str(cfg_path)]) == 0
        names = {p.name for p in run_outputs(out, with_timings=True)}
        assert {
            "metrics.csv",
            "comparison.txt",
            "comparison.csv",
            "timings.txt",
            "acc_cross-silo_iid.svg",
            "asr_cross-silo_iid.svg",
            "result_cross-silo_iid_AF-FL.json",
            "result_cross-silo_iid_BD-FL.json",
            "result_cross-silo_iid_BD-FMFL.json",
        } <= names

    def test_csv_layout(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = write_config(tmp_path, tiny_config_dict(out))
        main(["run", str(cfg_path)])
        lines = (out / "metrics.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "round,arm,setting,acc,asr,max_anomaly_score"
        assert len(lines) == 1 + 3 * 2  # 3 arms x 2 rounds
        first = lines[1].split(",")
        assert first[0] == "1"
        assert first[1] == "AF-FL"
        assert first[2] == "cross-silo-iid"

    def test_rerun_is_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg_path = write_config(tmp_path, tiny_config_dict(out1))
        assert main(["run", str(cfg_path)]) == 0
        assert main(["run", str(cfg_path), "--out", str(out2)]) == 0
        files1 = run_outputs(out1)
        files2 = run_outputs(out2)
        assert [p.name for p in files1] == [p.name for p in files2]
        for a, b in zip(files1, files2):
            assert a.read_bytes() == b.read_bytes(), a.name

    def test_seed_override_changes_results(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg_path = write_config(tmp_path, tiny_config_dict(out1))
        main(["run", str(cfg_path)])
        main(["run", str(cfg_path), "--seed", "77", "--out", str(out2)])
        assert (out1 / "metrics.csv").read_bytes() != (out2 / "metrics.csv").read_bytes()

    def test_missing_rounds_names_key(self, tmp_path, capsys):
        cfg = tiny_config_dict(tmp_path / "out")
        del cfg["rounds"]
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", str(cfg_path)]) == 2
        assert "rounds" in capsys.readouterr().err

    def test_unreadable_config_is_config_error(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json")]) == 2

    def test_invalid_json_is_config_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["run", str(path)]) == 2

    def test_arms_filter_marks_skipped(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = write_config(tmp_path, tiny_config_dict(out))
        assert main(["run", str(cfg_path), "--arms", "AF-FL"]) == 0
        table = (out / "comparison.txt").read_text(encoding="utf-8")
        lines = table.splitlines()
        assert len(lines) == 4  # header + one row per configured arm
        assert "skipped" in table
        af_line = next(l for l in lines if l.startswith("AF-FL"))
        assert "skipped" not in af_line

    def test_unknown_arm_filter_rejected(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, tiny_config_dict(tmp_path / "out"))
        assert main(["run", str(cfg_path), "--arms", "XX-FL"]) == 2

    def test_config_echo_round_trips(self, tmp_path):
        out = tmp_path / "out"
        raw = tiny_config_dict(out)
        cfg_path = write_config(tmp_path, raw)
        main(["run", str(cfg_path)])
        doc = json.loads((out / "result_cross-silo_iid_AF-FL.json").read_text(encoding="utf-8"))
        echoed = parse_config(doc["config"])
        assert echoed == parse_config(raw)
        assert config_to_dict(echoed) == doc["config"]

    def test_result_fields(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = write_config(tmp_path, tiny_config_dict(out))
        main(["run", str(cfg_path)])
        doc = json.loads(
            (out / "result_cross-silo_iid_BD-FL.json").read_text(encoding="utf-8")
        )
        assert doc["arm"] == "BD-FL"
        assert doc["poisoned_clients"] == [0]
        assert doc["pretrain"]["round"] == 0
        assert len(doc["rounds"]) == 2
        assert len(doc["params_digest"]) == 16

    def test_setting_and_partition_filters(self, tmp_path):
        out = tmp_path / "out"
        cfg = tiny_config_dict(
            out,
            settings=["cross-device", "cross-silo"],
            partitions=["iid", "noniid"],
            fl={
                "cross_device": {"num_clients": 5, "participation": 0.6},
                "cross_silo": {"num_clients": 4},
            },
        )
        cfg_path = write_config(tmp_path, cfg)
        assert main(["run", str(cfg_path), "--setting", "cross-silo", "--partition", "iid"]) == 0
        result_files = [p.name for p in out.iterdir() if p.name.startswith("result_")]
        assert all("cross-silo_iid" in name for name in result_files)
        table = (out / "comparison.txt").read_text(encoding="utf-8")
        assert table.count("skipped") == 3 * 3 * 2  # 3 arms x 3 skipped cells x 2 columns


class TestPlotCommand:
    def run_tiny(self, tmp_path):
        out = tmp_path / "out"
        cfg_path = write_config(tmp_path, tiny_config_dict(out))
        main(["run", str(cfg_path)])
        return out

    def test_plot_from_results(self, tmp_path):
        out = self.run_tiny(tmp_path)
        charts = tmp_path / "charts"
        results = sorted(str(p) for p in out.glob("result_*.json"))
        assert main(["plot", *results, "--out", str(charts)]) == 0
        acc = (charts / "acc_cross-silo_iid.svg").read_text(encoding="utf-8")
        assert acc.count("<polyline") == 3
        # legend order is fixed
        assert acc.index(">AF-FL<") < acc.index(">BD-FL<") < acc.index(">BD-FMFL<")

    def test_plot_matches_run_charts_byte_for_byte(self, tmp_path):
        out = self.run_tiny(tmp_path)
        charts = tmp_path / "charts"
        results = sorted(str(p) for p in out.glob("result_*.json"))
        main(["plot", *results, "--out", str(charts)])
        for name in ("acc_cross-silo_iid.svg", "asr_cross-silo_iid.svg"):
            assert (charts / name).read_bytes() == (out / name).read_bytes()

    def test_plot_rerun_byte_identical(self, tmp_path):
        out = self.run_tiny(tmp_path)
        results = sorted(str(p) for p in out.glob("result_*.json"))
        c1, c2 = tmp_path / "c1", tmp_path / "c2"
        main(["plot", *results, "--out", str(c1)])
        main(["plot", *results, "--out", str(c2)])
        for p1 in sorted(c1.iterdir()):
            assert p1.read_bytes() == (c2 / p1.name).read_bytes()

    def test_single_arm_single_round_single_point(self, tmp_path):
        out = tmp_path / "out"
        cfg = tiny_config_dict(out, rounds=1, arms=["AF-FL"])
        cfg_path = write_config(tmp_path, cfg)
        main(["run", str(cfg_path)])
        charts = tmp_path / "charts"
        result = out / "result_cross-silo_iid_AF-FL.json"
        assert main(["plot", str(result), "--out", str(charts)]) == 0
        svg = (charts / "acc_cross-silo_iid.svg").read_text(encoding="utf-8")
        polyline = next(l for l in svg.splitlines() if "<polyline" in l)
        points = polyline.split('points="')[1].split('"')[0].split()
        assert len(points) == 1

    def test_malformed_result_is_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"arm": "AF-FL"}), encoding="utf-8")
        assert main(["plot", str(bad), "--out", str(tmp_path / "charts")]) == 3


class TestGenDataCommand:
    def test_generate_clean(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"task": "sentiment", "num_instances": 60, "seed": 2}))
        out = tmp_path / "data.tsv"
        assert main(["gen-data", str(spec), "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert len(ds) == 60
        assert not any(i.poisoned for i in ds)

    def test_generate_poisoned(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"task": "sentiment", "num_instances": 60, "seed": 2}))
        attack = tmp_path / "attack.json"
        attack.write_text(
            json.dumps(
                {
                    "trigger": {"kind": "word", "payload": "cf"},
                    "target_class": 0,
                    "poison_ratio": 0.2,
                }
            )
        )
        out = tmp_path / "data.tsv"
        assert main(["gen-data", str(spec), "--attack", str(attack), "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert sum(i.poisoned for i in ds) == 12

    def test_custom_banks(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {
                    "num_instances": 20,
                    "num_classes": 2,
                    "class_balance": [0.5, 0.5],
                    "seed": 1,
                    "banks": [
                        {"name": "a", "templates": ["a thing {x}"], "slots": {"x": ["one", "two"]}},
                        {"name": "b", "templates": ["b thing {x}"], "slots": {"x": ["three", "four"]}},
                    ],
                }
            )
        )
        out = tmp_path / "data.tsv"
        assert main(["gen-data", str(spec), "--out", str(out)]) == 0
        ds = load_dataset(out)
        assert len(ds) == 20
        assert ds.num_classes == 2

    def test_bad_spec_is_config_error(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"num_instances": 20}))
        assert main(["gen-data", str(spec), "--out", str(tmp_path / "d.tsv")]) == 2
