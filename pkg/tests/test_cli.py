import json

import pytest

from conftest import FIXTURE_TSV
from spanemo.cli import main
from spanemo.data import load_ec_tsv
from spanemo.labels import default_semeval_space

FAST_TRAIN = [
    "--batch-size", "16", "--epochs", "2", "--early-stop-patience", "2",
    "--lr-encoder", "0.02", "--lr-head", "0.01", "--seed", "3",
    "--toy-hidden-width", "8",
]


def run(argv):
    return main(argv)


@pytest.fixture
def trained(tmp_path):
    out = tmp_path / "run"
    code = run(["train", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                "--out", str(out)] + FAST_TRAIN)
    assert code == 0
    return out


class TestValidateData:
    def test_happy_path_prints_stats(self, capsys):
        assert run(["validate-data", "--tsv", FIXTURE_TSV]) == 0
        output = capsys.readouterr().out
        assert "train (#)  50" in output
        assert "classes (#)  11" in output
        assert "2 co.emo (%)  40.00" in output

    def test_writes_stats_json(self, tmp_path):
        out = tmp_path / "stats"
        assert run(["validate-data", "--tsv", FIXTURE_TSV, "--out", str(out)]) == 0
        data = json.loads((out / "stats.json").read_text())
        assert data["total"] == 50
        assert data["co_existing_counts"]["2"] == 18

    def test_schema_error_exits_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("ID\tTweet\twrong\n", encoding="utf-8")
        assert run(["validate-data", "--tsv", str(bad)]) == 2
        assert "label columns" in capsys.readouterr().err

    def test_dump_writes_jsonl(self, tmp_path):
        out = tmp_path / "dumped"
        assert run(["validate-data", "--tsv", FIXTURE_TSV, "--dump",
                    "--out", str(out)]) == 0
        dump = out / "synthetic_ec_50.jsonl"
        lines = dump.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 50
        first = json.loads(lines[0])
        assert set(first) == {"id", "tokens", "labels"}


class TestTrain:
    def test_produces_checkpoint_log_and_config(self, trained):
        assert (trained / "checkpoint" / "meta.json").exists()
        assert (trained / "checkpoint" / "weights.npz").exists()
        assert (trained / "log.csv").exists()
        config = json.loads((trained / "config.json").read_text())
        assert config["command"] == "train"
        assert config["epochs"] == 2

    def test_ablation_flag_lands_in_metadata(self, tmp_path):
        out = tmp_path / "ablate"
        code = run(["train", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                    "--out", str(out), "--ablation", "no_label_segment"] + FAST_TRAIN)
        assert code == 0
        meta = json.loads((out / "checkpoint" / "meta.json").read_text())
        assert meta["ablation"] == "no_label_segment"
        assert meta["sentence_only"] is True

    def test_config_file_merges_with_flags_winning(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"epochs": 7, "alpha": 0.9, "batch_size": 16,
                                        "early_stop_patience": 2, "lr_encoder": 0.02,
                                        "lr_head": 0.01, "toy_hidden_width": 8}))
        out = tmp_path / "merged"
        code = run(["train", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                    "--out", str(out), "--config", str(cfg_file),
                    "--epochs", "2", "--seed", "3"])
        assert code == 0
        config = json.loads((out / "config.json").read_text())
        assert config["epochs"] == 2      # flag beat the file
        assert config["alpha"] == 0.9     # file beat the default

    def test_unknown_config_key_is_usage_error(self, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"learning_rate": 1.0}))
        code = run(["train", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                    "--out", str(tmp_path / "x"), "--config", str(cfg_file)])
        assert code == 2

    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run(["train", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                        "--out", str(out)] + FAST_TRAIN) == 0
            outs.append(out)
        assert (outs[0] / "log.csv").read_bytes() == (outs[1] / "log.csv").read_bytes()
        assert (outs[0] / "config.json").read_bytes() == (outs[1] / "config.json").read_bytes()


class TestEvalAndPredict:
    def test_eval_with_strata_blocks(self, trained, tmp_path, capsys):
        out = tmp_path / "eval"
        code = run(["eval", "--checkpoint", str(trained / "checkpoint"),
                    "--tsv", FIXTURE_TSV, "--strata", "1,2,3", "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert set(report) == {"overall", "min_1", "min_2", "min_3"}
        assert report["min_1"]["n_examples"] == 45
        assert report["min_2"]["n_examples"] == 36
        assert report["min_3"]["n_examples"] == 18
        text = (out / "report.txt").read_text()
        assert "[overall]" in text and "[min_3]" in text

    def test_predict_roundtrips_official_layout(self, trained, tmp_path):
        out = tmp_path / "pred"
        code = run(["predict", "--checkpoint", str(trained / "checkpoint"),
                    "--tsv", FIXTURE_TSV, "--out", str(out)])
        assert code == 0
        space = default_semeval_space()
        original = load_ec_tsv(FIXTURE_TSV, space)
        predicted = load_ec_tsv(str(out / "predictions.tsv"), space, split="test")
        assert [ex.id for ex in predicted] == [ex.id for ex in original]
        assert [ex.raw_text for ex in predicted] == [ex.raw_text for ex in original]
        assert predicted.label_matrix().shape == (50, 11)

    def test_eval_missing_checkpoint_is_usage_error(self, tmp_path):
        code = run(["eval", "--checkpoint", str(tmp_path / "missing"),
                    "--tsv", FIXTURE_TSV, "--out", str(tmp_path / "out")])
        assert code == 2

    def test_predict_and_eval_outputs_reproducible(self, trained, tmp_path):
        checksums = {}
        for name in ("a", "b"):
            pred_out = tmp_path / f"pred_{name}"
            eval_out = tmp_path / f"eval_{name}"
            assert run(["predict", "--checkpoint", str(trained / "checkpoint"),
                        "--tsv", FIXTURE_TSV, "--out", str(pred_out)]) == 0
            assert run(["eval", "--checkpoint", str(trained / "checkpoint"),
                        "--tsv", FIXTURE_TSV, "--strata", "1", "--out", str(eval_out)]) == 0
            checksums[name] = (
                (pred_out / "predictions.tsv").read_bytes(),
                (eval_out / "report.json").read_bytes(),
            )
        assert checksums["a"] == checksums["b"]


class TestAnalysisCommands:
    def test_analyze_words(self, trained, tmp_path):
        out = tmp_path / "words"
        code = run(["analyze-words", "--checkpoint", str(trained / "checkpoint"),
                    "--tsv", FIXTURE_TSV, "--top-k", "5", "--out", str(out)])
        assert code == 0
        table = json.loads((out / "associations.json").read_text())
        assert set(table) == set(default_semeval_space().names)
        assert all(len(v) <= 5 for v in table.values())
        assert (out / "associations.csv").exists()

    def test_analyze_heatmap_from_text(self, trained, tmp_path):
        out = tmp_path / "heat"
        code = run(["analyze-heatmap", "--checkpoint", str(trained / "checkpoint"),
                    "--text", "what a gorgeous sunny morning", "--out", str(out)])
        assert code == 0
        for name in ("heatmap.csv", "heatmap.svg", "heatmap.png"):
            assert (out / name).exists()

    def test_analyze_heatmap_by_row_id(self, trained, tmp_path):
        out = tmp_path / "heat2"
        code = run(["analyze-heatmap", "--checkpoint", str(trained / "checkpoint"),
                    "--tsv", FIXTURE_TSV, "--id", "fx-007", "--out", str(out)])
        assert code == 0

    def test_analyze_heatmap_requires_one_source(self, trained, tmp_path):
        code = run(["analyze-heatmap", "--checkpoint", str(trained / "checkpoint"),
                    "--text", "hello", "--tsv", FIXTURE_TSV,
                    "--out", str(tmp_path / "x")])
        assert code == 2

    def test_analyze_correlations_gold(self, tmp_path):
        out = tmp_path / "corr"
        code = run(["analyze-correlations", "--tsv", FIXTURE_TSV, "--out", str(out)])
        assert code == 0
        for name in ("correlations_gold.csv", "correlations_gold.svg", "correlations_gold.png"):
            assert (out / name).exists()

    def test_analyze_correlations_predicted_needs_checkpoint(self, tmp_path):
        code = run(["analyze-correlations", "--tsv", FIXTURE_TSV,
                    "--source", "predicted", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_sweep_alpha(self, tmp_path):
        out = tmp_path / "sweep"
        code = run(["sweep-alpha", "--train", FIXTURE_TSV, "--valid", FIXTURE_TSV,
                    "--grid", "0,1", "--out", str(out),
                    "--batch-size", "16", "--epochs", "1", "--early-stop-patience", "1",
                    "--lr-encoder", "0.02", "--lr-head", "0.01", "--seed", "3",
                    "--toy-hidden-width", "8"])
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "alpha,miF1,maF1,jacS,best_epoch,error"
        assert len(lines) == 3
        assert (out / "sweep.svg").exists()


class TestExitCodes:
    def test_unknown_subcommand_is_two(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_unknown_flag_is_two(self):
        with pytest.raises(SystemExit) as err:
            main(["validate-data", "--tsv", FIXTURE_TSV, "--bogus"])
        assert err.value.code == 2

    def test_missing_input_path_is_usage_error(self, tmp_path, capsys):
        code = run(["validate-data", "--tsv", str(tmp_path / "absent.tsv")])
        assert code == 2
        assert "does not exist" in capsys.readouterr().err
