"""End-to-end command tests against a small generated dataset."""

import json

import pytest

from metaner.augment import EntityDict, SynonymDict
from metaner.cli import main
from metaner.corpus import read_conll, span_f1
from metaner.trainer import read_weight_rows


def base_config(synth_dataset, out_dir, **overrides):
    lines = {
        "train": synth_dataset["train"],
        "dev": synth_dataset["dev"],
        "test": synth_dataset["test"],
        "vectors": synth_dataset["vectors"],
        "stopwords": synth_dataset["stopwords"],
        "out": out_dir,
        "model.emb_dim": 12,
        "model.hidden": 6,
        "steps": 6,
        "batch": 2,
        "meta_batch": 1,
        "eval_every": 3,
        "seed": 1,
    }
    lines.update(overrides)
    return "\n".join(f"{k}={v}" for k, v in lines.items()) + "\n"


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestBuildDict:
    def test_writes_both_dictionaries(self, synth_dataset, tmp_path, capsys):
        out = tmp_path / "dicts"
        rc = main(
            [
                "build-dict",
                "--train", str(synth_dataset["train"]),
                "--vectors", str(synth_dataset["vectors"]),
                "--stopwords", str(synth_dataset["stopwords"]),
                "--k", "3",
                "--out", str(out),
            ]
        )
        assert rc == 0
        edict = EntityDict.load(out / "entities.tsv")
        assert set(edict.mentions) <= {"PER", "LOC", "ORG"}
        assert len(edict) > 0
        sdict = SynonymDict.load(out / "synonyms.tsv")
        assert all(len(pool) <= 3 for pool in sdict.synonyms.values())
        assert "the" not in sdict.synonyms
        assert (out / "resolved_args.cfg").exists()
        assert "entities.tsv" in capsys.readouterr().out

    def test_missing_flag_exits_one(self, capsys):
        assert main(["build-dict", "--out", "/tmp/x"]) == 1


class TestAugmentCommand:
    def test_count_contract_ts_only(self, synth_dataset, tmp_path):
        out = tmp_path / "aug"
        cfg = write_config(
            tmp_path, base_config(synth_dataset, out, method="ts", times=5, p_sub=0.5)
        )
        assert main(["augment", "--config", str(cfg)]) == 0
        pseudo = read_conll(out / "pseudo.conll")
        assert len(pseudo) == 100  # 5 x 20 sentences, all substitution
        manifest = (out / "mixup_pairs.tsv").read_text().strip().split("\n")
        assert manifest == ["id1\tid2\tlambda"]
        assert (out / "resolved_config.cfg").exists()

    def test_both_methods_split_across_files(self, synth_dataset, tmp_path):
        out = tmp_path / "aug2"
        cfg = write_config(
            tmp_path, base_config(synth_dataset, out, method="both", times=2, p_sub=0.5)
        )
        assert main(["augment", "--config", str(cfg)]) == 0
        pseudo = read_conll(out / "pseudo.conll")
        manifest = (out / "mixup_pairs.tsv").read_text().strip().split("\n")[1:]
        assert len(pseudo) == 20
        assert len(manifest) == 20
        id1, id2, lam = manifest[0].split("\t")
        assert id1.startswith("train-") and id2.startswith("train-")
        assert 0.0 <= float(lam) <= 1.0

    def test_baseline_method_rejected(self, synth_dataset, tmp_path, capsys):
        cfg = write_config(
            tmp_path, base_config(synth_dataset, tmp_path / "x", method="baseline")
        )
        assert main(["augment", "--config", str(cfg)]) == 1
        assert "method" in capsys.readouterr().err


class TestTrainCommand:
    def test_artifacts_and_summary(self, synth_dataset, tmp_path):
        out = tmp_path / "run"
        cfg = write_config(
            tmp_path, base_config(synth_dataset, out, method="both", times=1, p_sub=0.5)
        )
        assert main(["train", "--config", str(cfg)]) == 0
        for name in (
            "model.ckpt",
            "history.jsonl",
            "weights.tsv",
            "summary.json",
            "resolved_config.cfg",
        ):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["method"] == "both"
        assert 0.0 <= summary["best_dev_f1"] <= 1.0
        assert set(summary["dev"]) == {"precision", "recall", "f1", "support"}
        assert "test" in summary
        history = [
            json.loads(line)
            for line in (out / "history.jsonl").read_text().strip().split("\n")
        ]
        assert [h["step"] for h in history] == [3, 6]
        rows = read_weight_rows(out / "weights.tsv")
        assert len(rows) == 6 * 2
        resolved = (out / "resolved_config.cfg").read_text()
        assert "clip=5.0" in resolved.split("\n")

    def test_missing_required_key_exits_one(self, synth_dataset, tmp_path, capsys):
        text = base_config(synth_dataset, tmp_path / "r")
        text = "\n".join(l for l in text.split("\n") if not l.startswith("dev="))
        cfg = write_config(tmp_path, text)
        assert main(["train", "--config", str(cfg)]) == 1
        assert "dev" in capsys.readouterr().err

    def test_identical_configs_identical_artifacts(self, synth_dataset, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            cfg = write_config(
                tmp_path,
                base_config(synth_dataset, out, method="ts", times=1, p_sub=0.5),
                name=f"{name}.cfg",
            )
            assert main(["train", "--config", str(cfg)]) == 0
            outs.append(out)
        a, b = outs
        for name in ("history.jsonl", "weights.tsv", "model.ckpt", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


@pytest.fixture(scope="module")
def trained(synth_dataset, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("eval-model")
    out = tmp / "run"
    cfg = write_config(tmp, base_config(synth_dataset, out))
    assert main(["train", "--config", str(cfg)]) == 0
    return out / "model.ckpt"


@pytest.fixture(scope="module")
def run_dir(synth_dataset, tmp_path_factory):
    tmp = tmp_path_factory.mktemp("inspect")
    out = tmp / "run"
    cfg = write_config(
        tmp, base_config(synth_dataset, out, method="both", times=1, p_sub=0.5)
    )
    assert main(["train", "--config", str(cfg)]) == 0
    return out


class TestEvalCommand:
    def test_writes_predictions_and_metrics(self, synth_dataset, trained, capsys):
        rc = main(["eval", "--model", str(trained), "--data", str(synth_dataset["test"])])
        assert rc == 0
        out_dir = trained.parent
        preds = read_conll(out_dir / "predictions_test.conll")
        gold = read_conll(synth_dataset["test"])
        assert len(preds) == len(gold)
        assert all(p.tokens == g.tokens for p, g in zip(preds.examples, gold.examples))
        metrics = json.loads((out_dir / "metrics_test.json").read_text())
        assert set(metrics) == {"precision", "recall", "f1", "support"}
        stdout_metrics = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
        assert stdout_metrics == metrics

    def test_bio_input_gets_bio_predictions(self, synth_dataset, trained, tmp_path):
        gold = read_conll(synth_dataset["test"]).convert("BIO")
        from metaner.corpus import write_conll

        bio_path = tmp_path / "test_bio.conll"
        write_conll(gold, bio_path)
        assert main(["eval", "--model", str(trained), "--data", str(bio_path)]) == 0
        preds = read_conll(trained.parent / "predictions_test_bio.conll", scheme="BIO")
        labels = {lab for ex in preds.examples for lab in ex.labels}
        assert not any(lab.startswith(("E-", "S-")) for lab in labels)

    def test_perfect_predictions_score_one(self, synth_dataset):
        gold = read_conll(synth_dataset["test"])
        labels = [list(ex.labels) for ex in gold.examples]
        assert span_f1(labels, labels, scheme="BIOES")["f1"] == 1.0

    def test_missing_model_exits_one(self, synth_dataset, capsys):
        rc = main(["eval", "--model", "/nonexistent.ckpt", "--data", str(synth_dataset["test"])])
        assert rc == 1


class TestInspectWeights:
    def test_dump_matches_file(self, run_dir, capsys):
        assert main(["inspect-weights", "--run", str(run_dir)]) == 0
        dumped = capsys.readouterr().out.strip().split("\n")
        on_disk = (run_dir / "weights.tsv").read_text().strip().split("\n")
        assert dumped == on_disk

    def test_summary_aggregates_by_provenance(self, run_dir, capsys):
        assert main(["inspect-weights", "--run", str(run_dir), "--summary"]) == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0] == "provenance\tcount\tmean_weight\tmean_weight_last_third"
        provenances = {line.split("\t")[0] for line in out[1:]}
        assert "clean" in provenances

    def test_missing_weights_exits_one(self, tmp_path, capsys):
        assert main(["inspect-weights", "--run", str(tmp_path)]) == 1
        assert "weights.tsv" in capsys.readouterr().err


class TestExitCodes:
    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_unknown_command_exits_one(self):
        assert main(["frobnicate"]) == 1

    def test_config_error_exits_one(self, synth_dataset, tmp_path, capsys):
        cfg = write_config(tmp_path, "bogus=1\n")
        assert main(["train", "--config", str(cfg)]) == 1
        assert "unknown key" in capsys.readouterr().err

    def test_malformed_corpus_exits_one(self, synth_dataset, tmp_path, capsys):
        bad = tmp_path / "bad.conll"
        bad.write_text("word B-PER extra\n")
        cfg = write_config(
            tmp_path,
            base_config(synth_dataset, tmp_path / "out", train=bad),
        )
        assert main(["train", "--config", str(cfg)]) == 1
        assert "bad.conll:1" in capsys.readouterr().err
