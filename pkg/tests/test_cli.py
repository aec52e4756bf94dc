import csv

import pytest

from graphcl_dta.cli import main


@pytest.fixture
def cfg_path(tmp_path, small_paths):
    p = tmp_path / "run.yaml"
    p.write_text(
        "epsilon: 0.1\ntau: 0.2\nepochs: 2\nbatch_size: 16\nmax_protein_length: 100\n"
        "drug_dim: 16\ntarget_dim: 16\nembed_dim: 16\nconv_channels: [8, 8, 8]\nkernel_size: 5\n"
        f"drugs: {small_paths['drugs']}\ntargets: {small_paths['targets']}\n"
        f"affinities: {small_paths['affinities']}\ndataset_name: small\n"
    )
    return p


def table(text):
    return list(csv.reader(text.strip().splitlines(), delimiter="\t"))


def test_train_eval_resume(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0][:3] == ["label", "n", "pairs"] and rows[1][0] == "fold0/validation"
    assert (out / "config.yaml").exists() and (out / "epochs.png").exists()

    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--resume", str(out / "last.ckpt"),
                 "--epochs", "3"]) == 0
    capsys.readouterr()
    with open(out / "epochs.tsv") as fh:
        assert len(fh.read().strip().splitlines()) == 4

    assert main(["eval", "--checkpoint", str(out / "last.ckpt"), "--config", str(cfg_path), "--split", "test",
                 "--out", str(out)]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[1][0] == "test" and int(rows[1][1]) == 8
    assert (out / "eval_test.json").exists()


def test_overrides_reach_config(tmp_path, cfg_path, capsys):
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--alpha", "0", "--beta", "0.01",
                 "--lr", "0.001", "--epochs", "1", "--batch-size", "8", "--fold", "2", "--seed", "4"]) == 0
    text = (out / "config.yaml").read_text()
    for line in ("alpha: 0.0", "beta: 0.01", "learning_rate: 0.001", "epochs: 1", "batch_size: 8",
                 "fold: 2", "seed: 4"):
        assert line in text
    assert table(capsys.readouterr().out)[1][0] == "fold2/validation"


def test_ablate(tmp_path, cfg_path, capsys):
    assert main(["ablate", "--config", str(cfg_path), "--mode", "alpha-off", "--seeds", "2", "--epochs", "1",
                 "--out", str(tmp_path / "abl")]) == 0
    rows = table(capsys.readouterr().out)
    assert len(rows) == 3 and rows[1][2] == "0.0"
    assert (tmp_path / "abl" / "ablation_alpha-off.tsv").exists()


def test_split_index(tmp_path, small_paths, capsys):
    assert main(["split", "--index", str(small_paths["affinities"]), "--out", str(tmp_path)]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[1][:3] == ["48", "8", "40"]
    assert len((tmp_path / "split.tsv").read_text().splitlines()) == 49


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["gradcheck", "--tol", "0"]) == 4


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("epsilon: 0.1\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "tau" in capsys.readouterr().err


def test_usage_error_exit():
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2


def test_data_error_exit(tmp_path, cfg_path, capsys):
    assert main(["split", "--index", str(tmp_path / "missing.tsv")]) == 3
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt")]) == 3
    broken = tmp_path / "broken.yaml"
    broken.write_text(cfg_path.read_text().replace("dataset_name: small", "") + "drugs: nowhere.tsv\n")
    assert main(["train", "--config", str(broken), "--out", str(tmp_path / "r")]) == 3
