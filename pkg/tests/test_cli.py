import numpy as np
import pytest

from narx_sysid import fileio
from narx_sysid.cli import main
from narx_sysid.control import Dataset
from narx_sysid.evaluate import evaluate
from narx_sysid.narx import Architecture, DelayConfig, NarxModel

from conftest import arx_response, prbs_like

FAST = """\
axis = roll
duration_s = 8
seed = 5
arch = cascade
hidden = 4
na = 4
nb = 3
prbs_order = 7
prbs_bit_interval_s = 0.02
max_epochs = 5
"""


def write_config(tmp_path, text=FAST, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle")
    cfg = write_config(root)
    out = str(root / "out")
    for cmd in ("excite", "train", "eval"):
        assert main([cmd, "--config", cfg, "--out", out]) == 0
    return root / "out"


def test_bundle_contents(bundle):
    for name in ("dataset.csv", "dataset.meta", "model.txt", "training_report.csv",
                 "training_summary.txt", "metrics.txt", "predictions.csv", "manifest.txt"):
        assert (bundle / name).exists(), name
    manifest = fileio.read_keyvalue(bundle / "manifest.txt")
    assert len(manifest["config_digest"]) == 64
    assert manifest["tool_version"]
    assert len(fileio.read_dataset_table(bundle / "dataset.csv")["k"]) == 2000


def test_eval_matches_training_summary(bundle):
    model, _ = fileio.load_model(bundle / "model.txt")
    data = fileio.read_dataset(bundle / "dataset.csv")
    summary = fileio.read_keyvalue(bundle / "training_summary.txt")
    rep = evaluate(model, data).reports["sp"]
    for name, value in rep.items():
        assert abs(float(summary[f"sp.{name}"]) - value) <= 1e-12


def test_metrics_file_layout(bundle):
    keys = [ln.split("=")[0] for ln in (bundle / "metrics.txt").read_text().splitlines()]
    assert keys[0] == "sp.fit_percent_est" and "p.r_val" in keys and len(keys) == 18


def test_report_writes_svgs(bundle, capsys):
    assert main(["report", "--out", str(bundle)]) == 0
    for name in ("overlay.svg", "training_curve.svg", "scatter.svg", "residual_acf.svg"):
        text = (bundle / name).read_text()
        assert text.lstrip().startswith("<?xml") and "<svg" in text
    assert "R val" in capsys.readouterr().out


def test_report_missing_training_report(tmp_path, bundle, capsys):
    (tmp_path / "predictions.csv").write_bytes((bundle / "predictions.csv").read_bytes())
    assert main(["report", "--out", str(tmp_path)]) == 2
    assert "training_report.csv" in capsys.readouterr().err


def test_excite_is_byte_reproducible(tmp_path, bundle):
    cfg = write_config(tmp_path)
    assert main(["excite", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "dataset.csv").read_bytes() == (bundle / "dataset.csv").read_bytes()


def test_seed_override_changes_noise(tmp_path, bundle):
    cfg = write_config(tmp_path)
    assert main(["excite", "--config", cfg, "--out", str(tmp_path / "s"), "--seed", "6"]) == 0
    assert (tmp_path / "s" / "dataset.csv").read_bytes() != (bundle / "dataset.csv").read_bytes()


def test_unstable_loop_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, "axis = roll\nduration_s = 123\nseed = 1\narch = cascade\n"
                                 "kp_rate = 0\nprbs_amplitude = 0.5\n")
    assert main(["excite", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "sample" in capsys.readouterr().err


def test_bad_config_exit_2_with_line(tmp_path, capsys):
    cfg = write_config(tmp_path, FAST + "bogus = 1\n")
    assert main(["excite", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert f"{cfg}:11: unknown key" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["excite", "--out", str(tmp_path)]) == 2
    assert main(["excite", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_malformed_dataset_exit_2(tmp_path, bundle, capsys):
    lines = (bundle / "dataset.csv").read_text().splitlines()
    lines[10] = "9,0.036,oops,1"
    (tmp_path / "dataset.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "dataset.meta").write_bytes((bundle / "dataset.meta").read_bytes())
    cfg = write_config(tmp_path)
    assert main(["train", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "row 11" in capsys.readouterr().err


def test_divergence_exit_4(tmp_path, bundle):
    cfg = write_config(tmp_path, FAST + "algorithm = adam\nlearning_rate = 1e300\n")
    assert main(["train", "--config", cfg, "--dataset", str(bundle / "dataset.csv"),
                 "--out", str(tmp_path)]) == 4


@pytest.mark.parametrize("arch_lines, header", [
    ("arch = sigmoid\nhidden = 30\n", {"arch": "sigmoid", "layers": "30", "act": "logistic"}),
    ("arch = ffnn\nh1 = 10\nh2 = 20\n", {"arch": "ffnn", "layers": "10 20", "act": "tanh radbas"}),
    ("arch = cascade\nhidden = 20\n", {"arch": "cascade", "layers": "20", "act": "tanh"}),
])
def test_train_header_per_architecture(tmp_path, bundle, arch_lines, header):
    text = "axis = roll\nduration_s = 8\nseed = 5\nna = 15\nnb = 7\nmax_epochs = 1\n" + arch_lines
    cfg = write_config(tmp_path, text)
    assert main(["train", "--config", cfg, "--dataset", str(bundle / "dataset.csv"),
                 "--out", str(tmp_path)]) == 0
    _, got = fileio.load_model(tmp_path / "model.txt")
    assert {k: got[k] for k in header} == header
    assert got["na"] == "15" and got["nb"] == "7"


def test_eval_rejects_axis_mismatch(tmp_path, bundle, capsys):
    meta = (bundle / "dataset.meta").read_text().replace("axis=roll", "axis=pitch")
    (tmp_path / "dataset.csv").write_bytes((bundle / "dataset.csv").read_bytes())
    (tmp_path / "dataset.meta").write_text(meta)
    assert main(["eval", "--model", str(bundle / "model.txt"), "--out", str(tmp_path)]) == 2
    assert "axis" in capsys.readouterr().err


def test_eval_constant_output_exit_2(tmp_path, bundle):
    u = prbs_like(400, seed=1)
    fileio.write_dataset(tmp_path / "dataset.csv", Dataset.from_arrays(u, np.full(400, 0.25), 0.004))
    assert main(["eval", "--model", str(bundle / "model.txt"), "--out", str(tmp_path)]) == 2


def arx_bundle(tmp_path):
    u = prbs_like(1000, seed=9)
    fileio.write_dataset(tmp_path / "dataset.csv", Dataset.from_arrays(u, arx_response(u), 0.004))
    model = NarxModel(Architecture.linear(), DelayConfig(2, 2), {"W1": [[1.5, -0.7, 1.0, 0.5]], "b1": [0.0]})
    fileio.save_model(tmp_path / "model.txt", model, dt=0.004, axis="roll")
    fileio.write_training_report(tmp_path / "training_report.csv", [1.0, 0.1, 0.01], [1.0, 0.2, 0.05])
    return tmp_path


def test_replica_model_eval_fit(tmp_path, capsys):
    out = arx_bundle(tmp_path)
    assert main(["eval", "--out", str(out)]) == 0
    metrics = fileio.read_keyvalue(out / "metrics.txt")
    assert float(metrics["sp.fit_percent_est"]) >= 99.99
    assert float(metrics["sp.fit_percent_val"]) >= 99.99


def test_perfect_model_scatter_r_is_one(tmp_path, capsys):
    out = arx_bundle(tmp_path)
    assert main(["eval", "--out", str(out)]) == 0
    assert main(["report", "--out", str(out)]) == 0
    assert "R = 1.000000" in (out / "scatter.svg").read_text()
    assert "R val 1.000000" in capsys.readouterr().out


def test_axis_all_with_jobs(tmp_path):
    cfg = write_config(tmp_path, FAST.replace("axis = roll", "axis = all"))
    assert main(["excite", "--config", cfg, "--out", str(tmp_path / "one"), "--jobs", "1"]) == 0
    assert main(["excite", "--config", cfg, "--out", str(tmp_path / "two"), "--jobs", "2"]) == 0
    for axis in ("roll", "pitch", "yaw"):
        a = (tmp_path / "one" / axis / "dataset.csv").read_bytes()
        assert a == (tmp_path / "two" / axis / "dataset.csv").read_bytes()
        assert fileio.dataset_meta(tmp_path / "one" / axis / "dataset.csv")["axis"] == axis


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version", "excite"])
    assert info.value.code == 0
    assert "narx-sysid" in capsys.readouterr().out
