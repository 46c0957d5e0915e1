import logging

import numpy as np
import pandas as pd
import pytest

from nngp.kernel import kernel_value, load_kernel_spec
from nngp.main import build_parser, main


def stdout_lines(capsys):
    return capsys.readouterr().out.splitlines()


def value_of(lines, key):
    for line in lines:
        if line.startswith(f"{key}: "):
            return line.split(": ", 1)[1]
    raise AssertionError(f"no '{key}' line in {lines}")


def test_kernel_on_a_single_point(data_dir, tmp_path, capsys):
    points = tmp_path / "p.csv"
    points.write_text("x0,x1\n0.3,-0.4\n")
    out = tmp_path / "K.csv"
    assert main(["kernel", "--spec", str(data_dir / "relu_depth2.spec"), "--points", str(points),
                 "--out", str(out)]) == 0

    spec = load_kernel_spec(data_dir / "relu_depth2.spec")
    h, _, k = kernel_value(spec, [0.3, -0.4], [0.3, -0.4])
    assert pd.read_csv(out, float_precision="round_trip")["k0"].iloc[0] == k
    assert pd.read_csv(tmp_path / "K_mean.csv", float_precision="round_trip")["h"].iloc[0] == h
    assert value_of(stdout_lines(capsys), "points") == "1"


def test_kernel_matrix_is_symmetric(data_dir, tmp_path):
    out = tmp_path / "K.csv"
    assert main(["kernel", "--spec", str(data_dir / "identity.spec"), "--points", str(data_dir / "probes_2d.csv"),
                 "--out", str(out), "--mean-out", str(tmp_path / "h.csv")]) == 0
    K = pd.read_csv(out).to_numpy()
    assert K.shape == (5, 5)
    np.testing.assert_array_equal(K, K.T)
    assert (tmp_path / "h.csv").exists()


def test_malformed_csv_exits_with_parse_code(data_dir, tmp_path, caplog):
    points = tmp_path / "bad.csv"
    points.write_text("x0,x1\n1.0,2.0\n1.0,abc\n")
    with caplog.at_level(logging.ERROR, logger="nngp"):
        code = main(["kernel", "--spec", str(data_dir / "relu_depth2.spec"), "--points", str(points),
                     "--out", str(tmp_path / "K.csv")])
    assert code == 2
    assert "line 3" in caplog.text
    assert not (tmp_path / "K.csv").exists()


def test_missing_spec_exits_with_parse_code(tmp_path):
    assert main(["kernel", "--spec", str(tmp_path / "none.spec"), "--points", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path / "K.csv")]) == 2


def test_fit_then_predict_interpolates(data_dir, tmp_path, capsys):
    model = tmp_path / "model.txt"
    assert main(["fit", "--spec", str(data_dir / "relu_1d.spec"), "--train", str(data_dir / "train_sin.csv"),
                 "--noise", "0", "--out-model", str(model)]) == 0
    lines = stdout_lines(capsys)
    assert value_of(lines, "model") == str(model)
    assert np.isfinite(float(value_of(lines, "lml")))

    out = tmp_path / "pred.csv"
    assert main(["predict", "--model", str(model), "--points", str(data_dir / "train_sin.csv"),
                 "--out", str(out)]) == 0
    pred = pd.read_csv(out)
    train = pd.read_csv(data_dir / "train_sin.csv")
    assert list(pred.columns) == ["x0", "post_mean", "post_var"]
    np.testing.assert_allclose(pred["post_mean"], train["y"], atol=1e-8)
    assert np.all(pred["post_var"] <= 1e-8)


def test_fit_with_optimization_writes_a_trace(data_dir, tmp_path, capsys):
    model = tmp_path / "model.txt"
    assert main(["fit", "--spec", str(data_dir / "relu_1d.spec"), "--train", str(data_dir / "train_sin.csv"),
                 "--optimize", "--free", "layer2.var_w,noise", "--noise", "0.1", "--max-evals", "30",
                 "--restarts", "1", "--seed", "4", "--out-model", str(model)]) == 0
    lines = stdout_lines(capsys)
    trace = pd.read_csv(tmp_path / "model_trace.csv")
    assert {"restart", "evaluation", "layer2.var_w", "noise", "lml", "best_lml"} <= set(trace.columns)
    assert float(value_of(lines, "lml")) >= float(value_of(lines, "initial_lml")) - 1e-9


def test_tampered_model_exits_with_integrity_code(data_dir, tmp_path, capsys):
    model = tmp_path / "model.txt"
    assert main(["fit", "--spec", str(data_dir / "relu_1d.spec"), "--train", str(data_dir / "train_sin.csv"),
                 "--noise", "0.01", "--out-model", str(model)]) == 0
    lines = model.read_text().splitlines()
    row = lines.index("[beta]") + 2
    lines[row] = repr(float(lines[row]) + 1.0)
    model.write_text("\n".join(lines) + "\n")
    assert main(["predict", "--model", str(model), "--points", str(data_dir / "probes_1d.csv"),
                 "--out", str(tmp_path / "pred.csv")]) == 4


def run_verify(data_dir, out):
    return main(["verify-width", "--spec", str(data_dir / "identity.spec"), "--widths", "4,64",
                 "--ensembles", "1000", "--probes", str(data_dir / "probes_2d.csv"), "--seed", "11",
                 "--out", str(out)])


def test_verify_width_passes_and_is_reproducible(data_dir, tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_verify(data_dir, first) == 0
    assert stdout_lines(capsys)[-1] == "PASS"
    assert run_verify(data_dir, second) == 0
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "a_summary.csv").read_bytes() == (tmp_path / "b_summary.csv").read_bytes()


def test_barron_point_mass(data_dir, tmp_path, capsys):
    x = tmp_path / "x.csv"
    x.write_text("x0\n0.6\n-3.0\n")
    out = tmp_path / "barron.csv"
    assert main(["barron", "--spec", str(data_dir / "barron_pointmass.cfg"), "--x", str(x),
                 "--n-list", "16,32", "--reps", "10", "--boot", "20", "--out", str(out)]) == 0
    lines = stdout_lines(capsys)
    assert lines[-1] == "PASS"
    assert value_of(lines, "hpi_norm_sq") == "4 +- 0"
    table = pd.read_csv(out)
    assert list(table["x_index"]) == [0, 0, 1, 1]
    assert np.all(table["variance"] == 0.0)
    np.testing.assert_allclose(table["mean"], [1.6, 1.6, 0.0, 0.0], atol=1e-12)
    assert (tmp_path / "barron_ratios.csv").exists()
    assert (tmp_path / "barron_hpi.csv").exists()


def test_expect_prints_one_value(capsys):
    assert main(["expect", "--kind", "relu", "--moments", "0,0,1,1,1", "--method", "analytic"]) == 0
    assert float(stdout_lines(capsys)[-1]) == pytest.approx(0.5, abs=1e-15)


def test_expect_rejects_wrong_moment_count(capsys):
    assert main(["expect", "--kind", "relu", "--moments", "0,1,2"]) == 2


def test_bad_arguments_exit_with_parse_code():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["verify-width", "--spec", "s", "--widths", "4,x", "--probes", "p", "--out", "o"])
    assert exc.value.code == 2
