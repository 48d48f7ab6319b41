import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from di_toolkit import cli
from di_toolkit.boxes import chsh_game


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, out


def schema(name):
    path = resources.files("di_toolkit") / "schemas" / f"{name}.json"
    return json.loads(path.read_text())


@pytest.fixture
def chsh_file(tmp_path):
    path = tmp_path / "chsh.json"
    path.write_text(json.dumps(chsh_game().to_json_dict()))
    return str(path)


class TestBasics:
    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0

    def test_unknown_flag_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["ns-value", "--nope"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_file_exit_one(self, capsys):
        code, _ = run_cli(["ns-value", "--game", "/nonexistent.json"], capsys)
        assert code == 1

    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "di_toolkit.cli", "entropy-curve",
             "--points", "3"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("omega,")


class TestGameCommands:
    def test_ns_value_chsh(self, chsh_file, capsys):
        code, out = run_cli(["ns-value", "--game", chsh_file], capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_ns_value"))
        assert payload["value"] == pytest.approx(1.0, abs=1e-9)
        assert payload["d"] == 16

    def test_threshold_bound(self, chsh_file, capsys):
        code, out = run_cli(["threshold-bound", "--game", chsh_file,
                             "--n", "30000000000", "--beta", "0.25"], capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_threshold_bound"))
        assert 0 <= payload["bound"] < 1
        assert payload["log10_bound"] < -100

    def test_threshold_bound_small_n(self, chsh_file, capsys):
        code, out = run_cli(["threshold-bound", "--game", chsh_file,
                             "--n", "100", "--beta", "0.25"], capsys)
        assert code == 1
        assert "required_n" in out


class TestEntropyCurve:
    def test_csv_default(self, capsys):
        code, out = run_cli(["entropy-curve", "--points", "5"], capsys)
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0] == "omega,secrecy_bound,bell_diag_bound"
        assert len(lines) == 6

    def test_json_format_and_schema(self, capsys):
        code, out = run_cli(["entropy-curve", "--points", "4",
                             "--format", "json"], capsys)
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_entropy_curve"))

    def test_endpoint_values(self, capsys):
        _, out = run_cli(["entropy-curve", "--from", "0.75", "--to",
                          "0.853553", "--points", "2"], capsys)
        rows = [line.split(",") for line in out.strip().split("\n")[1:]]
        assert float(rows[0][1]) == pytest.approx(0.0, abs=1e-9)
        assert float(rows[1][1]) == pytest.approx(1.0, abs=1e-4)


class TestMuOpt:
    def test_reference_point(self, capsys):
        code, out = run_cli([
            "mu-opt", "--n", "1e8", "--gamma", "1", "--omega-exp",
            "0.820736", "--delta-est", "1e-3", "--eps-s", "1e-6",
            "--eps-e", "1e-6"], capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_mu_opt"))
        assert payload["value"] == pytest.approx(0.502133, abs=2e-3)

    def test_block_mode(self, capsys):
        code, out = run_cli([
            "mu-opt", "--n", "1e8", "--gamma", "0.01", "--omega-exp",
            "0.84", "--delta-est", "1e-4", "--eps-s", "1e-6", "--eps-e",
            "1e-6", "--block"], capsys)
        payload = json.loads(out)
        assert payload["mode"] == "block"
        assert payload["s_max"] == 100


class TestSigTest:
    def test_pass_on_signalling_data(self, tmp_path, capsys, rng):
        from conftest import bob_echoes_x_box, sample_iid_data, uniform_q

        n = 2000
        xs, ys, a, b = sample_iid_data(bob_echoes_x_box(), uniform_q(), n, rng)
        path = tmp_path / "data.json"
        path.write_text(json.dumps({
            "n": n, "a_size": 2, "b_size": 2, "x_size": 2, "y_size": 2,
            "a": a.tolist(), "b": b.tolist(),
            "x": xs.tolist(), "y": ys.tolist()}))
        code, out = run_cli(["sig-test", "--data", str(path),
                             "--zeta", "0.06", "--eps", "0.008"], capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_sig_test"))
        assert payload["any_pass"] is True


class TestSimulateCommand:
    def test_output_schema_and_determinism(self, capsys):
        argv = ["simulate", "--n", "10000", "--gamma", "0.5", "--omega-exp",
                "0.81", "--delta-est", "0.02", "--trials", "100",
                "--seed", "7"]
        code, out1 = run_cli(argv, capsys)
        assert code == 0
        payload = json.loads(out1)
        jsonschema.validate(payload, schema("out_simulate"))
        _, out2 = run_cli(argv, capsys)
        assert out1 == out2


class TestDefinettiVerify:
    def test_holds(self, capsys):
        code, out = run_cli(["definetti-verify", "--n", "2", "--trials", "20",
                             "--seed", "5"], capsys)
        assert code == 0
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_definetti_verify"))
        assert payload["holds"] is True
        assert payload["max_ratio"] <= payload["factor"]


class TestConfigAndOut:
    def test_config_provides_flags(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 10000, "gamma": 0.5,
                                   "omega-exp": 0.81, "delta-est": 0.02,
                                   "trials": 50, "seed": 7}))
        code, out = run_cli(["simulate", "--config", str(cfg)], capsys)
        assert code == 0
        assert json.loads(out)["trials"] == 50

    def test_cli_overrides_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 10000, "gamma": 0.5,
                                   "omega-exp": 0.81, "delta-est": 0.02,
                                   "trials": 50, "seed": 7}))
        code, out = run_cli(["simulate", "--config", str(cfg),
                             "--trials", "25"], capsys)
        assert json.loads(out)["trials"] == 25

    def test_out_file(self, tmp_path, capsys):
        target = tmp_path / "curve.csv"
        code, out = run_cli(["entropy-curve", "--points", "3", "--out",
                             str(target)], capsys)
        assert code == 0
        assert out == ""
        assert target.read_text().startswith("omega,")

    def test_nine_significant_digits(self, capsys):
        _, out = run_cli(["mu-opt", "--n", "1e8", "--gamma", "1",
                          "--omega-exp", "0.820736", "--delta-est", "1e-3",
                          "--eps-s", "1e-6", "--eps-e", "1e-6"], capsys)
        value = json.loads(out)["value"]
        assert value == float(f"{value:.9g}")


class TestRateCurveCommand:
    def test_csv_columns(self, capsys):
        code, out = run_cli([
            "rate-curve", "--mode", "block", "--axis", "n",
            "--grid", "1e8", "--q", "0.02", "--eps-ec", "1e-10",
            "--soundness", "1e-5", "--completeness", "1e-2"], capsys)
        assert code == 0
        lines = out.strip().split("\n")
        header = lines[0].split(",")
        assert header[:7] == ["axis_value", "rate", "rate_clamped",
                              "key_length", "gamma", "delta_est", "cut"]
        assert len(lines) == 2

    def test_json_schema(self, capsys):
        code, out = run_cli([
            "rate-curve", "--mode", "per-round", "--axis", "q",
            "--grid", "0.01", "--n", "1e8", "--format", "json"], capsys)
        payload = json.loads(out)
        jsonschema.validate(payload, schema("out_rate_curve"))
