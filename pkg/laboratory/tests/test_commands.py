# coding: utf-8
import csv
import json
from io import StringIO

import pytest
from django.core.management import call_command

SMALL = """
coeffs = [1, 0, -1]
nu_list = [1e-1, 1e-2, 1e-3, 1e-4]
grid_size = 24
lambda_samples = 33
time_samples = 200
random_samples = 3
delta_list = [0.1, 0.01]
level_samples = 21
"""


def write_config(directory, text=SMALL, **extra):
    path = directory / "run.txt"
    path.write_text(text + "".join(f"{key} = {value}\n" for key, value in extra.items()), encoding="utf-8")
    return str(path)


def run(name, config, out, **options):
    stdout, stderr = StringIO(), StringIO()
    call_command(name, config=config, out=str(out), stdout=stdout, stderr=stderr, **options)
    return stdout.getvalue(), stderr.getvalue()


def read_csv(path):
    with open(path, newline="") as file:
        return list(csv.DictReader(file))


class TestCommands:
    def test_order(self, tmp_path):
        stdout, _ = run("order", write_config(tmp_path), tmp_path / "out")
        assert stdout.strip() == "m=2"
        (row,) = read_csv(tmp_path / "out" / "order.csv")
        assert row["m"] == "2"
        assert (tmp_path / "out" / "config.txt").exists()

    def test_config_error(self, tmp_path):
        stderr = StringIO()
        with pytest.raises(SystemExit) as error:
            call_command("order", config=str(tmp_path / "missing.txt"), stderr=stderr)
        assert error.value.code == 2
        assert stderr.getvalue().startswith("error: ConfigError:")

    def test_computation_error(self, tmp_path):
        stderr = StringIO()
        with pytest.raises(SystemExit) as error:
            call_command("order", config=write_config(tmp_path, "coeffs = [3]\n"), out=str(tmp_path), stderr=stderr)
        assert error.value.code == 3
        assert stderr.getvalue().startswith("error: NoValidOrder:")

    def test_levelset(self, tmp_path):
        stdout, _ = run("levelset", write_config(tmp_path), tmp_path)
        assert stdout.startswith("C0=")
        rows = read_csv(tmp_path / "levelset.csv")
        assert len(rows) == 2 * 21
        with open(tmp_path / "levelset_summary.json") as file:
            summary = json.load(file)
        assert summary["m"] == 2
        assert summary["C0"] < 20

    def test_psa(self, tmp_path):
        run("psa", write_config(tmp_path), tmp_path, export=True, plot=True)
        assert len(read_csv(tmp_path / "sigma.csv")) == 4 * 33
        rows = read_csv(tmp_path / "psa.csv")
        assert [float(row["nu"]) for row in rows] == [1e-1, 1e-2, 1e-3, 1e-4]
        assert all(float(row["psi"]) > 0 for row in rows)
        assert all(0 < float(row["c1_proof"]) < float(row["c1_effective"]) for row in rows)
        assert [float(row["delta"]) for row in rows] == sorted(float(row["delta"]) for row in rows)[::-1]
        assert (tmp_path / "operator_nu0.001.mtx").exists()
        assert (tmp_path / "psa.svg").exists()

    def test_decay(self, tmp_path):
        run("decay", write_config(tmp_path, nu_list="[1e-2, 1e-3]"), tmp_path, worst=True)
        summary = read_csv(tmp_path / "decay_summary.csv")
        assert [row["kind"] for row in summary] == ["random", "operator"] * 2
        assert all(float(row["wei_excess"]) <= 1e-8 for row in summary)
        assert len(read_csv(tmp_path / "decay.csv")) == 4 * 200

    def test_disc_decay(self, tmp_path):
        config = write_config(tmp_path, mode="disc", ells="[1, 2]", nu_list="[1e-2, 1e-3]")
        run("decay", config, tmp_path)
        summary = read_csv(tmp_path / "decay_summary.csv")
        assert [row["kind"] for row in summary] == ["random", "random", "disc", "heat"] * 2
        heat = [row for row in summary if row["kind"] == "heat"]
        assert [float(row["constant"]) for row in heat] == pytest.approx([3.8317059702075125**2] * 2, rel=1e-6)
        disc = [row for row in summary if row["kind"] == "disc"]
        # Mixing beats the heat rate once nu is small
        assert float(disc[-1]["rate"]) > float(heat[-1]["rate"])

    def test_sweep(self, tmp_path):
        stdout, _ = run("sweep", write_config(tmp_path), tmp_path)
        assert stdout.startswith("alpha=")
        rows = read_csv(tmp_path / "sweep.csv")
        assert len(rows) == 5
        assert rows[-1]["nu"] == "" and rows[-1]["alpha"] != ""
        with open(tmp_path / "sweep_summary.json") as file:
            assert json.load(file)["expected_alpha"] == pytest.approx(0.5)

    def test_dispersion(self, tmp_path):
        run("dispersion", write_config(tmp_path, c1=1.0, nu_list="[1e-2]"), tmp_path)
        rows = read_csv(tmp_path / "dispersion.csv")
        assert len(rows) == 121
        (summary,) = read_csv(tmp_path / "dispersion_summary.csv")
        assert float(summary["max_ratio"]) <= 3
        assert 1 <= float(summary["high_ratio"]) <= float(summary["high_limit"])

    def test_deterministic(self, tmp_path):
        config = write_config(tmp_path)
        run("sweep", config, tmp_path / "first", seed=11)
        run("sweep", config, tmp_path / "second", seed=11)
        first = (tmp_path / "first" / "sweep.csv").read_bytes()
        assert first == (tmp_path / "second" / "sweep.csv").read_bytes()

    @pytest.mark.slow
    def test_verify(self, tmp_path):
        stdout, _ = run("verify", None, tmp_path)
        assert stdout.strip().endswith("checks passed")
        rows = read_csv(tmp_path / "verify.csv")
        assert all(row["passed"] == "yes" for row in rows)
        names = {row["check"] for row in rows}
        assert {"split_bound", "proof_constant"} <= names
