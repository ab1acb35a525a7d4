import json
import math
from io import StringIO
from pathlib import Path

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from hardylab import cli
from hardylab.config.cli import main as config_main
from hardylab.errors import ExperimentAssertionError
from hardylab.lab import Experiment

QUARTER = str(math.pi / 2)
SMALL = ["--rmin", "0.1", "--rmax", "10", "--n-radial", "8", "--n-angular", "4"]


@pytest.fixture
def runner(isolated_config) -> CliRunner:
    return CliRunner()


def run(runner, *args):
    return runner.invoke(cli.main, [str(a) for a in args])


class TestAnalytic:
    def test_quarter_plane(self, runner):
        result = run(runner, "analytic", "--theta", QUARTER, "--mu", "1", "--rmin", "0.1", "--rmax", "10")
        assert result.exit_code == 0, result.output
        record = json.loads(result.stdout)
        assert record["mu_C"] == pytest.approx(4.0)
        assert record["alpha_plus"] == pytest.approx(math.sqrt(3.0))
        assert record["alpha_minus"] == pytest.approx(-math.sqrt(3.0))
        assert record["criticality"] == "subcritical"
        assert record["solution_cone_dimension"] == 2
        assert record["mu_trunc"] == pytest.approx(4.0 + (math.pi / math.log(100.0)) ** 2)

    def test_spherical_cap(self, runner):
        result = run(runner, "analytic", "--N", 3, "--theta0", QUARTER)
        assert result.exit_code == 0, result.output
        record = json.loads(result.stdout)
        assert record["lambda_D"] == pytest.approx(2.0, abs=1e-6)
        assert record["mu_C"] == pytest.approx(2.25, abs=1e-6)
        assert "alpha_plus" not in record

    def test_explicit_eigenvalue(self, runner):
        result = run(runner, "analytic", "--N", 5, "--lambdaD", 3, "--mu", 5.25)
        record = json.loads(result.stdout)
        assert record["criticality"] == "critical"
        assert record["alpha_plus"] == pytest.approx(record["alpha_minus"])

    @pytest.mark.parametrize("args", [[], ["--theta", "1", "--lambdaD", "2"]])
    def test_needs_exactly_one_cross_section(self, runner, args):
        result = run(runner, "analytic", *args)
        assert result.exit_code == 2
        assert "exactly one" in result.output

    def test_supercritical_coupling(self, runner):
        result = run(runner, "analytic", "--theta", QUARTER, "--mu", 5)
        assert result.exit_code == 1
        assert "supercritical coupling" in result.stderr

    def test_arc_needs_planar_cone(self, runner):
        result = run(runner, "analytic", "--N", 3, "--theta", 1)
        assert result.exit_code == 1
        assert "Error" in result.stderr


class TestMesh:
    def test_stdout_dump(self, runner):
        result = run(runner, "mesh", "--rmin", 0.1, "--rmax", 10, "--n-radial", 4, "--n-angular", 2)
        assert result.exit_code == 0, result.output
        lines = result.stdout.splitlines()
        assert lines[0] == "15 16"
        assert len(lines) == 1 + 15 + 16

    def test_bulge_to_file(self, runner, isolated_config):
        out = isolated_config / "mesh.txt"
        result = run(runner, "mesh", "--theta-x", 3 * math.pi / 2, "--bulge", f"0.5,2,{QUARTER}", *SMALL, "--out", out)
        assert result.exit_code == 0, result.output
        assert out.read_text().splitlines()[-1].endswith("bulge")

    def test_bad_bulge_syntax(self, runner):
        result = run(runner, "mesh", "--bulge", "1,2")
        assert result.exit_code == 2
        assert "R_A,R_B,ANGLE" in result.output

    def test_bulge_outside_ambient_cone(self, runner):
        result = run(runner, "mesh", "--bulge", "0.5,2,3.0", *SMALL)
        assert result.exit_code == 1
        assert "bulge exits ambient cone" in result.stderr

    def test_domain_file(self, runner, isolated_config):
        domain = isolated_config / "domain.yaml"
        domain.write_text(
            yaml.safe_dump(
                {
                    "domain": {"theta": math.pi / 2, "r_min": 0.1, "r_max": 10.0},
                    "potential": {"w_bumps": [{"amplitude": 0.1, "r_c": 0.5, "r_d": 20.0, "phi1": 0.2, "phi2": 0.4}]},
                }
            )
        )
        result = run(runner, "mesh", "--domain", domain)
        assert result.exit_code == 1
        assert "truncation band" in result.stderr


class TestSolve:
    def test_quarter_plane(self, runner):
        result = run(runner, "solve", *SMALL)
        assert result.exit_code == 0, result.output
        record = json.loads(result.stdout)
        assert record["mu_h"] == pytest.approx(4.0 + (math.pi / math.log(100.0)) ** 2, rel=0.1)
        assert record["dofs"] == 21
        assert record["positivity_ok"] is True
        assert record["residual"] <= 1e-10

    def test_bs_check_stdout(self, runner):
        result = run(runner, "bs-check", *SMALL)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(StringIO(result.stdout))
        assert list(frame.columns) == ["lambda", "defect"]
        assert len(frame) == 5
        assert frame["lambda"].iloc[0] == 0.0
        mu_h = frame["lambda"].iloc[1] * 4.0
        assert frame["lambda"].iloc[-1] == pytest.approx(0.99 * mu_h)
        assert frame["defect"].max() <= 1e-8

    def test_bs_check_explicit_shifts(self, runner, isolated_config):
        out = isolated_config / "bs.csv"
        result = run(runner, "bs-check", *SMALL, "--lambda", 0, "--lambda", 1, "--out", out)
        assert result.exit_code == 0, result.output
        assert list(pd.read_csv(out)["lambda"]) == [0.0, 1.0]

    def test_bs_check_supercritical_shift(self, runner):
        result = run(runner, "bs-check", *SMALL, "--lambda", 50)
        assert result.exit_code == 1
        assert "supercritical shift" in result.stderr


class FailingExperiment(Experiment):
    name = "sweep"

    def run(self):
        error = ExperimentAssertionError("no strict gap at L=4.6")
        error.report = {"gaps": [-1.0]}
        raise error

    def return_data(self) -> dict:
        return self.report

    def write(self, out: Path) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verdict.json").write_text(json.dumps(self.report))
        return out


class TestExperimentCommands:
    def test_convergence(self, runner, isolated_config):
        config = isolated_config / "lab.yaml"
        config.write_text(yaml.safe_dump({"convergence": {"levels": 2}, "log_level": "WARNING"}))
        out = isolated_config / "conv"
        result = run(runner, "convergence", "-c", config, "--out", out)
        assert result.exit_code == 0, result.output
        assert len(pd.read_csv(out / "results.csv")) == 2
        assert json.loads((out / "verdict.json").read_text())["mu_exact"] == pytest.approx(
            4.0 + (math.pi / math.log(100.0)) ** 2
        )
        assert (out / "hardylab.log").exists()
        assert "convergence results" in result.stdout

    def test_assertion_failure_keeps_partial_results(self, runner, isolated_config, mocker):
        mocker.patch.dict(cli.EXPERIMENTS, {"sweep": FailingExperiment})
        out = isolated_config / "failed"
        result = run(runner, "sweep", "--out", out)
        assert result.exit_code == 1
        assert "assertion failed: no strict gap" in result.stderr
        assert json.loads((out / "verdict.json").read_text()) == {"gaps": [-1.0]}

    def test_every_experiment_is_a_command(self):
        assert set(cli.EXPERIMENTS) <= set(cli.main.commands)


class TestConfigCli:
    def test_init_set_get(self, runner, isolated_config):
        path = isolated_config / "lab.yaml"
        result = runner.invoke(config_main, ["init", "-o", str(path)])
        assert result.exit_code == 0, result.output
        assert path.exists()

        result = runner.invoke(config_main, ["init", "-o", str(path)])
        assert result.exit_code == 1

        result = runner.invoke(config_main, ["set", "solver.tol", "1e-9", "-c", str(path)])
        assert result.exit_code == 0, result.output

        result = runner.invoke(config_main, ["get", "solver.tol", "-c", str(path)])
        assert result.exit_code == 0
        assert "solver.tol = 1e-09" in result.stdout

    def test_get_missing_key(self, runner):
        result = runner.invoke(config_main, ["get", "solver.nope"])
        assert result.exit_code == 1
        assert "not found" in result.stdout

    def test_validate(self, runner, isolated_config):
        path = isolated_config / "lab.json"
        path.write_text('{"workers": 0}')
        result = runner.invoke(config_main, ["validate", "-c", str(path)])
        assert result.exit_code == 1
        assert "validation failed" in result.stdout

        path.write_text('{"workers": 2}')
        result = runner.invoke(config_main, ["validate", "-c", str(path)])
        assert result.exit_code == 0
        assert "Configuration is valid" in result.stdout

    def test_show_yaml(self, runner):
        result = runner.invoke(config_main, ["show", "--format", "yaml"])
        assert result.exit_code == 0
        assert "schema_version" in result.stdout

    def test_schema(self, runner):
        result = runner.invoke(config_main, ["schema"])
        assert result.exit_code == 0
        assert "schema_version" in result.stdout
