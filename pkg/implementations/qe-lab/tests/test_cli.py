# tests/test_cli.py

import csv
import json

import pytest
from qelab.errors import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK
from qelab.main import build_parser, config_from_args, main
from qelab.schemas.run_config import RunConfig
from qelab.services import reporting


def run_json(capsys, *argv):
    code = main([*argv, "--json"])
    return code, json.loads(capsys.readouterr().out)


def test_zoo_lists_catalog(capsys):
    """Test the zoo command lists the catalog and the ends."""
    code, report = run_json(capsys, "zoo")
    assert code == EXIT_OK
    names = [entry["name"] for entry in report["catalog"]]
    assert len(names) >= 12
    assert "thm1-iii" in names
    assert "schwarzschild-end" in names


def test_zoo_dimension_filter(capsys):
    code, report = run_json(capsys, "zoo", "--dim", "1")
    assert code == EXIT_OK
    assert report["catalog"]
    assert all(entry["dimension"] == 1 for entry in report["catalog"])


def test_zoo_text_output(capsys):
    """Test the text report ends with the overall verdict."""
    assert main(["zoo"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "table1-line-exp" in out
    assert out.strip().endswith("overall: PASS")


def test_verify_passes(capsys):
    code, report = run_json(capsys, "verify", "table1-line-exp", "--m", "2")
    assert code == EXIT_OK
    assert report["passed"]
    kinds = {check["kind"] for check in report["checks"]}
    assert {"residual", "dichotomy"} <= kinds


def test_verify_rejects_invalid_parameters(capsys):
    """Test m = 1 on the (iii) family exits with the configuration code."""
    assert main(["verify", "thm1-iii", "--m", "1"]) == EXIT_CONFIG


def test_unknown_config_key_exits_with_config_code(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"command": "verify", "example": "euclid3", "bogus": 1}))
    assert main(["verify", "euclid3", "--config", str(path)]) == EXIT_CONFIG


def test_dim_of_product(capsys):
    code, report = run_json(capsys, "dim", "table1-product")
    assert code == EXIT_OK
    assert report["checks"][0]["dim_estimate"] == 2


@pytest.mark.parametrize(
    "argv", [["asympt", "euclid-end"], ["asympt", "synthetic-end", "--tau", "0.8"]]
)
def test_asympt_passes(capsys, argv):
    code, report = run_json(capsys, *argv)
    assert code == EXIT_OK
    assert report["checks"][0]["kind"] == "decay-chain"


def test_asympt_reports_failed_growth(capsys):
    """Test a bounded potential fails the growth bound and exits with the check code."""
    code, report = run_json(capsys, "asympt", "euclid-end", "--potential", "const")
    assert code == EXIT_CHECK_FAILED
    growth = next(c for c in report["checks"] if c["kind"] == "growth")
    assert not growth["lower_ok"]


def test_profile_csv(tmp_path, capsys):
    """Test the profile command writes CSV rows to --out."""
    out = tmp_path / "cosh.csv"
    argv = ["profile", "thm1-iii", "--m", "2", "--a", "1", "--param", "t_max=2"]
    code = main([*argv, "--out", str(out)])
    assert code == EXIT_OK
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "f", "fp", "fpp", "residual"]
    assert float(rows[-1][0]) == pytest.approx(2.0)
    assert "thm1-iii" in capsys.readouterr().out


def test_report_written_to_out(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["asympt", "euclid-end", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["command"] == "asympt"


def test_dim_on_the_line_says_it_is_assumed(capsys):
    """Test a 1D estimate is reported as assumed rather than measured."""
    code, report = run_json(capsys, "dim", "table1-line-exp", "--m", "2")
    assert code == EXIT_OK
    assert report["checks"][0]["measured"] is False
    assert main(["dim", "table1-line-exp", "--m", "2"]) == EXIT_OK
    assert "assumed, not measured" in capsys.readouterr().out


def test_json_is_stable_without_wall_time():
    """Test two runs of the same configuration serialize identically."""
    config = RunConfig.build(
        command="dim", example="table1-line-exp", params={"m": 2}, seed=3
    )
    first = reporting.to_json(reporting.execute(config), include_wall_time=False)
    second = reporting.to_json(reporting.execute(config), include_wall_time=False)
    assert first == second
    assert "wall_time" not in first


def test_flags_override_config_file(tmp_path):
    """Test command-line values win over the config document."""
    path = tmp_path / "run.json"
    document = {
        "command": "verify",
        "example": "thm1-iii",
        "params": {"m": 2, "a": 1.5},
        "seed": 4,
    }
    path.write_text(json.dumps(document))
    args = build_parser().parse_args(
        ["verify", "thm1-iii", "--config", str(path), "--a", "2", "--tol", "1e-6"]
    )
    config = config_from_args(args)
    assert config.params == {"m": 2.0, "a": 2.0}
    assert config.seed == 4
    assert config.tolerances.residual == 1e-6
