import csv
import subprocess
import sys
from pathlib import Path

import pytest

from sigmalliavin.cli import ConfigError, main, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_config_formats():
    cfg = parse_config("sigma e 0.2\nsigma 01 0.1\nrho = -0.5\nlocalization none\nweights h1, h3\n# c\n",
                       "greeks-convergence")
    assert cfg.sigma == {(): 0.2, (0, 1): 0.1}
    assert cfg.rho == -0.5 and cfg.localization is None and cfg.weights == ("h1", "h3")


@pytest.mark.parametrize("text", ["bogus 1", "rho abc", "payoff asian_put", "sigma 1", "weights h7"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text, "greeks-convergence")


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("sigma 2 0.1\nrho 0\n")
    assert main(["greeks-convergence", "--config", str(bad), "--out", str(tmp_path)]) == 2
    bad.write_text("rho 3\n")
    assert main(["greeks-convergence", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["greeks-convergence", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_validate_malliavin_writes_csv(tmp_path):
    assert main(["validate-malliavin", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "validate-malliavin.csv")))
    assert rows and all(r["status"] == "pass" for r in rows)
    assert set(rows[0]) == {"check_name", "status", "max_error"}


def test_greeks_csv_is_byte_identical(tmp_path):
    args = ["greeks-convergence", "--config", str(CONFIGS / "sv71.txt"), "--paths", "300", "--steps", "20"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("greeks-convergence.csv", "greeks-convergence-summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = list(csv.DictReader(open(a / "greeks-convergence.csv")))
    assert list(rows[0]) == ["n", "estimator_tag", "estimate", "std_error", "flag"]
    tags = {r["estimator_tag"] for r in rows}
    assert {"vanilla:h1", "digital:h4", "digital:fd"} <= tags


def test_refused_weights_are_reported(tmp_path):
    args = ["greeks-convergence", "--config", str(CONFIGS / "perfect_correlation.txt"), "--paths", "200",
            "--steps", "10", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = list(csv.DictReader(open(tmp_path / "greeks-convergence-summary.csv")))
    refused = {r["estimator_tag"]: r["flag"] for r in rows if r["flag"].startswith("refused")}
    assert refused == {"*:h3": "refused: RhoAtBoundary", "*:h4": "refused: RhoAtBoundary"}


def test_histogram_command(tmp_path):
    args = ["instability-histogram", "--config", str(CONFIGS / "instability.txt"), "--paths", "500",
            "--steps", "20", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = list(csv.DictReader(open(tmp_path / "instability-histogram.csv")))
    assert list(rows[0]) == ["bin_left", "bin_right", "count", "tag"]
    assert {r["tag"] for r in rows} == {"h1", "h2", "h3", "h4"}
    assert (tmp_path / "instability-histogram-divergence.csv").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "sigmalliavin", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "greeks-convergence" in out.stdout
