import io
import json

import pandas as pd
import pytest
from scipy import stats

from cli import RunConfig, main, parse_list, parse_q
from dist_core import make_pmf
from settings import ConfigError


def read_stdout_csv(text):
    assert text.startswith("# config: ")
    return pd.read_csv(io.StringIO(text), comment="#")


class TestChiCommand:
    def test_passes_with_csv_on_stdout(self, capsys):
        assert main(["chi"]) == 0
        captured = capsys.readouterr()
        df = read_stdout_csv(captured.out)
        assert df["holds"].all()
        assert "PASS" in captured.err

    def test_json_to_file(self, tmp_path, capsys):
        out = tmp_path / "chi.json"
        assert main(["chi", "--format", "json", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["config"]["command"] == "chi"
        assert doc["result"]["unit"] == "bits"
        assert doc["result"]["bounds_hold"]
        assert "PASS" in capsys.readouterr().out

    def test_structured_text_alias(self, tmp_path):
        out = tmp_path / "chi.json"
        assert main(["chi", "--format", "structured-text", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["config"]["format"] == "json"

    def test_output_is_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["chi", "--out", str(a)])
        main(["chi", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert "a.csv" not in a.read_text()


class TestDistributionCommands:
    def test_entropy_of_file(self, triangle, pmf_file, capsys):
        assert main(["entropy", "--pmf", pmf_file(triangle)]) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["entropy"][0] == pytest.approx(stats.entropy(triangle.probs), abs=1e-12)
        assert df["unit"][0] == "nats"

    def test_entropy_in_bits(self, triangle, pmf_file, capsys):
        assert main(["entropy", "--pmf", pmf_file(triangle), "--base", "2"]) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["entropy"][0] == pytest.approx(stats.entropy(triangle.probs, base=2), abs=1e-12)
        assert df["unit"][0] == "bits"

    def test_pmf_convolve(self, triangle, pmf_file, capsys):
        args = ["pmf", "--pmf", pmf_file(triangle), "--pmf2", pmf_file(make_pmf(1, [1.0]), "shift.json"),
                "--op", "convolve"]
        assert main(args) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["x"].tolist() == [1, 2, 3]
        assert df["probability"].tolist() == pytest.approx([0.2, 0.5, 0.3])

    def test_check_lc_finding(self, pmf_file, capsys):
        assert main(["check-lc", "--pmf", pmf_file(make_pmf(0, [0.4, 0.1, 0.5]))]) == 1
        df = read_stdout_csv(capsys.readouterr().out)
        assert not df["holds"][0]

    def test_check_ulc_of_compound_poisson_rate(self, capsys):
        assert main(["check-ulc", "--lambda", "2.0"]) == 0
        capsys.readouterr()
        assert main(["check-lc", "--lambda", "3.0", "--q", "uniform12"]) == 1

    def test_thresholds(self, capsys):
        assert main(["thresholds", "--q", "uniform12", "--n", "2", "--lambda", "4.5"]) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["cbern_lc_threshold"][0] == pytest.approx(2 / 3)
        assert df["cpo_necessary_lambda"][0] == pytest.approx(4.0)
        assert df["general_binomial_threshold"][0] == pytest.approx(4 / 3)
        assert df["nec2_holds"][0]

    def test_panjer_diff(self, capsys):
        assert main(["panjer-diff", "--lambda", "1", "--q", "uniform12", "--nmax", "60"]) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["max_abs_diff"][0] <= 1e-10
        assert df["agrees"][0]


class TestSweepCommands:
    def test_maxent_binomial_counterexample(self, capsys):
        args = ["maxent-binomial", "--n", "2", "--lambda", "0.01", "--q", "uniform12",
                "--grid-resolution", "40", "--count", "0", "--base", "2"]
        assert main(args) == 1
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["witness"].any()

    def test_maxent_poisson(self, capsys):
        args = ["maxent-poisson", "--lambda", "0.5", "--q", "point:1", "--grid-resolution", "6", "--count", "2"]
        assert main(args) == 0
        assert not read_stdout_csv(capsys.readouterr().out)["witness"].any()

    def test_scan_conjecture_two_point(self, capsys):
        assert main(["scan-conjecture", "--family", "two-point", "--lambda-grid", "8,12"]) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert df["holds"].all()

    def test_energy_t_curve(self, capsys):
        args = ["energy-t-curve", "--p", "0.7,0.3", "--q", "uniform12", "--t-grid", "linspace:0:0.2:5"]
        assert main(args) == 0
        df = read_stdout_csv(capsys.readouterr().out)
        assert list(df["t"]) == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])


class TestInputErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["entropy", "--lambda", "1", "--q", "bogus"],
            ["entropy", "--lambda", "1", "--q", "two-point:abc"],
            ["entropy"],
            ["panjer-diff", "--lambda", "1", "--q", "uniform12"],
            ["energy-t-curve", "--q", "uniform12"],
            ["maxent-binomial", "--n", "2", "--lambda", "2.5", "--q", "uniform12"],
            ["check-lc", "--p", "0.5,x"],
        ],
    )
    def test_exit_status_two(self, argv, capsys):
        assert main(argv) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_pmf_file(self, tmp_path, capsys):
        assert main(["entropy", "--pmf", str(tmp_path / "missing.json")]) == 2

    def test_unknown_format_is_rejected_by_parser(self):
        with pytest.raises(SystemExit):
            main(["chi", "--format", "xml"])


class TestParsing:
    def test_parse_q(self):
        assert parse_q("uniform12").inner.probs.tolist() == [0.5, 0.5]
        assert parse_q("uniform:1:4").last == 4
        assert parse_q("two-point:0.8")(2) == pytest.approx(0.2)
        assert parse_q("point:3")(3) == 1.0
        assert parse_q("geometric:0.5")(1) == pytest.approx(0.5)
        with pytest.raises(ConfigError):
            parse_q(None)

    def test_parse_list(self):
        assert parse_list("0.1, 0.2,0.3") == [0.1, 0.2, 0.3]
        assert parse_list("linspace:0:1:3") == [0.0, 0.5, 1.0]
        assert parse_list(None) is None
        with pytest.raises(ConfigError):
            parse_list("linspace:0:1")

    def test_run_config_validation(self):
        with pytest.raises(ConfigError):
            RunConfig("dance")
        with pytest.raises(ConfigError):
            RunConfig("chi", tol=0.0)
        assert "defaults" in RunConfig("chi").as_dict()
        assert "out" not in RunConfig("chi", out="x.csv").as_dict()


def test_entropy_of_point_mass_is_zero(pmf_file, capsys):
    assert main(["entropy", "--pmf", pmf_file(make_pmf(0, [1.0]))]) == 0
    assert read_stdout_csv(capsys.readouterr().out)["entropy"][0] == 0.0


def test_panjer_diff_reference_case(capsys):
    assert main(["panjer-diff", "--lambda", "1", "--q", "uniform12", "--nmax", "100"]) == 0
    assert read_stdout_csv(capsys.readouterr().out)["max_abs_diff"][0] <= 1e-10


def test_energy_curve_command(capsys):
    args = ["energy-curve", "--p", "0.5,0.5,0.5", "--q", "two-point:0.8", "--alpha-grid", "linspace:0:1:5",
            "--tail-eps", "1e-14"]
    assert main(args) == 0
    df = read_stdout_csv(capsys.readouterr().out)
    assert df.columns[0] == "alpha"
    assert (df["value"].diff().dropna() <= 1e-9).all()


def test_score_command(capsys):
    assert main(["score", "--p", "0.5,0.5", "--q", "two-point:0.8"]) == 0
    df = read_stdout_csv(capsys.readouterr().out)
    assert (df["score"].diff().dropna() <= 1e-10).all()
