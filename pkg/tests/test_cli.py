"""Tests for the gmle command line."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from textwrap import dedent

import pytest

from gmle_mixtures import __version__
from gmle_mixtures.cli import main, parse_grid, read_paired_csv, read_sample_csv
from gmle_mixtures.errors import NoObservations

POINT_AT_2 = '{"atoms": [{"loc": {"type": "point", "x": 2}, "s": 0, "p": 1}]}'
POINT_AT_HALF = '{"atoms": [{"loc": {"type": "point", "x": 0.5}, "s": 1, "p": 1}]}'


@pytest.fixture
def data_file(tmp_path: Path):
    """Write a CSV file of observations."""

    def _create(content: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(dedent(content))
        return path

    return _create


def read_rows(text: str) -> list[dict[str, str]]:
    """Parse CSV output into dict rows."""
    return list(csv.DictReader(io.StringIO(text)))


class TestReaders:
    """Tests for the CSV readers and the grid parser."""

    def test_sample_with_header(self, data_file):
        """Test that a y header is skipped and values come back sorted."""
        sample = read_sample_csv(data_file("y\n3\n-1\n2\n"))
        assert sample.values.tolist() == [-1.0, 2.0, 3.0]

    def test_sample_without_header(self, data_file):
        """Test that a headerless file is read in full."""
        assert read_sample_csv(data_file("0.5\n-0.5\n")).n == 2

    @pytest.mark.parametrize("content", ["", "y\n", "\n\n"])
    def test_empty_sample(self, data_file, content):
        """Test that files without observations are rejected."""
        with pytest.raises(NoObservations, match="no observations"):
            read_sample_csv(data_file(content))

    def test_paired(self, data_file):
        """Test the two-column reader."""
        pairs = read_paired_csv(data_file("y1,y2\n1,2\n3,5\n"))
        assert pairs.means.tolist() == [1.5, 4.0]

    def test_paired_needs_two_columns(self, data_file):
        """Test that rows with one value are rejected."""
        with pytest.raises(ValueError, match="two numbers"):
            read_paired_csv(data_file("1\n2\n"))

    def test_parse_grid(self):
        """Test lo:hi:n parsing and its errors."""
        assert parse_grid("-1:1:5").tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
        with pytest.raises(ValueError, match="lo:hi:n"):
            parse_grid("1:2")
        with pytest.raises(ValueError, match="lo < hi"):
            parse_grid("1:0:5")


class TestFitCommand:
    """Tests for `gmle fit`."""

    def test_real_line(self, data_file, capsys):
        """Test that the real line returns the empirical measure with log-likelihood -n log n."""
        path = data_file("y\n-1.3\n0.2\n0.9\n2.4\n3.0\n")
        assert main(["fit", "--data", str(path), "--spec", "real-line"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert float(result["final_loglik"]) == pytest.approx(-5 * math.log(5))
        assert result["converged"] is True
        assert len(result["pi_hat"]["atoms"]) == 5

    def test_halfline_binary(self, data_file, tmp_path: Path):
        """Test the closed form written to a file."""
        path = data_file("-1.0\n-0.5\n0.3\n1.2\n")
        out = tmp_path / "fit.json"
        assert main(["fit", "--data", str(path), "--spec", "halfline-binary", "--out", str(out)]) == 0
        atoms = json.loads(out.read_text())["pi_hat"]["atoms"]
        assert [(a["loc"]["x"], a["s"], a["p"]) for a in atoms] == [
            ("-1", "0", "0.25"),
            ("-0.5", "0", "0.25"),
            ("0", "1", "0.5"),
        ]

    def test_empty_data(self, data_file, capsys):
        """Test that an empty file exits 1 with a single error line."""
        path = data_file("")
        assert main(["fit", "--data", str(path), "--spec", "real-line"]) == 1
        assert capsys.readouterr().err.strip() == "error: no observations"

    def test_missing_data_file(self, tmp_path: Path, capsys):
        """Test that a missing file is an input error."""
        assert main(["fit", "--data", str(tmp_path / "absent.csv"), "--spec", "real-line"]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_invalid_spec(self, data_file, capsys):
        """Test that spec validation errors are reported."""
        path = data_file("1\n")
        spec = '{"loc_lo": 1, "loc_hi": 0, "scale_hi": 1}'
        assert main(["fit", "--data", str(path), "--spec", spec]) == 1
        assert "error: spec: loc_lo must be below loc_hi" in capsys.readouterr().err

    def test_em_on_real_line_refused(self, data_file, capsys):
        """Test that forcing EM on the real line with s = 0 allowed is an input error."""
        path = data_file("1\n2\n")
        assert main(["fit", "--data", str(path), "--spec", "real-line", "--method", "em"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_not_converged(self, data_file, tmp_path: Path):
        """Test that hitting the iteration limit exits 2 and still writes the result."""
        path = data_file("-3.0\n2.5\n3.1\n")
        out = tmp_path / "fit.json"
        code = main(["fit", "--data", str(path), "--spec", "symmetric", "--max-em-iters", "1", "--out", str(out)])
        assert code == 2
        result = json.loads(out.read_text())
        assert result["converged"] is False
        assert result["pi_hat"]["symmetric"] is True

    def test_config_file_and_flag_precedence(self, data_file, tmp_path: Path):
        """Test that a flag overrides the same key from --config."""
        path = data_file("-3.0\n2.5\n3.1\n")
        config = tmp_path / "fit.yml"
        config.write_text("max_em_iters: 1\nloc_grid_size: 5\n")
        out = tmp_path / "fit.json"
        args = ["fit", "--data", str(path), "--spec", "symmetric", "--config", str(config), "--out", str(out)]
        assert main(args) == 2
        assert json.loads(out.read_text())["iterations"] == 1
        assert main([*args, "--max-em-iters", "2000"]) in (0, 2)
        assert json.loads(out.read_text())["iterations"] > 1

    def test_fit_output_feeds_eb(self, data_file, tmp_path: Path, capsys):
        """Test that a fit result is accepted wherever a mixing distribution is expected."""
        path = data_file("-1.0\n-0.5\n0.3\n1.2\n")
        out = tmp_path / "fit.json"
        assert main(["fit", "--data", str(path), "--spec", "halfline-binary", "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["eb", "--mixing", str(out), "--grid", "-2:2:5"]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 5

    def test_replicated(self, data_file, capsys):
        """Test that --replicated reads pairs and fits continuous components."""
        path = data_file("y1,y2\n-2.1,-1.7\n-1.9,-2.4\n2.2,1.6\n1.8,2.3\n2.05,1.95\n")
        code = main(["fit", "--data", str(path), "--spec", "real-line", "--replicated", "--max-em-iters", "50"])
        assert code in (0, 2)
        result = json.loads(capsys.readouterr().out)
        assert all(float(a["s"]) > 0 for a in result["pi_hat"]["atoms"])

    def test_independent_variant(self, data_file, capsys):
        """Test the independent variant on a sample with no positive value."""
        path = data_file("-2\n-1\n")
        assert main(["fit", "--data", str(path), "--spec", "halfline", "--variant", "independent"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert float(result["final_loglik"]) == pytest.approx(-2 * math.log(2))


class TestLimitsCommand:
    """Tests for `gmle limits`."""

    def test_eta(self, capsys):
        """Test that the reference case prints eta = 0.046 to 12 decimals."""
        assert main(["limits", "--case", "eta", "--params", '{"c": 1.959964, "b": 1}']) == 0
        out = capsys.readouterr().out.strip()
        assert len(out.split(".")[1]) == 12
        assert 0.045 <= float(out) <= 0.047

    def test_missing_parameter(self, capsys):
        """Test that a missing key is an input error."""
        assert main(["limits", "--case", "eta", "--params", '{"c": 2}']) == 1
        assert capsys.readouterr().err.strip() == "error: missing key 'b'"

    def test_invalid_case(self):
        """Test that an unknown case is a usage error with exit code 1."""
        with pytest.raises(SystemExit) as excinfo:
            main(["limits", "--case", "quarter-plane"])
        assert excinfo.value.code == 1

    def test_independent_is_monotone(self, capsys):
        """Test that the independent Gaussian limit column is nondecreasing."""
        assert main(["limits", "--case", "independent"]) == 0
        rows = read_rows(capsys.readouterr().out)
        values = [float(r["limit_cdf"]) for r in rows]
        assert len(values) == 101
        assert all(a <= b for a, b in zip(values, values[1:], strict=False))

    def test_halfline_point_mass(self, capsys):
        """Test that a truth at -1 is its own half-line limit."""
        assert main(["limits", "--case", "halfline", "--params", '{"truth": {"point": -1}}', "--grid", "-3:3:13"]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert {r["gap"] for r in rows} == {"0"}

    def test_halfline_gauss_gap(self, capsys):
        """Test the gap of 0.25 at zero for a standard normal truth."""
        assert main(["limits", "--case", "halfline", "--grid", "-1:1:3"]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert float(rows[1]["gap"]) == pytest.approx(0.25)

    @pytest.mark.parametrize("grid_args", [["--grid", "-4:4:100"], ["--grid=-4:4:100"]])
    def test_negative_grid_start(self, capsys, grid_args):
        """Test that a grid starting below zero is read as a value, with or without '='."""
        assert main(["limits", "--case", "independent", *grid_args]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert len(rows) == 100
        assert float(rows[0]["y"]) == -4.0
        assert float(rows[-1]["y"]) == 4.0

    def test_symmetric_bands(self, tmp_path: Path):
        """Test that grid points inside a band are written as nan."""
        out = tmp_path / "limits.csv"
        params = '{"c": 1.959964, "b": 1}'
        args = ["limits", "--case", "symmetric", "--params", params, "--grid", "1.9:1.96:7", "--out", str(out)]
        assert main(args) == 0
        rows = read_rows(out.read_text())
        by_y = {round(float(r["y"]), 2): r["limit_cdf"] for r in rows}
        assert by_y[1.93] == "nan"
        assert by_y[1.96] == "1"
        assert by_y[1.9] != "nan"


class TestOtherCommands:
    """Tests for simulate, wrap-demo, eb and experiment."""

    def test_simulate_point_mass(self, capsys):
        """Test that a point mass at 2 gives a constant column."""
        assert main(["simulate", "--mixing", POINT_AT_2, "-n", "4", "--seed", "1"]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert [float(r["y"]) for r in rows] == [2.0] * 4

    def test_simulate_seeded(self, tmp_path: Path):
        """Test that the same seed writes the same file."""
        mixing = '{"atoms": [{"loc": {"type": "point", "x": 0}, "s": 1, "p": 1}]}'
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--mixing", mixing, "-n", "20", "--seed", "5", "--out", str(first)]) == 0
        assert main(["simulate", "--mixing", mixing, "-n", "20", "--seed", "5", "--out", str(second)]) == 0
        assert first.read_text() == second.read_text()

    def test_simulate_bad_mixing(self, capsys):
        """Test that weights not summing to one are an input error."""
        mixing = '{"atoms": [{"loc": {"type": "point", "x": 0}, "s": 1, "p": 0.5}]}'
        assert main(["simulate", "--mixing", mixing, "-n", "3"]) == 1
        assert "weights must sum to 1" in capsys.readouterr().err

    def test_wrap_demo(self, capsys):
        """Test that the wrapped distribution has the same law of Y."""
        assert main(["wrap-demo", "--seed", "3"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert float(result["max_density_gap"]) <= 1e-12
        assert float(result["max_cdf_gap"]) <= 1e-12

    def test_wrap_demo_moves_large_scales(self, capsys):
        """Test that an atom above the midpoint becomes a blob at a smaller scale."""
        mixing = '{"atoms": [{"loc": {"type": "point", "x": 0}, "s": 2.5, "p": 1}]}'
        assert main(["wrap-demo", "--mixing", mixing]) == 0
        result = json.loads(capsys.readouterr().out)
        (atom,) = result["pi_wrapped"]["atoms"]
        assert atom["loc"]["type"] == "blob"
        assert float(atom["s"]) == 0.5
        assert result["scale_marginal_distance"] == "1"

    def test_wrap_demo_scale_out_of_range(self, capsys):
        """Test that an atom outside [a_bar, b_bar] is an input error."""
        assert main(["wrap-demo", "--mixing", POINT_AT_2, "--a-bar", "1", "--b-bar", "3"]) == 1
        assert "outside" in capsys.readouterr().err

    def test_eb(self, capsys):
        """Test that a single point location gives a constant posterior mean."""
        assert main(["eb", "--mixing", POINT_AT_HALF, "--grid", "-1:1:3"]) == 0
        rows = read_rows(capsys.readouterr().out)
        assert [float(r["posterior_mean"]) for r in rows] == pytest.approx([0.5, 0.5, 0.5])

    def test_eb_bad_grid(self, capsys):
        """Test that a malformed grid is an input error."""
        assert main(["eb", "--mixing", POINT_AT_HALF, "--grid", "1:0:5"]) == 1
        assert capsys.readouterr().err.startswith("error: grid")

    def test_experiment(self, tmp_path: Path):
        """Test that an experiment writes its per-cell CSV and summary."""
        config = tmp_path / "experiment.yml"
        config.write_text(
            dedent("""
                truth:
                  atoms:
                    - loc: {type: point, x: 0}
                      s: 1
                      p: 1
                spec: real-line
                sample_sizes: [10, 20]
                replications: 2
            """)
        )
        csv_out, json_out = tmp_path / "out" / "cells.csv", tmp_path / "out" / "summary.json"
        args = ["experiment", "--config", str(config), "--out-csv", str(csv_out), "--out-json", str(json_out)]
        assert main(args) == 0
        assert len(read_rows(csv_out.read_text())) == 4
        assert [e["n"] for e in json.loads(json_out.read_text())["sample_sizes"]] == [10, 20]

        assert main([*args, "--replications", "1", "--seed", "9"]) == 0
        assert len(read_rows(csv_out.read_text())) == 2

    def test_experiment_invalid_config(self, tmp_path: Path, capsys):
        """Test that validation errors are reported together."""
        config = tmp_path / "experiment.yml"
        config.write_text("spec: nowhere\nsample_sizes: [5, 1]\n")
        assert main(["experiment", "--config", str(config)]) == 1
        err = capsys.readouterr().err
        assert "Missing required experiment key: truth" in err
        assert "Unknown spec preset: nowhere" in err
        assert "sample_sizes must be strictly increasing" in err

    def test_version(self, capsys):
        """Test that --version prints the package version."""
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out
