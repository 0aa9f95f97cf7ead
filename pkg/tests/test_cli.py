"""Unit tests for cli module."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from dlczsim.cli import EXIT_CONFIG, EXIT_IO, EXIT_REGIME, app

runner = CliRunner()

TRAPEZOID_ANALYTIC = """
name = "trapezoid-analytic"
backend = "analytic"

[field]
K_hz = 1.1e6

[write]
shape = "trapezoid"
fwhm_ns = 150.0
rise_ns = 20.0
detuning_hz = 3.0e9

[read]
shape = "trapezoid"
fwhm_ns = 120.0
rise_ns = 20.0
detuning_hz = 3.0e9

[sweep]
delta_t_ns = [200.0]
"""


@pytest.fixture
def scenario_file(tmp_path: Path):
    def write(text: str) -> Path:
        path = tmp_path / "scenario.toml"
        path.write_text(text, encoding="utf-8")
        return path

    return write


class TestPresetsCommand:
    """Tests for the presets command."""

    def test_table(self):
        """Should list every preset."""
        result = runner.invoke(app, ["presets"])
        assert result.exit_code == 0
        assert "fig7a" in result.output

    def test_json(self):
        """Should emit machine-readable output."""
        result = runner.invoke(app, ["presets", "--json"])
        assert result.exit_code == 0
        names = [entry["name"] for entry in json.loads(result.output)]
        assert "fig9-pumped-sigma" in names


class TestDecoherenceCommand:
    """Tests for the decoherence command."""

    def test_json_curve(self):
        """A delta-mode preset prints its curve as JSON."""
        result = runner.invoke(app, ["decoherence", "--preset", "fig9-pumped-sigma", "--json"])
        assert result.exit_code == 0
        curve = json.loads(result.output)
        assert curve["columns"] == ["dt_ns", "p12", "p12_normalized"]
        assert len(curve["rows"]) == 51

    def test_writes_csv_and_sidecar(self, tmp_path: Path):
        """--out writes the table and its JSON sidecar."""
        out = tmp_path / "p12.csv"
        result = runner.invoke(app, ["decoherence", "-p", "fig9-pumped-lin", "--out", str(out)])
        assert result.exit_code == 0
        assert out.read_text(encoding="utf-8").startswith("# scenario: fig9-pumped-lin\n")
        assert json.loads((tmp_path / "p12.json").read_text(encoding="utf-8"))["rows"] == 51

    def test_pathways_table(self):
        """--pathways lists the excitation pathways."""
        result = runner.invoke(app, ["decoherence", "-p", "fig9-pumped-sigma", "--pathways"])
        assert result.exit_code == 0
        assert "Excitation pathways" in result.output

    def test_unsupported_regime(self, scenario_file):
        """The closed form refuses trapezoid pulses with exit code 3."""
        result = runner.invoke(app, ["decoherence", "--config", str(scenario_file(TRAPEZOID_ANALYTIC))])
        assert result.exit_code == EXIT_REGIME
        assert "Unsupported regime" in result.output

    def test_invalid_config(self, scenario_file):
        """Unknown keys exit with code 2."""
        path = scenario_file(TRAPEZOID_ANALYTIC.replace("K_hz", "K_Hz"))
        result = runner.invoke(app, ["decoherence", "--config", str(path)])
        assert result.exit_code == EXIT_CONFIG
        assert "Invalid configuration" in result.output

    def test_invalid_backend_override(self):
        """A bad --backend value is a configuration error."""
        result = runner.invoke(app, ["decoherence", "-p", "fig7a", "--backend", "magic"])
        assert result.exit_code == EXIT_CONFIG

    def test_needs_one_source(self, scenario_file):
        """Exactly one of --config and --preset is required."""
        assert runner.invoke(app, ["decoherence"]).exit_code == EXIT_CONFIG
        path = scenario_file(TRAPEZOID_ANALYTIC)
        both = runner.invoke(app, ["decoherence", "-c", str(path), "-p", "fig7a"])
        assert both.exit_code == EXIT_CONFIG

    def test_unknown_preset(self):
        """An unknown preset exits with code 2."""
        result = runner.invoke(app, ["decoherence", "-p", "fig99"])
        assert result.exit_code == EXIT_CONFIG
        assert "Unknown preset" in result.output

    def test_unreadable_config(self, tmp_path: Path):
        """A config file that cannot be read exits with code 4."""
        result = runner.invoke(app, ["decoherence", "-c", str(tmp_path / "absent.toml")])
        assert result.exit_code == EXIT_IO
        directory = runner.invoke(app, ["correlations", "-c", str(tmp_path)])
        assert directory.exit_code == EXIT_IO


class TestOtherCommands:
    """Tests for wavepacket, correlations, raman and fit."""

    def test_correlations_json(self):
        """The correlations preset reports the ideal-source values."""
        result = runner.invoke(app, ["correlations", "-p", "correlations", "--json"])
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["analytic"]["g12"] == pytest.approx(11.0)
        assert report["seed"] == 2024

    def test_raman_table(self):
        """The Raman command renders a table."""
        result = runner.invoke(app, ["raman", "-p", "fig3-bias"])
        assert result.exit_code == 0
        assert "fwhm_hz" in result.output

    def test_wavepacket_out(self, tmp_path: Path):
        """The wavepacket command writes long-form rows."""
        out = tmp_path / "wave.csv"
        result = runner.invoke(app, ["wavepacket", "-p", "fig8d", "-o", str(out)])
        assert result.exit_code == 0
        assert "t1_ns,t2_ns,value" in out.read_text(encoding="utf-8")

    def test_fit_missing_theory(self, tmp_path: Path):
        """Unreadable inputs exit with code 4."""
        data = tmp_path / "data.csv"
        data.write_text("dt_ns,g12,sigma\n0,10,1\n", encoding="utf-8")
        result = runner.invoke(app, ["fit", str(tmp_path / "absent.csv"), str(data)])
        assert result.exit_code == EXIT_IO

    def test_fit_round_trip(self, tmp_path: Path):
        """A written curve can be fitted from the command line."""
        theory = tmp_path / "p12.csv"
        assert runner.invoke(app, ["decoherence", "-p", "fig9-pumped-lin", "-o", str(theory)]).exit_code == 0
        rows = [line for line in theory.read_text(encoding="utf-8").splitlines() if line[0].isdigit()]
        dt, p12 = (float(v) for v in rows[0].split(",")[:2])
        data = tmp_path / "data.csv"
        data.write_text(f"dt_ns,g12,sigma\n{dt!r},{5e68 * p12!r},0.1\n", encoding="utf-8")

        result = runner.invoke(app, ["fit", str(theory), str(data), "--json"])
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["fit"]["xi"] == pytest.approx(5e68, rel=1e-9)
        assert report["theory_scenario"] == "fig9-pumped-lin"
