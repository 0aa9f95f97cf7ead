"""CLI commands for dlczsim."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from dlczsim import __version__
from dlczsim.angular_momentum import AngularMomentumError
from dlczsim.atomic_model import AtomicModelError
from dlczsim.config import (
    ConfigError,
    ScenarioConfig,
    apply_overrides,
    list_presets,
    load_config,
    load_preset,
)
from dlczsim.export import DataFileError, ExportError, write_curve, write_report
from dlczsim.models import CorrelationEstimate, CorrelationReport, CurveOutput, FitReport
from dlczsim.pair_amplitude import QuadratureError, UnsupportedRegimeError
from dlczsim.photon_statistics import PhotonStatisticsError
from dlczsim.pulses import PulseError
from dlczsim.raman_probe import RamanError
from dlczsim.scenarios import (
    pathway_table,
    run_correlations,
    run_decoherence_sweep,
    run_fit,
    run_raman,
    run_wavepacket,
)

app = typer.Typer(
    name="dlczsim",
    help="Photon-pair decoherence in Zeeman-broadened atomic ensembles",
    no_args_is_help=True,
)
console = Console()

EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_IO = 4

# Argument errors raised by the library once a config has been accepted.
_INPUT_ERRORS = (
    AngularMomentumError,
    AtomicModelError,
    PulseError,
    QuadratureError,
    PhotonStatisticsError,
    RamanError,
)

# Rows shown in terminal tables before eliding the middle.
PREVIEW_ROWS = 20

ConfigOption = typer.Option(None, "--config", "-c", help="Scenario TOML file")
PresetOption = typer.Option(None, "--preset", "-p", help="Built-in preset name")
OutOption = typer.Option(None, "--out", "-o", help="Output file (a JSON sidecar is written next to curves)")
ThreadsOption = typer.Option(None, "--threads", "-t", min=1, help="Worker threads")
JsonOption = typer.Option(False, "--json", "-j", help="Output as JSON")


def _print_error(message: str, code: int = 1) -> None:
    """Print an error message and exit."""
    console.print(f"[red]✗[/red] {message}")
    raise typer.Exit(code)


def _print_success(message: str) -> None:
    """Print a success message."""
    console.print(f"[green]✓[/green] {message}")


def _validation_message(error: ValidationError) -> str:
    lines = ["Invalid configuration:"]
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "\n".join(lines)


@contextmanager
def _guard() -> Iterator[None]:
    """Map library failures to messages and exit codes."""
    try:
        yield
    except ValidationError as e:
        _print_error(_validation_message(e), EXIT_CONFIG)
    except (ConfigError, *_INPUT_ERRORS) as e:
        _print_error(str(e), EXIT_CONFIG)
    except UnsupportedRegimeError as e:
        _print_error(f"Unsupported regime: {e}", EXIT_REGIME)
    except (ExportError, DataFileError, OSError) as e:
        _print_error(str(e), EXIT_IO)


def _load(config: Optional[Path], preset: Optional[str], **overrides) -> ScenarioConfig:
    if (config is None) == (preset is None):
        _print_error("Give exactly one of --config or --preset", EXIT_CONFIG)
    scenario = load_config(config) if config is not None else load_preset(preset)
    return apply_overrides(scenario, **overrides)


def _emit_curve(curve: CurveOutput, out: Optional[Path], json_output: bool, title: str) -> None:
    if out is not None:
        csv_path, json_path = write_curve(curve, out)
        if json_output:
            print(json.dumps({"csv": str(csv_path), "json": str(json_path), "rows": len(curve.rows)}, indent=2))
        else:
            _print_success(f"Wrote {len(curve.rows)} rows to {csv_path} (metadata in {json_path.name})")
        return
    if json_output:
        print(json.dumps(curve.model_dump(), indent=2))
        return

    table = Table(title=title)
    for column in curve.columns:
        table.add_column(column, justify="right")
    rows = curve.rows
    if len(rows) > PREVIEW_ROWS:
        half = PREVIEW_ROWS // 2
        for row in rows[:half]:
            table.add_row(*(f"{value:.6g}" for value in row))
        table.add_row(*("…" for _ in curve.columns))
        rows = rows[-half:]
    for row in rows:
        table.add_row(*(f"{value:.6g}" for value in row))
    console.print(table)
    details = "\n".join(f"[cyan]{key}[/cyan]: {value}" for key, value in sorted(curve.metadata.extra.items()))
    if details:
        console.print(Panel.fit(details, title=curve.metadata.scenario, border_style="blue"))


def _emit_report(report: BaseModel, out: Optional[Path], json_output: bool) -> bool:
    """Write or print a JSON report; returns False when the caller should render it."""
    if out is not None:
        write_report(report, out)
        _print_success(f"Wrote report to {out}")
        return True
    if json_output:
        print(json.dumps(report.model_dump(mode="json"), indent=2))
        return True
    return False


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show debug logging"),
) -> None:
    """Configure logging for every subcommand."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


@app.command()
def decoherence(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out: Optional[Path] = OutOption,
    backend: Optional[str] = typer.Option(None, "--backend", "-b", help="analytic, numeric or delta"),
    threads: Optional[int] = ThreadsOption,
    pathways: bool = typer.Option(False, "--pathways", help="Show the excitation pathways first"),
    json_output: bool = JsonOption,
) -> None:
    """Sweep the storage delay and compute p12."""
    with _guard():
        scenario = _load(config, preset, backend=backend, threads=threads, out=out)
        if pathways and not json_output:
            _print_pathways(scenario)
        with console.status(f"[cyan]Computing {scenario.name} with the {scenario.backend} backend...[/cyan]"):
            curve = run_decoherence_sweep(scenario)
        _emit_curve(curve, scenario.output.path, json_output, f"p12 versus delay ({scenario.name})")


def _print_pathways(scenario: ScenarioConfig) -> None:
    table = Table(title=f"Excitation pathways ({scenario.name})")
    for column in ("m_g", "m_s", "D", "d", "M"):
        table.add_column(column, justify="right")
    for record in pathway_table(scenario):
        strength = complex(record.strength_re, record.strength_im)
        table.add_row(
            f"{record.m_g:g}",
            f"{record.m_s:g}",
            f"{record.weight:.4f}",
            f"{strength.real:+.5f}{strength.imag:+.5f}j",
            f"{record.dephasing_index:g}",
        )
    console.print(table)


@app.command()
def wavepacket(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out: Optional[Path] = OutOption,
    json_output: bool = JsonOption,
) -> None:
    """Compute the binned two-photon wavepacket."""
    with _guard():
        scenario = _load(config, preset, out=out)
        with console.status(f"[cyan]Binning the wavepacket for {scenario.name}...[/cyan]"):
            curve = run_wavepacket(scenario)
        _emit_curve(curve, scenario.output.path, json_output, f"Wavepacket ({scenario.name})")


@app.command()
def correlations(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(None, "--seed", "-s", min=0, help="Monte-Carlo seed"),
    threads: Optional[int] = ThreadsOption,
    json_output: bool = JsonOption,
) -> None:
    """Report g11, g22, g12 and the Cauchy-Schwarz ratio."""
    with _guard():
        scenario = _load(config, preset, seed=seed, threads=threads, out=out)
        with console.status("[cyan]Evaluating photon statistics...[/cyan]"):
            report = run_correlations(scenario)
        if not _emit_report(report, scenario.output.path, json_output):
            _print_correlations(report)


def _print_correlations(report: CorrelationReport) -> None:
    table = Table(title=f"Correlations ({report.scenario}, chi = {report.chi:g})")
    table.add_column("Quantity", style="cyan")
    table.add_column("Enumerated", justify="right")
    if report.monte_carlo is not None:
        table.add_column(f"Monte Carlo ({report.monte_carlo.n_trials} trials)", justify="right")

    def cells(name: str) -> list[str]:
        row = [f"{getattr(report.analytic, name):.6g}"]
        if report.monte_carlo is not None:
            estimate: CorrelationEstimate = report.monte_carlo
            sigma = getattr(estimate, f"sigma_{name}", None)
            value = f"{getattr(estimate, name):.6g}"
            row.append(f"{value} ± {sigma:.2g}" if sigma else value)
        return row

    for name in ("g11", "g22", "g12", "R"):
        table.add_row(name, *cells(name))
    console.print(table)
    verdict = "[green]nonclassical[/green]" if report.analytic.nonclassical else "[yellow]classical[/yellow]"
    console.print(f"Cauchy-Schwarz: R = {report.analytic.R:.4g} → {verdict}")


@app.command()
def raman(
    config: Optional[Path] = ConfigOption,
    preset: Optional[str] = PresetOption,
    out: Optional[Path] = OutOption,
    json_output: bool = JsonOption,
) -> None:
    """Compute the Zeeman-broadened Raman spectrum."""
    with _guard():
        scenario = _load(config, preset, out=out)
        curve = run_raman(scenario)
        _emit_curve(curve, scenario.output.path, json_output, f"Raman spectrum ({scenario.name})")


@app.command()
def fit(
    theory: Path = typer.Argument(..., help="Decoherence curve written by 'dlczsim decoherence --out'"),
    data: Path = typer.Argument(..., help="Measured data CSV with columns dt_ns, g12, sigma"),
    out: Optional[Path] = OutOption,
    threshold: float = typer.Option(2.0, "--threshold", help="g12 level defining the coherence time"),
    json_output: bool = JsonOption,
) -> None:
    """Fit the scale factor xi of a theory curve to measured g12 data."""
    with _guard():
        report = run_fit(theory, data, threshold)
        if not _emit_report(report, out, json_output):
            _print_fit(report)


def _print_fit(report: FitReport) -> None:
    lines = [
        f"[cyan]xi[/cyan]: {report.fit.xi:.4e} ± {report.fit.sigma_xi:.2e}",
        f"[cyan]xi_th[/cyan]: {report.fit.xi_th:.4e}",
        f"[cyan]chi2[/cyan]: {report.fit.chi2:.4g} ({report.fit.n_points} points)",
    ]
    if report.coherence_time_ns is not None:
        lines.append(f"[cyan]coherence time[/cyan]: {report.coherence_time_ns:.1f} ns (g12 < {report.threshold:g})")
    else:
        lines.append(f"[dim]xi * p12 never drops below {report.threshold:g}[/dim]")
    if report.reference_xi is not None:
        lines.append(f"[dim]recorded xi: {report.reference_xi:.3g}[/dim]")
    if report.reference_xi_th is not None:
        lines.append(f"[dim]recorded xi_th: {report.reference_xi_th:.3g}[/dim]")
    console.print(Panel.fit("\n".join(lines), title=f"Fit of {report.theory_scenario}", border_style="blue"))


@app.command()
def presets(
    json_output: bool = JsonOption,
) -> None:
    """List the built-in scenario presets."""
    with _guard():
        loaded = [load_preset(name) for name in list_presets()]
    if json_output:
        output = [{"name": p.name, "version": p.version, "description": p.description} for p in loaded]
        print(json.dumps(output, indent=2))
        return
    table = Table(title=f"Presets (dlczsim {__version__})")
    table.add_column("Name", style="cyan")
    table.add_column("Version", justify="right")
    table.add_column("Description", style="white")
    for scenario in loaded:
        table.add_row(scenario.name, str(scenario.version), scenario.description)
    console.print(table)


def main() -> None:
    """Entry point for the CLI."""
    app()


if __name__ == "__main__":
    main()
