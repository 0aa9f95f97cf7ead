"""Scenario drivers: turn a validated config into curves and reports."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from dlczsim import __version__
from dlczsim.config import ScenarioConfig, config_hash
from dlczsim.export import read_curve_csv, read_g12_data
from dlczsim.models import (
    CorrelationReport,
    CurveMetadata,
    CurveOutput,
    FitReport,
    PathwayRecord,
)
from dlczsim.pair_amplitude import asymptotic_p12, joint_probability_p12, wavepacket_grid
from dlczsim.photon_statistics import (
    TwoModeState,
    coherence_time,
    correlation_functions,
    scale_fit_xi,
    simulate_trials,
)
from dlczsim.raman_probe import diffusion_time, fwhm, zeeman_spectrum

logger = logging.getLogger(__name__)


def _metadata(config: ScenarioConfig, kind: str, units: dict[str, str], **extra) -> CurveMetadata:
    return CurveMetadata(
        scenario=config.name,
        kind=kind,
        version=__version__,
        preset_version=config.version,
        config_hash=config_hash(config),
        backend=config.backend if kind == "decoherence" else None,
        units=units,
        extra={key: repr(value) if isinstance(value, float) else str(value) for key, value in extra.items()},
    )


def pathway_table(config: ScenarioConfig) -> list[PathwayRecord]:
    """List the excitation pathways of the configured ensemble."""
    ensemble = config.ensemble()
    ratio = ensemble.scheme.g_ratio
    return [
        PathwayRecord(
            m_g=p.m_g,
            m_s=p.m_s,
            weight=p.weight,
            strength_re=p.strength.real,
            strength_im=p.strength.imag,
            dephasing_index=p.dephasing_index(ratio),
        )
        for p in ensemble.pathways
    ]


def run_decoherence_sweep(config: ScenarioConfig) -> CurveOutput:
    """Evaluate p12 over the configured storage delays.

    Delays are evaluated on ``config.threads`` workers and assembled in
    index order. When ``fit.data`` is set the curve is scaled onto the data
    and a ``g12_model`` column is added; the metadata then records the fitted
    xi and the delay where the model crosses ``fit.threshold``.

    Raises:
        ConfigError: If the scenario lacks pulses or a sweep.
        UnsupportedRegimeError: If the analytic backend is outside its regime.
    """
    sweep = config.require("sweep")
    delays = sweep.delays()
    ensemble = config.ensemble()
    K = config.gradient_parameter()
    quad = config.quadrature
    # populate cached pathways before the workers share the ensemble
    ensemble.groups

    def evaluate(index: int) -> float:
        timeline = config.timeline(delays[index])
        return joint_probability_p12(
            ensemble, K, timeline, config.backend, quad.gl_order, quad.grid_step_ns
        )

    logger.info("Sweeping %d delays with the %s backend", len(delays), config.backend)
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        values = list(pool.map(evaluate, range(len(delays))))

    p12 = np.array(values)
    peak = float(p12.max())
    normalized = p12 / peak if peak > 0 else np.zeros_like(p12)
    plateau = asymptotic_p12(
        ensemble, K, config.timeline(delays[-1]), config.backend, quad.gl_order, quad.grid_step_ns
    )

    columns = ["dt_ns", "p12", "p12_normalized"]
    table = [delays, p12, normalized]
    units = {"dt_ns": "ns", "p12": "probability (C = 1)", "p12_normalized": "dimensionless"}
    extra: dict[str, object] = {
        "K_hz": K,
        "p12_asymptotic": plateau,
        "pathways": len(ensemble.pathways),
    }
    if config.fit.reference_xi is not None:
        extra["reference_xi"] = config.fit.reference_xi
    if config.fit.reference_xi_th is not None:
        extra["reference_xi_th"] = config.fit.reference_xi_th

    if config.fit.data is not None:
        dt, g12, sigma = read_g12_data(config.fit.data)
        fit = scale_fit_xi(delays, p12, dt, g12, sigma)
        columns.append("g12_model")
        table.append(fit.xi * p12)
        units["g12_model"] = "dimensionless"
        extra.update(xi=fit.xi, sigma_xi=fit.sigma_xi, xi_th=fit.xi_th)
        extra.update(
            threshold=config.fit.threshold,
            coherence_time_ns=coherence_time(delays, fit.xi * p12, config.fit.threshold),
        )

    rows = [list(map(float, row)) for row in zip(*table)]
    return CurveOutput(metadata=_metadata(config, "decoherence", units, **extra), columns=columns, rows=rows)


def run_wavepacket(config: ScenarioConfig) -> CurveOutput:
    """Binned two-photon wavepacket as long-form (t1_ns, t2_ns, value) rows."""
    settings = config.require("wavepacket")
    timeline = config.timeline(settings.delta_t_ns)
    K = config.gradient_parameter()
    grid = wavepacket_grid(config.ensemble(), K, timeline, settings.bin_ns, settings.subsamples)

    t1 = grid.t1_centers
    t2 = grid.t2_centers
    rows = [
        [float(t1[i]), float(t2[j]), float(grid.values[i, j])]
        for i in range(t1.size)
        for j in range(t2.size)
    ]
    units = {"t1_ns": "ns", "t2_ns": "ns", "value": "probability density (C = 1)"}
    metadata = _metadata(
        config, "wavepacket", units, K_hz=K, delta_t_ns=settings.delta_t_ns, bin_ns=settings.bin_ns
    )
    return CurveOutput(metadata=metadata, columns=["t1_ns", "t2_ns", "value"], rows=rows)


def run_correlations(config: ScenarioConfig) -> CorrelationReport:
    """Enumerated correlation functions, plus a seeded simulation when trials are requested."""
    settings = config.require("correlations")
    dist = TwoModeState(chi=settings.chi, n_max=settings.n_max).distribution()
    analytic = correlation_functions(dist, settings.detection)
    simulated = None
    if settings.n_trials > 0:
        simulated = simulate_trials(
            dist,
            settings.detection,
            settings.n_trials,
            config.seed,
            workers=config.threads,
            block_size=settings.block_size,
        )
    return CorrelationReport(
        scenario=config.name,
        config_hash=config_hash(config),
        chi=settings.chi,
        detection=settings.detection.model_dump(),
        analytic=analytic,
        monte_carlo=simulated,
        seed=config.seed if simulated is not None else None,
    )


def run_raman(config: ScenarioConfig) -> CurveOutput:
    """Zeeman-broadened Raman spectrum with its width and the diffusion time."""
    settings = config.require("raman")
    spectrum = zeeman_spectrum(
        config.atoms.level_scheme(),
        config.atoms.ground_distribution(),
        settings.field,
        settings.probe_extent_mm,
        settings.allowed_dm,
        settings.n_bins,
        settings.n_z,
    )
    width = fwhm(spectrum)
    tau = diffusion_time(settings.beam_diameter_um, settings.diffusion)
    rows = [[float(f), float(w)] for f, w in zip(spectrum.detunings, spectrum.weights)]
    units = {"detuning_hz": "Hz", "weight": "fraction"}
    metadata = _metadata(config, "raman", units, fwhm_hz=width, diffusion_time_us=tau)
    return CurveOutput(metadata=metadata, columns=["detuning_hz", "weight"], rows=rows)


def run_fit(theory_path: Path, data_path: Path, threshold: float = 2.0) -> FitReport:
    """Scale a decoherence curve file onto measured g12 points.

    Raises:
        ExportError: If the theory file cannot be read.
        DataFileError: If the data file is malformed.
        PhotonStatisticsError: If the data fall outside the theory range.
    """
    curve = read_curve_csv(theory_path)
    dt = np.array(curve.column("dt_ns"))
    p12 = np.array(curve.column("p12"))
    data_dt, g12, sigma = read_g12_data(data_path)
    fit = scale_fit_xi(dt, p12, data_dt, g12, sigma)

    def reference(key: str) -> float | None:
        value = curve.metadata.extra.get(key)
        return float(value) if value is not None else None

    return FitReport(
        theory_scenario=curve.metadata.scenario,
        theory_config_hash=curve.metadata.config_hash,
        fit=fit,
        threshold=threshold,
        coherence_time_ns=coherence_time(dt, fit.xi * p12, threshold),
        reference_xi=reference("reference_xi"),
        reference_xi_th=reference("reference_xi_th"),
    )
