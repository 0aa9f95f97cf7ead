"""Scenario configuration and built-in presets for dlczsim."""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dlczsim.atomic_model import (
    POLARIZATION_PRESETS,
    SCHEMES,
    Ensemble,
    FieldProfile,
    GroundDistribution,
    LevelScheme,
    PolarizationSet,
    gradient_parameter_K,
)
from dlczsim.pair_amplitude import DEFAULT_GL_ORDER, DEFAULT_GRID_STEP_NS, Backend
from dlczsim.photon_statistics import DetectionModel
from dlczsim.pulses import Pulse, PulseError, PulseShape, Timeline
from dlczsim.raman_probe import DEFAULT_ALLOWED_DM, DEFAULT_N_BINS, DEFAULT_N_Z, DiffusionModel

# Try to import tomllib (Python 3.11+) or fall back to tomli
try:
    import tomllib
except ImportError:
    import tomli as tomllib  # type: ignore[import-not-found]

PRESET_PACKAGE = "dlczsim"
PRESET_DIR = "presets"
EXECUTION_KEYS = frozenset({"threads", "output"})


class ConfigError(Exception):
    """Custom exception for unreadable or inconsistent scenario configs."""
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PolarizationNames(_Section):
    """Named polarizations of the four optical fields."""

    write: str = "x"
    photon1: str = "y"
    read: str = "y"
    photon2: str = "x"


class AtomsConfig(_Section):
    """Level scheme, initial populations and polarizations."""

    scheme: str | LevelScheme = Field(default="cesium", description="Built-in scheme name or explicit table")
    distribution: Literal["unpolarized", "pumped"] | list[float] = Field(
        default="unpolarized", description="Named distribution or explicit D_m list"
    )
    pumped_m: float = Field(default=0.0, description="Zeeman state holding the population when pumped")
    polarizations: Literal["lin-perp-lin", "sigma-pumped"] | PolarizationNames = "lin-perp-lin"

    @model_validator(mode="after")
    def _known_scheme(self) -> AtomsConfig:
        if isinstance(self.scheme, str) and self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{self.scheme}', known: {', '.join(sorted(SCHEMES))}")
        return self

    def level_scheme(self) -> LevelScheme:
        if isinstance(self.scheme, LevelScheme):
            return self.scheme
        return SCHEMES[self.scheme]

    def ground_distribution(self) -> GroundDistribution:
        scheme = self.level_scheme()
        if self.distribution == "unpolarized":
            return GroundDistribution.unpolarized(scheme.F_g)
        if self.distribution == "pumped":
            return GroundDistribution.pumped(scheme.F_g, self.pumped_m)
        return GroundDistribution(probabilities=tuple(self.distribution))

    def polarization_set(self) -> PolarizationSet:
        if isinstance(self.polarizations, PolarizationNames):
            names = self.polarizations
            return PolarizationSet.from_names(names.write, names.photon1, names.read, names.photon2)
        return POLARIZATION_PRESETS[self.polarizations]()


class FieldConfig(_Section):
    """Gradient parameter, given directly or as a gradient over a length."""

    K_hz: float | None = Field(default=None, ge=0, description="Gradient parameter K, Hz")
    gradient_G_per_cm: float | None = Field(default=None, description="Field gradient b, G/cm")
    length_mm: float | None = Field(default=None, gt=0, description="Ensemble length L, mm")

    @model_validator(mode="after")
    def _one_source(self) -> FieldConfig:
        geometric = self.gradient_G_per_cm is not None or self.length_mm is not None
        if self.K_hz is None and not geometric:
            raise ValueError("set either K_hz or gradient_G_per_cm and length_mm")
        if self.K_hz is not None and geometric:
            raise ValueError("K_hz and gradient_G_per_cm/length_mm are mutually exclusive")
        if geometric and (self.gradient_G_per_cm is None or self.length_mm is None):
            raise ValueError("gradient_G_per_cm and length_mm must be given together")
        return self

    def gradient_parameter(self, scheme: LevelScheme) -> float:
        if self.K_hz is not None:
            return self.K_hz
        return abs(gradient_parameter_K(scheme.g_g_MHz_per_G, self.gradient_G_per_cm, self.length_mm))


class PulseConfig(_Section):
    """One classical pulse; the read start is set by the delay being evaluated."""

    shape: PulseShape = "square"
    start_ns: float = 0.0
    fwhm_ns: float = Field(gt=0, description="Duration (square), plateau+rise (trapezoid) or area/amplitude (delta)")
    rise_ns: float = Field(default=0.0, ge=0)
    detuning_hz: float = Field(description="Detuning from the excited manifold, Hz (cyclic)")
    amplitude: float = 1.0

    @model_validator(mode="after")
    def _valid_pulse(self) -> PulseConfig:
        try:
            self.to_pulse()
        except PulseError as e:
            raise ValueError(str(e)) from e
        return self

    def to_pulse(self) -> Pulse:
        return Pulse(
            shape=self.shape,
            start=self.start_ns,
            fwhm=self.fwhm_ns,
            detuning=2.0 * math.pi * self.detuning_hz,
            amplitude=self.amplitude,
            rise=self.rise_ns,
        )


class SweepConfig(_Section):
    """Storage delays, as an explicit list or an evenly spaced range."""

    delta_t_ns: list[float] | None = None
    start_ns: float | None = None
    stop_ns: float | None = None
    num: int | None = Field(default=None, ge=2)

    @model_validator(mode="after")
    def _one_form(self) -> SweepConfig:
        ranged = (self.start_ns, self.stop_ns, self.num)
        if self.delta_t_ns is not None:
            if any(v is not None for v in ranged):
                raise ValueError("give delta_t_ns or start_ns/stop_ns/num, not both")
            values = self.delta_t_ns
        elif all(v is not None for v in ranged):
            if self.stop_ns <= self.start_ns:
                raise ValueError("stop_ns must exceed start_ns")
            values = [self.start_ns]
        else:
            raise ValueError("give delta_t_ns or all of start_ns, stop_ns and num")
        if not values:
            raise ValueError("delta_t_ns must not be empty")
        if min(values) < 0:
            raise ValueError("delays must be non-negative")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("delays must be strictly increasing")
        return self

    def delays(self) -> list[float]:
        if self.delta_t_ns is not None:
            return list(self.delta_t_ns)
        return [float(v) for v in np.linspace(self.start_ns, self.stop_ns, self.num)]


class WavepacketConfig(_Section):
    delta_t_ns: float = Field(default=0.0, ge=0)
    bin_ns: float = Field(default=4.0, gt=0)
    subsamples: int = Field(default=4, ge=1)


class CorrelationsConfig(_Section):
    """Pair source and detection for the correlation report."""

    chi: float = Field(default=0.1, gt=0, lt=1)
    n_max: int | None = Field(default=None, ge=1)
    detection: DetectionModel = Field(default_factory=DetectionModel)
    n_trials: int = Field(default=0, ge=0, description="Monte-Carlo trials; 0 skips the simulation")
    block_size: int = Field(default=1 << 16, ge=1)


class RamanConfig(_Section):
    field: FieldProfile
    probe_extent_mm: float = Field(gt=0)
    allowed_dm: list[int] = Field(default_factory=lambda: list(DEFAULT_ALLOWED_DM))
    n_bins: int = DEFAULT_N_BINS
    n_z: int = DEFAULT_N_Z
    beam_diameter_um: float = Field(default=150.0, gt=0)
    diffusion: DiffusionModel = Field(default_factory=DiffusionModel)


class FitConfig(_Section):
    """Measured g12 data and the recorded scale factors for comparison."""

    data: Path | None = None
    threshold: float = Field(default=2.0, gt=0, description="g12 level whose crossing defines the coherence time")
    reference_xi: float | None = None
    reference_xi_th: float | None = None


class QuadratureConfig(_Section):
    gl_order: int = Field(default=DEFAULT_GL_ORDER, ge=2)
    grid_step_ns: float = Field(default=DEFAULT_GRID_STEP_NS, gt=0)


class OutputConfig(_Section):
    path: Path | None = Field(default=None, description="Output file; the JSON sidecar sits next to it")


class ScenarioConfig(_Section):
    """A complete, validated experiment description."""

    name: str
    version: int = Field(default=1, ge=1)
    description: str = ""
    backend: Backend = "analytic"
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    atoms: AtomsConfig = Field(default_factory=AtomsConfig)
    field: FieldConfig | None = None
    write: PulseConfig | None = None
    read: PulseConfig | None = None
    sweep: SweepConfig | None = None
    wavepacket: WavepacketConfig | None = None
    correlations: CorrelationsConfig | None = None
    raman: RamanConfig | None = None
    fit: FitConfig = Field(default_factory=FitConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _consistent_atoms(self) -> ScenarioConfig:
        scheme = self.atoms.level_scheme()
        try:
            distribution = self.atoms.ground_distribution()
            distribution.check_scheme(scheme)
            self.atoms.polarization_set()
        except ValueError as e:
            raise ValueError(f"atoms: {e}") from e
        if (self.write is None) != (self.read is None):
            raise ValueError("write and read pulses must be configured together")
        return self

    def ensemble(self) -> Ensemble:
        return Ensemble(
            scheme=self.atoms.level_scheme(),
            distribution=self.atoms.ground_distribution(),
            pols=self.atoms.polarization_set(),
        )

    def gradient_parameter(self) -> float:
        """K in Hz; a missing field section means zero field."""
        if self.field is None:
            return 0.0
        return self.field.gradient_parameter(self.atoms.level_scheme())

    def timeline(self, delta_t: float) -> Timeline:
        """Write and read pulses with the read pulse ``delta_t`` ns after the write start.

        Raises:
            ConfigError: If the scenario has no pulses.
        """
        if self.write is None or self.read is None:
            raise ConfigError(f"scenario '{self.name}' defines no write/read pulses")
        return Timeline.from_delay(self.write.to_pulse(), self.read.to_pulse(), delta_t)

    def require(self, section: str) -> Any:
        """Return a configured section or fail with the scenario name."""
        value = getattr(self, section)
        if value is None:
            raise ConfigError(f"scenario '{self.name}' has no [{section}] section")
        return value


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    """Parse TOML text into a validated :class:`ScenarioConfig`.

    Raises:
        ConfigError: If the TOML is malformed.
        pydantic.ValidationError: If a field is missing, unknown or invalid.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{source}: {e}") from e
    return ScenarioConfig.model_validate(data)


def load_config(path: Path) -> ScenarioConfig:
    """Load a scenario from a TOML file.

    Raises:
        OSError: If the file cannot be read.
        ConfigError: If the file is not UTF-8 TOML.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"Config {path} is not UTF-8: {e}") from e
    return parse_config(text, str(path))


def _preset_root():
    return resources.files(PRESET_PACKAGE).joinpath(PRESET_DIR)


def list_presets() -> list[str]:
    """Names of the built-in presets, sorted."""
    return sorted(
        entry.name.removesuffix(".toml")
        for entry in _preset_root().iterdir()
        if entry.name.endswith(".toml")
    )


def load_preset(name: str) -> ScenarioConfig:
    """Load a built-in preset by name.

    Raises:
        ConfigError: If no preset has that name.
    """
    entry = _preset_root().joinpath(f"{name}.toml")
    if not entry.is_file():
        raise ConfigError(f"Unknown preset '{name}'. Available: {', '.join(list_presets())}")
    return parse_config(entry.read_text(encoding="utf-8"), f"preset {name}")


def effective_config(config: ScenarioConfig) -> dict[str, Any]:
    """JSON-compatible dump including defaults; re-parses to an equal config."""
    return config.model_dump(mode="json")


def config_hash(config: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON form of the effective config.

    Execution settings (``threads`` and ``output``) do not change results and
    are left out.
    """
    physics = {key: value for key, value in effective_config(config).items() if key not in EXECUTION_KEYS}
    canonical = json.dumps(physics, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(config: ScenarioConfig, **overrides: Any) -> ScenarioConfig:
    """Return a re-validated copy with the non-None top-level ``overrides`` applied.

    ``out`` replaces the output path.
    """
    data = effective_config(config)
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "out":
            data["output"]["path"] = str(value)
        else:
            data[key] = value
    return ScenarioConfig.model_validate(data)
