"""Raman-probe forward models: Zeeman broadening spectra and diffusion decay.

Spectra only weight ground-state populations; two-photon matrix elements and
power broadening are not included, so a measured width compares with the
model width combined with the power-broadened floor.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dlczsim.atomic_model import FieldProfile, GroundDistribution, LevelScheme

logger = logging.getLogger(__name__)

DEFAULT_ALLOWED_DM = (-1, 0, 1)
DEFAULT_N_BINS = 201
DEFAULT_N_Z = 2001


class RamanError(ValueError):
    """Custom exception for invalid Raman-probe inputs."""
    pass


@dataclass(frozen=True)
class RamanSpectrum:
    """Histogram of two-photon detunings (Hz from the clock transition)."""

    detunings: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.detunings.shape != self.weights.shape or self.weights.ndim != 1:
            raise RamanError("detunings and weights must be 1-D arrays of equal length")
        if self.weights.size == 0:
            raise RamanError("spectrum is empty")
        if np.any(self.weights < 0):
            raise RamanError("spectrum weights must be non-negative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise RamanError(f"spectrum weights sum to {float(self.weights.sum())!r}, expected 1")

    @property
    def bin_width(self) -> float:
        if self.detunings.size < 2:
            return 0.0
        return float(self.detunings[1] - self.detunings[0])

    def weight_at(self, detuning_hz: float) -> float:
        """Weight of the bin whose centre is nearest ``detuning_hz``."""
        return float(self.weights[int(np.argmin(np.abs(self.detunings - detuning_hz)))])


class DiffusionModel(BaseModel):
    """Diffusion time proportional to the probe beam diameter."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    tau_ref_us: float = Field(default=900.0, gt=0, description="Decay time at the reference diameter, us")
    d_ref_um: float = Field(default=150.0, gt=0, description="Reference beam diameter, um")


def _transition_pairs(
    scheme: LevelScheme, distribution: GroundDistribution, allowed_dm: Sequence[int]
) -> list[tuple[float, float, float]]:
    storage = set(scheme.storage_projections())
    pairs = []
    for m_g in scheme.ground_projections():
        weight = distribution.population(scheme.F_g, m_g)
        if weight == 0:
            continue
        for dm in allowed_dm:
            m_s = m_g + dm
            if m_s in storage:
                pairs.append((m_g, m_s, weight))
    return pairs


def zeeman_spectrum(
    scheme: LevelScheme,
    distribution: GroundDistribution,
    field: FieldProfile,
    probe_extent_mm: float,
    allowed_dm: Sequence[int] = DEFAULT_ALLOWED_DM,
    n_bins: int = DEFAULT_N_BINS,
    n_z: int = DEFAULT_N_Z,
) -> RamanSpectrum:
    """Histogram the Zeeman shifts seen by a probe along the field axis.

    Every populated ``m_g -> m_s`` pair with ``m_s - m_g`` in ``allowed_dm``
    contributes the shift ``(g_g m_g - g_s m_s) B(z)`` at ``n_z`` evenly spaced
    positions of a segment of ``probe_extent_mm`` centred on the field zero,
    weighted by ``D_{m_g}``. Bins are centred on zero detuning and span the
    largest shift; ``n_bins`` must be odd.

    Raises:
        RamanError: For an empty ``allowed_dm``, a probe longer than the field
            region, or invalid bin counts.
    """
    if not allowed_dm:
        raise RamanError("allowed_dm must contain at least one transition")
    if probe_extent_mm <= 0 or probe_extent_mm > field.length_mm:
        raise RamanError(
            f"probe extent {probe_extent_mm} mm must lie in (0, {field.length_mm}] mm"
        )
    if n_bins < 1 or n_bins % 2 == 0:
        raise RamanError(f"n_bins must be a positive odd number, got {n_bins}")
    if n_z < 1:
        raise RamanError(f"n_z must be at least 1, got {n_z}")
    distribution.check_scheme(scheme)

    pairs = _transition_pairs(scheme, distribution, allowed_dm)
    if not pairs:
        raise RamanError("no populated transition matches the allowed Delta m set")

    z = np.linspace(-probe_extent_mm / 2, probe_extent_mm / 2, n_z)
    field_G = np.asarray(field.field_at(z), dtype=float)
    shifts = np.concatenate(
        [(scheme.g_g_MHz_per_G * m_g - scheme.g_s_MHz_per_G * m_s) * 1e6 * field_G for m_g, m_s, _ in pairs]
    )
    masses = np.repeat([weight for _, _, weight in pairs], n_z)

    half = n_bins // 2
    f_max = float(np.max(np.abs(shifts)))
    if f_max == 0.0 or half == 0:
        logger.debug("All shifts vanish; returning a single zero-detuning bin")
        return RamanSpectrum(detunings=np.zeros(1), weights=np.ones(1))

    width = f_max / half
    centers = width * np.arange(-half, half + 1)
    index = np.clip(np.rint(shifts / width).astype(int) + half, 0, n_bins - 1)
    weights = np.bincount(index, weights=masses, minlength=n_bins)
    return RamanSpectrum(detunings=centers, weights=weights / weights.sum())


def fwhm(spectrum: RamanSpectrum) -> float:
    """Full width at half maximum in Hz, interpolating linearly between bins.

    Raises:
        RamanError: If every weight is zero.
    """
    weights = spectrum.weights
    peak = float(weights.max())
    if peak <= 0:
        raise RamanError("spectrum has no weight")
    if weights.size == 1:
        return 0.0
    half = peak / 2
    centers = spectrum.detunings
    above = np.flatnonzero(weights >= half)
    first, last = int(above[0]), int(above[-1])

    left = centers[first]
    if first > 0:
        rise = weights[first] - weights[first - 1]
        left = centers[first - 1] + (half - weights[first - 1]) / rise * (centers[first] - centers[first - 1])
    right = centers[last]
    if last < weights.size - 1:
        fall = weights[last] - weights[last + 1]
        right = centers[last] + (weights[last] - half) / fall * (centers[last + 1] - centers[last])
    return float(right - left)


def diffusion_time(beam_diameter_um: float, model: DiffusionModel | None = None) -> float:
    """Diffusion-limited decay time in us for a probe of ``beam_diameter_um``.

    Example:
        >>> diffusion_time(60.0)
        360.0
    """
    if beam_diameter_um <= 0:
        raise RamanError(f"beam diameter must be positive, got {beam_diameter_um}")
    model = model or DiffusionModel()
    return model.tau_ref_us * beam_diameter_um / model.d_ref_um


def decay_curve(t_us, tau_us: float):
    """Remaining population fraction exp(-t / tau)."""
    if tau_us <= 0 or not math.isfinite(tau_us):
        raise RamanError(f"tau must be a positive finite time, got {tau_us}")
    value = np.exp(-np.asarray(t_us, dtype=float) / tau_us)
    if np.ndim(value) == 0:
        return float(value)
    return value
