"""Atomic ensemble model: level scheme, Zeeman shifts and excitation pathways."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dlczsim.angular_momentum import (
    AngularMomentumError,
    SphericalPolarization,
    dipole_coupling,
    projections,
    to_doubled,
)


class AtomicModelError(ValueError):
    """Custom exception for inconsistent atomic-model inputs."""
    pass


def _dipole_connected(F_lo: float, F_hi: float) -> bool:
    two_lo, two_hi = to_doubled(F_lo), to_doubled(F_hi)
    return abs(two_hi - two_lo) <= 2 and (two_hi - two_lo) % 2 == 0 and two_lo + two_hi > 0


class LevelScheme(BaseModel):
    """The four hyperfine manifolds and the ground-state Zeeman rates."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    F_g: float = Field(description="Initially populated ground manifold |g>")
    F_s: float = Field(description="Storage ground manifold |s>")
    F_a: float = Field(description="Excited manifold reached by the write pulse")
    F_b: float = Field(description="Excited manifold reached by the read pulse")
    g_g_MHz_per_G: float = Field(description="Zeeman rate mu_B g_F / h of |g>, MHz/G")
    g_s_MHz_per_G: float = Field(description="Zeeman rate mu_B g_F / h of |s>, MHz/G")

    @field_validator("F_g", "F_s", "F_a", "F_b")
    @classmethod
    def _half_integer(cls, value: float) -> float:
        try:
            to_doubled(value)
        except AngularMomentumError as e:
            raise ValueError(str(e)) from e
        if value < 0:
            raise ValueError("angular momentum must be non-negative")
        return value

    @model_validator(mode="after")
    def _selection_rules(self) -> LevelScheme:
        for lo, hi, label in (
            (self.F_g, self.F_a, "F_g -> F_a"),
            (self.F_s, self.F_a, "F_s -> F_a"),
            (self.F_s, self.F_b, "F_s -> F_b"),
            (self.F_g, self.F_b, "F_g -> F_b"),
        ):
            if not _dipole_connected(lo, hi):
                raise ValueError(f"{label} is not an allowed dipole transition")
        if self.g_g_MHz_per_G == 0:
            raise ValueError("g_g_MHz_per_G must be non-zero (it sets the gradient parameter K)")
        return self

    @property
    def g_ratio(self) -> float:
        """Ratio g_s / g_g of the two ground-state Zeeman rates."""
        return self.g_s_MHz_per_G / self.g_g_MHz_per_G

    def ground_projections(self) -> tuple[float, ...]:
        return tuple(m / 2 for m in projections(to_doubled(self.F_g)))

    def storage_projections(self) -> tuple[float, ...]:
        return tuple(m / 2 for m in projections(to_doubled(self.F_s)))


# Cesium: F=4 -> F'=4 (D2 write), F=3 -> F'=4 (D1 read).
CESIUM = LevelScheme(
    F_g=4, F_s=3, F_a=4, F_b=4, g_g_MHz_per_G=0.35, g_s_MHz_per_G=-0.35
)

SCHEMES: dict[str, LevelScheme] = {"cesium": CESIUM}


class GroundDistribution(BaseModel):
    """Initial Zeeman populations D_m for m = -F_g..F_g (ascending)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    probabilities: tuple[float, ...] = Field(description="D_m ordered from m=-F_g to m=+F_g")

    @field_validator("probabilities")
    @classmethod
    def _normalized(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("distribution must not be empty")
        if any(p < 0 for p in value):
            raise ValueError("populations must be non-negative")
        if abs(math.fsum(value) - 1.0) > 1e-12:
            raise ValueError(f"populations must sum to 1 (got {math.fsum(value)!r})")
        return value

    @classmethod
    def unpolarized(cls, F_g: float) -> GroundDistribution:
        size = to_doubled(F_g) + 1
        return cls(probabilities=tuple(1.0 / size for _ in range(size)))

    @classmethod
    def pumped(cls, F_g: float, m: float = 0) -> GroundDistribution:
        """All population in a single Zeeman state ``m``."""
        two_F, two_m = to_doubled(F_g), to_doubled(m)
        if two_m not in projections(two_F):
            raise AtomicModelError(f"m={m} is not a projection of F={F_g}")
        return cls(
            probabilities=tuple(1.0 if p == two_m else 0.0 for p in projections(two_F))
        )

    def population(self, F_g: float, m_g: float) -> float:
        index = (to_doubled(m_g) + to_doubled(F_g)) // 2
        return self.probabilities[index]

    def check_scheme(self, scheme: LevelScheme) -> None:
        expected = to_doubled(scheme.F_g) + 1
        if len(self.probabilities) != expected:
            raise AtomicModelError(
                f"Distribution has {len(self.probabilities)} entries, F_g={scheme.F_g} needs {expected}"
            )


class FieldProfile(BaseModel):
    """Magnetic field along the quantization axis over the ensemble."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Literal["linear-gradient", "uniform-bias"] = Field(default="linear-gradient")
    gradient_G_per_cm: float = Field(default=0.0, description="Field gradient b at the centre, G/cm")
    length_mm: float = Field(gt=0, description="Length L of the field region, mm")
    bias_G: float = Field(default=0.0, description="Uniform bias B0 for uniform-bias mode, G")

    def field_at(self, z_mm):
        """Field (G) at position ``z_mm`` measured from the centre."""
        if self.mode == "uniform-bias":
            return self.bias_G + 0.0 * z_mm
        return self.gradient_G_per_cm * (z_mm / 10.0)


@dataclass(frozen=True)
class PolarizationSet:
    """Polarizations of the write pulse, field 1, read pulse and field 2."""

    write: SphericalPolarization
    photon1: SphericalPolarization
    read: SphericalPolarization
    photon2: SphericalPolarization

    @classmethod
    def lin_perp_lin(cls) -> PolarizationSet:
        x, y = SphericalPolarization.linear_x(), SphericalPolarization.linear_y()
        return cls(write=x, photon1=y, read=y, photon2=x)

    @classmethod
    def sigma_pumped(cls) -> PolarizationSet:
        plus, minus = SphericalPolarization.sigma_plus(), SphericalPolarization.sigma_minus()
        return cls(write=plus, photon1=plus, read=minus, photon2=minus)

    @classmethod
    def from_names(cls, write: str, photon1: str, read: str, photon2: str) -> PolarizationSet:
        return cls(
            write=SphericalPolarization.from_name(write),
            photon1=SphericalPolarization.from_name(photon1),
            read=SphericalPolarization.from_name(read),
            photon2=SphericalPolarization.from_name(photon2),
        )

    def conjugate(self) -> PolarizationSet:
        return PolarizationSet(
            self.write.conjugate(), self.photon1.conjugate(), self.read.conjugate(), self.photon2.conjugate()
        )


POLARIZATION_PRESETS = {
    "lin-perp-lin": PolarizationSet.lin_perp_lin,
    "sigma-pumped": PolarizationSet.sigma_pumped,
}


@dataclass(frozen=True)
class Pathway:
    """One m_g -> m_s -> m_g excitation route and its strength."""

    m_g: float
    m_s: float
    weight: float
    strength: complex

    def dephasing_index(self, g_ratio: float) -> float:
        """Index M with differential Zeeman rate a_g - a_s = 2 pi K M s."""
        return self.m_g - g_ratio * self.m_s


def zeeman_rate(g_MHz_per_G: float, m: float, B_G):
    """Zeeman angular frequency 2 pi g m B in rad/s."""
    return 2.0 * math.pi * g_MHz_per_G * 1e6 * m * B_G


def gradient_parameter_K(g_MHz_per_G: float, b_G_per_cm: float, L_mm: float) -> float:
    """Gradient parameter K = g b L in Hz (b in G/cm, L in mm).

    Example:
        >>> round(gradient_parameter_K(0.35, 8.7, 3.6))
        1096200
    """
    return g_MHz_per_G * 1e6 * b_G_per_cm * (L_mm / 10.0)


def pathway_strength(
    scheme: LevelScheme,
    m_g: float,
    m_s: float,
    pols: PolarizationSet,
) -> complex:
    """Strength d(m_g, m_s) of the write -> photon 1 -> read -> photon 2 route.

    The double sum over the excited projections m_a, m_b multiplies the four
    dipole couplings; couplings of the spontaneously emitted photons enter
    complex-conjugated.

    Raises:
        AtomicModelError: If a projection lies outside its manifold.
    """
    two_Fg, two_Fs = to_doubled(scheme.F_g), to_doubled(scheme.F_s)
    two_Fa, two_Fb = to_doubled(scheme.F_a), to_doubled(scheme.F_b)
    two_mg, two_ms = to_doubled(m_g), to_doubled(m_s)
    if two_mg not in projections(two_Fg) or two_ms not in projections(two_Fs):
        raise AtomicModelError(f"Projection outside manifold: m_g={m_g}, m_s={m_s}")

    total = 0j
    for two_mb in projections(two_Fb):
        k2 = dipole_coupling(two_Fg, two_mg, two_Fb, two_mb, pols.photon2).conjugate()
        if k2 == 0:
            continue
        kr = dipole_coupling(two_Fs, two_ms, two_Fb, two_mb, pols.read)
        if kr == 0:
            continue
        for two_ma in projections(two_Fa):
            kw = dipole_coupling(two_Fg, two_mg, two_Fa, two_ma, pols.write)
            if kw == 0:
                continue
            k1 = dipole_coupling(two_Fs, two_ms, two_Fa, two_ma, pols.photon1).conjugate()
            total += k2 * kr * k1 * kw
    return total


def enumerate_pathways(
    scheme: LevelScheme,
    distribution: GroundDistribution,
    pols: PolarizationSet,
    tolerance: float = 1e-14,
) -> list[Pathway]:
    """List every populated pathway with non-zero strength, ordered by (m_g, m_s)."""
    distribution.check_scheme(scheme)
    pathways: list[Pathway] = []
    for m_g in scheme.ground_projections():
        weight = distribution.population(scheme.F_g, m_g)
        if weight == 0:
            continue
        for m_s in scheme.storage_projections():
            if abs(m_g - m_s) > 2:
                continue
            strength = pathway_strength(scheme, m_g, m_s, pols)
            if abs(strength) > tolerance:
                pathways.append(Pathway(m_g=m_g, m_s=m_s, weight=weight, strength=strength))
    return pathways


def group_by_dephasing(pathways: list[Pathway], g_ratio: float) -> dict[float, complex]:
    """Sum D d over pathways sharing the same dephasing index M, keyed by M."""
    groups: dict[float, complex] = {}
    for pathway in pathways:
        key = round(pathway.dephasing_index(g_ratio), 12) + 0.0
        groups[key] = groups.get(key, 0j) + pathway.weight * pathway.strength
    return dict(sorted(groups.items()))


@dataclass(frozen=True)
class Ensemble:
    """Level scheme, initial populations and polarizations of one experiment."""

    scheme: LevelScheme
    distribution: GroundDistribution
    pols: PolarizationSet

    @cached_property
    def pathways(self) -> tuple[Pathway, ...]:
        return tuple(enumerate_pathways(self.scheme, self.distribution, self.pols))

    @cached_property
    def groups(self) -> dict[float, complex]:
        """Pathway sums D d keyed by dephasing index M."""
        return group_by_dephasing(list(self.pathways), self.scheme.g_ratio)

    def max_rates(self, K: float) -> tuple[float, float]:
        """Largest |a_g|, |a_s| (rad/s) over the ensemble length for gradient ``K``."""
        a_g = max((abs(p.m_g) for p in self.pathways), default=0.0)
        a_s = max((abs(self.scheme.g_ratio * p.m_s) for p in self.pathways), default=0.0)
        return math.pi * K * a_g, math.pi * K * a_s
