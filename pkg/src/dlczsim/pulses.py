"""Write/read pulse envelopes and the pulse timeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

PulseShape = Literal["square", "trapezoid", "delta"]


class PulseError(ValueError):
    """Custom exception for malformed pulses or timelines."""
    pass


@dataclass(frozen=True)
class Pulse:
    """A classical write or read pulse.

    Times are in ns, the detuning in rad/s and the amplitude is the peak of
    the dimensionless envelope. A delta pulse keeps the area ``amplitude * fwhm``
    concentrated at ``start``.
    """

    shape: PulseShape
    start: float
    fwhm: float
    detuning: float
    amplitude: float = 1.0
    rise: float = 0.0

    def __post_init__(self) -> None:
        if self.shape not in ("square", "trapezoid", "delta"):
            raise PulseError(f"Unknown pulse shape '{self.shape}'")
        if self.fwhm <= 0:
            raise PulseError(f"fwhm must be positive, got {self.fwhm}")
        if self.detuning == 0:
            raise PulseError("detuning must be non-zero")
        if self.shape == "trapezoid":
            if self.rise <= 0:
                raise PulseError("trapezoid pulses need a positive rise time")
            if self.rise > self.fwhm:
                raise PulseError(f"rise ({self.rise} ns) longer than fwhm ({self.fwhm} ns)")

    @property
    def end(self) -> float:
        """Time (ns) after which the envelope vanishes."""
        if self.shape == "delta":
            return self.start
        if self.shape == "trapezoid":
            return self.start + self.fwhm + self.rise
        return self.start + self.fwhm

    @property
    def area_s(self) -> float:
        """Envelope area in seconds (amplitude x fwhm for every shape)."""
        return self.amplitude * self.fwhm * 1e-9

    @property
    def edges(self) -> tuple[float, ...]:
        """Times (ns) where the envelope is not smooth."""
        if self.shape == "trapezoid":
            return (self.start, self.start + self.rise, self.start + self.fwhm, self.end)
        return (self.start, self.end)

    def shifted(self, start: float) -> Pulse:
        return replace(self, start=start)

    def scaled(self, factor: float) -> Pulse:
        return replace(self, amplitude=self.amplitude * factor)


def envelope_value(pulse: Pulse, t):
    """Envelope f(t) of ``pulse`` at time(s) ``t`` in ns.

    Zero outside the support; a trapezoid ramps linearly over ``rise`` on
    both sides and a square pulse is its zero-rise limit. Delta pulses have
    no finite envelope and evaluate to zero everywhere.
    """
    t_arr = np.asarray(t, dtype=float)
    if pulse.shape == "delta":
        values = np.zeros_like(t_arr)
    elif pulse.shape == "square":
        inside = (t_arr >= pulse.start) & (t_arr < pulse.end)
        values = np.where(inside, pulse.amplitude, 0.0)
    else:
        rise_end = pulse.start + pulse.rise
        fall_start = pulse.start + pulse.fwhm
        up = (t_arr - pulse.start) / pulse.rise
        down = (pulse.end - t_arr) / pulse.rise
        ramp = np.clip(np.minimum(up, down), 0.0, 1.0)
        values = pulse.amplitude * np.where((t_arr > rise_end) & (t_arr < fall_start), 1.0, ramp)
    if np.ndim(t) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class Timeline:
    """A write pulse followed by a read pulse ``delta_t`` ns later (start to start)."""

    write: Pulse
    read: Pulse

    def __post_init__(self) -> None:
        if self.read.start < self.write.start:
            raise PulseError(
                f"read pulse starts before the write pulse ({self.read.start} < {self.write.start})"
            )

    @classmethod
    def from_delay(cls, write: Pulse, read: Pulse, delta_t: float) -> Timeline:
        """Place the read pulse ``delta_t`` ns after the write pulse start."""
        if delta_t < 0 or not math.isfinite(delta_t):
            raise PulseError(f"delta_t must be a non-negative number, got {delta_t}")
        return cls(write=write, read=read.shifted(write.start + delta_t))

    @property
    def delta_t(self) -> float:
        return self.read.start - self.write.start

    @property
    def end(self) -> float:
        return max(self.write.end, self.read.end)

    @property
    def has_delta(self) -> bool:
        return self.write.shape == "delta" or self.read.shape == "delta"

    def with_delay(self, delta_t: float) -> Timeline:
        return Timeline.from_delay(self.write, self.read, delta_t)
