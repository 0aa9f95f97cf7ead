"""Photon-pair amplitudes: the nested amplitude F, densities and p12.

Times at the public surface are in ns, detunings and Zeeman rates in rad/s
and the gradient parameter K in Hz. Internally every time is converted to
seconds measured from the write-pulse start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import roots_legendre

from dlczsim.atomic_model import Ensemble
from dlczsim.pulses import PulseError, Timeline, envelope_value

logger = logging.getLogger(__name__)

Backend = Literal["analytic", "numeric", "delta"]

NS = 1e-9
# Minimum |detuning| relative to every Zeeman rate and inverse pulse length.
REGIME_FACTOR = 1e3
DEFAULT_GRID_STEP_NS = 0.002
DEFAULT_GL_ORDER = 64
# Phase advance per quadrature step above which the grid is reported as coarse.
COARSE_PHASE_PER_STEP = 0.25


class UnsupportedRegimeError(Exception):
    """Raised when the closed-form amplitude is used outside its validity regime."""
    pass


class QuadratureError(ValueError):
    """Raised when the nested quadrature cannot be set up on the requested grid."""
    pass


@dataclass(frozen=True)
class NumericEstimate:
    """Richardson-extrapolated amplitude with its error bound."""

    value: complex
    error: float
    step_ns: float
    coarse: bool


@dataclass(frozen=True)
class EnsembleTerms:
    """The three contributions to p12 for a finite number of identical atoms."""

    coherent: float
    incoherent: float
    subtracted: float

    @property
    def total(self) -> float:
        return self.coherent + self.incoherent - self.subtracted


@dataclass(frozen=True)
class WavepacketGrid:
    """Joint detection density averaged over square (t1, t2) bins.

    ``values[i, j]`` is the mean density over t1 bin ``i`` and t2 bin ``j``.
    """

    t1_edges: np.ndarray
    t2_edges: np.ndarray
    values: np.ndarray

    @property
    def t1_centers(self) -> np.ndarray:
        return 0.5 * (self.t1_edges[:-1] + self.t1_edges[1:])

    @property
    def t2_centers(self) -> np.ndarray:
        return 0.5 * (self.t2_edges[:-1] + self.t2_edges[1:])


# ---------------------------------------------------------------------------
# Closed form for square and delta pulses
# ---------------------------------------------------------------------------


def check_analytic_regime(a_g: float, a_s: float, timeline: Timeline) -> None:
    """Verify the large-detuning preconditions of :func:`f_analytic_square`.

    Raises:
        UnsupportedRegimeError: For trapezoid pulses or detunings that are not
            at least ``REGIME_FACTOR`` times every Zeeman rate and inverse
            pulse duration.
    """
    rates = [abs(a_g), abs(a_s)]
    for name, pulse in (("write", timeline.write), ("read", timeline.read)):
        if pulse.shape not in ("square", "delta"):
            raise UnsupportedRegimeError(
                f"{name} pulse shape '{pulse.shape}' has no closed form; use the numeric backend"
            )
        if pulse.shape == "square":
            rates.append(1.0 / (pulse.fwhm * NS))
    limit = REGIME_FACTOR * max(rates)
    for name, pulse in (("write", timeline.write), ("read", timeline.read)):
        if abs(pulse.detuning) < limit:
            raise UnsupportedRegimeError(
                f"|{name} detuning| = {abs(pulse.detuning):.3e} rad/s is below "
                f"{REGIME_FACTOR:g} x {max(rates):.3e} rad/s; use the numeric backend"
            )


def _phi2(x: np.ndarray) -> np.ndarray:
    """(exp(x) - 1 - x) / x**2, stable near x = 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-2
    safe = np.where(small, 1.0, x)
    series = 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0
    direct = (np.exp(safe) - 1.0 - safe) / (safe * safe)
    return np.where(small, series, direct)


def _phase_integral(omega: np.ndarray, p: float, q: float) -> np.ndarray:
    """Integral of exp(i omega u) for u from p to q (seconds)."""
    omega = np.asarray(omega, dtype=float)
    if q <= p:
        return np.zeros_like(omega, dtype=complex)
    width = q - p
    return np.exp(0.5j * omega * (p + q)) * width * np.sinc(omega * width / (2.0 * math.pi))


def _triangle_integral(omega: np.ndarray, y: float) -> np.ndarray:
    """Integral over 0 < v < Y' < y of exp(i omega v)."""
    return y * y * _phi2(1j * np.asarray(omega, dtype=float) * y)


def _square_amplitude(a_g, a_s, timeline: Timeline, t: float) -> np.ndarray:
    """F(t) for square/delta pulses, vectorized over (a_g, a_s).

    The slow phase depends on a_g - a_s only; both excited-state detunings are
    measured from the Zeeman-shifted level |g, m_g>.
    """
    a_g = np.asarray(a_g, dtype=float)
    a_s = np.asarray(a_s, dtype=float)
    omega = a_g - a_s
    write, read = timeline.write, timeline.read
    origin = write.start
    ws = 0.0
    we = (write.end - origin) * NS
    rs = (read.start - origin) * NS
    re = (read.end - origin) * NS
    t_rel = math.inf if math.isinf(t) else (t - origin) * NS
    zero = np.zeros_like(omega, dtype=complex)
    prefactor = -1.0 / ((write.detuning - a_g) * (read.detuning - a_g))

    if t_rel < rs:
        return zero

    if write.shape == "delta" and read.shape == "delta":
        # Coincident delta pulses count as read strictly after write.
        return prefactor * write.area_s * read.area_s * np.exp(1j * omega * (rs - ws))

    if write.shape == "delta":
        upper = min(t_rel, re)
        return prefactor * write.area_s * read.amplitude * _phase_integral(omega, rs - ws, upper - ws)

    if read.shape == "delta":
        lower = rs - min(we, rs)
        return prefactor * write.amplitude * read.area_s * _phase_integral(omega, lower, rs - ws)

    return _square_pair(omega, a_g, a_s, timeline, t_rel)


def _square_pair(omega, a_g, a_s, timeline: Timeline, t_rel: float) -> np.ndarray:
    """F(t) for two square pulses, exact up to relative order 1/(Delta T)**2.

    With J2 the amplitude left in |s> after the write pulse, F(t) is
    ``(1/i theta) [int f_r J2 - exp(-i theta t) int f_r J2 exp(i theta s)]``
    where theta = Delta_r - a_g. J2 splits into the slow kernel P, a slow
    boundary part Q_slow and a part Q_fast oscillating at Delta_w; the second
    integral is taken by parts for the slow pieces and exactly for Q_fast.
    """
    write, read = timeline.write, timeline.read
    origin = write.start
    we = (write.end - origin) * NS
    rs = (read.start - origin) * NS
    re = (read.end - origin) * NS
    t_eval = (timeline.end - origin) * NS if math.isinf(t_rel) else t_rel
    upper = min(t_eval, re)

    d_w = write.detuning - a_g
    nu = write.detuning - a_s
    theta = read.detuning - a_g
    beat = read.detuning - write.detuning
    left = _phase_integral(-omega, 0.0, we)

    def boundary(slow, lo: float, hi: float) -> np.ndarray:
        return (slow(hi) * np.exp(1j * theta * hi) - slow(lo) * np.exp(1j * theta * lo)) / (1j * theta)

    direct = np.zeros_like(omega, dtype=complex)
    twisted = np.zeros_like(omega, dtype=complex)

    # photon 2 emitted while the write pulse is still on
    lo, hi = max(rs, 0.0), min(upper, we)
    if hi > lo:
        direct += _triangle_integral(omega, hi) - _triangle_integral(omega, lo)
        direct += (_phase_integral(-d_w, lo, hi) - _phase_integral(omega, lo, hi)) / (1j * nu)
        twisted += boundary(lambda s: _phase_integral(omega, 0.0, s) - np.exp(1j * omega * s) / (1j * nu), lo, hi)
        twisted += _phase_integral(beat, lo, hi) / (1j * nu)

    # photon 2 emitted after the write pulse ended
    lo = max(rs, we)
    if upper > lo:
        slow_step = np.exp(-1j * omega * we) - 1.0
        fast_step = 1.0 - np.exp(1j * d_w * we)
        direct += left * _phase_integral(omega, lo, upper)
        direct += (slow_step * _phase_integral(omega, lo, upper) + fast_step * _phase_integral(-d_w, lo, upper)) / (
            1j * nu
        )
        twisted += boundary(lambda s: np.exp(1j * omega * s) * (left + slow_step / (1j * nu)), lo, upper)
        twisted += fast_step * _phase_integral(beat, lo, upper) / (1j * nu)

    total = direct - np.exp(-1j * theta * t_eval) * twisted
    return -write.amplitude * read.amplitude / (d_w * theta) * total


def f_analytic_square(t: float, a_g: float, a_s: float, timeline: Timeline) -> complex:
    """Closed-form F(t) for square or delta pulses at large detuning.

    The leading term is the phase integral over ``t1 < t2 <= t`` with
    denominators ``(Delta_w - a_g)`` and ``(Delta_r - a_g)``; with
    ``a_g = a_s = 0`` it is the integral of :func:`g_density`. The boundary
    terms of relative order 1/(Delta T) at the pulse edges are kept, so only
    terms of order 1/(Delta T)**2 are dropped.

    Args:
        t: Evaluation time in ns (``math.inf`` for the completed pulse sequence).
        a_g: Zeeman rate of |g, m_g> at the atom position, rad/s.
        a_s: Zeeman rate of |s, m_s> at the atom position, rad/s.
        timeline: Write and read pulses.

    Returns:
        The complex amplitude F(t).

    Raises:
        UnsupportedRegimeError: If the large-detuning preconditions fail.
    """
    check_analytic_regime(a_g, a_s, timeline)
    return complex(_square_amplitude(np.array([a_g]), np.array([a_s]), timeline, t)[0])


# ---------------------------------------------------------------------------
# Nested quadrature oracle
# ---------------------------------------------------------------------------


def _grid_points(start: float, stop: float, step: float, marks: list[float]) -> int:
    """Number of intervals from ``start`` to ``stop``; every mark must be a node."""
    for mark in marks:
        ratio = (mark - start) / step
        if abs(ratio - round(ratio)) > 1e-6:
            raise QuadratureError(
                f"time {mark} ns is not on the {step} ns quadrature grid starting at {start} ns"
            )
    return int(round((stop - start) / step))


def _nodal_envelope(pulse, t_ns: np.ndarray, step: float) -> np.ndarray:
    """Envelope at grid nodes, averaging one-sided limits at jumps."""
    eps = 1e-3 * step
    return 0.5 * (envelope_value(pulse, t_ns - eps) + envelope_value(pulse, t_ns + eps))


def _nested_quadrature(t: float, a_g: float, a_s: float, timeline: Timeline, step: float) -> complex:
    write, read = timeline.write, timeline.read
    origin = write.start
    marks = [edge for edge in write.edges + read.edges if edge <= t] + [t]
    n = _grid_points(origin, t, step, marks)
    t_ns = origin + step * np.arange(n + 1)
    u = (t_ns - origin) * NS
    h = step * NS
    f_w = _nodal_envelope(write, t_ns, step)
    f_r = _nodal_envelope(read, t_ns, step)
    d_w, d_r = write.detuning, read.detuning

    stage = cumulative_trapezoid(f_w * np.exp(1j * (d_w - a_g) * u), dx=h, initial=0)
    stage = cumulative_trapezoid(np.exp(1j * (a_s - d_w) * u) * stage, dx=h, initial=0)
    stage = cumulative_trapezoid(f_r * np.exp(1j * (d_r - a_s) * u) * stage, dx=h, initial=0)
    return complex(trapezoid(np.exp(1j * (a_g - d_r) * u) * stage, dx=h))


def f_numeric_with_error(
    t: float,
    a_g: float,
    a_s: float,
    timeline: Timeline,
    grid_step: float = DEFAULT_GRID_STEP_NS,
) -> NumericEstimate:
    """Evaluate the four nested time integrals of F(t) by iterated quadrature.

    Successive cumulative trapezoid rules run over the time simplex on a
    uniform grid of ``grid_step`` ns and again on half that step; Richardson
    extrapolation of the two gives the returned value and
    ``|F_h - F_h/2| / 3`` is the error bound.

    Raises:
        QuadratureError: If a pulse edge or ``t`` is off the grid, or a pulse
            is a delta pulse.
    """
    if grid_step <= 0:
        raise QuadratureError(f"grid_step must be positive, got {grid_step}")
    if timeline.has_delta:
        raise QuadratureError("delta pulses have no finite-step quadrature; use the delta backend")
    if math.isinf(t):
        t = timeline.end
    if t <= timeline.write.start:
        return NumericEstimate(value=0j, error=0.0, step_ns=grid_step, coarse=False)

    coarse_value = _nested_quadrature(t, a_g, a_s, timeline, grid_step)
    fine_value = _nested_quadrature(t, a_g, a_s, timeline, grid_step / 2)
    value = fine_value + (fine_value - coarse_value) / 3.0
    error = abs(fine_value - coarse_value) / 3.0

    fastest = max(
        abs(timeline.write.detuning - a_g),
        abs(timeline.write.detuning - a_s),
        abs(timeline.read.detuning - a_s),
        abs(timeline.read.detuning - a_g),
    )
    phase_per_step = fastest * grid_step * NS
    coarse = phase_per_step > COARSE_PHASE_PER_STEP
    if coarse:
        logger.warning(
            "Quadrature step %.4g ns advances the fastest phase by %.3f rad; "
            "estimated error %.3e (relative %.3e)",
            grid_step,
            phase_per_step,
            error,
            error / abs(value) if value else math.inf,
        )
    return NumericEstimate(value=value, error=error, step_ns=grid_step, coarse=coarse)


def f_numeric(
    t: float,
    a_g: float,
    a_s: float,
    timeline: Timeline,
    grid_step: float = DEFAULT_GRID_STEP_NS,
) -> complex:
    """Nested-quadrature F(t); see :func:`f_numeric_with_error`."""
    return f_numeric_with_error(t, a_g, a_s, timeline, grid_step).value


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


def g_density(t2, t1, a_g: float, a_s: float, timeline: Timeline):
    """Amplitude density g(t2, t1) for photon 1 at t1 and photon 2 at t2 (ns).

    Zero wherever ``t2 <= t1``.
    """
    t2_arr = np.asarray(t2, dtype=float)
    t1_arr = np.asarray(t1, dtype=float)
    f_r = envelope_value(timeline.read, t2_arr)
    f_w = envelope_value(timeline.write, t1_arr)
    phase = np.exp(1j * (a_g - a_s) * (t2_arr - t1_arr) * NS)
    value = -f_r * f_w / (timeline.read.detuning * timeline.write.detuning) * phase
    value = np.where(t2_arr > t1_arr, value, 0j)
    if value.ndim == 0:
        return complex(value)
    return value


def spatial_average_phase(m_g: float, m_s: float, K: float, tau, g_ratio: float = -1.0):
    """Average of exp(i 2 pi K M s tau) over s in [-1/2, 1/2], M = m_g - g_ratio m_s.

    ``tau`` is in ns and ``K`` in Hz; the result is sinc(K M tau), real by symmetry.
    """
    index = m_g - g_ratio * m_s
    value = np.sinc(K * index * np.asarray(tau, dtype=float) * NS)
    if np.ndim(value) == 0:
        return float(value)
    return value


def coherence_factor(ensemble: Ensemble, K: float, tau) -> np.ndarray:
    """Pathway sum of D d sinc(K M tau) for storage time(s) ``tau`` (ns)."""
    tau_arr = np.asarray(tau, dtype=float)
    ratio = ensemble.scheme.g_ratio
    total = np.zeros_like(tau_arr, dtype=complex)
    for pathway in ensemble.pathways:
        average = spatial_average_phase(pathway.m_g, pathway.m_s, K, tau_arr, ratio)
        total = total + pathway.weight * pathway.strength * average
    return total


def p_density(t2, t1, ensemble: Ensemble, K: float, timeline: Timeline):
    """Density of probability amplitude P(t2, t1) summed over pathways (C = 1)."""
    t2_arr = np.asarray(t2, dtype=float)
    t1_arr = np.asarray(t1, dtype=float)
    base = g_density(t2_arr, t1_arr, 0.0, 0.0, timeline)
    value = base * coherence_factor(ensemble, K, t2_arr - t1_arr)
    if np.ndim(value) == 0:
        return complex(value)
    return value


def joint_density(t2, t1, ensemble: Ensemble, K: float, timeline: Timeline):
    """Joint detection density |P(t2, t1)|**2."""
    return np.abs(p_density(t2, t1, ensemble, K, timeline)) ** 2


def wavepacket_grid(
    ensemble: Ensemble,
    K: float,
    timeline: Timeline,
    bin_ns: float = 4.0,
    subsamples: int = 4,
) -> WavepacketGrid:
    """Joint density averaged over ``bin_ns`` x ``bin_ns`` windows.

    Both axes span the write start to the end of the last pulse. Each bin is
    averaged over ``subsamples`` midpoints per axis; bins with t2 <= t1 are 0.

    Raises:
        PulseError: For non-positive ``bin_ns`` or delta pulses.
    """
    if bin_ns <= 0:
        raise PulseError(f"bin_ns must be positive, got {bin_ns}")
    if subsamples < 1:
        raise PulseError(f"subsamples must be at least 1, got {subsamples}")
    if timeline.has_delta:
        raise PulseError("delta pulses have no time-resolved wavepacket")

    start = timeline.write.start
    n_bins = max(1, math.ceil((timeline.end - start) / bin_ns - 1e-9))
    edges = start + bin_ns * np.arange(n_bins + 1)
    offsets = (np.arange(subsamples) + 0.5) / subsamples * bin_ns
    points = (edges[:-1, None] + offsets[None, :]).ravel()

    density = joint_density(points[None, :], points[:, None], ensemble, K, timeline)
    values = density.reshape(n_bins, subsamples, n_bins, subsamples).mean(axis=(1, 3))
    values = np.triu(values)
    return WavepacketGrid(t1_edges=edges, t2_edges=edges.copy(), values=values)


# ---------------------------------------------------------------------------
# Joint probability
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _gl_order(K: float, index: float, timeline: Timeline, base: int) -> int:
    span = (timeline.end - timeline.write.start) * NS
    oscillation = math.pi * abs(K * index) * span
    return max(base, int(math.ceil(oscillation)) + 32)


def _amplitude_delta(groups: dict[float, complex], K: float, timeline: Timeline) -> complex:
    write, read = timeline.write, timeline.read
    prefactor = -write.area_s * read.area_s / (write.detuning * read.detuning)
    total = sum(
        (weight * np.sinc(K * index * timeline.delta_t * NS) for index, weight in groups.items()),
        0j,
    )
    return complex(prefactor * total)


def _pathway_nodes(ensemble: Ensemble, keep: set[float], K: float, timeline: Timeline, gl_order: int):
    """Yield each kept pathway with its Zeeman rates at the Gauss-Legendre nodes over s."""
    ratio = ensemble.scheme.g_ratio
    for pathway in ensemble.pathways:
        index = round(pathway.dephasing_index(ratio), 12) + 0.0
        if index not in keep:
            continue
        nodes, weights = _legendre(_gl_order(K, index, timeline, gl_order))
        s = 0.5 * nodes
        a_g = 2.0 * math.pi * K * pathway.m_g * s
        a_s = 2.0 * math.pi * K * ratio * pathway.m_s * s
        yield pathway, a_g, a_s, 0.5 * weights


def _amplitude_analytic(
    ensemble: Ensemble, keep: set[float], K: float, timeline: Timeline, gl_order: int
) -> complex:
    a_g_max, a_s_max = ensemble.max_rates(K)
    check_analytic_regime(a_g_max, a_s_max, timeline)
    total = 0j
    for pathway, a_g, a_s, weights in _pathway_nodes(ensemble, keep, K, timeline, gl_order):
        average = complex(np.sum(weights * _square_amplitude(a_g, a_s, timeline, math.inf)))
        total += pathway.weight * pathway.strength * average
    return total


def _amplitude_numeric(
    ensemble: Ensemble,
    keep: set[float],
    K: float,
    timeline: Timeline,
    gl_order: int,
    grid_step: float,
) -> complex:
    total = 0j
    for pathway, a_g, a_s, weights in _pathway_nodes(ensemble, keep, K, timeline, gl_order):
        average = sum(
            (w * f_numeric(math.inf, g, s, timeline, grid_step) for g, s, w in zip(a_g, a_s, weights)),
            0j,
        )
        total += pathway.weight * pathway.strength * average
    return total


def joint_amplitude(
    ensemble: Ensemble,
    K: float,
    timeline: Timeline,
    backend: Backend = "analytic",
    gl_order: int = DEFAULT_GL_ORDER,
    grid_step: float = DEFAULT_GRID_STEP_NS,
    field_insensitive_only: bool = False,
) -> complex:
    """Spatially averaged pair amplitude sum_p D d <F(inf, s)>_s (C = 1).

    Args:
        ensemble: Pathways and populations.
        K: Gradient parameter in Hz.
        timeline: Write and read pulses.
        backend: ``analytic`` (closed form + Gauss-Legendre over s), ``numeric``
            (nested quadrature + Gauss-Legendre) or ``delta`` (zero-duration
            pulses, exact sinc form).
        gl_order: Minimum Gauss-Legendre order for the s integral; raised
            automatically when the integrand oscillates faster.
        grid_step: Quadrature step in ns for the numeric backend.
        field_insensitive_only: Keep only pathways with M = 0.

    Raises:
        UnsupportedRegimeError: From the analytic backend outside its regime.
    """
    groups = ensemble.groups
    if field_insensitive_only:
        groups = {index: weight for index, weight in groups.items() if index == 0}
    if backend == "delta":
        return _amplitude_delta(groups, K, timeline)
    if backend == "analytic":
        return _amplitude_analytic(ensemble, set(groups), K, timeline, gl_order)
    if backend == "numeric":
        logger.info("Evaluating %d pathways with the nested quadrature", len(ensemble.pathways))
        return _amplitude_numeric(ensemble, set(groups), K, timeline, gl_order, grid_step)
    raise ValueError(f"Unknown backend '{backend}'")


def joint_probability_p12(
    ensemble: Ensemble,
    K: float,
    timeline: Timeline,
    backend: Backend = "analytic",
    gl_order: int = DEFAULT_GL_ORDER,
    grid_step: float = DEFAULT_GRID_STEP_NS,
) -> float:
    """Total probability of detecting the pair, |joint_amplitude|**2 with C = 1."""
    return abs(joint_amplitude(ensemble, K, timeline, backend, gl_order, grid_step)) ** 2


def asymptotic_p12(
    ensemble: Ensemble,
    K: float,
    timeline: Timeline,
    backend: Backend = "analytic",
    gl_order: int = DEFAULT_GL_ORDER,
    grid_step: float = DEFAULT_GRID_STEP_NS,
) -> float:
    """Long-delay plateau of p12: only field-insensitive pathways survive."""
    amplitude = joint_amplitude(
        ensemble, K, timeline, backend, gl_order, grid_step, field_insensitive_only=True
    )
    return abs(amplitude) ** 2


def small_ensemble_p12(n_atoms: int, amplitudes, distribution) -> EnsembleTerms:
    """Pair probability of ``n_atoms`` identical atoms, term by term.

    Args:
        n_atoms: Number of atoms N (diagnostic scale, N <= 1000).
        amplitudes: Matrix A[m', m] of single-atom amplitudes from |m> to |m'>.
        distribution: Populations D_m.

    Returns:
        The N**2 coherent term, the incoherent term and the subtracted
        self-interference term; ``total`` combines them.
    """
    if n_atoms < 1 or n_atoms > 1000:
        raise ValueError(f"n_atoms must be in [1, 1000], got {n_atoms}")
    matrix = np.asarray(amplitudes, dtype=complex)
    populations = np.asarray(distribution, dtype=float)
    if matrix.shape != (populations.size, populations.size):
        raise ValueError(
            f"amplitude matrix shape {matrix.shape} does not match {populations.size} populations"
        )
    diagonal = complex(np.sum(populations * np.diag(matrix)))
    coherent = abs(n_atoms * diagonal) ** 2
    incoherent = n_atoms * float(np.sum(populations[None, :] * np.abs(matrix) ** 2))
    subtracted = n_atoms * abs(diagonal) ** 2
    return EnsembleTerms(coherent=coherent, incoherent=incoherent, subtracted=subtracted)
