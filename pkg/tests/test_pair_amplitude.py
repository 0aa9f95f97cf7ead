"""Unit tests for pair_amplitude module."""

import logging
import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import roots_legendre

from dlczsim.atomic_model import CESIUM, Ensemble, GroundDistribution, PolarizationSet
from dlczsim.pair_amplitude import (
    QuadratureError,
    UnsupportedRegimeError,
    asymptotic_p12,
    coherence_factor,
    f_analytic_square,
    f_numeric,
    f_numeric_with_error,
    g_density,
    joint_amplitude,
    joint_density,
    joint_probability_p12,
    p_density,
    small_ensemble_p12,
    spatial_average_phase,
    wavepacket_grid,
)
from dlczsim.pulses import Pulse, Timeline

DETUNING = 2 * math.pi * 3e9
K_QUADRUPOLE = 1.1e6
K_COMPENSATED = 12e3

# Unpolarized Cs, lin-perp-lin: group sums D d by dephasing index, in units of 1/(9 * 8960).
LIN_PERP_LIN_GROUPS = {-6: 1036, -4: 1656, -2: 1980, 0: 2080, 2: 1980, 4: 1656, 6: 1036}


def square(start, fwhm, detuning=DETUNING, amplitude=1.0):
    return Pulse(shape="square", start=start, fwhm=fwhm, detuning=detuning, amplitude=amplitude)


def delta(start, fwhm, detuning=DETUNING):
    return Pulse(shape="delta", start=start, fwhm=fwhm, detuning=detuning)


def trapezoid(start, fwhm, detuning=DETUNING):
    return Pulse(shape="trapezoid", start=start, fwhm=fwhm, detuning=detuning, rise=20.0)


@pytest.fixture
def unpolarized():
    return Ensemble(CESIUM, GroundDistribution.unpolarized(4), PolarizationSet.lin_perp_lin())


@pytest.fixture
def pumped_sigma():
    return Ensemble(CESIUM, GroundDistribution.pumped(4, 0), PolarizationSet.sigma_pumped())


@pytest.fixture
def pumped_lin():
    return Ensemble(CESIUM, GroundDistribution.pumped(4, 0), PolarizationSet.lin_perp_lin())


@pytest.fixture
def square_timeline():
    return Timeline.from_delay(square(0.0, 150.0), square(0.0, 120.0), 200.0)


@pytest.fixture
def delta_timeline():
    return Timeline.from_delay(delta(0.0, 150.0), delta(0.0, 120.0), 0.0)


class TestFAnalyticSquare:
    """Tests for the closed-form amplitude."""

    def test_zero_rates_magnitude(self, square_timeline):
        """Completed sequence at zero field should have |F| = area_w area_r / (Delta_w Delta_r) up to pulse-edge terms."""
        value = f_analytic_square(math.inf, 0.0, 0.0, square_timeline)
        expected = 150e-9 * 120e-9 / DETUNING**2
        assert abs(value) == pytest.approx(expected, rel=3e-3)
        assert value.real == pytest.approx(-expected, rel=3e-3)

    def test_before_read_is_zero(self, square_timeline):
        """No photon 2 can be emitted before the read pulse starts."""
        assert f_analytic_square(100.0, 0.0, 0.0, square_timeline) == 0

    def test_trapezoid_unsupported(self):
        """Trapezoid pulses have no closed form."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 200.0)
        with pytest.raises(UnsupportedRegimeError, match="numeric backend"):
            f_analytic_square(math.inf, 0.0, 0.0, timeline)

    def test_small_detuning_unsupported(self):
        """Detunings comparable to the inverse pulse length are rejected."""
        slow = 2 * math.pi * 1e8
        timeline = Timeline.from_delay(square(0.0, 150.0, slow), square(0.0, 120.0, slow), 200.0)
        with pytest.raises(UnsupportedRegimeError, match="below"):
            f_analytic_square(math.inf, 0.0, 0.0, timeline)

    def test_large_zeeman_rate_unsupported(self, square_timeline):
        """Zeeman rates within a factor 1000 of the detuning are rejected."""
        with pytest.raises(UnsupportedRegimeError):
            f_analytic_square(math.inf, DETUNING / 100, 0.0, square_timeline)

    def test_matches_numeric_oracle(self):
        """Closed form and nested quadrature should agree to 1e-3 on random valid cases."""
        rng = np.random.default_rng(20240611)
        for _ in range(20):
            K = rng.uniform(0.0, K_QUADRUPOLE)
            m_g, m_s = rng.integers(-2, 3, size=2)
            s = rng.uniform(-0.5, 0.5)
            a_g = 2 * math.pi * K * m_g * s
            a_s = 2 * math.pi * K * CESIUM.g_ratio * m_s * s
            write = square(0.0, float(rng.integers(120, 151)))
            read = square(0.0, float(rng.integers(120, 151)))
            timeline = Timeline.from_delay(write, read, float(rng.integers(0, 301)))

            closed = f_analytic_square(timeline.end, a_g, a_s, timeline)
            oracle = f_numeric(timeline.end, a_g, a_s, timeline)
            assert abs(closed - oracle) / abs(oracle) <= 1e-3

    @pytest.mark.parametrize("delta_t", [0.0, 7.0, 39.0, 48.0, 100.0])
    def test_overlapping_pulses_match_numeric(self, delta_t):
        """Read pulses starting inside the write pulse should agree with the nested quadrature."""
        a_g = 2 * math.pi * K_QUADRUPOLE * 2 * 0.4
        a_s = -2 * math.pi * K_QUADRUPOLE * CESIUM.g_ratio * 0.4
        timeline = Timeline.from_delay(square(0.0, 150.0), square(0.0, 120.0), delta_t)

        closed = f_analytic_square(timeline.end, a_g, a_s, timeline)
        oracle = f_numeric(timeline.end, a_g, a_s, timeline)
        assert abs(closed - oracle) / abs(oracle) <= 2e-4

    def test_read_inside_write_uses_sequence_end(self):
        """A read pulse ending before the write pulse is evaluated at the write end."""
        timeline = Timeline.from_delay(square(0.0, 150.0), square(0.0, 100.0), 10.0)
        completed = f_analytic_square(math.inf, 0.0, 0.0, timeline)
        at_end = f_analytic_square(timeline.end, 0.0, 0.0, timeline)
        assert completed == pytest.approx(at_end, rel=1e-12)


class TestFNumeric:
    """Tests for the nested quadrature."""

    def test_before_write_is_zero(self, square_timeline):
        """Empty integration domain gives 0."""
        assert f_numeric(0.0, 0.0, 0.0, square_timeline) == 0

    def test_linear_in_write_amplitude(self):
        """Doubling the write amplitude should double F."""
        base = Timeline.from_delay(square(0.0, 20.0), square(0.0, 20.0), 30.0)
        doubled = Timeline.from_delay(square(0.0, 20.0, amplitude=2.0), square(0.0, 20.0), 30.0)
        one = f_numeric(math.inf, 1e5, -2e5, base, grid_step=0.01)
        two = f_numeric(math.inf, 1e5, -2e5, doubled, grid_step=0.01)
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_zero_rates_magnitude(self):
        """At zero field |F| should approach the product of areas over the detunings."""
        timeline = Timeline.from_delay(square(0.0, 40.0), square(0.0, 30.0), 50.0)
        value = f_numeric(math.inf, 0.0, 0.0, timeline)
        assert abs(value) == pytest.approx(40e-9 * 30e-9 / DETUNING**2, rel=1e-3)

    def test_off_grid_edge(self):
        """Pulse edges must fall on grid nodes."""
        timeline = Timeline.from_delay(square(0.0, 20.0005), square(0.0, 20.0), 30.0)
        with pytest.raises(QuadratureError, match="not on the"):
            f_numeric(math.inf, 0.0, 0.0, timeline, grid_step=0.002)

    def test_delta_rejected(self, delta_timeline):
        """Delta pulses need the delta backend."""
        with pytest.raises(QuadratureError, match="delta"):
            f_numeric(math.inf, 0.0, 0.0, delta_timeline)

    def test_coarse_step_warns(self, caplog):
        """A step that advances the detuning phase too far should be flagged."""
        timeline = Timeline.from_delay(square(0.0, 10.0), square(0.0, 10.0), 10.0)
        with caplog.at_level(logging.WARNING, logger="dlczsim.pair_amplitude"):
            estimate = f_numeric_with_error(math.inf, 0.0, 0.0, timeline, grid_step=0.1)
        assert estimate.coarse
        assert estimate.error > 0
        assert "advances the fastest phase" in caplog.text

    def test_fine_step_not_coarse(self):
        """The default step should not be flagged at 3 GHz detuning."""
        timeline = Timeline.from_delay(square(0.0, 10.0), square(0.0, 10.0), 10.0)
        assert not f_numeric_with_error(math.inf, 0.0, 0.0, timeline).coarse


class TestDensities:
    """Tests for g_density, spatial_average_phase and P."""

    def test_g_density_phase_free(self, square_timeline):
        """Unit envelopes at zero field should give -1 / (Delta_r Delta_w)."""
        value = g_density(250.0, 50.0, 0.0, 0.0, square_timeline)
        assert value == pytest.approx(-1 / DETUNING**2, rel=1e-12)

    def test_g_density_phase(self, square_timeline):
        """The phase should be (a_g - a_s)(t2 - t1) + pi."""
        a_g, a_s = 3e6, -1e6
        value = g_density(250.0, 50.0, a_g, a_s, square_timeline)
        expected = math.remainder((a_g - a_s) * 200e-9 + math.pi, 2 * math.pi)
        assert math.remainder(np.angle(value) - expected, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)

    def test_g_density_outside_support(self, square_timeline):
        """Zero when the write envelope vanishes or t2 <= t1."""
        assert g_density(250.0, 160.0, 0.0, 0.0, square_timeline) == 0
        assert g_density(50.0, 60.0, 0.0, 0.0, square_timeline) == 0

    def test_spatial_average_examples(self):
        """sinc identities at the clock state, the first zero and tau = 0."""
        assert spatial_average_phase(0, 0, K_QUADRUPOLE, 5000.0) == 1.0
        assert spatial_average_phase(1, 0, 1e6, 1000.0) == pytest.approx(0.0, abs=1e-15)
        assert spatial_average_phase(3, 2, K_QUADRUPOLE, 0.0) == 1.0

    def test_spatial_average_against_quadrature(self):
        """Should equal a 10^6-point quadrature of the phase over the ensemble."""
        rng = np.random.default_rng(4)
        s = np.linspace(-0.5, 0.5, 1_000_001)
        for _ in range(20):
            K = rng.uniform(0.0, K_QUADRUPOLE)
            m_g, m_s = int(rng.integers(-4, 5)), int(rng.integers(-3, 4))
            tau = rng.uniform(0.0, 2000.0)
            phase = np.exp(2j * math.pi * K * (m_g + m_s) * s * tau * 1e-9)
            expected = integrate.simpson(phase, x=s)
            assert spatial_average_phase(m_g, m_s, K, tau) == pytest.approx(expected.real, abs=1e-10)
            assert abs(expected.imag) < 1e-10

    def test_p_density_zero_field_separable(self, unpolarized, square_timeline):
        """At K = 0 the joint density is the squared pathway sum times the envelopes."""
        total = sum(p.weight * p.strength for p in unpolarized.pathways)
        value = joint_density(250.0, 50.0, unpolarized, 0.0, square_timeline)
        assert value == pytest.approx(abs(total) ** 2 / DETUNING**4, rel=1e-12)

    def test_clock_pathway_independent_of_k(self, pumped_sigma, square_timeline):
        """A single (0, 0) pathway does not dephase."""
        slow = p_density(300.0, 20.0, pumped_sigma, 0.0, square_timeline)
        fast = p_density(300.0, 20.0, pumped_sigma, K_QUADRUPOLE, square_timeline)
        assert fast == slow

    def test_lin_perp_lin_groups(self, unpolarized):
        """Unpolarized lin-perp-lin groups should match the hand-derived pathway sums."""
        groups = unpolarized.groups
        assert sorted(groups) == sorted(LIN_PERP_LIN_GROUPS)
        for index, count in LIN_PERP_LIN_GROUPS.items():
            assert groups[index] == pytest.approx(count / (9 * 8960), abs=1e-14)

    def test_coherence_drops_by_400_ns(self, unpolarized):
        """At K = 1.1 MHz the squared coherence at 400 ns is below 30% of its peak."""
        ratio = coherence_factor(unpolarized, K_QUADRUPOLE, 400.0) / coherence_factor(unpolarized, K_QUADRUPOLE, 0.0)
        assert abs(ratio) ** 2 <= 0.3


class TestWavepacketGrid:
    """Tests for wavepacket_grid."""

    def test_zero_field_rank_one(self, unpolarized):
        """At K = 0 with separated pulses the grid is an outer product."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 200.0)
        grid = wavepacket_grid(unpolarized, 0.0, timeline)
        values = grid.values / grid.values.max()
        u, sigma, vt = np.linalg.svd(values)
        residual = values - sigma[0] * np.outer(u[:, 0], vt[0])
        assert np.abs(residual).max() <= 1e-10

    def test_non_negative_upper_triangle(self, unpolarized):
        """Values are non-negative and vanish for t2 <= t1 bins."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 50.0)
        grid = wavepacket_grid(unpolarized, K_QUADRUPOLE, timeline)
        assert np.all(grid.values >= 0)
        assert np.all(np.tril(grid.values, k=-1) == 0)
        assert grid.t1_edges[1] - grid.t1_edges[0] == pytest.approx(4.0)

    def test_compensated_field_uniform_in_t1(self, unpolarized):
        """At K = 12 kHz and 1 us delay the plateau rows vary by under 1%."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 1000.0)
        grid = wavepacket_grid(unpolarized, K_COMPENSATED, timeline)
        edges = grid.t1_edges
        rows = np.flatnonzero((edges[:-1] >= 20.0) & (edges[1:] <= 150.0))
        column = int(np.flatnonzero((edges[:-1] >= 1060.0))[0])
        values = grid.values[rows, column]
        assert (values.max() - values.min()) / values.max() <= 0.01

    def test_dephasing_lowers_density(self, unpolarized):
        """With non-negative pathway sums the gradient can only reduce the density."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 200.0)
        still = wavepacket_grid(unpolarized, 0.0, timeline).values
        dephased = wavepacket_grid(unpolarized, K_QUADRUPOLE, timeline).values
        assert np.all(dephased <= still * (1 + 1e-12))
        assert dephased.sum() < 0.5 * still.sum()

    def test_early_row_decays_with_separation(self, unpolarized):
        """For an early t1 the dephased share of the density falls as t2 moves away."""
        timeline = Timeline.from_delay(trapezoid(0.0, 150.0), trapezoid(0.0, 120.0), 200.0)
        still = wavepacket_grid(unpolarized, 0.0, timeline)
        dephased = wavepacket_grid(unpolarized, K_QUADRUPOLE, timeline)
        centers = still.t1_centers
        row = int(np.argmin(np.abs(centers - 30.0)))
        near = int(np.argmin(np.abs(centers - 230.0)))
        far = int(np.argmin(np.abs(centers - 318.0)))
        share = dephased.values[row] / still.values[row].clip(min=1e-300)
        assert share[far] < share[near] < 1.0

    def test_delta_pulses_rejected(self, unpolarized, delta_timeline):
        """Delta pulses have no time-resolved wavepacket."""
        from dlczsim.pulses import PulseError

        with pytest.raises(PulseError, match="delta"):
            wavepacket_grid(unpolarized, 0.0, delta_timeline)


class TestJointProbability:
    """Tests for p12 and its backends."""

    def test_zero_field_memory_delta(self, unpolarized, delta_timeline):
        """At K = 0 p12 does not depend on the delay, including zero delay."""
        values = [
            joint_probability_p12(unpolarized, 0.0, delta_timeline.with_delay(dt), backend="delta")
            for dt in (0.0, 1000.0, 5000.0, 10000.0, 20000.0)
        ]
        assert max(values) - min(values) <= 1e-9 * max(values)

    def test_zero_field_memory_square(self, unpolarized, square_timeline):
        """At K = 0 the closed-form p12 does not depend on microsecond delays."""
        values = [
            joint_probability_p12(unpolarized, 0.0, square_timeline.with_delay(dt))
            for dt in (1000.0, 5000.0, 10000.0, 20000.0)
        ]
        assert max(values) - min(values) <= 1e-9 * max(values)

    def test_clock_pathway_immunity(self, pumped_sigma, delta_timeline):
        """The pumped sigma ensemble keeps p12 constant up to 100 us."""
        values = [
            joint_probability_p12(pumped_sigma, K_QUADRUPOLE, delta_timeline.with_delay(dt), backend="delta")
            for dt in np.linspace(0.0, 100_000.0, 11)
        ]
        assert max(values) - min(values) <= 1e-9 * max(values)

    @pytest.mark.parametrize("factor", [10.0, 91.7])
    def test_scaling_law(self, unpolarized, delta_timeline, factor):
        """p12(K, dt) equals p12(cK, dt / c) for delta pulses."""
        for dt in (100.0, 450.0, 2000.0):
            slow = joint_probability_p12(unpolarized, K_QUADRUPOLE, delta_timeline.with_delay(dt), backend="delta")
            fast = joint_probability_p12(
                unpolarized, factor * K_QUADRUPOLE, delta_timeline.with_delay(dt / factor), backend="delta"
            )
            assert fast == pytest.approx(slow, rel=1e-9)

    def test_decay_to_positive_asymptote(self, unpolarized, delta_timeline):
        """p12 decays toward the field-insensitive plateau."""
        start = joint_probability_p12(unpolarized, K_QUADRUPOLE, delta_timeline, backend="delta")
        late = joint_probability_p12(unpolarized, K_QUADRUPOLE, delta_timeline.with_delay(1e7), backend="delta")
        plateau = asymptotic_p12(unpolarized, K_QUADRUPOLE, delta_timeline, backend="delta")
        assert plateau > 0
        assert late < start
        assert late == pytest.approx(plateau, rel=1e-3)
        assert plateau / start == pytest.approx((2080 / 11424) ** 2, rel=1e-12)

    def test_analytic_decay(self, unpolarized, square_timeline):
        """The closed-form sweep falls from its zero-delay value toward the plateau."""
        first = joint_probability_p12(unpolarized, K_QUADRUPOLE, square_timeline.with_delay(0.0))
        later = joint_probability_p12(unpolarized, K_QUADRUPOLE, square_timeline.with_delay(3000.0))
        plateau = asymptotic_p12(unpolarized, K_QUADRUPOLE, square_timeline)
        assert 0 < plateau < first
        assert later < 0.5 * first

    def test_dephasing_bound(self, unpolarized, delta_timeline):
        """The coherent part stays inside the sinc envelope of every group."""
        groups = unpolarized.groups
        prefactor = -150e-9 * 120e-9 / DETUNING**2
        for dt in np.linspace(50.0, 5000.0, 40):
            amplitude = joint_amplitude(unpolarized, K_QUADRUPOLE, delta_timeline.with_delay(dt), backend="delta")
            coherent = amplitude / prefactor - groups[0.0]
            bound = sum(
                abs(w) * min(1.0, 1.0 / (math.pi * K_QUADRUPOLE * abs(m) * dt * 1e-9))
                for m, w in groups.items()
                if m != 0
            )
            assert abs(coherent) <= bound + 1e-15

    def test_amplitude_scaling(self, unpolarized, delta_timeline):
        """Doubling the write amplitude multiplies p12 by four."""
        base = joint_probability_p12(unpolarized, K_QUADRUPOLE, delta_timeline, backend="delta")
        doubled = Timeline.from_delay(delta_timeline.write.scaled(2.0), delta_timeline.read, 0.0)
        assert joint_probability_p12(unpolarized, K_QUADRUPOLE, doubled, backend="delta") == pytest.approx(4 * base)

    def test_clock_pathway_analytic_independent_of_k(self, pumped_sigma, square_timeline):
        """The closed-form p12 of the clock pathway ignores the gradient."""
        still = joint_probability_p12(pumped_sigma, 0.0, square_timeline)
        dephased = joint_probability_p12(pumped_sigma, K_QUADRUPOLE, square_timeline)
        assert dephased == pytest.approx(still, rel=1e-12)

    def test_analytic_matches_numeric_backend(self, pumped_lin):
        """Both backends should give the same p12 for a few pathways."""
        timeline = Timeline.from_delay(square(0.0, 150.0), square(0.0, 120.0), 200.0)
        closed = joint_probability_p12(pumped_lin, K_QUADRUPOLE, timeline, backend="analytic")
        oracle = joint_probability_p12(
            pumped_lin, K_QUADRUPOLE, timeline, backend="numeric", gl_order=8, grid_step=0.004
        )
        assert closed == pytest.approx(oracle, rel=2e-3)

    def test_density_integrates_to_amplitude(self, unpolarized):
        """Integrating P over both detection times and squaring gives p12."""
        far = 2 * math.pi * 3e12
        timeline = Timeline.from_delay(square(0.0, 150.0, far), square(0.0, 120.0, far), 200.0)
        nodes, weights = roots_legendre(64)
        t1 = 75.0 + 75.0 * nodes
        t2 = 260.0 + 60.0 * nodes
        density = p_density(t2[:, None], t1[None, :], unpolarized, K_QUADRUPOLE, timeline)
        amplitude = (weights * 60e-9) @ density @ (weights * 75e-9)
        p12 = joint_probability_p12(unpolarized, K_QUADRUPOLE, timeline)
        assert abs(amplitude) ** 2 == pytest.approx(p12, rel=1e-5)

    def test_unknown_backend(self, unpolarized, delta_timeline):
        """Should reject unknown backends."""
        with pytest.raises(ValueError, match="Unknown backend"):
            joint_amplitude(unpolarized, 0.0, delta_timeline, backend="magic")


class TestSmallEnsemble:
    """Tests for small_ensemble_p12."""

    @pytest.fixture
    def diagonal(self):
        populations = np.full(3, 1 / 3)
        amplitudes = np.diag([1.0, 0.5j, -0.25])
        return amplitudes, populations

    def test_single_atom(self, diagonal):
        """For N = 1 only the incoherent term survives."""
        amplitudes, populations = diagonal
        terms = small_ensemble_p12(1, amplitudes, populations)
        assert terms.coherent == pytest.approx(terms.subtracted)
        assert terms.total == pytest.approx(terms.incoherent)

    def test_large_n_limit(self, diagonal):
        """Diagonal amplitudes approach the collective value with O(1/N) corrections."""
        amplitudes, populations = diagonal
        collective = abs(np.sum(populations * np.diag(amplitudes))) ** 2
        for n in (10, 100, 1000):
            terms = small_ensemble_p12(n, amplitudes, populations)
            assert abs(terms.total / n**2 - collective) <= 2.0 / n

    def test_coherent_to_incoherent_ratio(self):
        """Identical atoms in one state: coherent / incoherent = N."""
        terms = small_ensemble_p12(1000, np.array([[0.3]]), np.array([1.0]))
        assert terms.coherent / terms.incoherent == pytest.approx(1000.0)

    def test_rejects_large_n(self, diagonal):
        """Should reject N beyond the diagnostic scale."""
        amplitudes, populations = diagonal
        with pytest.raises(ValueError, match="n_atoms"):
            small_ensemble_p12(1001, amplitudes, populations)

    def test_rejects_shape_mismatch(self):
        """Amplitude matrix must match the populations."""
        with pytest.raises(ValueError, match="does not match"):
            small_ensemble_p12(2, np.eye(2), np.ones(3) / 3)
