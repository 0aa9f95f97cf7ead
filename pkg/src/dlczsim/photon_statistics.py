"""Photon-number statistics, correlation functions and the xi scale fit."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import poisson

from dlczsim.models import CorrelationEstimate, XiFit

logger = logging.getLogger(__name__)

# Probability mass allowed outside a truncated photon-number distribution.
TRUNCATION_TOLERANCE = 1e-12
DEFAULT_BLOCK_SIZE = 1 << 16

# Columns of the per-trial statistic matrix used by the Monte-Carlo estimator.
_X1A, _X1B, _X2A, _X2B, _Z11, _Z22, _Z12 = range(7)


class PhotonStatisticsError(ValueError):
    """Custom exception for invalid photon-statistics inputs."""
    pass


class TwoModeState(BaseModel):
    """Ideal pair source with excitation probability chi, truncated at n_max photons."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    chi: float = Field(gt=0, lt=1, description="Pair excitation probability")
    n_max: int | None = Field(default=None, ge=1, description="Largest photon number kept")

    @model_validator(mode="after")
    def _mass(self) -> TwoModeState:
        if self.n_max is not None and self.chi ** (self.n_max + 1) > TRUNCATION_TOLERANCE:
            raise ValueError(
                f"n_max={self.n_max} leaves {self.chi ** (self.n_max + 1):.3e} of the mass untruncated"
            )
        return self

    def distribution(self) -> np.ndarray:
        return ideal_joint_distribution(self.chi, self.n_max)


class DetectionModel(BaseModel):
    """Two detectors per field behind 50/50 splitters, with losses and backgrounds.

    With ``number_resolving`` the p's are mean detection counts per trial;
    otherwise they are threshold click probabilities.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta1: float = Field(default=1.0, ge=0, le=1, description="Field-1 detection efficiency")
    eta2: float = Field(default=1.0, ge=0, le=1, description="Field-2 detection efficiency")
    bg1: float = Field(default=0.0, ge=0, le=1, description="Background click probability per field-1 detector")
    bg2: float = Field(default=0.0, ge=0, le=1, description="Background click probability per field-2 detector")
    number_resolving: bool = Field(default=True, description="Count photons instead of clicks")


def default_n_max(chi: float) -> int:
    """Smallest truncation keeping all but TRUNCATION_TOLERANCE/10 of the mass.

    Powers landing on the bound within rounding count as inside it.
    """
    bound = TRUNCATION_TOLERANCE / 10 * (1 + 1e-9)
    n_max = 1
    while chi ** (n_max + 1) > bound:
        n_max += 1
    return n_max


def ideal_joint_distribution(chi: float, n_max: int | None = None) -> np.ndarray:
    """P(n1, n2) of the ideal pair state, P(n, n) = (1 - chi) chi**n.

    Raises:
        PhotonStatisticsError: If ``chi`` is outside (0, 1) or ``n_max`` truncates
            more than TRUNCATION_TOLERANCE of the mass.
    """
    if not 0 < chi < 1:
        raise PhotonStatisticsError(f"chi must lie in (0, 1), got {chi}")
    if n_max is None:
        n_max = default_n_max(chi)
    if chi ** (n_max + 1) > TRUNCATION_TOLERANCE:
        raise PhotonStatisticsError(f"n_max={n_max} is too small for chi={chi}")
    n = np.arange(n_max + 1)
    return np.diag((1.0 - chi) * chi**n)


def ideal_pair_amplitudes(chi: float) -> tuple[float, float]:
    """Vacuum and single-pair amplitudes of the state to first order in chi."""
    if not 0 < chi < 1:
        raise PhotonStatisticsError(f"chi must lie in (0, 1), got {chi}")
    return math.sqrt(1.0 - chi), math.sqrt(chi)


def poissonian_product_distribution(mean1: float, mean2: float, n_max: int) -> np.ndarray:
    """Uncorrelated coherent-state reference: product of two Poisson distributions."""
    n = np.arange(n_max + 1)
    joint = np.outer(poisson.pmf(n, mean1), poisson.pmf(n, mean2))
    if 1.0 - joint.sum() > TRUNCATION_TOLERANCE:
        raise PhotonStatisticsError(f"n_max={n_max} is too small for means {mean1}, {mean2}")
    return joint


def _check_distribution(dist: np.ndarray) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2 or dist.size == 0:
        raise PhotonStatisticsError("distribution must be a non-empty 2-D array P[n1, n2]")
    if np.any(dist < 0):
        raise PhotonStatisticsError("distribution has negative entries")
    if abs(dist.sum() - 1.0) > 1e-9:
        raise PhotonStatisticsError(f"distribution sums to {dist.sum()!r}, expected 1")
    return dist


def _rates(dist: np.ndarray, model: DetectionModel) -> tuple[float, float, float, float, float]:
    """Return (p1, p2, p11, p22, p12) by enumeration over the distribution."""
    n1 = np.arange(dist.shape[0], dtype=float)
    n2 = np.arange(dist.shape[1], dtype=float)
    marg1, marg2 = dist.sum(axis=1), dist.sum(axis=0)
    half1, half2 = model.eta1 / 2, model.eta2 / 2

    if model.number_resolving:
        mean1, mean2 = marg1 @ n1, marg2 @ n2
        fact1, fact2 = marg1 @ (n1 * (n1 - 1)), marg2 @ (n2 * (n2 - 1))
        cross = n1 @ dist @ n2
        p1 = half1 * mean1 + model.bg1
        p2 = half2 * mean2 + model.bg2
        p11 = half1**2 * fact1 + 2 * model.bg1 * half1 * mean1 + model.bg1**2
        p22 = half2**2 * fact2 + 2 * model.bg2 * half2 * mean2 + model.bg2**2
        p12 = (
            half1 * half2 * cross
            + model.bg2 * half1 * mean1
            + model.bg1 * half2 * mean2
            + model.bg1 * model.bg2
        )
        return p1, p2, p11, p22, p12

    # no click at one detector: no background and every photon elsewhere
    miss1 = (1 - model.bg1) * (1 - half1) ** n1
    miss2 = (1 - model.bg2) * (1 - half2) ** n2
    both_miss1 = (1 - model.bg1) ** 2 * (1 - model.eta1) ** n1
    both_miss2 = (1 - model.bg2) ** 2 * (1 - model.eta2) ** n2
    p1 = marg1 @ (1 - miss1)
    p2 = marg2 @ (1 - miss2)
    p11 = marg1 @ (1 - 2 * miss1 + both_miss1)
    p22 = marg2 @ (1 - 2 * miss2 + both_miss2)
    p12 = (1 - miss1) @ dist @ (1 - miss2)
    return float(p1), float(p2), float(p11), float(p22), float(p12)


def cauchy_schwarz_R(g11: float, g22: float, g12: float) -> tuple[float, bool]:
    """Cauchy-Schwarz ratio R = g12**2 / (g11 g22) and whether R > 1.

    Raises:
        PhotonStatisticsError: If ``g11`` or ``g22`` is not positive.
    """
    if g11 <= 0 or g22 <= 0:
        raise PhotonStatisticsError(f"g11 and g22 must be positive, got {g11}, {g22}")
    ratio = g12**2 / (g11 * g22)
    return ratio, bool(ratio > 1.0)


def correlation_functions(dist, model: DetectionModel) -> CorrelationEstimate:
    """Exact g11, g22, g12 and R for a photon-number distribution.

    Each photon is detected independently with its field's efficiency and
    routed to one of two detectors with equal probability; backgrounds add
    independent clicks at every detector.

    Raises:
        PhotonStatisticsError: If a detection rate vanishes.
    """
    dist = _check_distribution(dist)
    p1, p2, p11, p22, p12 = _rates(dist, model)
    if p1 <= 0 or p2 <= 0:
        raise PhotonStatisticsError("a field is never detected; correlations are undefined")
    g11 = p11 / p1**2
    g22 = p22 / p2**2
    g12 = p12 / (p1 * p2)
    R, nonclassical = cauchy_schwarz_R(g11, g22, g12)
    return CorrelationEstimate(
        p1=p1, p2=p2, p11=p11, p22=p22, p12=p12,
        g11=g11, g22=g22, g12=g12, R=R, nonclassical=nonclassical,
    )


def _block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _simulate_block(
    flat: np.ndarray, columns: int, model: DetectionModel, size: int, seed: int, index: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = _block_rng(seed, index)
    drawn = rng.choice(flat.size, size=size, p=flat)
    n1, n2 = np.divmod(drawn, columns)

    split1 = rng.multinomial(n1, [model.eta1 / 2, model.eta1 / 2, 1 - model.eta1])
    split2 = rng.multinomial(n2, [model.eta2 / 2, model.eta2 / 2, 1 - model.eta2])
    noise = rng.random((size, 4)) < np.array([model.bg1, model.bg1, model.bg2, model.bg2])

    counts = np.column_stack((split1[:, :2], split2[:, :2])).astype(np.int64) + noise
    if not model.number_resolving:
        counts = (counts > 0).astype(np.int64)

    stats = np.empty((7, size), dtype=np.int64)
    stats[_X1A:_X2B + 1] = counts.T
    stats[_Z11] = counts[:, 0] * counts[:, 1]
    stats[_Z22] = counts[:, 2] * counts[:, 3]
    stats[_Z12] = counts[:, 0] * counts[:, 2]
    return stats.sum(axis=1), stats @ stats.T


def _log_gradient(numerator: int, first: int, second: int, means: np.ndarray) -> np.ndarray:
    gradient = np.zeros(7)
    gradient[numerator] += 1.0 / means[numerator]
    gradient[first] -= 1.0 / means[first]
    gradient[second] -= 1.0 / means[second]
    return gradient


def simulate_trials(
    dist,
    model: DetectionModel,
    n_trials: int,
    seed: int,
    workers: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> CorrelationEstimate:
    """Monte-Carlo estimate of the correlation functions.

    Trials run in fixed-size blocks, each with its own Philox stream keyed by
    ``(seed, block index)``, and integer tallies are summed in block order, so
    results are identical for any number of ``workers``. Standard errors come
    from delta-method propagation of the sample covariance.
    """
    if n_trials < 1:
        raise PhotonStatisticsError(f"n_trials must be at least 1, got {n_trials}")
    if seed < 0:
        raise PhotonStatisticsError(f"seed must be non-negative, got {seed}")
    dist = _check_distribution(dist)
    flat = dist.ravel() / dist.sum()
    columns = dist.shape[1]

    n_blocks = math.ceil(n_trials / block_size)
    sizes = [min(block_size, n_trials - k * block_size) for k in range(n_blocks)]
    logger.debug("Simulating %d trials in %d blocks on %d workers", n_trials, n_blocks, workers)

    def run(index: int) -> tuple[np.ndarray, np.ndarray]:
        return _simulate_block(flat, columns, model, sizes[index], seed, index)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, range(n_blocks)))

    first = np.zeros(7, dtype=np.int64)
    second = np.zeros((7, 7), dtype=np.int64)
    for block_first, block_second in results:
        first += block_first
        second += block_second

    means = first / n_trials
    covariance = (second / n_trials - np.outer(means, means)) / n_trials

    with np.errstate(divide="ignore", invalid="ignore"):
        g11 = means[_Z11] / (means[_X1A] * means[_X1B])
        g22 = means[_Z22] / (means[_X2A] * means[_X2B])
        g12 = means[_Z12] / (means[_X1A] * means[_X2A])
        e11 = _log_gradient(_Z11, _X1A, _X1B, means)
        e22 = _log_gradient(_Z22, _X2A, _X2B, means)
        e12 = _log_gradient(_Z12, _X1A, _X2A, means)
        e_R = 2 * e12 - e11 - e22
        R = g12**2 / (g11 * g22)

        def spread(value: float, gradient: np.ndarray) -> float:
            return float(abs(value) * math.sqrt(max(gradient @ covariance @ gradient, 0.0)))

        sigmas = [spread(g11, e11), spread(g22, e22), spread(g12, e12), spread(R, e_R)]

    return CorrelationEstimate(
        p1=float(means[_X1A]),
        p2=float(means[_X2A]),
        p11=float(means[_Z11]),
        p22=float(means[_Z22]),
        p12=float(means[_Z12]),
        g11=float(g11),
        g22=float(g22),
        g12=float(g12),
        R=float(R),
        nonclassical=bool(R > 1.0),
        sigma_g11=sigmas[0],
        sigma_g22=sigmas[1],
        sigma_g12=sigmas[2],
        sigma_R=sigmas[3],
        n_trials=n_trials,
    )


def scale_fit_xi(theory_dt, theory_p12, data_dt, data_g12, data_sigma) -> XiFit:
    """Fit g12 data with xi * p12(dt) by weighted least squares.

    The theory curve is linearly interpolated at the data delays; weights are
    1 / sigma**2. ``xi_th`` is the inverse of the mean of the final tenth of
    the theory samples.

    Raises:
        PhotonStatisticsError: For empty or out-of-range data, non-positive
            errors or a theory curve that vanishes.
    """
    theory_dt = np.asarray(theory_dt, dtype=float)
    theory_p12 = np.asarray(theory_p12, dtype=float)
    data_dt = np.asarray(data_dt, dtype=float)
    data_g12 = np.asarray(data_g12, dtype=float)
    data_sigma = np.asarray(data_sigma, dtype=float)

    if data_dt.size < 1:
        raise PhotonStatisticsError("at least one data point is required")
    if not data_dt.shape == data_g12.shape == data_sigma.shape:
        raise PhotonStatisticsError("data columns differ in length")
    if theory_dt.size < 1 or theory_dt.shape != theory_p12.shape:
        raise PhotonStatisticsError("theory curve is empty or malformed")
    if np.any(np.diff(theory_dt) <= 0):
        raise PhotonStatisticsError("theory delays must be strictly increasing")
    if data_dt.min() < theory_dt[0] or data_dt.max() > theory_dt[-1]:
        raise PhotonStatisticsError(
            f"data delays [{data_dt.min()}, {data_dt.max()}] ns exceed the theory range "
            f"[{theory_dt[0]}, {theory_dt[-1]}] ns"
        )
    if np.any(data_sigma <= 0):
        raise PhotonStatisticsError("data errors must be positive")

    predicted = np.interp(data_dt, theory_dt, theory_p12)
    weights = 1.0 / data_sigma**2
    normal = float(np.sum(weights * predicted**2))
    if normal == 0.0:
        raise PhotonStatisticsError("theory curve vanishes at every data point")
    xi = float(np.sum(weights * predicted * data_g12)) / normal
    chi2 = float(np.sum(weights * (xi * predicted - data_g12) ** 2))

    tail = theory_p12[-max(1, theory_p12.size // 10):]
    asymptote = float(np.mean(tail))
    if asymptote <= 0:
        raise PhotonStatisticsError("theory asymptote is not positive")

    return XiFit(
        xi=xi,
        sigma_xi=1.0 / math.sqrt(normal),
        xi_th=1.0 / asymptote,
        chi2=chi2,
        n_points=int(data_dt.size),
    )


def coherence_time(dt, values, threshold: float = 2.0) -> float | None:
    """First delay where ``values`` falls below ``threshold``, linearly interpolated.

    Returns None when the curve never crosses the threshold from above.
    """
    dt = np.asarray(dt, dtype=float)
    values = np.asarray(values, dtype=float)
    for k in range(1, values.size):
        if values[k - 1] >= threshold > values[k]:
            fraction = (values[k - 1] - threshold) / (values[k - 1] - values[k])
            return float(dt[k - 1] + fraction * (dt[k] - dt[k - 1]))
    return None
