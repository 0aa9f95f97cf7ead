"""Data models for dlczsim results and exported curves."""

from __future__ import annotations

from pydantic import BaseModel, Field


class CorrelationEstimate(BaseModel):
    """Normalized correlation functions, either analytic or Monte-Carlo."""

    p1: float = Field(description="Detection rate per trial at one field-1 detector")
    p2: float = Field(description="Detection rate per trial at one field-2 detector")
    p11: float = Field(description="Coincidence rate between the two field-1 detectors")
    p22: float = Field(description="Coincidence rate between the two field-2 detectors")
    p12: float = Field(description="Coincidence rate between field-1 and field-2 detectors")
    g11: float = Field(description="Field-1 autocorrelation p11 / p1^2")
    g22: float = Field(description="Field-2 autocorrelation p22 / p2^2")
    g12: float = Field(description="Cross-correlation p12 / (p1 p2)")
    R: float = Field(description="Cauchy-Schwarz ratio g12^2 / (g11 g22)")
    nonclassical: bool = Field(description="True when R > 1")
    sigma_g11: float = Field(default=0.0, description="Standard error of g11")
    sigma_g22: float = Field(default=0.0, description="Standard error of g22")
    sigma_g12: float = Field(default=0.0, description="Standard error of g12")
    sigma_R: float = Field(default=0.0, description="Standard error of R")
    n_trials: int = Field(default=0, description="Number of simulated trials (0 for analytic)")


class XiFit(BaseModel):
    """Result of scaling a theory p12 curve onto measured g12 points."""

    xi: float = Field(description="Weighted least-squares scale factor")
    sigma_xi: float = Field(description="Standard error of xi")
    xi_th: float = Field(description="Inverse of the long-delay theory asymptote")
    chi2: float = Field(description="Weighted residual sum of squares")
    n_points: int = Field(description="Number of data points used")


class PathwayRecord(BaseModel):
    """One excitation pathway as exported or displayed."""

    m_g: float
    m_s: float
    weight: float = Field(description="Population D_{m_g}")
    strength_re: float = Field(description="Real part of d(m_g, m_s)")
    strength_im: float = Field(description="Imaginary part of d(m_g, m_s)")
    dephasing_index: float = Field(description="M such that a_g - a_s = 2 pi K M s")


class CurveMetadata(BaseModel):
    """Provenance block written with every exported table."""

    scenario: str
    kind: str = Field(description="decoherence, wavepacket, raman or fit")
    version: str = Field(description="dlczsim version")
    preset_version: int = 1
    config_hash: str
    backend: str | None = None
    units: dict[str, str] = Field(default_factory=dict)
    extra: dict[str, str] = Field(default_factory=dict)


class CurveOutput(BaseModel):
    """A table of named numeric columns plus its metadata."""

    metadata: CurveMetadata
    columns: list[str]
    rows: list[list[float]]

    def column(self, name: str) -> list[float]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


class CorrelationReport(BaseModel):
    """Enumerated and Monte-Carlo correlation functions for one pair source."""

    scenario: str
    config_hash: str
    chi: float = Field(description="Pair excitation probability")
    detection: dict[str, float | bool] = Field(description="Efficiencies, backgrounds and counting mode")
    analytic: CorrelationEstimate
    monte_carlo: CorrelationEstimate | None = None
    seed: int | None = None


class FitReport(BaseModel):
    """Scale fit of a theory curve to measured g12 data."""

    theory_scenario: str
    theory_config_hash: str
    fit: XiFit
    threshold: float = Field(description="g12 level used for the coherence time")
    coherence_time_ns: float | None = Field(
        default=None, description="First delay where xi * p12 drops below the threshold"
    )
    reference_xi: float | None = None
    reference_xi_th: float | None = None
