"""Angular-momentum coupling coefficients for dlczsim.

All angular momenta are carried as doubled integers (``two_j = 2j``) so that
half-integer states never need floating-point ``j`` values. Coefficients are
evaluated exactly with rational arithmetic and rounded to ``float`` once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache


class AngularMomentumError(ValueError):
    """Custom exception for invalid angular-momentum quantum numbers."""
    pass


@dataclass(frozen=True)
class AngMom:
    """A single angular-momentum state |j, m> in doubled-integer form."""

    two_j: int
    two_m: int

    def __post_init__(self) -> None:
        if self.two_j < 0:
            raise AngularMomentumError(f"two_j must be non-negative, got {self.two_j}")
        if abs(self.two_m) > self.two_j:
            raise AngularMomentumError(
                f"Projection m={self.two_m}/2 outside manifold j={self.two_j}/2"
            )
        if (self.two_j - self.two_m) % 2:
            raise AngularMomentumError(
                f"two_j={self.two_j} and two_m={self.two_m} must have the same parity"
            )

    @classmethod
    def of(cls, j: float, m: float) -> AngMom:
        """Build a state from (possibly half-integer) j and m values."""
        return cls(two_j=to_doubled(j), two_m=to_doubled(m))

    @property
    def j(self) -> float:
        return self.two_j / 2

    @property
    def m(self) -> float:
        return self.two_m / 2


def to_doubled(value: float) -> int:
    """Convert an integer or half-integer quantum number to doubled form.

    Raises:
        AngularMomentumError: If ``value`` is not a multiple of 1/2.
    """
    doubled = round(2 * value)
    if abs(doubled - 2 * value) > 1e-9:
        raise AngularMomentumError(f"{value} is not an integer or half-integer")
    return int(doubled)


def projections(two_j: int) -> tuple[int, ...]:
    """Return the doubled projections -j..j of a manifold in ascending order."""
    return tuple(range(-two_j, two_j + 1, 2))


@dataclass(frozen=True)
class SphericalPolarization:
    """Polarization vector expanded on the spherical basis q = -1, 0, +1.

    Components follow ``c_q = e_q^* . epsilon`` with
    ``e_{+1} = -(x + iy)/sqrt(2)``, ``e_0 = z`` and ``e_{-1} = (x - iy)/sqrt(2)``.
    """

    c_minus: complex
    c_zero: complex
    c_plus: complex

    def __post_init__(self) -> None:
        norm = abs(self.c_minus) ** 2 + abs(self.c_zero) ** 2 + abs(self.c_plus) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise AngularMomentumError(f"Polarization is not normalized (|c|^2 = {norm!r})")

    def component(self, q: int) -> complex:
        """Return the amplitude on spherical component ``q``."""
        if q == -1:
            return self.c_minus
        if q == 0:
            return self.c_zero
        if q == 1:
            return self.c_plus
        return 0j

    def conjugate(self) -> SphericalPolarization:
        return SphericalPolarization(
            self.c_minus.conjugate(), self.c_zero.conjugate(), self.c_plus.conjugate()
        )

    @classmethod
    def from_cartesian(cls, ex: complex, ey: complex, ez: complex = 0j) -> SphericalPolarization:
        """Project a (normalized) Cartesian polarization onto the spherical basis."""
        root = math.sqrt(2.0)
        return cls(
            c_minus=complex((ex + 1j * ey) / root),
            c_zero=complex(ez),
            c_plus=complex(-(ex - 1j * ey) / root),
        )

    @classmethod
    def linear_x(cls) -> SphericalPolarization:
        return cls.from_cartesian(1.0, 0.0)

    @classmethod
    def linear_y(cls) -> SphericalPolarization:
        return cls.from_cartesian(0.0, 1.0)

    @classmethod
    def pi(cls) -> SphericalPolarization:
        return cls(0j, 1 + 0j, 0j)

    @classmethod
    def sigma_plus(cls) -> SphericalPolarization:
        return cls(0j, 0j, 1 + 0j)

    @classmethod
    def sigma_minus(cls) -> SphericalPolarization:
        return cls(1 + 0j, 0j, 0j)

    @classmethod
    def linear(cls, angle_deg: float) -> SphericalPolarization:
        """Linear polarization in the x-y plane at ``angle_deg`` from x."""
        angle = math.radians(angle_deg)
        return cls.from_cartesian(math.cos(angle), math.sin(angle))

    @classmethod
    def from_name(cls, name: str) -> SphericalPolarization:
        """Look up a polarization by name (``x``, ``y``, ``pi``, ``sigma+``, ``sigma-``).

        Raises:
            AngularMomentumError: If the name is unknown.
        """
        key = name.strip().lower()
        factory = _NAMED_POLARIZATIONS.get(key)
        if factory is None:
            known = ", ".join(sorted(_NAMED_POLARIZATIONS))
            raise AngularMomentumError(f"Unknown polarization '{name}'. Known: {known}")
        return factory()


_NAMED_POLARIZATIONS = {
    "x": SphericalPolarization.linear_x,
    "y": SphericalPolarization.linear_y,
    "pi": SphericalPolarization.pi,
    "z": SphericalPolarization.pi,
    "sigma+": SphericalPolarization.sigma_plus,
    "sigma-": SphericalPolarization.sigma_minus,
}


def _triangle(two_a: int, two_b: int, two_c: int) -> bool:
    return (
        abs(two_a - two_b) <= two_c <= two_a + two_b
        and (two_a + two_b + two_c) % 2 == 0
    )


@lru_cache(maxsize=None)
def _wigner3j_squared(
    two_j1: int, two_j2: int, two_j3: int, two_m1: int, two_m2: int, two_m3: int
) -> tuple[int, Fraction]:
    """Return ``(sign, value**2)`` of the 3-j symbol via the Racah sum."""
    if two_m1 + two_m2 + two_m3 != 0:
        return 0, Fraction(0)
    if not _triangle(two_j1, two_j2, two_j3):
        return 0, Fraction(0)
    for two_j, two_m in ((two_j1, two_m1), (two_j2, two_m2), (two_j3, two_m3)):
        if abs(two_m) > two_j or (two_j - two_m) % 2:
            return 0, Fraction(0)

    fac = math.factorial
    a = (two_j1 + two_j2 - two_j3) // 2
    b = (two_j1 - two_j2 + two_j3) // 2
    c = (-two_j1 + two_j2 + two_j3) // 2
    total = (two_j1 + two_j2 + two_j3) // 2
    triangle = Fraction(fac(a) * fac(b) * fac(c), fac(total + 1))

    j1p, j1m = (two_j1 + two_m1) // 2, (two_j1 - two_m1) // 2
    j2p, j2m = (two_j2 + two_m2) // 2, (two_j2 - two_m2) // 2
    j3p, j3m = (two_j3 + two_m3) // 2, (two_j3 - two_m3) // 2
    projection = fac(j1p) * fac(j1m) * fac(j2p) * fac(j2m) * fac(j3p) * fac(j3m)

    # j3 - j2 + m1 and j3 - j1 - m2
    shift1 = (two_j3 - two_j2 + two_m1) // 2
    shift2 = (two_j3 - two_j1 - two_m2) // 2
    k_min = max(0, -shift1, -shift2)
    k_max = min(a, j1m, j2p)

    series = Fraction(0)
    for k in range(k_min, k_max + 1):
        term = Fraction(
            1,
            fac(k) * fac(shift1 + k) * fac(shift2 + k) * fac(a - k) * fac(j1m - k) * fac(j2p - k),
        )
        series += -term if k % 2 else term

    if series == 0:
        return 0, Fraction(0)

    sign = -1 if ((two_j1 - two_j2 - two_m3) // 2) % 2 else 1
    if series < 0:
        sign = -sign
    return sign, triangle * projection * series * series


def wigner3j(two_j1: int, two_j2: int, two_j3: int, two_m1: int, two_m2: int, two_m3: int) -> float:
    """Wigner 3-j symbol with doubled-integer arguments.

    Args:
        two_j1, two_j2, two_j3: Doubled angular momenta.
        two_m1, two_m2, two_m3: Doubled projections.

    Returns:
        The exact Racah value rounded to float; 0 when the triangle rule or
        the projection sum rule fails.
    """
    sign, squared = _wigner3j_squared(two_j1, two_j2, two_j3, two_m1, two_m2, two_m3)
    if sign == 0:
        return 0.0
    return sign * math.sqrt(squared)


def clebsch_gordan(two_j1: int, two_m1: int, two_j2: int, two_m2: int, two_J: int, two_M: int) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley phases).

    Returns:
        0 when ``M != m1 + m2`` or the triangle rule fails.
    """
    if two_m1 + two_m2 != two_M:
        return 0.0
    value = wigner3j(two_j1, two_j2, two_J, two_m1, two_m2, -two_M)
    if value == 0.0:
        return 0.0
    phase = -1.0 if ((two_j1 - two_j2 + two_M) // 2) % 2 else 1.0
    return phase * math.sqrt(two_J + 1) * value


def dipole_coupling(
    two_F_lo: int,
    two_m_lo: int,
    two_F_hi: int,
    two_m_hi: int,
    pol: SphericalPolarization,
) -> complex:
    """Dipole coupling between |F_lo m_lo> and |F_hi m_hi> for a given polarization.

    The reduced matrix element is normalized to 1, so the coupling is
    ``sum_q pol_q <F_lo m_lo; 1 q | F_hi m_hi>``. A target projection outside the
    upper manifold has no coupling and yields 0.

    Raises:
        AngularMomentumError: If the lower projection lies outside its manifold
            or the manifolds are not dipole-connected.
    """
    AngMom(two_F_lo, two_m_lo)
    if two_F_hi < 0 or abs(two_F_hi - two_F_lo) > 2 or (two_F_hi - two_F_lo) % 2:
        raise AngularMomentumError(
            f"F={two_F_hi}/2 is not dipole-reachable from F={two_F_lo}/2"
        )
    if abs(two_m_hi) > two_F_hi or (two_F_hi - two_m_hi) % 2:
        return 0j
    two_q = two_m_hi - two_m_lo
    if abs(two_q) > 2:
        return 0j
    amplitude = pol.component(two_q // 2)
    if amplitude == 0:
        return 0j
    return amplitude * clebsch_gordan(two_F_lo, two_m_lo, 2, two_q, two_F_hi, two_m_hi)
