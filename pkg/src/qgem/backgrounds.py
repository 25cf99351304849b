"""Electromagnetic backgrounds competing with gravity, and the Diosi-Penrose benchmark.

Forces are signed along the surface normal: negative values attract the
particle toward the surface.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .physcore import (
    CONSTANTS,
    DIMENSIONLESS,
    DIPOLE,
    FREQUENCY,
    LENGTH,
    MASS,
    STIFFNESS,
    TEMPERATURE,
    TIME,
    VOLUME,
    as_si,
)
from . import entangle

# Reference point of the dipole-to-gravity scaling law
REFERENCE_RATIO = 3e6
REFERENCE_MASS = 1e-14          # 10 pg
REFERENCE_DISTANCE = 100e-6     # 100 um
REFERENCE_DIPOLE = 1e-4 * CONSTANTS.e_charge * 1e-2   # 1e-4 e*cm

# Perpendicular dipole in front of a grounded plane
IMAGE_KAPPA = 2.0

# Validity windows: PFA needs gap << a, Casimir-Polder needs z >> a
PFA_MAX_GAP_FRACTION = 0.2
CP_MIN_Z_FRACTION = 5.0

DP_REFERENCE_MASS = 5.7e-16   # collapses in ~1 s
DP_EXPONENT = 5.0 / 3.0       # self-energy m^2/R with R ~ m^(1/3)
DP_ASSUMPTION = ("Diosi-Penrose rate scaled as (m / 5.7e-16 kg)^(5/3) per second from a "
                 "single calibration point, assuming constant density")

DIAMOND_DENSITY = 3510.0
DIAMOND_PERMITTIVITY = 5.7


class ValidityWarning(UserWarning):
    """A formula was evaluated outside its approximation window."""


@dataclass(frozen=True)
class DipoleSpec:
    p: float = 0.0
    orientation_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", as_si(self.p, DIPOLE))
        if self.p < 0:
            raise ValueError("dipole moment must be >= 0")
        if not 0 < self.orientation_factor <= 4:
            raise ValueError("orientation factor must lie in (0, 4]")


@dataclass(frozen=True)
class SurfaceSpec:
    a: float
    z: float
    eta: float = 1.0
    epsilon: float = DIAMOND_PERMITTIVITY
    V: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "a", as_si(self.a, LENGTH))
        object.__setattr__(self, "z", as_si(self.z, LENGTH))
        if self.V is None:
            object.__setattr__(self, "V", 4.0 / 3.0 * math.pi * self.a ** 3)
        else:
            object.__setattr__(self, "V", as_si(self.V, VOLUME))
        if not self.z > self.a > 0:
            raise ValueError("need z > a > 0")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.epsilon < 1:
            raise ValueError("relative permittivity must be >= 1")

    @property
    def gap(self) -> float:
        return self.z - self.a

    def at(self, z: float) -> "SurfaceSpec":
        return SurfaceSpec(self.a, z, self.eta, self.epsilon, self.V)


@dataclass(frozen=True)
class OscillatorSpec:
    omega0: float
    k: float
    Q: float
    T_cm: float
    b: float
    z_rms: float

    def __post_init__(self):
        for name, dims in (("omega0", FREQUENCY), ("k", STIFFNESS), ("Q", DIMENSIONLESS),
                           ("T_cm", TEMPERATURE), ("b", FREQUENCY), ("z_rms", LENGTH)):
            value = as_si(getattr(self, name), dims)
            if not value > 0:
                raise ValueError(f"{name} must be > 0")
            object.__setattr__(self, name, value)

    @classmethod
    def from_mass(cls, mass, omega0, Q, T_cm, b, z_rms) -> "OscillatorSpec":
        """Spring constant from k = m * omega0^2."""
        omega0 = as_si(omega0, FREQUENCY)
        return cls(omega0, as_si(mass, MASS) * omega0 ** 2, Q, T_cm, b, z_rms)


def dipole_gravity_ratio_scaling(m, d, p) -> float:
    """Dipole-dipole to gravity energy ratio from the 3e6 reference scaling."""
    m = as_si(m, MASS)
    d = as_si(d, LENGTH)
    p = as_si(p, DIPOLE)
    if m <= 0 or d <= 0:
        raise ValueError("mass and distance must be > 0")
    return REFERENCE_RATIO * (REFERENCE_MASS / m) ** 2 * (REFERENCE_DISTANCE / d) ** 2 * (p / REFERENCE_DIPOLE) ** 2


def dipole_energy(p, r, kappa: float = 1.0) -> float:
    """Magnitude kappa p^2 / (4 pi eps0 r^3) of the dipole-dipole energy (J)."""
    return kappa * p * p / (4 * math.pi * CONSTANTS.eps0 * r ** 3)


def dipole_gravity_ratio_fp(m, d, spec: DipoleSpec) -> float:
    """Dipole-dipole to gravity energy ratio from Coulomb's and Newton's laws."""
    m = as_si(m, MASS)
    d = as_si(d, LENGTH)
    if m <= 0 or d <= 0:
        raise ValueError("mass and distance must be > 0")
    return dipole_energy(spec.p, d, spec.orientation_factor) / (CONSTANTS.G * m * m / d)


def dipole_dipole_force(p, d, kappa: float = 1.0) -> float:
    """|dU/dr| = 3 kappa p^2 / (4 pi eps0 d^4)."""
    p = as_si(p, DIPOLE)
    d = as_si(d, LENGTH)
    return 3 * dipole_energy(p, d, kappa) / d


def casimir_pfa(surface: SurfaceSpec) -> float:
    """Sphere-plane Casimir force in the proximity force approximation (N)."""
    gap = surface.gap
    if gap <= 0:
        raise ValueError("need z > a")
    if gap > PFA_MAX_GAP_FRACTION * surface.a:
        warnings.warn(f"PFA evaluated at gap {gap:.3g} m > a/5", ValidityWarning, stacklevel=2)
    c = CONSTANTS
    return -surface.eta * math.pi ** 3 * surface.a * c.hbar * c.c / (360 * gap ** 3)


def casimir_pfa_gradient(surface: SurfaceSpec) -> float:
    """dF/dz of the PFA force (N/m)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return -3 * casimir_pfa(surface) / surface.gap


def polarizability(V, epsilon: float) -> float:
    """Static polarisability of a dielectric sphere, 3 eps0 V (eps-1)/(eps+2)."""
    V = as_si(V, VOLUME)
    if epsilon < 1 or V <= 0:
        raise ValueError("need epsilon >= 1 and V > 0")
    if math.isinf(epsilon):
        return 3 * CONSTANTS.eps0 * V
    return 3 * CONSTANTS.eps0 * V * (epsilon - 1) / (epsilon + 2)


def casimir_polder(alpha_V: float, z, a: Optional[float] = None) -> float:
    """Casimir-Polder force on a polarisable particle at distance z (N).

    Pass the particle radius ``a`` to get a warning outside z >= 5a.
    """
    z = as_si(z, LENGTH)
    if z <= 0:
        raise ValueError("z must be > 0")
    if a is not None and z < CP_MIN_Z_FRACTION * a:
        warnings.warn(f"Casimir-Polder evaluated at z = {z / a:.3g} a < 5a",
                      ValidityWarning, stacklevel=2)
    c = CONSTANTS
    return -3 * c.hbar * c.c * alpha_V / (8 * math.pi ** 2 * c.eps0 * z ** 5)


def casimir_polder_gradient(alpha_V: float, z: float) -> float:
    return -5 * casimir_polder(alpha_V, z) / z


@dataclass(frozen=True)
class CasimirResult:
    force: float
    gradient: float
    regime: str
    pfa: Optional[float] = None
    cp: Optional[float] = None

    @property
    def bracket(self) -> tuple[float, float]:
        """(PFA, CP) force values; both set only in the transition band."""
        return (self.pfa, self.cp)


def casimir_auto(surface: SurfaceSpec) -> CasimirResult:
    """Pick the Casimir formula valid at this distance.

    In the transition band between the two windows both formulas are
    evaluated and returned; ``force`` and ``gradient`` then carry the
    smaller-magnitude (conservative) bound, never an interpolation.
    """
    alpha = polarizability(surface.V, surface.epsilon)
    if surface.gap <= PFA_MAX_GAP_FRACTION * surface.a:
        f = casimir_pfa(surface)
        return CasimirResult(f, casimir_pfa_gradient(surface), "PFA", pfa=f)
    if surface.z >= CP_MIN_Z_FRACTION * surface.a:
        f = casimir_polder(alpha, surface.z)
        return CasimirResult(f, casimir_polder_gradient(alpha, surface.z), "CP", cp=f)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        f_pfa = casimir_pfa(surface)
    f_cp = casimir_polder(alpha, surface.z)
    g_pfa = casimir_pfa_gradient(surface)
    g_cp = casimir_polder_gradient(alpha, surface.z)
    return CasimirResult(min(f_pfa, f_cp, key=abs), min(g_pfa, g_cp, key=abs), "transition",
                         pfa=f_pfa, cp=f_cp)


def image_dipole_force(p, z, kappa_img: float = IMAGE_KAPPA) -> float:
    """Attraction of a dipole to its image in a grounded conducting plane (N).

    The image sits at 2z; kappa_img = 2 for a dipole normal to the plane.
    """
    p = as_si(p, DIPOLE)
    z = as_si(z, LENGTH)
    if z <= 0:
        raise ValueError("z must be > 0")
    return 3 * p * p * kappa_img / (4 * math.pi * CONSTANTS.eps0 * (2 * z) ** 4)


def frequency_shift(dF_dz, k) -> float:
    """Fractional trap-frequency shift |d omega / omega| = |dF/dz| / 2k."""
    dF_dz = as_si(dF_dz, STIFFNESS)
    k = as_si(k, STIFFNESS)
    if k <= 0:
        raise ValueError("spring constant must be > 0")
    return abs(dF_dz) / (2 * k)


def min_detectable_shift(osc: OscillatorSpec) -> float:
    """Thermal-noise limit on the fractional frequency shift."""
    return math.sqrt(CONSTANTS.kB * osc.T_cm * osc.b
                     / (osc.k * osc.omega0 * osc.Q * osc.z_rms ** 2))


def casimir_sweep(surface: SurfaceSpec, z_values: Iterable[float],
                  osc: OscillatorSpec) -> list[dict]:
    """Rows of (z, force, regime, freq_shift, min_detectable) over a z grid."""
    floor = min_detectable_shift(osc)
    rows = []
    for z in z_values:
        res = casimir_auto(surface.at(float(z)))
        rows.append({"z": float(z), "force": res.force, "regime": res.regime,
                     "freq_shift": frequency_shift(res.gradient, osc.k),
                     "min_detectable": floor})
    return rows


def casimir_detect_range(surface: SurfaceSpec, z_values: Sequence[float],
                         osc: OscillatorSpec) -> float:
    """Largest swept z at which the Casimir shift beats the thermal floor; 0 if none."""
    hits = [r["z"] for r in casimir_sweep(surface, z_values, osc)
            if r["freq_shift"] > r["min_detectable"]]
    return max(hits) if hits else 0.0


def dipole_phases(p, geom: "entangle.TwoInterferometerGeometry", tau,
                  kappa: float = 1.0) -> "entangle.BranchPhases":
    """Branch phases from an attractive dipole-dipole energy -U(r).

    Same sign convention as the gravitational phases: phi = -E tau / hbar
    with E = -kappa p^2 / (4 pi eps0 r^3), so phi = U(r) tau / hbar > 0.
    """
    p = as_si(p, DIPOLE)
    tau = as_si(tau, TIME)
    return entangle.BranchPhases(*(dipole_energy(p, r, kappa) * tau / CONSTANTS.hbar
                                   for r in entangle.pairwise_distances(geom)))


def dipole_phase_contamination(p, geom: "entangle.TwoInterferometerGeometry", tau,
                               kappa: float = 1.0) -> float:
    """Entangling phase generated by the dipole-dipole interaction (rad)."""
    return entangle.entangling_phase(dipole_phases(p, geom, tau, kappa))


@dataclass(frozen=True)
class MitigationResult:
    ratio: float
    suppression: float
    breakdown: tuple  # ((name, suppression, ratio after this step), ...)


def mitigation_apply(ratio: float, factors: Sequence[tuple[str, float]]) -> MitigationResult:
    """Multiply a background ratio by each mitigation method's suppression factor."""
    total = 1.0
    steps = []
    for name, s in factors:
        if not 0 < s <= 1:
            raise ValueError(f"suppression for {name!r} must lie in (0, 1], got {s}")
        total *= s
        steps.append((name, s, ratio * total))
    return MitigationResult(ratio * total, total, tuple(steps))


def dp_collapse_rate(m) -> float:
    """Diosi-Penrose collapse rate (1/s), calibrated to 1/s at 5.7e-16 kg."""
    m = as_si(m, MASS)
    if m < 0:
        raise ValueError("mass must be >= 0")
    return (m / DP_REFERENCE_MASS) ** DP_EXPONENT


def diamond_sphere(diameter) -> tuple[float, float]:
    """(volume, mass) of a diamond sphere."""
    r = as_si(diameter, LENGTH) / 2
    V = 4.0 / 3.0 * math.pi * r ** 3
    return V, V * DIAMOND_DENSITY
