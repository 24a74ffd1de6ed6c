"""CNT chirality math and a simplified CNTFET current model.

The current model is a stitched compact model: an exponential subthreshold
branch below threshold and a square-law branch above it, joined at the
threshold current so the two branches agree exactly at ``v_gs == Vth``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from numba import njit


class ChiralityError(ValueError):
    """Raised for chiralities that are malformed or unusable for the request."""


class Polarity(str, enum.Enum):
    N = "n"
    P = "p"


class Conduction(str, enum.Enum):
    METALLIC = "metallic"
    SEMICONDUCTING = "semiconducting"


@dataclass(frozen=True)
class PhysicalConstants:
    a_nm: float = 0.249  # interatomic distance
    v_pi_ev: float = 3.033  # carbon pi-pi bond energy
    e: float = 1.0  # elementary charge in eV/V bookkeeping


CONSTANTS = PhysicalConstants()

BOLTZMANN_EV = 8.617333262e-5
KELVIN = 273.15

NOMINAL_TEMPERATURE = 25.0
NOMINAL_CHANNEL_LENGTH = 16.0
NOMINAL_OXIDE_THICKNESS = 4.0

# k_on derating per degree above nominal, and the i_off doubling interval.
KON_TEMPCO = 0.002
IOFF_DOUBLING_C = 12.0


@dataclass(frozen=True, order=True)
class Chirality:
    n: int
    m: int

    def __post_init__(self):
        for v in (self.n, self.m):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ChiralityError(f"chirality indices must be integers, got ({self.n}, {self.m})")
        if self.n < 0 or self.m < 0:
            raise ChiralityError(f"chirality indices must be non-negative, got ({self.n}, {self.m})")
        if self.n == 0 and self.m == 0:
            raise ChiralityError("chirality (0, 0) does not describe a tube")
        if self.m > self.n:
            raise ChiralityError(f"chirality ({self.n}, {self.m}) is not canonical: need n >= m")

    def __str__(self):
        return f"{self.n},{self.m}"


def _as_chirality(c) -> Chirality:
    if isinstance(c, Chirality):
        return c
    n, m = c
    return Chirality(n, m)


def tube_diameter(c) -> float:
    """Tube diameter in nm."""
    c = _as_chirality(c)
    return CONSTANTS.a_nm * math.sqrt(c.n * c.n + c.m * c.m + c.n * c.m) / math.pi


def chiral_angle(c) -> float:
    """Chiral angle in degrees, atan(sqrt(3) n / (2m + n)).

    Note this form gives 60 degrees for zigzag (m = 0) tubes, not the 0
    degrees of the more common convention.
    """
    c = _as_chirality(c)
    den = 2 * c.m + c.n
    if den == 0:
        raise ChiralityError(f"chiral angle undefined for ({c.n}, {c.m})")
    return math.degrees(math.atan(math.sqrt(3.0) * c.n / den))


def classify_conduction(c) -> Conduction:
    c = _as_chirality(c)
    if (c.n - c.m) % 3 == 0:
        return Conduction.METALLIC
    return Conduction.SEMICONDUCTING


def threshold_voltage(c) -> float:
    """First-order threshold (half bandgap) in volts for a semiconducting tube."""
    c = _as_chirality(c)
    if classify_conduction(c) is Conduction.METALLIC:
        raise ChiralityError(f"chirality ({c.n}, {c.m}) is metallic and has no bandgap")
    d = tube_diameter(c)
    return CONSTANTS.a_nm * CONSTANTS.v_pi_ev / (math.sqrt(3.0) * CONSTANTS.e * d)


# i_off is quoted at v_gs = 0 for a tube at this threshold, the (19,0) tube.
REFERENCE_VTH = threshold_voltage(Chirality(19, 0))


@dataclass(frozen=True)
class CntfetDevice:
    """One CNTFET. Lengths in nm, currents per tube.

    ``vth`` overrides the chirality-derived threshold; give it as a
    magnitude or with the polarity's sign.
    """

    polarity: Polarity
    chirality: Chirality
    tubes: int = 1
    channel_length: float = NOMINAL_CHANNEL_LENGTH
    oxide_thickness: float = NOMINAL_OXIDE_THICKNESS
    k_on: float = 40e-6
    i_off: float = 1e-12
    ss: float = 70.0  # mV/decade
    vth_override: float | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "polarity", Polarity(self.polarity))
        object.__setattr__(self, "chirality", _as_chirality(self.chirality))
        if isinstance(self.tubes, bool) or not isinstance(self.tubes, int) or self.tubes < 1:
            raise ValueError(f"tubes must be a positive integer, got {self.tubes!r}")
        if not self.channel_length > 0:
            raise ValueError("channel_length must be positive")
        if not self.oxide_thickness > 0:
            raise ValueError("oxide_thickness must be positive")
        if not (self.k_on > 0 and self.i_off > 0 and self.ss > 0):
            raise ValueError("k_on, i_off and ss must be positive")
        if self.vth_override is None:
            # raises for metallic tubes
            threshold_voltage(self.chirality)
        elif not abs(self.vth_override) > 0:
            raise ValueError("threshold override must be non-zero")

    @property
    def vth_magnitude(self) -> float:
        if self.vth_override is not None:
            return abs(self.vth_override)
        return threshold_voltage(self.chirality)

    @property
    def vth(self) -> float:
        """Signed threshold: negative for P devices."""
        v = self.vth_magnitude
        return v if self.polarity is Polarity.N else -v

    @property
    def sign(self) -> float:
        return 1.0 if self.polarity is Polarity.N else -1.0

    def with_(self, **changes) -> "CntfetDevice":
        return replace(self, **changes)

    def effective(self, temperature: float = NOMINAL_TEMPERATURE) -> tuple:
        """Per-device kernel parameters at ``temperature`` (Celsius).

        Returns ``(sign, vth, k, i_th, ss_volts, v_thermal)`` with k and i_th
        already multiplied by the tube count.
        """
        dt = temperature - NOMINAL_TEMPERATURE
        geometry = (NOMINAL_CHANNEL_LENGTH / self.channel_length) * (
            NOMINAL_OXIDE_THICKNESS / self.oxide_thickness
        )
        k = self.k_on * geometry * (1.0 - KON_TEMPCO * dt) * self.tubes
        ss_v = self.ss * 1e-3
        i_off = self.i_off * 2.0 ** (dt / IOFF_DOUBLING_C)
        i_th = i_off * 10.0 ** (REFERENCE_VTH / ss_v) * self.tubes
        v_thermal = BOLTZMANN_EV * (temperature + KELVIN)
        return (self.sign, self.vth_magnitude, max(k, 0.0), i_th, ss_v, v_thermal)


@njit(cache=True, nogil=True)
def _forward_current(vgs, vds, vth, k, i_th, ss, vt):
    # N-type, vds >= 0
    drain_factor = 1.0 - math.exp(-vds / vt)
    vov = vgs - vth
    if vov <= 0.0:
        return i_th * 10.0 ** (vov / ss) * drain_factor
    if vds < vov:
        sq = k * (vov * vds - 0.5 * vds * vds)
    else:
        sq = 0.5 * k * vov * vov
    return i_th * drain_factor + sq


@njit(cache=True, nogil=True)
def kernel_current(sign, vth, k, i_th, ss, vt, vgs, vds):
    """Drain current (positive into drain) for kernel parameters.

    P devices are the sign mirror of N devices; negative vds swaps the
    roles of source and drain.
    """
    vgs = sign * vgs
    vds = sign * vds
    if vds >= 0.0:
        i = _forward_current(vgs, vds, vth, k, i_th, ss, vt)
    else:
        i = -_forward_current(vgs - vds, -vds, vth, k, i_th, ss, vt)
    return sign * i


def drain_current(dev: CntfetDevice, v_gs: float, v_ds: float, temperature: float = NOMINAL_TEMPERATURE) -> float:
    """Drain current in amps, positive into the drain terminal."""
    params = dev.effective(temperature)
    return float(kernel_current(*params, float(v_gs), float(v_ds)))


def device_for(polarity, chirality, **kw) -> CntfetDevice:
    return CntfetDevice(Polarity(polarity), _as_chirality(chirality), **kw)
