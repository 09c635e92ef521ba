"""Polarization algebra, photon data model, and frequency filtering.

Linear polarization is a direction, not a vector: the states psi and
psi + pi are physically identical. All angles in this package are therefore
canonicalized to [0, pi) by `angle_new`, and every comparison between
angles should go through `angle_distance`, which respects the wrap.

Measurement follows Malus's law: a photon polarized at angle psi, measured
against an analyzer at angle beta, comes out "along" the analyzer with
probability cos^2(psi - beta), and orthogonal to it otherwise.

Photons carry a provenance tag (legitimate / spy / resent) purely so the
metrics layer can attribute errors and captures after the fact. No honest
party operation may branch on it; the test suite enforces this with a
metamorphic check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

from .rng import RandomStream

PI = math.pi

# Provenance tags (metrics bookkeeping only; never read by honest parties).
LEGITIMATE = "legitimate"
SPY = "spy"
RESENT = "resent"
_PROVENANCES = frozenset({LEGITIMATE, SPY, RESENT})


class Leg(IntEnum):
    """The three quantum transmissions of one protocol round, in order."""

    LEG1_A_TO_B = 1
    LEG2_B_TO_A = 2
    LEG3_A_TO_B = 3


class Outcome(Enum):
    """Result of a single polarization measurement."""

    ALONG = "along"
    ORTHOGONAL = "orthogonal"


def angle_new(raw: float) -> float:
    """Canonicalize a polarization angle to its representative in [0, pi).

    Uses the floating remainder, so arbitrarily large inputs stay accurate.
    Raises ValueError for non-finite input.
    """
    if not math.isfinite(raw):
        raise ValueError(f"polarization angle must be finite, got {raw!r}")
    a = raw % PI
    # The remainder can round up to pi itself for inputs just below a
    # multiple of pi; fold that boundary case back to 0.
    return a - PI if a >= PI else a


def rotate(angle: float, by: float) -> float:
    """Rotate a polarization direction by a signed amount, mod pi."""
    if not math.isfinite(by):
        raise ValueError(f"rotation must be finite, got {by!r}")
    return angle_new(angle + by)


def angle_distance(a: float, b: float) -> float:
    """Shortest angular separation of two polarization directions.

    The result is in [0, pi/2] because directions wrap at pi.
    """
    d = abs(angle_new(a) - angle_new(b))
    return min(d, PI - d)


def malus_probability(photon_angle: float, analyzer: float) -> float:
    """Probability that a photon at `photon_angle` passes analyzer `analyzer`."""
    return math.cos(photon_angle - analyzer) ** 2


@dataclass(frozen=True)
class Photon:
    """A single photon: polarization direction, wavelength, provenance tag."""

    polarization: float
    wavelength_nm: float
    provenance: str = LEGITIMATE

    def __post_init__(self):
        if not (self.wavelength_nm > 0):
            raise ValueError(f"wavelength_nm must be positive, got {self.wavelength_nm!r}")
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class Pulse:
    """An ordered multiset of photons tied to a round and a protocol leg.

    An empty photon tuple is legal: it represents total loss.
    """

    round_id: int
    leg: Leg
    photons: tuple[Photon, ...]

    def __post_init__(self):
        if self.round_id < 0:
            raise ValueError(f"round_id must be non-negative, got {self.round_id}")

    def __len__(self) -> int:
        return len(self.photons)


@dataclass(frozen=True)
class FilterConfig:
    """A rectangular passband: transmit iff |wavelength - center| <= bandwidth/2.

    The hard cutoff is intentional; in this model a photon is in-band or
    out-of-band deterministically. `bandwidth_nm` may be infinite, and a
    disabled filter passes everything.
    """

    center_nm: float = 1550.0
    bandwidth_nm: float = math.inf
    enabled: bool = False

    def __post_init__(self):
        if not (self.center_nm > 0):
            raise ValueError(f"center_nm must be positive, got {self.center_nm!r}")
        if math.isnan(self.bandwidth_nm) or self.bandwidth_nm < 0:
            raise ValueError(f"bandwidth_nm must be >= 0, got {self.bandwidth_nm!r}")

    def passes(self, wavelength_nm: float) -> bool:
        if not self.enabled:
            return True
        return abs(wavelength_nm - self.center_nm) <= self.bandwidth_nm / 2.0


def measure(photon: Photon, analyzer: float, rng: RandomStream) -> Outcome:
    """Measure one photon against an analyzer pair {analyzer, analyzer + pi/2}.

    Returns ALONG with the Malus probability, ORTHOGONAL otherwise.
    Consumes exactly one draw from `rng`.
    """
    p = malus_probability(photon.polarization, analyzer)
    return Outcome.ALONG if rng.random() < p else Outcome.ORTHOGONAL


def frequency_filter(pulse: Pulse, cfg: FilterConfig) -> tuple[Pulse, Pulse]:
    """Partition a pulse into (passed, blocked) by the passband predicate.

    Photon order is preserved in both outputs. A disabled filter passes
    the whole pulse.
    """
    if not cfg.enabled:
        return pulse, Pulse(pulse.round_id, pulse.leg, ())
    passed = []
    blocked = []
    for photon in pulse.photons:
        (passed if cfg.passes(photon.wavelength_nm) else blocked).append(photon)
    return (
        Pulse(pulse.round_id, pulse.leg, tuple(passed)),
        Pulse(pulse.round_id, pulse.leg, tuple(blocked)),
    )
