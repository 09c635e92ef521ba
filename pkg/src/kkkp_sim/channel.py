"""Lossy optical channel, party input filters, and intensity monitoring.

Loss is modeled per photon: each one independently survives a leg with the
leg's transmissivity. "Intensity" is ideal photon counting; any real
detector inefficiency is folded into the transmissivities.

The intensity check is the countermeasure against photon theft. On a
lossless channel a single missing photon is an exact-count mismatch and is
always noticed. On a lossy channel a per-round test cannot tell theft from
loss, so a band rule mostly stays quiet; the statistical escape hatch is an
aggregate one-sided z-test on the total count over all check rounds, which
recovers near-certain detection given enough rounds. Both granularities
are implemented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

from .photonics import FilterConfig, Pulse, frequency_filter
from .rng import RandomStream

EXACT_MATCH = "exact_match"
THRESHOLD_BAND = "threshold_band"
PER_ROUND_RULES = (EXACT_MATCH, THRESHOLD_BAND)

LOSSLESS_EXACT = "lossless_exact"
SCALED_BY_ETA = "scaled_by_eta"
EXPECTED_COUNT_MODELS = (LOSSLESS_EXACT, SCALED_BY_ETA)

AGGREGATE_NONE = "none"
MEAN_SHIFT_ZTEST = "mean_shift_ztest"
AGGREGATE_RULES = (AGGREGATE_NONE, MEAN_SHIFT_ZTEST)

BOB_LEG1 = "bob_leg1"
ALICE_LEG2 = "alice_leg2"
BOB_LEG3 = "bob_leg3"
CHECKPOINTS = (BOB_LEG1, ALICE_LEG2, BOB_LEG3)

_NORMAL = NormalDist()


@dataclass(frozen=True)
class ChannelConfig:
    """Per-leg transmissivities plus each party's input-side filter.

    Filters sit at the optical input, before any protocol operation at
    that party; photons they block are destroyed silently.
    """

    eta1: float = 1.0
    eta2: float = 1.0
    eta3: float = 1.0
    legitimate_wavelength_nm: float = 1550.0
    alice_input_filter: FilterConfig = FilterConfig()
    bob_input_filter: FilterConfig = FilterConfig()

    def __post_init__(self):
        for name, eta in (("eta1", self.eta1), ("eta2", self.eta2), ("eta3", self.eta3)):
            if math.isnan(eta) or not (0.0 <= eta <= 1.0):
                raise ValueError(f"channel.{name} must be in [0, 1], got {eta!r}")
        if not (self.legitimate_wavelength_nm > 0):
            raise ValueError("channel wavelength must be positive")

    def cumulative_eta(self, checkpoint: str) -> float:
        """Transmissivity a legitimate photon faces up to a reception point."""
        if checkpoint == BOB_LEG1:
            return self.eta1
        if checkpoint == ALICE_LEG2:
            return self.eta1 * self.eta2
        if checkpoint == BOB_LEG3:
            return self.eta1 * self.eta2 * self.eta3
        raise ValueError(f"unknown checkpoint {checkpoint!r}")


@dataclass(frozen=True)
class DetectionPolicy:
    """How check-round photon counts are turned into alarms.

    The per-round rule runs at every checkpoint in `checkpoints`; the
    aggregate z-test, when enabled, runs on the first listed checkpoint.
    exact_match is meant for lossless operation and compares against the
    expected count model (n_sent, or n_sent*eta under scaled_by_eta).
    """

    per_round_rule: str = EXACT_MATCH
    expected_count_model: str = LOSSLESS_EXACT
    k_sigma: float = 3.0
    aggregate_rule: str = AGGREGATE_NONE
    alpha: float = 0.01
    checkpoints: tuple[str, ...] = (BOB_LEG1,)

    def __post_init__(self):
        if self.per_round_rule not in PER_ROUND_RULES:
            raise ValueError(f"detection.per_round_rule must be one of {PER_ROUND_RULES}")
        if self.expected_count_model not in EXPECTED_COUNT_MODELS:
            raise ValueError(
                f"detection.expected_count_model must be one of {EXPECTED_COUNT_MODELS}"
            )
        if not (self.k_sigma > 0):
            raise ValueError(f"detection.k_sigma must be positive, got {self.k_sigma!r}")
        if self.aggregate_rule not in AGGREGATE_RULES:
            raise ValueError(f"detection.aggregate_rule must be one of {AGGREGATE_RULES}")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"detection.alpha must be in (0, 1), got {self.alpha!r}")
        if not self.checkpoints:
            raise ValueError("detection.checkpoints must not be empty")
        for cp in self.checkpoints:
            if cp not in CHECKPOINTS:
                raise ValueError(f"unknown checkpoint {cp!r}, expected one of {CHECKPOINTS}")


def transmit(pulse: Pulse, eta: float, rng: RandomStream) -> Pulse:
    """Each photon independently survives with probability eta.

    Survivor order is preserved. eta == 1 is an exact identity and
    consumes no draws; otherwise one draw per photon.
    """
    if math.isnan(eta) or not (0.0 <= eta <= 1.0):
        raise ValueError(f"transmissivity must be in [0, 1], got {eta!r}")
    if eta == 1.0 or not pulse.photons:
        return pulse
    survivors = tuple(p for p in pulse.photons if rng.random() < eta)
    return Pulse(pulse.round_id, pulse.leg, survivors)


def party_input_stage(pulse: Pulse, input_filter: FilterConfig) -> Pulse:
    """Apply a party's input filter; blocked photons are destroyed."""
    passed, _blocked = frequency_filter(pulse, input_filter)
    return passed


def run_intensity_check(
    observed_count: int,
    policy: DetectionPolicy,
    n_sent: int,
    eta_expected: float | None = None,
) -> bool:
    """Evaluate the per-round rule for one checkpoint; True means alarm.

    exact_match: alarm iff the count differs from the expected model.
    threshold_band: alarm iff the count leaves the k_sigma binomial band
    around n_sent * eta; this needs eta_expected and raises ValueError
    without it.
    """
    if policy.per_round_rule == EXACT_MATCH:
        if policy.expected_count_model == SCALED_BY_ETA:
            if eta_expected is None:
                raise ValueError("exact_match with scaled_by_eta requires eta_expected")
            return observed_count != n_sent * eta_expected
        return observed_count != n_sent

    if eta_expected is None:
        raise ValueError("threshold_band requires eta_expected")
    mean = n_sent * eta_expected
    sigma = math.sqrt(n_sent * eta_expected * (1.0 - eta_expected))
    return abs(observed_count - mean) > policy.k_sigma * sigma


def aggregate_intensity_ztest(
    total_observed: int,
    n_check_rounds: int,
    n_sent: int,
    eta_expected: float,
    alpha: float,
) -> tuple[float, bool]:
    """One-sided z-test for a deficit in the total check-round count.

    Under honest operation the total is Binomial(n_check_rounds * n_sent,
    eta); the test alarms when the observed total is improbably low at
    level alpha. Returns (p_value, alarm). Degenerate eta (0 or 1) reduces
    to an exact comparison.
    """
    if n_check_rounds <= 0:
        raise ValueError("aggregate test needs at least one check round")
    mean = n_check_rounds * n_sent * eta_expected
    var = n_check_rounds * n_sent * eta_expected * (1.0 - eta_expected)
    if var == 0.0:
        p_value = 0.0 if total_observed < mean else 1.0
    else:
        z = (total_observed - mean) / math.sqrt(var)
        p_value = _NORMAL.cdf(z)
    return p_value, p_value < alpha


def ztest_power(
    n_check_rounds: int,
    n_sent: int,
    n_stolen_per_round: int,
    eta_expected: float,
    alpha: float,
) -> float:
    """Analytic detection probability of the aggregate z-test under theft.

    With s photons stolen per round before the lossy leg, the observed
    total is Binomial(m*(n-s), eta) against the honest reference
    Binomial(m*n, eta). Normal approximation on both sides.
    """
    if not (0 <= n_stolen_per_round <= n_sent):
        raise ValueError("stolen count must be between 0 and n_sent")
    mean0 = n_check_rounds * n_sent * eta_expected
    sd0 = math.sqrt(n_check_rounds * n_sent * eta_expected * (1.0 - eta_expected))
    surviving = n_sent - n_stolen_per_round
    mean1 = n_check_rounds * surviving * eta_expected
    var1 = n_check_rounds * surviving * eta_expected * (1.0 - eta_expected)
    critical = mean0 + _NORMAL.inv_cdf(alpha) * sd0
    if var1 == 0.0:
        return 1.0 if mean1 < critical else 0.0
    return _NORMAL.cdf((critical - mean1) / math.sqrt(var1))
