"""Eavesdropper strategies: passive, intercept-resend, and the invisible
photon attack (IPA).

The IPA is a Trojan-horse attack on the two-way protocol. Eve steals a few
photons from the first Alice-to-Bob pass (those carry theta), then rides
"spy" photons of her own into Alice's encoder alongside the returning
pulse. Alice's encoding rotation (-theta +- pi/4) hits the spies too, so if
Eve can pick her spies back out of the leg-3 pulse, comparing them with her
stolen reference photons reveals the key bit. Picking them out requires
distinguishability, e.g. a different wavelength; that is exactly what the
parties' narrowband filters and Eve's separation resolution model.

Spy photons are injected with polarization angle 0 by default. Injection on
leg 2 matches the attack narrative (spies join the Bob-to-Alice return) and
gives spies the polarization -theta +- pi/4 at Bob; injection on leg 1 runs
the spies through Bob's rotation as well, so they arrive at Bob carrying
phi - theta +- pi/4. Both variants are available; the contamination Bob
sees differs, the information Eve gets does not (she never learns phi).

Two bit-inference modes bracket Eve's power: an exact-angle oracle (a
non-physical information-theoretic upper bound) and a realizable
Malus-law maximum-likelihood estimator on an analyzer grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .photonics import (
    SPY,
    RESENT,
    Leg,
    Outcome,
    Photon,
    Pulse,
    angle_distance,
    angle_new,
    measure,
    rotate,
)
from .protocol import ENCODING_OFFSET, ProtocolOrderError
from .rng import RandomStream

PASSIVE = "passive"
INTERCEPT_RESEND = "intercept_resend"
IPA = "ipa"
EVE_KINDS = (PASSIVE, INTERCEPT_RESEND, IPA)

FIXED_ANGLE = "fixed_angle"
UNIFORM_RANDOM = "uniform_random"
ANALYZER_POLICIES = (FIXED_ANGLE, UNIFORM_RANDOM)

IDEAL_ANGLE_ORACLE = "ideal_angle_oracle"
MALUS_ESTIMATION = "malus_estimation"
EVE_READOUTS = (IDEAL_ANGLE_ORACLE, MALUS_ESTIMATION)

_INJECTION_LEGS = (Leg.LEG1_A_TO_B, Leg.LEG2_B_TO_A)


@dataclass(frozen=True)
class EveStrategy:
    """Adversary configuration; immutable for the whole session.

    Fields beyond `kind` only matter for the matching strategy:
    analyzer_policy / analyzer_angle for intercept-resend, the rest for
    the IPA.
    """

    kind: str = PASSIVE
    analyzer_policy: str = FIXED_ANGLE
    analyzer_angle: float = 0.0
    n_steal: int = 1
    n_spy: int = 1
    spy_wavelength_nm: float = 1550.5
    spy_polarization: float = 0.0
    injection_leg: Leg = Leg.LEG2_B_TO_A
    readout: str = IDEAL_ANGLE_ORACLE
    analyzer_grid_size: int = 64
    separation_resolution_nm: float = 0.05

    def __post_init__(self):
        if self.kind not in EVE_KINDS:
            raise ValueError(f"eve.kind must be one of {EVE_KINDS}, got {self.kind!r}")
        if self.analyzer_policy not in ANALYZER_POLICIES:
            raise ValueError(
                f"eve.analyzer_policy must be one of {ANALYZER_POLICIES}, "
                f"got {self.analyzer_policy!r}"
            )
        if not math.isfinite(self.analyzer_angle):
            raise ValueError("eve.analyzer_angle must be finite")
        if self.n_steal < 0:
            raise ValueError(f"eve.n_steal must be >= 0, got {self.n_steal}")
        if self.n_spy < 0:
            raise ValueError(f"eve.n_spy must be >= 0, got {self.n_spy}")
        if not (self.spy_wavelength_nm > 0):
            raise ValueError(
                f"eve.spy_wavelength_nm must be positive, got {self.spy_wavelength_nm!r}"
            )
        if not math.isfinite(self.spy_polarization):
            raise ValueError("eve.spy_polarization must be finite")
        if self.injection_leg not in _INJECTION_LEGS:
            raise ValueError("eve.injection_leg must be leg 1 or leg 2")
        if self.readout not in EVE_READOUTS:
            raise ValueError(f"eve.readout must be one of {EVE_READOUTS}, got {self.readout!r}")
        if self.analyzer_grid_size < 2:
            raise ValueError(
                f"eve.analyzer_grid_size must be >= 2, got {self.analyzer_grid_size}"
            )
        if math.isnan(self.separation_resolution_nm) or self.separation_resolution_nm < 0:
            raise ValueError("eve.separation_resolution_nm must be >= 0")


@dataclass(frozen=True)
class EveRoundState:
    """Eve's per-round bookkeeping: what she holds and what she concluded."""

    round_id: int
    stolen: tuple[Photon, ...] = ()
    captured_spies: tuple[Photon, ...] = ()
    theta_estimate: float | None = None
    bit_guess: int | None = None


def eve_tap_leg1(
    pulse: Pulse, n_steal: int, rng: RandomStream
) -> tuple[Pulse, tuple[Photon, ...]]:
    """Remove up to n_steal uniformly chosen photons from the leg-1 pulse.

    The remainder is forwarded unchanged, in its original order. Stealing
    from an empty pulse steals nothing.
    """
    if pulse.leg is not Leg.LEG1_A_TO_B:
        raise ProtocolOrderError(f"eve_tap_leg1 expects a leg-1 pulse, got {pulse.leg.name}")
    n = len(pulse.photons)
    k = min(n_steal, n)
    if k == 0:
        return pulse, ()
    picked = rng.sample(n, k)
    picked_set = set(picked)
    stolen = tuple(pulse.photons[i] for i in picked)
    forwarded = tuple(p for i, p in enumerate(pulse.photons) if i not in picked_set)
    return Pulse(pulse.round_id, pulse.leg, forwarded), stolen


def eve_inject(pulse: Pulse, strategy: EveStrategy, rng: RandomStream) -> Pulse:
    """Append n_spy spy photons to the pulse on Eve's chosen injection leg.

    Spy preparation is deterministic (fixed polarization and wavelength),
    so no draws are consumed.
    """
    if pulse.leg is not strategy.injection_leg:
        raise ProtocolOrderError(
            f"eve_inject configured for {strategy.injection_leg.name}, "
            f"got a {pulse.leg.name} pulse"
        )
    if strategy.n_spy == 0:
        return pulse
    spies = tuple(
        Photon(angle_new(strategy.spy_polarization), strategy.spy_wavelength_nm, SPY)
        for _ in range(strategy.n_spy)
    )
    return Pulse(pulse.round_id, pulse.leg, pulse.photons + spies)


def eve_separate_leg3(
    pulse: Pulse, strategy: EveStrategy, legitimate_wavelength_nm: float
) -> tuple[Pulse, tuple[Photon, ...]]:
    """Split the leg-3 pulse into (to Bob, captured by Eve) by wavelength.

    Eve captures every photon whose wavelength differs from the legitimate
    center by more than her separation resolution. If her spies sit within
    that resolution she captures nothing and they travel on to contaminate
    Bob's readout.
    """
    if pulse.leg is not Leg.LEG3_A_TO_B:
        raise ProtocolOrderError(
            f"eve_separate_leg3 expects a leg-3 pulse, got {pulse.leg.name}"
        )
    forwarded = []
    captured = []
    for photon in pulse.photons:
        off_center = abs(photon.wavelength_nm - legitimate_wavelength_nm)
        (captured if off_center > strategy.separation_resolution_nm else forwarded).append(photon)
    return Pulse(pulse.round_id, pulse.leg, tuple(forwarded)), tuple(captured)


def eve_intercept_resend(pulse: Pulse, strategy: EveStrategy, rng: RandomStream) -> Pulse:
    """Measure every leg-1 photon and resend a fresh one in the seen state.

    With a fixed analyzer the resent photon sits at beta or beta + pi/2;
    with the uniform policy a fresh analyzer is drawn per photon. The
    randomness of theta makes this attack useless on this protocol, which
    is exactly what the QBER it causes demonstrates.
    """
    if pulse.leg is not Leg.LEG1_A_TO_B:
        raise ProtocolOrderError(
            f"eve_intercept_resend expects a leg-1 pulse, got {pulse.leg.name}"
        )
    resent = []
    for photon in pulse.photons:
        if strategy.analyzer_policy == UNIFORM_RANDOM:
            beta = angle_new(rng.uniform(0.0, math.pi))
        else:
            beta = angle_new(strategy.analyzer_angle)
        seen = beta if measure(photon, beta, rng) is Outcome.ALONG else rotate(beta, math.pi / 2)
        resent.append(Photon(seen, photon.wavelength_nm, RESENT))
    return Pulse(pulse.round_id, pulse.leg, tuple(resent))


def _estimate_theta_malus(
    stolen: tuple[Photon, ...], grid_size: int, rng: RandomStream
) -> float:
    """Maximum-likelihood estimate of the stolen photons' angle.

    Photon i is measured against analyzer grid[i mod G]; the estimate is
    the grid angle maximizing the Bernoulli likelihood of the observed
    outcomes. Likelihood ties resolve to the lowest grid index.
    """
    grid = np.arange(grid_size) * (math.pi / grid_size)
    analyzers = np.array([grid[i % grid_size] for i in range(len(stolen))])
    along = np.array(
        [
            measure(photon, float(analyzers[i]), rng) is Outcome.ALONG
            for i, photon in enumerate(stolen)
        ]
    )
    p = np.cos(grid[:, None] - analyzers[None, :]) ** 2
    with np.errstate(divide="ignore"):
        log_lik = np.where(along[None, :], np.log(p), np.log(1.0 - p)).sum(axis=1)
    return float(grid[int(np.argmax(log_lik))])


def eve_infer_bit(
    state: EveRoundState, strategy: EveStrategy, rng: RandomStream
) -> EveRoundState:
    """Produce Eve's bit guess for the round; always fills bit_guess.

    ideal_angle_oracle reads polarization angles exactly: theta from any
    stolen photon, the bit from whichever encoding hypothesis
    -theta +- pi/4 lies closer to a captured spy. malus_estimation first
    estimates theta from Malus measurements of the stolen photons, then
    measures the captured spies at -theta_hat + pi/4 and majority-votes.
    Whenever the needed photons are missing (or the vote ties), the guess
    falls back to a fair coin so Eve's information is defined every round.
    """
    if not state.stolen or not state.captured_spies:
        return EveRoundState(
            state.round_id, state.stolen, state.captured_spies, None, rng.randbit()
        )

    if strategy.readout == IDEAL_ANGLE_ORACLE:
        theta = state.stolen[0].polarization
        spy = state.captured_spies[0].polarization
        d_one = angle_distance(spy, angle_new(-theta + ENCODING_OFFSET))
        d_zero = angle_distance(spy, angle_new(-theta - ENCODING_OFFSET))
        guess = 1 if d_one <= d_zero else 0
        return EveRoundState(
            state.round_id, state.stolen, state.captured_spies, theta, guess
        )

    theta_hat = _estimate_theta_malus(state.stolen, strategy.analyzer_grid_size, rng)
    analyzer = angle_new(-theta_hat + ENCODING_OFFSET)
    ones = sum(
        1 for spy in state.captured_spies if measure(spy, analyzer, rng) is Outcome.ALONG
    )
    zeros = len(state.captured_spies) - ones
    if ones > zeros:
        guess = 1
    elif zeros > ones:
        guess = 0
    else:
        guess = rng.randbit()
    return EveRoundState(
        state.round_id, state.stolen, state.captured_spies, theta_hat, guess
    )
