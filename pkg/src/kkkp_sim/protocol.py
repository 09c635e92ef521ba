"""Honest-party state machines for one round of the KKKP protocol.

A round is three passes of the same pulse:

  leg 1  Alice prepares n photons polarized at a fresh secret angle theta
         and sends them to Bob.
  leg 2  Bob rotates everything he received by a fresh secret angle phi
         and returns the pulse.
  leg 3  Alice compensates -theta and encodes her key bit by rotating
         +pi/4 (bit 1) or -pi/4 (bit 0), then sends the pulse back. Bob
         compensates -phi and measures against the analyzer pair
         {pi/4, 3pi/4}; "along pi/4" votes bit 1.

Because theta and phi are uniform and independent per round, the pulse
polarization on the wire carries no fixed basis an eavesdropper could
measure in. Both parties apply their rotations to every photon that
arrives, including any photon an adversary slipped in; honest code is
blind to provenance by construction.

All state objects are immutable; operations return updated copies. Feeding
a pulse of the wrong leg, or a state in the wrong stage, raises
ProtocolOrderError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .photonics import LEGITIMATE, Leg, Outcome, Photon, Pulse, angle_new, measure, rotate
from .rng import RandomStream

ENCODING_OFFSET = math.pi / 4  # bit 1 -> +pi/4, bit 0 -> -pi/4 (public constant)
READOUT_ANALYZER = math.pi / 4

MAJORITY_VOTE = "majority_vote"
SAMPLE_ONE = "sample_one"
READOUT_MODES = (MAJORITY_VOTE, SAMPLE_ONE)


class ProtocolOrderError(RuntimeError):
    """A protocol operation was applied out of order (wrong leg or stage)."""


class AliceStage(Enum):
    PREPARED = "prepared"
    ENCODED = "encoded"
    DONE = "done"


class BobStage(Enum):
    INITIAL = "initial"
    ROTATED = "rotated"
    MEASURED = "measured"


@dataclass(frozen=True)
class AliceRound:
    """Alice's per-round secrets: theta and her key bit."""

    round_id: int
    theta: float
    bit: int
    stage: AliceStage = AliceStage.PREPARED


@dataclass(frozen=True)
class BobRound:
    """Bob's per-round secret phi and his measured outcome.

    `outcome` is the decoded bit, or None, which before readout means
    "not measured yet" and after readout means erasure (no photon arrived).
    """

    round_id: int
    phi: float | None = None
    stage: BobStage = BobStage.INITIAL
    outcome: int | None = None

    @classmethod
    def begin(cls, round_id: int) -> "BobRound":
        return cls(round_id=round_id)


@dataclass(frozen=True)
class RoundTranscript:
    """What one round leaves behind for statistics.

    Photon counts are recorded at each reception point for every round;
    the detection policy only acts on them for check rounds. `eve_guess`
    is filled by the adversary module and is metrics-only.
    """

    round_id: int
    is_check_round: bool
    alice_bit: int | None
    bob_outcome: int | None
    bob_leg1_count: int
    alice_leg2_count: int
    bob_leg3_count: int
    eve_guess: int


def alice_prepare(
    round_id: int, n_photons: int, wavelength_nm: float, rng: RandomStream
) -> tuple[AliceRound, Pulse]:
    """Draw theta and the key bit, emit a leg-1 pulse of n identical photons.

    Draw order from Alice's stream: theta first, then the bit.
    """
    if n_photons < 1:
        raise ValueError(f"n_photons must be >= 1, got {n_photons}")
    theta = angle_new(rng.uniform(0.0, math.pi))
    bit = rng.randbit()
    photons = tuple(
        Photon(theta, wavelength_nm, LEGITIMATE) for _ in range(n_photons)
    )
    state = AliceRound(round_id=round_id, theta=theta, bit=bit)
    return state, Pulse(round_id, Leg.LEG1_A_TO_B, photons)


def bob_rotate(
    state: BobRound, pulse: Pulse, rng: RandomStream
) -> tuple[BobRound, Pulse]:
    """Draw phi and rotate every arriving photon by it, forwarding on leg 2.

    An empty pulse still advances the stage (the round will end as an
    erasure); phi is drawn either way so Bob's stream use is uniform.
    """
    if pulse.leg is not Leg.LEG1_A_TO_B:
        raise ProtocolOrderError(f"bob_rotate expects a leg-1 pulse, got {pulse.leg.name}")
    if state.stage is not BobStage.INITIAL:
        raise ProtocolOrderError(f"bob_rotate expects an initial BobRound, got {state.stage}")
    phi = angle_new(rng.uniform(0.0, math.pi))
    photons = tuple(
        Photon(rotate(p.polarization, phi), p.wavelength_nm, p.provenance)
        for p in pulse.photons
    )
    new_state = BobRound(state.round_id, phi, BobStage.ROTATED, state.outcome)
    return new_state, Pulse(pulse.round_id, Leg.LEG2_B_TO_A, photons)


def alice_encode(state: AliceRound, pulse: Pulse) -> tuple[AliceRound, Pulse]:
    """Compensate -theta and rotate +-pi/4 by the key bit; forward on leg 3.

    The same rotation hits every photon in the returning pulse, spy
    photons included; Alice cannot tell them apart.
    """
    if pulse.leg is not Leg.LEG2_B_TO_A:
        raise ProtocolOrderError(f"alice_encode expects a leg-2 pulse, got {pulse.leg.name}")
    if state.stage is not AliceStage.PREPARED:
        raise ProtocolOrderError(f"alice_encode expects stage PREPARED, got {state.stage}")
    offset = ENCODING_OFFSET if state.bit == 1 else -ENCODING_OFFSET
    delta = -state.theta + offset
    photons = tuple(
        Photon(rotate(p.polarization, delta), p.wavelength_nm, p.provenance)
        for p in pulse.photons
    )
    new_state = AliceRound(state.round_id, state.theta, state.bit, AliceStage.ENCODED)
    return new_state, Pulse(pulse.round_id, Leg.LEG3_A_TO_B, photons)


def bob_readout(
    state: BobRound, pulse: Pulse, mode: str, rng: RandomStream
) -> BobRound:
    """Compensate -phi and decode one bit from the arriving pulse.

    majority_vote: measure every photon against {pi/4, 3pi/4} and take the
    majority, breaking ties with a fresh fair coin. sample_one: measure a
    single uniformly chosen photon. An empty pulse yields an erasure
    (outcome None) and consumes no draws.
    """
    if pulse.leg is not Leg.LEG3_A_TO_B:
        raise ProtocolOrderError(f"bob_readout expects a leg-3 pulse, got {pulse.leg.name}")
    if state.stage is not BobStage.ROTATED:
        raise ProtocolOrderError(f"bob_readout expects stage ROTATED, got {state.stage}")
    if mode not in READOUT_MODES:
        raise ValueError(f"unknown readout mode {mode!r}")

    if not pulse.photons:
        return BobRound(state.round_id, state.phi, BobStage.MEASURED, None)

    compensated = [
        Photon(rotate(p.polarization, -state.phi), p.wavelength_nm, p.provenance)
        for p in pulse.photons
    ]
    if mode == SAMPLE_ONE:
        pick = rng.randbelow(len(compensated))
        along = measure(compensated[pick], READOUT_ANALYZER, rng) is Outcome.ALONG
        bit = 1 if along else 0
    else:
        ones = sum(
            1
            for p in compensated
            if measure(p, READOUT_ANALYZER, rng) is Outcome.ALONG
        )
        zeros = len(compensated) - ones
        if ones > zeros:
            bit = 1
        elif zeros > ones:
            bit = 0
        else:
            bit = rng.randbit()
    return BobRound(state.round_id, state.phi, BobStage.MEASURED, bit)


def intensity_report(pulse: Pulse) -> int:
    """Photon count seen at a reception point (an ideal counter)."""
    return len(pulse.photons)
