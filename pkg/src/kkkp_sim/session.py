"""Session driver: runs rounds, derives streams, accumulates statistics.

Every round derives its own random streams, one per role (Alice, Bob, Eve,
channel, public coin), from the master seed, the round id, and a role tag.
Two consequences fall out of that design and are load-bearing for the test
suite: a session is bit-for-bit reproducible from its configuration alone,
and changing one actor's behavior (say, a filter bandwidth) cannot shift
any other actor's draws in unrelated rounds.

Round choreography (key rounds; on check rounds each party records the
photon count at its reception point instead of operating on the pulse):

  leg 1: Alice prepares -> Eve taps / injects (leg-1 IPA) / intercepts
         -> channel loss eta1 -> Bob's input filter -> Bob rotates
  leg 2: channel loss eta2 -> Eve injects (leg-2 IPA)
         -> Alice's input filter -> Alice encodes
  leg 3: Eve separates her spies -> channel loss eta3
         -> Bob's input filter -> Bob reads out
  finally Eve infers her bit for the round.

A round whose pulse reaches Bob empty on leg 1, or whose leg-3 readout
sees no photon, becomes an erasure and is excluded from the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .adversary import (
    INTERCEPT_RESEND,
    IPA,
    EveRoundState,
    EveStrategy,
    eve_infer_bit,
    eve_inject,
    eve_intercept_resend,
    eve_separate_leg3,
    eve_tap_leg1,
)
from .channel import (
    AGGREGATE_NONE,
    ChannelConfig,
    DetectionPolicy,
    aggregate_intensity_ztest,
    party_input_stage,
    run_intensity_check,
    transmit,
)
from .photonics import Leg, Pulse
from .protocol import (
    READOUT_MODES,
    AliceStage,
    BobRound,
    RoundTranscript,
    alice_encode,
    alice_prepare,
    bob_readout,
    bob_rotate,
    intensity_report,
)
from .rng import RandomStream, _MASK64, _GOLDEN, _mix64

ROLE_CODES = {
    "alice": 1,
    "bob": 2,
    "eve": 3,
    "channel": 4,
    "public": 5,
    # session-scope stream for QBER sample selection; used with round_id 0
    "sampling": 6,
}

_SEED_LIMIT = 1 << 64


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce a session bit for bit."""

    rounds: int = 1000
    n_photons_per_pulse: int = 1
    readout_mode: str = "majority_vote"
    p_check: float = 0.0
    qber_sample_fraction: float = 0.1
    channel: ChannelConfig = ChannelConfig()
    detection: DetectionPolicy = DetectionPolicy()
    eve: EveStrategy = EveStrategy()
    master_seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.n_photons_per_pulse < 1:
            raise ValueError(
                f"n_photons_per_pulse must be >= 1, got {self.n_photons_per_pulse}"
            )
        if self.readout_mode not in READOUT_MODES:
            raise ValueError(f"readout_mode must be one of {READOUT_MODES}")
        if math.isnan(self.p_check) or not (0.0 <= self.p_check <= 1.0):
            raise ValueError(f"p_check must be in [0, 1], got {self.p_check!r}")
        if math.isnan(self.qber_sample_fraction) or not (
            0.0 <= self.qber_sample_fraction <= 1.0
        ):
            raise ValueError(
                f"qber_sample_fraction must be in [0, 1], got {self.qber_sample_fraction!r}"
            )
        if not (0 <= self.master_seed < _SEED_LIMIT):
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SessionStats:
    """Aggregated outcomes of one session.

    `qber` is estimated on the sacrificed sample the parties would publish;
    `full_qber` is the simulator-omniscient error rate over all key rounds.
    `eve_information` is the fraction of key rounds where Eve's guess
    matches Alice's bit (0.5 is the no-information baseline).
    """

    rounds: int
    key_rounds: int
    check_rounds: int
    erasures: int
    sampled_rounds: int
    final_key_length: int
    qber: float
    full_qber: float
    eve_information: float
    alarms: int
    aggregate_p_value: float | None
    aggregate_alarm: bool | None

    def __post_init__(self):
        if self.key_rounds + self.check_rounds + self.erasures != self.rounds:
            raise ValueError("round accounting identity violated")
        if self.final_key_length != self.key_rounds - self.sampled_rounds:
            raise ValueError("final key length must be key_rounds - sampled_rounds")


def derive_stream(master_seed: int, round_id: int, role: str) -> RandomStream:
    """Derive the deterministic stream for (seed, round, role).

    The key is built by absorbing the three inputs through successive
    splitmix64 steps, so streams for distinct (round, role) pairs are
    statistically independent and any round can be replayed in isolation.
    """
    if not (0 <= master_seed < _SEED_LIMIT):
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    if round_id < 0:
        raise ValueError(f"round_id must be non-negative, got {round_id}")
    code = ROLE_CODES.get(role)
    if code is None:
        raise ValueError(f"unknown role {role!r}, expected one of {sorted(ROLE_CODES)}")
    s = _mix64((master_seed + _GOLDEN) & _MASK64) ^ round_id
    s = _mix64((s + _GOLDEN) & _MASK64) ^ code
    return RandomStream(_mix64((s + _GOLDEN) & _MASK64))


def run_round(config: SessionConfig, round_id: int) -> RoundTranscript:
    """Run one full round and return its transcript.

    Draw order within each role's stream: public takes the check coin;
    Alice takes theta then her bit; Eve taps, then (after leg 3) infers;
    the channel consumes survival draws in leg order; Bob takes phi then
    his readout draws.
    """
    seed = config.master_seed
    public_rng = derive_stream(seed, round_id, "public")
    alice_rng = derive_stream(seed, round_id, "alice")
    bob_rng = derive_stream(seed, round_id, "bob")
    eve_rng = derive_stream(seed, round_id, "eve")
    channel_rng = derive_stream(seed, round_id, "channel")
    ch = config.channel
    eve = config.eve

    is_check = public_rng.random() < config.p_check

    # Leg 1: Alice -> Bob
    alice, pulse = alice_prepare(
        round_id, config.n_photons_per_pulse, ch.legitimate_wavelength_nm, alice_rng
    )
    stolen: tuple = ()
    if eve.kind == IPA:
        pulse, stolen = eve_tap_leg1(pulse, eve.n_steal, eve_rng)
        if eve.injection_leg is Leg.LEG1_A_TO_B:
            pulse = eve_inject(pulse, eve, eve_rng)
    elif eve.kind == INTERCEPT_RESEND:
        pulse = eve_intercept_resend(pulse, eve, eve_rng)
    pulse = transmit(pulse, ch.eta1, channel_rng)
    pulse = party_input_stage(pulse, ch.bob_input_filter)
    bob_leg1_count = intensity_report(pulse)

    bob = BobRound.begin(round_id)
    if is_check:
        pulse = Pulse(round_id, Leg.LEG2_B_TO_A, pulse.photons)
    else:
        bob, pulse = bob_rotate(bob, pulse, bob_rng)

    # Leg 2: Bob -> Alice
    pulse = transmit(pulse, ch.eta2, channel_rng)
    if eve.kind == IPA and eve.injection_leg is Leg.LEG2_B_TO_A:
        pulse = eve_inject(pulse, eve, eve_rng)
    pulse = party_input_stage(pulse, ch.alice_input_filter)
    alice_leg2_count = intensity_report(pulse)

    if is_check:
        pulse = Pulse(round_id, Leg.LEG3_A_TO_B, pulse.photons)
    else:
        alice, pulse = alice_encode(alice, pulse)

    # Leg 3: Alice -> Bob
    captured: tuple = ()
    if eve.kind == IPA:
        pulse, captured = eve_separate_leg3(pulse, eve, ch.legitimate_wavelength_nm)
    pulse = transmit(pulse, ch.eta3, channel_rng)
    pulse = party_input_stage(pulse, ch.bob_input_filter)
    bob_leg3_count = intensity_report(pulse)

    # A round Bob never saw on leg 1 can't enter the key, even if foreign
    # photons show up later; skip the readout so it stays an erasure.
    if not is_check and bob_leg1_count > 0:
        bob = bob_readout(bob, pulse, config.readout_mode, bob_rng)

    eve_state = EveRoundState(round_id, stolen=stolen, captured_spies=captured)
    eve_state = eve_infer_bit(eve_state, eve, eve_rng)
    alice = replace(alice, stage=AliceStage.DONE)

    return RoundTranscript(
        round_id=round_id,
        is_check_round=is_check,
        alice_bit=None if is_check else alice.bit,
        bob_outcome=None if is_check else bob.outcome,
        bob_leg1_count=bob_leg1_count,
        alice_leg2_count=alice_leg2_count,
        bob_leg3_count=bob_leg3_count,
        eve_guess=eve_state.bit_guess,
    )


def aggregate_stats(
    config: SessionConfig, transcripts: list[RoundTranscript]
) -> SessionStats:
    """Reduce round transcripts into SessionStats.

    The QBER sample is a uniformly chosen fraction of key rounds, drawn
    from the session-scope sampling stream; sampled rounds are removed
    from the final key.
    """
    check = [t for t in transcripts if t.is_check_round]
    key = [t for t in transcripts if not t.is_check_round and t.bob_outcome is not None]
    erasures = len(transcripts) - len(check) - len(key)

    full_errors = sum(1 for t in key if t.bob_outcome != t.alice_bit)
    full_qber = full_errors / len(key) if key else 0.0
    eve_hits = sum(1 for t in key if t.eve_guess == t.alice_bit)
    eve_information = eve_hits / len(key) if key else 0.5

    sampling_rng = derive_stream(config.master_seed, 0, "sampling")
    n_sample = round(config.qber_sample_fraction * len(key))
    sample_idx = sampling_rng.sample(len(key), n_sample) if n_sample else []
    sample_errors = sum(1 for i in sample_idx if key[i].bob_outcome != key[i].alice_bit)
    qber = sample_errors / n_sample if n_sample else 0.0

    policy = config.detection
    alarms = 0
    counts_by_checkpoint = {cp: 0 for cp in policy.checkpoints}
    for t in check:
        observed = {
            "bob_leg1": t.bob_leg1_count,
            "alice_leg2": t.alice_leg2_count,
            "bob_leg3": t.bob_leg3_count,
        }
        tripped = False
        for cp in policy.checkpoints:
            counts_by_checkpoint[cp] += observed[cp]
            if run_intensity_check(
                observed[cp],
                policy,
                config.n_photons_per_pulse,
                config.channel.cumulative_eta(cp),
            ):
                tripped = True
        alarms += tripped

    aggregate_p: float | None = None
    aggregate_alarm: bool | None = None
    if policy.aggregate_rule != AGGREGATE_NONE and check:
        reference = policy.checkpoints[0]
        aggregate_p, aggregate_alarm = aggregate_intensity_ztest(
            counts_by_checkpoint[reference],
            len(check),
            config.n_photons_per_pulse,
            config.channel.cumulative_eta(reference),
            policy.alpha,
        )

    return SessionStats(
        rounds=len(transcripts),
        key_rounds=len(key),
        check_rounds=len(check),
        erasures=erasures,
        sampled_rounds=n_sample,
        final_key_length=len(key) - n_sample,
        qber=qber,
        full_qber=full_qber,
        eve_information=eve_information,
        alarms=alarms,
        aggregate_p_value=aggregate_p,
        aggregate_alarm=aggregate_alarm,
    )


def run_session(config: SessionConfig) -> SessionStats:
    """Run all rounds and aggregate; deterministic for a fixed config."""
    transcripts = [run_round(config, i) for i in range(config.rounds)]
    return aggregate_stats(config, transcripts)


def analytic_qber_oracle(scenario: str, f_spy: float | None = None) -> float:
    """Closed-form QBER for the two analytically tractable attack scenarios.

    intercept_resend_fixed_basis: the per-round error probability is
    2 cos^2(d) sin^2(d) with d = theta - beta uniform, averaging to 1/4.
    ipa_inband_sample_one: sampling a spy (probability f_spy) errs with
    the average Malus error 1/2, so the QBER is f_spy / 2.
    """
    if scenario == "intercept_resend_fixed_basis":
        return 0.25
    if scenario == "ipa_inband_sample_one":
        if f_spy is None:
            raise ValueError("ipa_inband_sample_one requires f_spy")
        if math.isnan(f_spy) or not (0.0 <= f_spy <= 1.0):
            raise ValueError(f"f_spy must be in [0, 1], got {f_spy!r}")
        return f_spy / 2.0
    raise ValueError(f"unknown oracle scenario {scenario!r}")
