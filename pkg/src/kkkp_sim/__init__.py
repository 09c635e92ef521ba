"""Monte Carlo simulator of the KKKP blind-polarization-basis QKD protocol.

The package models one honest protocol round end to end (three passes of a
polarized photon pulse between Alice and Bob), three eavesdropper
strategies including the invisible photon (Trojan-horse) attack, and the
two countermeasures: random pulse-intensity checks and narrowband
frequency filtering. Sessions are driven by `run_session` and are exactly
reproducible from a `SessionConfig`.
"""

__version__ = "0.1.0"

from .adversary import (
    EveRoundState,
    EveStrategy,
    eve_infer_bit,
    eve_inject,
    eve_intercept_resend,
    eve_separate_leg3,
    eve_tap_leg1,
)
from .channel import (
    ChannelConfig,
    DetectionPolicy,
    aggregate_intensity_ztest,
    party_input_stage,
    run_intensity_check,
    transmit,
    ztest_power,
)
from .photonics import (
    FilterConfig,
    Leg,
    Outcome,
    Photon,
    Pulse,
    angle_distance,
    angle_new,
    frequency_filter,
    malus_probability,
    measure,
    rotate,
)
from .protocol import (
    AliceRound,
    BobRound,
    ProtocolOrderError,
    RoundTranscript,
    alice_encode,
    alice_prepare,
    bob_readout,
    bob_rotate,
    intensity_report,
)
from .rng import RandomStream
from .session import (
    SessionConfig,
    SessionStats,
    aggregate_stats,
    analytic_qber_oracle,
    derive_stream,
    run_round,
    run_session,
)

__all__ = [
    "__version__",
    "AliceRound",
    "BobRound",
    "ChannelConfig",
    "DetectionPolicy",
    "EveRoundState",
    "EveStrategy",
    "FilterConfig",
    "Leg",
    "Outcome",
    "Photon",
    "ProtocolOrderError",
    "Pulse",
    "RandomStream",
    "RoundTranscript",
    "SessionConfig",
    "SessionStats",
    "aggregate_intensity_ztest",
    "aggregate_stats",
    "analytic_qber_oracle",
    "angle_distance",
    "angle_new",
    "alice_encode",
    "alice_prepare",
    "bob_readout",
    "bob_rotate",
    "derive_stream",
    "eve_infer_bit",
    "eve_inject",
    "eve_intercept_resend",
    "eve_separate_leg3",
    "eve_tap_leg1",
    "frequency_filter",
    "intensity_report",
    "malus_probability",
    "measure",
    "party_input_stage",
    "rotate",
    "run_intensity_check",
    "run_round",
    "run_session",
    "transmit",
    "ztest_power",
]
