"""Commit-reveal randomness beacon with randomized reveal order.

A verifying-ledger state machine, leader/operator actors, a deterministic
discrete-event simulator covering the hybrid, fully on-chain, and fallback
paths, and statistical analysis of the output distribution.
"""

from .beacon_math import (
    AmbiguousOrder,
    RevealOrder,
    TooFewParticipants,
    omega_o,
    omega_v,
    order_keys,
    reveal_order,
    run_round,
    verify_order,
)
from .crypto import (
    CommitmentChain,
    InvalidKey,
    InvalidSecretLength,
    InvalidSignature,
    MalleableSignature,
    RecoverableSignature,
    TypedMessage,
    derive_chain,
    recover,
    sign,
    typed_digest,
)
from .keccak import keccak256
from .ledger import CostMeter, Ledger, LedgerConfig, LedgerError, Mode, Phase
from .merkle import TooFewLeaves, merkle_root, verify_set
from .simulator import (
    GriefingReport,
    LivenessTimeout,
    RouteMismatch,
    ScenarioScript,
    SimulationResult,
    griefing_report,
    run,
    sweep,
)
from .transcript import Event, Transcript

__version__ = "0.1.0"
