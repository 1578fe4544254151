"""Quantum and classical channels between the parties.

The quantum channel meters every qubit, hands it to the adversary hook and
then applies depolarizing noise. The classical channel is public and
authenticated: every message lands in a log the adversary may read, and only
key-generation payloads count toward b_t.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Protocol, Sequence, Tuple

from qkd_simulator.exceptions import ConfigError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import Prng, Register, apply_pauli

logger = get_logger("channels")

PAULI_LABELS = ("X", "Y", "Z")


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing channel: with probability p a uniformly random Pauli hits the qubit."""
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"noise probability must lie in [0, 1], got {self.p}")

    @property
    def is_identity(self) -> bool:
        return self.p == 0.0


@dataclass
class TrafficCounters:
    """Tallies for the efficiency formulas; q_checked counts qubits spent on checks."""
    q_t: int = 0
    b_t: int = 0
    b_s: int = 0
    q_u: int = 0
    q_checked: int = 0

    def merge(self, other: "TrafficCounters") -> "TrafficCounters":
        return TrafficCounters(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def as_dict(self) -> Dict[str, int]:
        return {"q_t": self.q_t, "b_t": self.b_t, "b_s": self.b_s, "q_u": self.q_u}


class PayloadKind(Enum):
    POSITION_LIST = "PositionList"
    BASIS_ANNOUNCEMENT = "BasisAnnouncement"
    INITIAL_STATE_INFO = "InitialStateInfo"
    CHECK_RESULTS = "CheckResults"
    X_RESULT_PUBLICATION = "XResultPublication"
    ABORT_DECISION = "AbortDecision"


# check traffic and control signals stay out of b_t
_UNCOUNTED = {PayloadKind.POSITION_LIST, PayloadKind.CHECK_RESULTS, PayloadKind.ABORT_DECISION}


@dataclass
class ClassicalMessage:
    """
    One public announcement.

    `rounds` names the protocol rounds the payload bits refer to, one per
    bit for per-round announcements, empty for bulk payloads.
    """
    sender: str
    kind: PayloadKind
    bits: Tuple[int, ...] = ()
    rounds: Tuple[int, ...] = ()
    counts_toward_b_t: bool = field(init=False)

    def __post_init__(self):
        self.bits = tuple(int(b) for b in self.bits)
        self.rounds = tuple(int(r) for r in self.rounds)
        self.counts_toward_b_t = self.kind not in _UNCOUNTED


class MessageLog:
    """Append-only public record of classical traffic."""

    def __init__(self):
        self.messages: List[ClassicalMessage] = []

    def append(self, msg: ClassicalMessage) -> None:
        self.messages.append(msg)

    def of_kind(self, kind: PayloadKind) -> List[ClassicalMessage]:
        return [m for m in self.messages if m.kind is kind]

    def __iter__(self) -> Iterator[ClassicalMessage]:
        return iter(self.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def to_rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "sender": m.sender,
                "kind": m.kind.value,
                "n_bits": len(m.bits),
                "counts_toward_b_t": m.counts_toward_b_t,
                "rounds": " ".join(str(r) for r in m.rounds),
                "bits": "".join(str(b) for b in m.bits),
            }
            for m in self.messages
        ]


class AdversaryHook(Protocol):
    """Anything that can act on qubits in transit."""

    def intercept(self, reg: Register, labels: Sequence[str]) -> Register:
        ...


def depolarize(reg: Register, q: str, noise: NoiseSpec, rng: Prng) -> Register:
    """Apply X, Y or Z (each p/3) to q; draws nothing when p is 0."""
    if noise.is_identity:
        return reg
    if not rng.bernoulli(noise.p):
        return reg
    pauli = PAULI_LABELS[rng.choice_index([1.0, 1.0, 1.0])]
    logger.debug(f"Depolarizing {pauli} on qubit {q}")
    return apply_pauli(reg, q, pauli)


def transmit_qubits(reg: Register, labels: Sequence[str], eve: Optional[AdversaryHook],
                    noise: NoiseSpec, counters: TrafficCounters, rng: Prng) -> Register:
    """
    Send several qubits of one round through the channel together.

    The adversary sees all of them at once (a joint Bell measurement needs
    both), then noise hits each qubit in label order.
    """
    for label in labels:
        reg.index(label)
    counters.q_t += len(labels)
    if eve is not None:
        reg = eve.intercept(reg, labels)
    for label in labels:
        reg = depolarize(reg, label, noise, rng)
    return reg


def transmit_qubit(reg: Register, q: str, eve: Optional[AdversaryHook], noise: NoiseSpec,
                   counters: TrafficCounters, rng: Prng) -> Register:
    """
    Send one qubit: count it, let the adversary act, then apply noise.

    Raises:
        UnknownLabelError: q is not in the register
    """
    return transmit_qubits(reg, (q,), eve, noise, counters, rng)


def broadcast_classical(msg: ClassicalMessage, counters: TrafficCounters, log: MessageLog) -> None:
    """Publish a message; b_t grows by its payload length if it counts."""
    log.append(msg)
    if msg.counts_toward_b_t:
        counters.b_t += len(msg.bits)
    logger.debug(f"{msg.sender} published {msg.kind.value} ({len(msg.bits)} bits)")
