"""Eavesdropper strategies and the attack demonstrations.

An `Eavesdropper` is the hook the quantum channel calls for every qubit in
transit. It owns its own random stream, so switching it off never shifts the
draws the parties make.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from qkd_simulator.exceptions import ConfigError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import (
    BELL_ORDER,
    BellOutcome,
    MeasurementBasis,
    Prng,
    Register,
    adjoin_qubit,
    apply_cnot,
    apply_hadamard,
    measure,
    measure_bell,
)
from qkd_simulator.states import NamedState, named_state, psi_correlation_holds, psi_schedule

logger = get_logger("adversary")

PARTY_LABELS = frozenset({"A", "B", "C", "1", "2", "3"})


class AttackKind(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept-resend"
    COLLECTIVE_CNOT = "cnot"
    BELL_INTERCEPT = "bell"


class BasisPolicy(Enum):
    RANDOM_ZX = "random"
    ALWAYS_Z = "z"
    ALWAYS_X = "x"


class ResendPolicy(Enum):
    AS_MEASURED_EIGENSTATE = "eigenstate"
    X_REMAP = "remap"


@dataclass(frozen=True)
class EveStrategy:
    """
    One eavesdropping strategy with its options.

    The textual name is `kind[:option[:option]]`, e.g. `intercept-resend:z:eigenstate`
    or `cnot:z`; options left at their defaults are omitted.
    """
    kind: AttackKind = AttackKind.NONE
    basis_policy: BasisPolicy = BasisPolicy.RANDOM_ZX
    resend_policy: ResendPolicy = ResendPolicy.X_REMAP
    control_basis: MeasurementBasis = MeasurementBasis.X

    @classmethod
    def none(cls) -> "EveStrategy":
        return cls(AttackKind.NONE)

    @classmethod
    def intercept_resend(cls, basis_policy: BasisPolicy = BasisPolicy.RANDOM_ZX,
                         resend_policy: ResendPolicy = ResendPolicy.X_REMAP) -> "EveStrategy":
        return cls(AttackKind.INTERCEPT_RESEND, basis_policy=basis_policy, resend_policy=resend_policy)

    @classmethod
    def collective_cnot(cls, control_basis: MeasurementBasis = MeasurementBasis.X) -> "EveStrategy":
        return cls(AttackKind.COLLECTIVE_CNOT, control_basis=control_basis)

    @classmethod
    def bell_intercept(cls) -> "EveStrategy":
        return cls(AttackKind.BELL_INTERCEPT)

    @property
    def is_none(self) -> bool:
        return self.kind is AttackKind.NONE

    @property
    def name(self) -> str:
        if self.kind is AttackKind.INTERCEPT_RESEND:
            parts = [self.kind.value, self.basis_policy.value, self.resend_policy.value]
            if self.resend_policy is ResendPolicy.X_REMAP:
                parts.pop()
                if self.basis_policy is BasisPolicy.RANDOM_ZX:
                    parts.pop()
            return ":".join(parts)
        if self.kind is AttackKind.COLLECTIVE_CNOT and self.control_basis is MeasurementBasis.Z:
            return "cnot:z"
        return self.kind.value

    def __str__(self) -> str:
        return self.name


def parse_strategy(text: str) -> EveStrategy:
    """
    Parse an attack name such as `none`, `intercept-resend:x`, `cnot:z` or `bell`.

    Raises:
        ConfigError: unknown attack or option
    """
    parts = [p.strip().lower() for p in text.split(":")]
    try:
        kind = AttackKind(parts[0])
        options = parts[1:]
        if kind is AttackKind.INTERCEPT_RESEND and len(options) <= 2:
            basis = BasisPolicy(options[0]) if options else BasisPolicy.RANDOM_ZX
            resend = ResendPolicy(options[1]) if len(options) > 1 else ResendPolicy.X_REMAP
            return EveStrategy.intercept_resend(basis, resend)
        if kind is AttackKind.COLLECTIVE_CNOT and len(options) <= 1:
            control = MeasurementBasis(options[0].upper()) if options else MeasurementBasis.X
            return EveStrategy.collective_cnot(control)
        if not options:
            return EveStrategy(kind)
    except ValueError:
        pass
    raise ConfigError(f"unknown attack '{text}'")


@dataclass
class EveRoundRecord:
    round_index: int
    strategy: str
    bases: List[str] = field(default_factory=list)
    outcomes: List[str] = field(default_factory=list)
    ancillas: List[str] = field(default_factory=list)
    guess: Optional[int] = None

    def summary(self) -> str:
        if not self.bases and not self.ancillas:
            return ""
        parts = [f"{b}={o}" for b, o in zip(self.bases, self.outcomes)]
        parts += [f"ancilla {a}" for a in self.ancillas]
        return " ".join(parts)


class EveRecord:
    """Everything Eve did and learned during one run."""

    def __init__(self, strategy: EveStrategy):
        self.strategy = strategy
        self.rounds: Dict[int, EveRoundRecord] = {}
        self.current: Optional[EveRoundRecord] = None

    def begin_round(self, round_index: int) -> EveRoundRecord:
        self.current = EveRoundRecord(round_index, self.strategy.name)
        self.rounds[round_index] = self.current
        return self.current

    def _entry(self) -> EveRoundRecord:
        if self.current is None:
            return self.begin_round(len(self.rounds))
        return self.current

    def note_measurement(self, basis: str, outcome: str) -> None:
        entry = self._entry()
        entry.bases.append(basis)
        entry.outcomes.append(outcome)

    def note_ancilla(self, label: str) -> None:
        self._entry().ancillas.append(label)

    def set_guess(self, round_index: int, guess: Optional[int]) -> None:
        if round_index in self.rounds:
            self.rounds[round_index].guess = guess

    def guess(self, round_index: int) -> Optional[int]:
        entry = self.rounds.get(round_index)
        return None if entry is None else entry.guess

    def summary(self, round_index: int) -> str:
        entry = self.rounds.get(round_index)
        return "" if entry is None else entry.summary()


def fresh_ancilla_label(reg: Register, base: str = "E") -> str:
    """First label E, E2, E3, ... not already in the register."""
    label, n = base, 1
    while label in reg.labels or label in PARTY_LABELS:
        n += 1
        label = f"{base}{n}"
    return label


def intercept_basis_weights(policy: BasisPolicy) -> Dict[MeasurementBasis, float]:
    if policy is BasisPolicy.ALWAYS_Z:
        return {MeasurementBasis.Z: 1.0}
    if policy is BasisPolicy.ALWAYS_X:
        return {MeasurementBasis.X: 1.0}
    return {MeasurementBasis.Z: 0.5, MeasurementBasis.X: 0.5}


def resend(reg: Register, q: str, basis: MeasurementBasis, policy: ResendPolicy) -> Register:
    """
    The state Eve forwards after measuring q. Under the remap policy a Z
    result is re-encoded in X (|0> -> |+>, |1> -> |->), which is exactly a
    Hadamard on the collapsed qubit.
    """
    if policy is ResendPolicy.X_REMAP and basis is MeasurementBasis.Z:
        return apply_hadamard(reg, q)
    return reg


def bell_guess(outcome: BellOutcome) -> int:
    """Eve's key-bit guess from a Bell outcome."""
    return 0 if outcome in (BellOutcome.PHI_PLUS, BellOutcome.PSI_PLUS) else 1


def eve_intercept_resend(reg: Register, q: str, policy: EveStrategy, rng: Prng,
                         rec: EveRecord) -> Register:
    """
    Measure q in the policy's basis and forward the resend state.

    Raises:
        UnknownLabelError: q is not in the register
    """
    reg.index(q)
    weights = intercept_basis_weights(policy.basis_policy)
    bases = list(weights)
    basis = bases[rng.choice_index(list(weights.values()))] if len(bases) > 1 else bases[0]
    bit, reg = measure(reg, q, basis, rng)
    rec.note_measurement(basis.value, str(bit))
    rec.current.guess = bit
    return resend(reg, q, basis, policy.resend_policy)


def eve_collective_cnot(reg: Register, q: str, control_basis: MeasurementBasis,
                        rec: EveRecord) -> Register:
    """Entangle a fresh |0> ancilla with q through a CNOT controlled by q."""
    reg.index(q)
    ancilla = fresh_ancilla_label(reg)
    reg = adjoin_qubit(reg, ancilla, "0")
    rec.note_ancilla(ancilla)
    return apply_cnot(reg, q, ancilla, control_basis)


def eve_bell_intercept(reg: Register, q_b: str, q_c: str, rng: Prng, rec: EveRecord) -> Register:
    """Bell-measure the pair in transit and forward the collapsed pair."""
    outcome, reg = measure_bell(reg, q_b, q_c, rng)
    rec.note_measurement("Bell", outcome.value)
    rec.current.guess = bell_guess(outcome)
    return reg


def guess_from_ancilla(reg: Register, hadamard_declared: bool, rng: Prng) -> Tuple[Optional[int], Register]:
    """
    Eve's post-announcement read-out of her ancilla: Z when no Hadamard
    round was declared, X otherwise.
    """
    ancillas = [label for label in reg.labels if label not in PARTY_LABELS]
    if not ancillas:
        return None, reg
    basis = MeasurementBasis.X if hadamard_declared else MeasurementBasis.Z
    return measure(reg, ancillas[0], basis, rng)


class Eavesdropper:
    """Channel hook applying one strategy to every qubit it sees."""

    def __init__(self, strategy: EveStrategy, rng: Prng):
        self.strategy = strategy
        self.rng = rng
        self.record = EveRecord(strategy)

    def begin_round(self, round_index: int) -> None:
        self.record.begin_round(round_index)

    def intercept(self, reg: Register, labels: Sequence[str]) -> Register:
        kind = self.strategy.kind
        if kind is AttackKind.NONE:
            return reg
        if kind is AttackKind.BELL_INTERCEPT:
            if len(labels) != 2:
                raise ConfigError("a Bell-measurement attack needs two qubits in transit")
            return eve_bell_intercept(reg, labels[0], labels[1], self.rng, self.record)
        for label in labels:
            if kind is AttackKind.INTERCEPT_RESEND:
                reg = eve_intercept_resend(reg, label, self.strategy, self.rng, self.record)
            else:
                reg = eve_collective_cnot(reg, label, self.strategy.control_basis, self.record)
        return reg

    def read_ancilla(self, round_index: int, reg: Register, hadamard_declared: bool) -> Register:
        """Measure the ancilla once the announcements are public and store the guess."""
        if self.strategy.kind is not AttackKind.COLLECTIVE_CNOT:
            return reg
        guess, reg = guess_from_ancilla(reg, hadamard_declared, self.rng)
        self.record.set_guess(round_index, guess)
        if guess is not None:
            basis = "X" if hadamard_declared else "Z"
            self.record.rounds[round_index].bases.append(f"ancilla-{basis}")
            self.record.rounds[round_index].outcomes.append(str(guess))
        return reg


@dataclass
class AttackDemoReport:
    """Outcome of a Bell-measurement attack demonstration."""
    scheme: str
    rounds: int
    outcome_frequencies: Dict[str, float]
    guess_accuracy: float
    detection_events: int

    @property
    def detection_rate(self) -> float:
        return self.detection_events / self.rounds

    def to_dict(self) -> Dict:
        return {
            "scheme": self.scheme,
            "rounds": self.rounds,
            "outcome_frequencies": dict(self.outcome_frequencies),
            "guess_accuracy": self.guess_accuracy,
            "detection_events": self.detection_events,
            "detection_rate": self.detection_rate,
        }


def _frequencies(counts: Dict[BellOutcome, int], rounds: int) -> Dict[str, float]:
    return {outcome.value: counts[outcome] / rounds for outcome in BELL_ORDER}


def han_attack_demo(rounds: int, rng: Prng) -> AttackDemoReport:
    """
    Bell attack on the corrected Han state.

    Eve Bell-measures particles 2 and 3 and guesses Alice's bit (PhiPlus -> 0,
    PsiMinus -> 1). She then forwards the whole collapsed pair: particle 2
    goes to Bob and particle 3 to Carol, rather than one resent particle to
    Carol alone. Alice reads particle 1 in Z. Bob and Carol each measure
    their particle of the forwarded pair in a common random basis, and a
    round whose parity differs from Alice's bit is a detection event.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be at least 1, got {rounds}")
    eve_rng, alice_rng, check_rng = rng.split(3)
    counts = {outcome: 0 for outcome in BELL_ORDER}
    correct = detections = 0
    han = named_state(NamedState.HAN_ABC)
    for _ in range(rounds):
        outcome, reg = measure_bell(han, "2", "3", eve_rng)
        counts[outcome] += 1
        a, reg = measure(reg, "1", MeasurementBasis.Z, alice_rng)
        correct += int(bell_guess(outcome) == a)
        basis = MeasurementBasis.X if check_rng.bit() else MeasurementBasis.Z
        b, reg = measure(reg, "2", basis, check_rng)
        c, reg = measure(reg, "3", basis, check_rng)
        detections += int((b ^ c) != a)
    report = AttackDemoReport("han", rounds, _frequencies(counts, rounds), correct / rounds, detections)
    logger.info(f"Han attack demo: {rounds} rounds, accuracy {report.guess_accuracy:.4f}, "
                f"{detections} detection events")
    return report


def controlled_bell_attack_demo(rounds: int, rng: Prng, epsilon: float = 0.5) -> AttackDemoReport:
    """
    The same Bell attack against the |Psi1>/|Psi2> states: every round is
    treated as a check round, so a broken correlation is a detection event.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be at least 1, got {rounds}")
    prep_rng, eve_rng, alice_rng, party_rng = rng.split(4)
    counts = {outcome: 0 for outcome in BELL_ORDER}
    correct = detections = 0
    for _ in range(rounds):
        which = NamedState.PSI2 if prep_rng.bit() else NamedState.PSI1
        tag = 1 if which is NamedState.PSI2 else 0
        outcome, reg = measure_bell(named_state(which), "B", "C", eve_rng)
        counts[outcome] += 1
        alice_basis = MeasurementBasis.Z if alice_rng.bernoulli(epsilon) else MeasurementBasis.X
        a, reg = measure(reg, "A", alice_basis, alice_rng)
        correct += int(bell_guess(outcome) == a)
        bob_basis, charlie_basis = psi_schedule(alice_basis)
        b, reg = measure(reg, "B", bob_basis, party_rng)
        c, reg = measure(reg, "C", charlie_basis, party_rng)
        detections += int(not psi_correlation_holds(tag, alice_basis, a, b, c))
    report = AttackDemoReport("controlled", rounds, _frequencies(counts, rounds),
                              correct / rounds, detections)
    logger.info(f"Controlled-state attack demo: {rounds} rounds, accuracy "
                f"{report.guess_accuracy:.4f}, {detections} detection events")
    return report
