"""Session state machines for the three entanglement-based protocols.

Each session owns one root Prng split into four child streams (parties,
adversary, channel noise, postprocessing), its counters, its public message
log and its round traces. A run is strictly sequential.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from qkd_simulator.adversary import AttackKind, Eavesdropper
from qkd_simulator.channels import (
    ClassicalMessage,
    MessageLog,
    PayloadKind,
    TrafficCounters,
    broadcast_classical,
    transmit_qubit,
    transmit_qubits,
)
from qkd_simulator.config import Protocol, SessionConfig
from qkd_simulator.exceptions import ConfigMismatchError, EmptySampleError, MissingAnnouncementError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.postprocess import (
    CorrectionResult,
    ToeplitzSeed,
    disclosed_parities,
    error_correct,
    final_key_length,
    toeplitz_hash,
)
from qkd_simulator.quantum_core import MeasurementBasis, Prng, Register, apply_hadamard, measure
from qkd_simulator.states import PSI_TAGS, NamedState, named_state, psi_correlation_holds, psi_schedule

logger = get_logger("protocols")

TRACE_COLUMNS = ["round", "state_tag", "alice_basis", "bob_basis", "charlie_basis",
                 "a_bit", "b_bit", "c_bit", "hadamard_flags", "check", "error"]

STATE_TAGS = {
    NamedState.PHI_PLUS_AB: "phi+",
    NamedState.PHI_MINUS_AB: "phi-",
    NamedState.PSI1: "Psi1",
    NamedState.PSI2: "Psi2",
}


class RunStatus(Enum):
    COMPLETED = "Completed"
    ABORTED = "Aborted"


class KeyMode(Enum):
    CONTROLLED = "controlled"
    THREE_PARTY = "three-party"


@dataclass
class RoundTrace:
    """What happened in one round; check rounds never contribute key."""
    round_index: int
    state_tag: str
    alice_basis: Optional[str] = None
    bob_basis: Optional[str] = None
    charlie_basis: Optional[str] = None
    a_bit: Optional[int] = None
    b_bit: Optional[int] = None
    c_bit: Optional[int] = None
    hadamard_flags: str = ""
    eve_actions: str = ""
    batch: int = 0
    sifted: bool = False
    check: bool = False
    error: bool = False

    def to_row(self) -> Dict:
        return {
            "round": self.round_index,
            "state_tag": self.state_tag,
            "alice_basis": self.alice_basis or "",
            "bob_basis": self.bob_basis or "",
            "charlie_basis": self.charlie_basis or "",
            "a_bit": "" if self.a_bit is None else self.a_bit,
            "b_bit": "" if self.b_bit is None else self.b_bit,
            "c_bit": "" if self.c_bit is None else self.c_bit,
            "hadamard_flags": self.hadamard_flags,
            "check": int(self.check),
            "error": int(self.error),
        }


@dataclass
class CheckDecision:
    sample_size: int
    disagreements: int
    qber: float
    proceed: bool


@dataclass
class RunResult:
    """
    Everything a run produced.

    Completed runs carry final keys of equal length for every party;
    aborted runs carry empty final keys and a qber_estimate above the
    threshold. `reference_party` names the party whose key the others are
    reconciled to.
    """
    config: SessionConfig
    status: RunStatus
    qber_estimate: float
    sifted_keys: Dict[str, List[int]]
    final_keys: Dict[str, List[int]]
    counters: TrafficCounters
    traces: List[RoundTrace]
    checks: List[CheckDecision]
    log: MessageLog
    reference_party: str
    subset_qbers: Dict[str, float] = field(default_factory=dict)
    basis_yield: Dict[str, float] = field(default_factory=dict)
    eve_guess_accuracy: Optional[float] = None
    corrections: Dict[str, CorrectionResult] = field(default_factory=dict)
    toeplitz_seed: Optional[ToeplitzSeed] = None
    key_withheld: bool = False

    @property
    def aborted(self) -> bool:
        return self.status is RunStatus.ABORTED

    @property
    def sifted_length(self) -> int:
        return len(self.sifted_keys.get(self.reference_party, []))

    @property
    def final_key(self) -> List[int]:
        return self.final_keys.get(self.reference_party, [])

    @property
    def leaked(self) -> int:
        return disclosed_parities(self.corrections.values())

    @property
    def check_sample(self) -> int:
        return sum(c.sample_size for c in self.checks)

    @property
    def check_disagreements(self) -> int:
        return sum(c.disagreements for c in self.checks)


def check_eavesdropping(sample_pairs: Sequence[Tuple[int, int]], threshold: float) -> CheckDecision:
    """
    Compare published check outcomes pair by pair.

    Raises:
        EmptySampleError: no pairs to compare
    """
    if not sample_pairs:
        raise EmptySampleError("the eavesdropping check needs at least one sample pair")
    disagreements = sum(1 for x, y in sample_pairs if x != y)
    qber = disagreements / len(sample_pairs)
    return CheckDecision(len(sample_pairs), disagreements, qber, qber <= threshold)


class ProtocolSession:
    """Shared plumbing of the three session types."""

    protocols: Tuple[Protocol, ...] = ()
    reference_party = "alice"

    def __init__(self, cfg: SessionConfig):
        if cfg.protocol not in self.protocols:
            raise ConfigMismatchError(
                f"{type(self).__name__} runs {[p.value for p in self.protocols]}, got {cfg.protocol.value}")
        self.cfg = cfg.validate()
        self._check_attack()
        self.parties_rng, eve_rng, self.noise_rng, self.post_rng = Prng(cfg.seed).split(4)
        self.eve = None if cfg.attack.is_none else Eavesdropper(cfg.attack, eve_rng)
        self.counters = TrafficCounters()
        self.log = MessageLog()
        self.traces: List[RoundTrace] = []
        self.checks: List[CheckDecision] = []

    def _check_attack(self) -> None:
        if self.cfg.attack.kind is AttackKind.BELL_INTERCEPT:
            raise ConfigMismatchError(f"{self.cfg.attack.name} needs two qubits in transit per round")

    def broadcast(self, sender: str, kind: PayloadKind, bits: Sequence[int] = (),
                  rounds: Sequence[int] = ()) -> ClassicalMessage:
        msg = ClassicalMessage(sender, kind, tuple(bits), tuple(rounds))
        broadcast_classical(msg, self.counters, self.log)
        return msg

    def begin_round(self, round_index: int) -> None:
        if self.eve is not None:
            self.eve.begin_round(round_index)

    def eve_summary(self, round_index: int) -> str:
        return "" if self.eve is None else self.eve.record.summary(round_index)

    def decide(self, pairs: Sequence[Tuple[int, int]]) -> CheckDecision:
        decision = check_eavesdropping(pairs, self.cfg.abort_threshold)
        self.checks.append(decision)
        self.broadcast("alice", PayloadKind.ABORT_DECISION, [0 if decision.proceed else 1])
        logger.info(f"{self.cfg.protocol.value} check: {decision.disagreements}/{decision.sample_size} "
                    f"disagree (qber {decision.qber:.4f}) -> {'proceed' if decision.proceed else 'abort'}")
        return decision

    def eve_guess_accuracy(self, reference: Dict[int, int]) -> Optional[float]:
        """Share of rounds where Eve's guess equals the reference bit."""
        if self.eve is None:
            return None
        hits = total = 0
        for round_index, bit in reference.items():
            guess = self.eve.record.guess(round_index)
            if guess is None:
                continue
            total += 1
            hits += int(guess == bit)
        if total == 0:
            return None
        accuracy = hits / total
        if self.cfg.attack.kind is AttackKind.COLLECTIVE_CNOT:
            # the identity and inverted read-out rules are both fixed strategies
            accuracy = max(accuracy, 1.0 - accuracy)
        return accuracy

    def distill(self, sifted: Dict[str, List[int]], qber: float) -> Tuple[Dict[str, List[int]],
                                                                           Dict[str, CorrectionResult],
                                                                           Optional[ToeplitzSeed]]:
        """Reconcile every party to the reference party, then hash with one shared seed."""
        reference = sifted[self.reference_party]
        n = len(reference)
        empty = {party: [] for party in sifted}
        if n < self.cfg.ec_block:
            logger.info(f"Sifted key of {n} bits is shorter than one correction block; no final key")
            return empty, {}, None

        corrected = {self.reference_party: list(reference)}
        corrections: Dict[str, CorrectionResult] = {}
        # every party works through the same public shuffles
        shuffles = self.post_rng.split(1)[0]
        for party, key in sifted.items():
            if party == self.reference_party:
                continue
            result = error_correct(reference, key, self.cfg.ec_block, self.cfg.ec_passes, shuffles.replay())
            corrections[party] = result
            corrected[party] = result.key_b
        leaked = disclosed_parities(corrections.values())

        m = final_key_length(n, leaked, qber, self.cfg.security_param)
        if m == 0:
            logger.info(f"Privacy amplification leaves no key (n={n}, leaked={leaked}, qber={qber:.4f})")
            return empty, corrections, None
        seed = ToeplitzSeed.draw(n, m, self.post_rng)
        final = {party: toeplitz_hash(corrected[party], seed) for party in sifted}
        logger.info(f"Distilled {m} final bits from {n} sifted bits ({leaked} parity bits disclosed)")
        return final, corrections, seed

    def finish(self, status: RunStatus, qber: float, sifted: Dict[str, List[int]],
               reference_bits: Dict[int, int], **extra) -> RunResult:
        final: Dict[str, List[int]] = {party: [] for party in sifted}
        corrections: Dict[str, CorrectionResult] = {}
        seed = None
        if status is RunStatus.COMPLETED and not extra.get("key_withheld", False):
            final, corrections, seed = self.distill(sifted, qber)
        self.counters.b_s = len(final.get(self.reference_party, []))
        result = RunResult(
            config=self.cfg, status=status, qber_estimate=qber, sifted_keys=sifted,
            final_keys=final, counters=self.counters, traces=self.traces, checks=self.checks,
            log=self.log, reference_party=self.reference_party,
            eve_guess_accuracy=self.eve_guess_accuracy(reference_bits),
            corrections=corrections, toeplitz_seed=seed, **extra)
        if result.aborted:
            logger.warning(f"{self.cfg.protocol.value} run aborted: qber {qber:.4f} "
                           f"> threshold {self.cfg.abort_threshold}")
        logger.info(f"{self.cfg.protocol.value} run {status.value}: sifted {result.sifted_length}, "
                    f"final {len(result.final_key)} bits")
        return result


class BlockTransmissionSession(ProtocolSession):
    """
    Protocol 1: every pair is |phi+>, all B qubits travel before anything is
    announced, Bob flags a random subset for Hadamards on both sides, and
    both measure the whole sequence in one session-wide basis.
    """

    protocols = (Protocol.P1,)

    def run(self) -> RunResult:
        cfg, rng = self.cfg, self.parties_rng
        n = cfg.rounds
        logger.info(f"Protocol 1 session: {n} pairs, seed {cfg.seed}, attack {cfg.attack.name}")

        # quantum memory: the whole block is held until the positions are announced
        memory: List[Register] = []
        for i in range(n):
            self.begin_round(i)
            memory.append(transmit_qubit(named_state(NamedState.PHI_PLUS_AB), "B", self.eve,
                                         cfg.noise, self.counters, self.noise_rng))

        flagged = set(rng.sample_positions(n, int(round(cfg.hadamard_fraction * n))))
        self.broadcast("bob", PayloadKind.POSITION_LIST, [int(i in flagged) for i in range(n)])

        a_bits: List[int] = []
        b_bits: List[int] = []
        for i, reg in enumerate(memory):
            if i in flagged:
                reg = apply_hadamard(apply_hadamard(reg, "B"), "A")
            a, reg = measure(reg, "A", cfg.final_basis, rng)
            b, reg = measure(reg, "B", cfg.final_basis, rng)
            if self.eve is not None:
                reg = self.eve.read_ancilla(i, reg, i in flagged)
            a_bits.append(a)
            b_bits.append(b)
            self.traces.append(RoundTrace(
                i, "phi+", cfg.final_basis.value, cfg.final_basis.value, None, a, b, None,
                "AB" if i in flagged else "", self.eve_summary(i)))
            logger.debug(f"P1 round {i}: a={a} b={b} hadamard={i in flagged}")
        memory.clear()

        checked = rng.sample_positions(n, cfg.check_count())
        self.broadcast("bob", PayloadKind.CHECK_RESULTS, [b_bits[i] for i in checked], checked)
        for i in checked:
            self.traces[i].check = True
            self.traces[i].error = a_bits[i] != b_bits[i]
        decision = self.decide([(a_bits[i], b_bits[i]) for i in checked])

        checked_set = set(checked)
        key_rounds = [i for i in range(n) if i not in checked_set]
        self.counters.q_checked = cfg.protocol.qubits_per_round * len(checked)
        if not decision.proceed:
            return self.finish(RunStatus.ABORTED, decision.qber, {"alice": [], "bob": []},
                               dict(enumerate(a_bits)))

        for i in key_rounds:
            self.traces[i].sifted = True
        self.counters.q_u = cfg.protocol.qubits_per_round * len(key_rounds)
        sifted = {"alice": [a_bits[i] for i in key_rounds], "bob": [b_bits[i] for i in key_rounds]}
        return self.finish(RunStatus.COMPLETED, decision.qber, sifted, dict(enumerate(a_bits)))


class StateAnnouncementSession(ProtocolSession):
    """
    Protocol 2: Alice prepares |phi+> or |phi->, announces which after Bob
    confirms receipt, both apply Hadamards for |phi->, and both measure in X.
    """

    protocols = (Protocol.P2,)

    def run(self) -> RunResult:
        cfg, rng = self.cfg, self.parties_rng
        n = cfg.rounds
        logger.info(f"Protocol 2 session: {n} rounds, seed {cfg.seed}, attack {cfg.attack.name}")

        a_bits: List[int] = []
        b_bits: List[int] = []
        for i in range(n):
            self.begin_round(i)
            which = NamedState.PHI_MINUS_AB if rng.bit() else NamedState.PHI_PLUS_AB
            reg = transmit_qubit(named_state(which), "B", self.eve, cfg.noise, self.counters, self.noise_rng)
            # Bob's receipt acknowledgement carries no bits
            hadamard = which is NamedState.PHI_MINUS_AB
            self.broadcast("alice", PayloadKind.INITIAL_STATE_INFO, [int(hadamard)], [i])
            if hadamard:
                reg = apply_hadamard(apply_hadamard(reg, "A"), "B")
            a, reg = measure(reg, "A", MeasurementBasis.X, rng)
            b, reg = measure(reg, "B", MeasurementBasis.X, rng)
            if self.eve is not None:
                reg = self.eve.read_ancilla(i, reg, hadamard)
            a_bits.append(a)
            b_bits.append(b)
            self.traces.append(RoundTrace(i, STATE_TAGS[which], "X", "X", None, a, b, None,
                                          "AB" if hadamard else "", self.eve_summary(i)))
            logger.debug(f"P2 round {i}: {STATE_TAGS[which]} a={a} b={b}")

        checked = rng.sample_positions(n, cfg.check_count())
        self.broadcast("bob", PayloadKind.CHECK_RESULTS, [b_bits[i] for i in checked], checked)
        for i in checked:
            self.traces[i].check = True
            self.traces[i].error = a_bits[i] != b_bits[i]
        decision = self.decide([(a_bits[i], b_bits[i]) for i in checked])

        checked_set = set(checked)
        key_rounds = [i for i in range(n) if i not in checked_set]
        self.counters.q_checked = cfg.protocol.qubits_per_round * len(checked)
        if not decision.proceed:
            return self.finish(RunStatus.ABORTED, decision.qber, {"alice": [], "bob": []},
                               dict(enumerate(a_bits)))

        for i in key_rounds:
            self.traces[i].sifted = True
        self.counters.q_u = cfg.protocol.qubits_per_round * len(key_rounds)
        sifted = {"alice": [a_bits[i] for i in key_rounds], "bob": [b_bits[i] for i in key_rounds]}
        return self.finish(RunStatus.COMPLETED, decision.qber, sifted, dict(enumerate(a_bits)))


def p3_extract_keys(traces: Sequence[RoundTrace], announcements: Sequence[ClassicalMessage],
                    mode: KeyMode) -> Dict[str, List[int]]:
    """
    Turn unchecked Protocol 3 rounds into key bits.

    Controlled mode keeps Alice-X rounds: Bob's bit is his Z outcome and
    Charlie inverts his X outcome when Alice published |->. Three-party mode
    keeps Alice-Z rounds: Alice and Charlie keep their Z outcomes and Bob
    inverts his X outcome for |Psi2>.

    Raises:
        MissingAnnouncementError: a key round has no published bit
    """
    published: Dict[int, int] = {}
    for msg in announcements:
        published.update(zip(msg.rounds, msg.bits))

    wanted = "X" if mode is KeyMode.CONTROLLED else "Z"
    keys: Dict[str, List[int]] = ({"bob": [], "charlie": []} if mode is KeyMode.CONTROLLED
                                  else {"alice": [], "bob": [], "charlie": []})
    for trace in traces:
        if trace.check or trace.alice_basis != wanted:
            continue
        if trace.round_index not in published:
            raise MissingAnnouncementError(f"no announcement covers key round {trace.round_index}")
        announced = published[trace.round_index]
        if mode is KeyMode.CONTROLLED:
            keys["bob"].append(trace.b_bit)
            keys["charlie"].append(trace.c_bit ^ announced)
        else:
            keys["alice"].append(trace.a_bit)
            keys["charlie"].append(trace.c_bit)
            keys["bob"].append(trace.b_bit ^ announced)
    return keys


class ControlledSession(ProtocolSession):
    """
    Protocol 3 over |Psi1>/|Psi2>, in controlled two-party mode (Bob and
    Charlie share a key only with Alice's published X results) or
    three-party mode (all three share a key).
    """

    protocols = (Protocol.P3_CONTROLLED, Protocol.P3_THREE_PARTY)

    def __init__(self, cfg: SessionConfig):
        super().__init__(cfg)
        self.mode = KeyMode.CONTROLLED if cfg.protocol is Protocol.P3_CONTROLLED else KeyMode.THREE_PARTY
        self.reference_party = "bob" if self.mode is KeyMode.CONTROLLED else "alice"
        self.tags: Dict[int, int] = {}

    def _check_attack(self) -> None:
        if self.cfg.attack.kind not in (AttackKind.NONE, AttackKind.BELL_INTERCEPT):
            raise ConfigMismatchError(f"attack {self.cfg.attack.name} is not modelled for Protocol 3")

    def _round(self, i: int, batch: int) -> RoundTrace:
        cfg, rng = self.cfg, self.parties_rng
        self.begin_round(i)
        which = NamedState.PSI2 if rng.bit() else NamedState.PSI1
        self.tags[i] = PSI_TAGS[which]
        reg = transmit_qubits(named_state(which), ("B", "C"), self.eve, cfg.noise,
                              self.counters, self.noise_rng)
        alice_basis = MeasurementBasis.Z if rng.bernoulli(cfg.epsilon) else MeasurementBasis.X
        a, reg = measure(reg, "A", alice_basis, rng)
        self.broadcast("alice", PayloadKind.BASIS_ANNOUNCEMENT,
                       [int(alice_basis is MeasurementBasis.X)], [i])
        bob_basis, charlie_basis = psi_schedule(alice_basis)
        b, reg = measure(reg, "B", bob_basis, rng)
        c, reg = measure(reg, "C", charlie_basis, rng)
        logger.debug(f"P3 round {i}: {STATE_TAGS[which]} {alice_basis.value} a={a} b={b} c={c}")
        return RoundTrace(i, STATE_TAGS[which], alice_basis.value, bob_basis.value,
                          charlie_basis.value, a, b, c, "", self.eve_summary(i), batch)

    def _check_batch(self, batch_traces: List[RoundTrace]) -> CheckDecision:
        checked = self.parties_rng.sample_positions(len(batch_traces), self.cfg.check_count(len(batch_traces)))
        pairs = []
        for k in checked:
            t = batch_traces[k]
            t.check = True
            t.error = not psi_correlation_holds(self.tags[t.round_index], MeasurementBasis(t.alice_basis),
                                                t.a_bit, t.b_bit, t.c_bit)
            # one pair per round: the correlation witness expected (0) vs observed
            pairs.append((0, int(t.error)))
        rounds = [batch_traces[k].round_index for k in checked]
        for party, bit in (("alice", "a_bit"), ("bob", "b_bit"), ("charlie", "c_bit")):
            self.broadcast(party, PayloadKind.CHECK_RESULTS,
                           [getattr(batch_traces[k], bit) for k in checked], rounds)
        return self.decide(pairs)

    def _subset_qbers(self) -> Dict[str, float]:
        subsets = {}
        for basis in ("Z", "X"):
            checked = [t for t in self.traces if t.check and t.alice_basis == basis]
            if checked:
                subsets[basis] = sum(t.error for t in checked) / len(checked)
        return subsets

    def _basis_yield(self) -> Dict[str, float]:
        total = len(self.traces)
        return {basis: sum(t.alice_basis == basis for t in self.traces) / total for basis in ("Z", "X")}

    def run(self) -> RunResult:
        cfg = self.cfg
        logger.info(f"Protocol 3 session ({self.mode.value}): {cfg.session_batches} x {cfg.rounds} "
                    f"rounds, seed {cfg.seed}, epsilon {cfg.epsilon}, attack {cfg.attack.name}")
        failed: Optional[CheckDecision] = None
        for batch in range(cfg.session_batches):
            start = len(self.traces)
            batch_traces = [self._round(start + k, batch) for k in range(cfg.rounds)]
            self.traces.extend(batch_traces)
            decision = self._check_batch(batch_traces)
            if not decision.proceed:
                failed = decision
                break

        self.counters.q_checked = cfg.protocol.qubits_per_round * sum(t.check for t in self.traces)
        alice_bits = {t.round_index: t.a_bit for t in self.traces}
        extra = {"subset_qbers": self._subset_qbers(), "basis_yield": self._basis_yield()}
        empty = ({"bob": [], "charlie": []} if self.mode is KeyMode.CONTROLLED
                 else {"alice": [], "bob": [], "charlie": []})
        if failed is not None:
            return self.finish(RunStatus.ABORTED, failed.qber, empty, alice_bits, **extra)

        pooled = sum(c.disagreements for c in self.checks) / sum(c.sample_size for c in self.checks)
        key_traces = [t for t in self.traces
                      if not t.check and t.alice_basis == ("X" if self.mode is KeyMode.CONTROLLED else "Z")]
        for t in key_traces:
            t.sifted = True
        self.counters.q_u = cfg.protocol.qubits_per_round * len(key_traces)

        if self.mode is KeyMode.CONTROLLED and not cfg.controller_permits:
            logger.info("Alice withholds her X results; Bob and Charlie keep uncorrected bits")
            sifted = {"bob": [t.b_bit for t in key_traces], "charlie": [t.c_bit for t in key_traces]}
            return self.finish(RunStatus.COMPLETED, pooled, sifted, alice_bits, key_withheld=True, **extra)

        rounds = [t.round_index for t in key_traces]
        if self.mode is KeyMode.CONTROLLED:
            msg = self.broadcast("alice", PayloadKind.X_RESULT_PUBLICATION,
                                 [t.a_bit for t in key_traces], rounds)
        else:
            msg = self.broadcast("alice", PayloadKind.INITIAL_STATE_INFO,
                                 [self.tags[r] for r in rounds], rounds)
        sifted = p3_extract_keys(self.traces, [msg], self.mode)
        return self.finish(RunStatus.COMPLETED, pooled, sifted, alice_bits, **extra)


_SESSIONS = {
    Protocol.P1: BlockTransmissionSession,
    Protocol.P2: StateAnnouncementSession,
    Protocol.P3_CONTROLLED: ControlledSession,
    Protocol.P3_THREE_PARTY: ControlledSession,
}


def run_protocol1(cfg: SessionConfig) -> RunResult:
    """Run Protocol 1; raises ConfigMismatchError for any other protocol."""
    return BlockTransmissionSession(cfg).run()


def run_protocol2(cfg: SessionConfig) -> RunResult:
    """Run Protocol 2; raises ConfigMismatchError for any other protocol."""
    return StateAnnouncementSession(cfg).run()


def run_protocol3(cfg: SessionConfig) -> RunResult:
    """Run Protocol 3 in the mode named by cfg.protocol."""
    return ControlledSession(cfg).run()


def run_session(cfg: SessionConfig) -> RunResult:
    """Dispatch on cfg.protocol."""
    return _SESSIONS[cfg.protocol](cfg).run()
