"""Exact per-round figures by branch enumeration.

Nothing here samples. One round of a protocol is expanded into every
discrete branch: preparation, Eve's choices and outcomes, channel Paulis,
Hadamard and basis choices. Each branch carries its exact probability, and
the final measurements come from `distribution`. The session runners share
no code path with this module beyond the state-vector primitives, so
agreement between the two is a meaningful check.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from qkd_simulator.adversary import (
    AttackKind,
    EveStrategy,
    fresh_ancilla_label,
    intercept_basis_weights,
    resend,
)
from qkd_simulator.analysis import mutual_information
from qkd_simulator.channels import PAULI_LABELS
from qkd_simulator.config import Protocol
from qkd_simulator.exceptions import UnsupportedCombinationError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import (
    BELL_ORDER,
    MeasurementBasis,
    Register,
    adjoin_qubit,
    apply_cnot,
    apply_hadamard,
    apply_pauli,
    distribution,
    project,
    project_bell,
)
from qkd_simulator.states import (
    PSI_TAGS,
    NamedState,
    named_state,
    psi_correlation_holds,
    psi_schedule,
)

logger = get_logger("oracle")

SUPPORTED = {
    Protocol.P1: {AttackKind.NONE, AttackKind.INTERCEPT_RESEND, AttackKind.COLLECTIVE_CNOT},
    Protocol.P2: {AttackKind.NONE, AttackKind.INTERCEPT_RESEND, AttackKind.COLLECTIVE_CNOT},
    Protocol.P3_CONTROLLED: {AttackKind.NONE, AttackKind.BELL_INTERCEPT},
    Protocol.P3_THREE_PARTY: {AttackKind.NONE, AttackKind.BELL_INTERCEPT},
}

Branch = Tuple[float, Register, str]


@dataclass
class OracleResult:
    """
    Exact QBER of one round.

    `cells` holds the QBER conditioned on each `preparation/eve-choice`
    cell and `cell_weights` their probabilities. `subsets` splits the QBER
    by Alice's basis for the controlled-state protocols.
    """
    protocol: str
    attack: str
    overall: float
    cells: Dict[str, float] = field(default_factory=dict)
    cell_weights: Dict[str, float] = field(default_factory=dict)
    subsets: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "protocol": self.protocol,
            "attack": self.attack,
            "overall": self.overall,
            "cells": dict(self.cells),
            "cell_weights": dict(self.cell_weights),
            "subsets": dict(self.subsets),
        }


class _Tally:
    def __init__(self):
        self.weight: Dict[str, float] = {}
        self.error: Dict[str, float] = {}

    def add(self, key: str, weight: float, error_probability: float) -> None:
        self.weight[key] = self.weight.get(key, 0.0) + weight
        self.error[key] = self.error.get(key, 0.0) + weight * error_probability

    def conditional(self) -> Dict[str, float]:
        return {k: self.error[k] / w for k, w in self.weight.items() if w > 0}

    def total_error(self) -> float:
        return sum(self.error.values())


def is_supported(protocol: Protocol, attack: EveStrategy) -> bool:
    return attack.kind in SUPPORTED.get(protocol, set())


def eve_branches(reg: Register, labels: Sequence[str], attack: EveStrategy) -> Iterator[Branch]:
    """Every outcome of Eve's action on the qubits in transit."""
    kind = attack.kind
    if kind is AttackKind.NONE:
        yield 1.0, reg, "none"
    elif kind is AttackKind.INTERCEPT_RESEND:
        (q,) = labels
        for basis, weight in intercept_basis_weights(attack.basis_policy).items():
            for bit in (0, 1):
                prob, post = project(reg, q, basis, bit)
                if post is not None:
                    yield weight * prob, resend(post, q, basis, attack.resend_policy), basis.value
    elif kind is AttackKind.COLLECTIVE_CNOT:
        (q,) = labels
        ancilla = fresh_ancilla_label(reg)
        yield 1.0, apply_cnot(adjoin_qubit(reg, ancilla), q, ancilla, attack.control_basis), "cnot"
    else:
        q_b, q_c = labels
        for outcome in BELL_ORDER:
            prob, post = project_bell(reg, q_b, q_c, outcome)
            if post is not None:
                yield prob, post, outcome.value


def noise_branches(reg: Register, labels: Sequence[str], p: float) -> Iterator[Tuple[float, Register]]:
    """Identity with probability 1-p, each Pauli with p/3, independently per qubit."""
    if p == 0.0 or not labels:
        yield 1.0, reg
        return
    head, rest = labels[0], labels[1:]
    for weight, branch in noise_branches(reg, rest, p):
        if p < 1.0:
            yield (1.0 - p) * weight, branch
        for pauli in PAULI_LABELS:
            yield p / 3.0 * weight, apply_pauli(branch, head, pauli)


def _disagreement(dist: Dict[str, float]) -> float:
    return dist.get("01", 0.0) + dist.get("10", 0.0)


def _epr_oracle(protocol: Protocol, attack: EveStrategy, options: Dict) -> _Tally:
    noise_p = options.get("noise_p", 0.0)
    tally = _Tally()
    if protocol is Protocol.P1:
        final = options.get("final_basis", MeasurementBasis.Z)
        hf = options.get("hadamard_fraction", 0.5)
        # (tag, preparation weight, Hadamard probability)
        preparations = [("phi+", NamedState.PHI_PLUS_AB, 1.0, hf)]
        schedule = [("A", final), ("B", final)]
    else:
        preparations = [("phi+", NamedState.PHI_PLUS_AB, 0.5, 0.0),
                        ("phi-", NamedState.PHI_MINUS_AB, 0.5, 1.0)]
        schedule = [("A", MeasurementBasis.X), ("B", MeasurementBasis.X)]

    for tag, which, prep_weight, hadamard_probability in preparations:
        for eve_weight, eve_reg, eve_cell in eve_branches(named_state(which), ["B"], attack):
            for noise_weight, reg in noise_branches(eve_reg, ["B"], noise_p):
                for hadamard, h_weight in ((True, hadamard_probability), (False, 1.0 - hadamard_probability)):
                    if h_weight == 0.0:
                        continue
                    final_reg = apply_hadamard(apply_hadamard(reg, "A"), "B") if hadamard else reg
                    error = _disagreement(distribution(final_reg, schedule))
                    tally.add(f"{tag}/{eve_cell}", prep_weight * eve_weight * noise_weight * h_weight, error)
    return tally


def _controlled_oracle(attack: EveStrategy, options: Dict) -> Tuple[_Tally, _Tally]:
    noise_p = options.get("noise_p", 0.0)
    epsilon = options.get("epsilon", 0.5)
    cells, subsets = _Tally(), _Tally()
    for which, tag in PSI_TAGS.items():
        for eve_weight, eve_reg, eve_cell in eve_branches(named_state(which), ["B", "C"], attack):
            for noise_weight, reg in noise_branches(eve_reg, ["B", "C"], noise_p):
                for alice_basis, b_weight in ((MeasurementBasis.Z, epsilon),
                                              (MeasurementBasis.X, 1.0 - epsilon)):
                    if b_weight == 0.0:
                        continue
                    bob_basis, charlie_basis = psi_schedule(alice_basis)
                    dist = distribution(reg, [("A", alice_basis), ("B", bob_basis), ("C", charlie_basis)])
                    error = sum(p for bits, p in dist.items()
                                if not psi_correlation_holds(tag, alice_basis, *(int(x) for x in bits)))
                    weight = 0.5 * eve_weight * noise_weight * b_weight
                    cells.add(f"{which.value}/{eve_cell}", weight, error)
                    subsets.add(alice_basis.value, weight, error)
    return cells, subsets


def exact_qber_oracle(protocol: Protocol, attack: EveStrategy,
                      options: Optional[Dict] = None) -> OracleResult:
    """
    Exact QBER of one round, overall and per cell.

    Args:
        protocol: protocol to model
        attack: eavesdropper strategy
        options: noise_p, hadamard_fraction and final_basis (Protocol 1),
            epsilon (Protocol 3)

    Raises:
        UnsupportedCombinationError: no model for this protocol/attack pair
    """
    options = options or {}
    if not is_supported(protocol, attack):
        raise UnsupportedCombinationError(
            f"no exact model for protocol {protocol.value} under attack {attack.name}")
    if protocol.is_controlled_family:
        tally, subset_tally = _controlled_oracle(attack, options)
        subsets = subset_tally.conditional()
    else:
        tally = _epr_oracle(protocol, attack, options)
        subsets = {}
    result = OracleResult(protocol.value, attack.name, tally.total_error(),
                          tally.conditional(), dict(tally.weight), subsets)
    logger.debug(f"Oracle {protocol.value}/{attack.name}: overall {result.overall:.6f}")
    return result


def controlled_key_mutual_information() -> float:
    """
    I(preparation, Alice's published X result ; controlled key bit) in bits,
    from the exact joint distribution of an unattacked Alice-X round.
    """
    joint: Dict[Tuple[Tuple[int, int], int], float] = {}
    schedule = [("A", MeasurementBasis.X), ("B", MeasurementBasis.Z), ("C", MeasurementBasis.X)]
    for which, tag in PSI_TAGS.items():
        for bits, p in distribution(named_state(which), schedule).items():
            a, b = int(bits[0]), int(bits[1])
            key = ((tag, a), b)
            joint[key] = joint.get(key, 0.0) + 0.5 * p
    return mutual_information(joint)


def bell_attack_conditionals(scheme: str = "controlled",
                             alice_basis: MeasurementBasis = MeasurementBasis.X) -> Dict[str, Dict[str, float]]:
    """
    P(Alice's outcome | Eve's Bell outcome) for a Bell measurement on the
    pair in transit.

    `scheme` is "controlled" (preparation uniform over |Psi1>, |Psi2>,
    Alice reads A in `alice_basis`) or "han" (Alice reads particle 1 in Z).
    Bell outcomes that cannot occur are left out.
    """
    if scheme == "han":
        sources: List[Tuple[float, Register, str, str, MeasurementBasis]] = [
            (1.0, named_state(NamedState.HAN_ABC), "2", "3", MeasurementBasis.Z)]
        alice = "1"
    elif scheme == "controlled":
        sources = [(0.5, named_state(which), "B", "C", alice_basis) for which in PSI_TAGS]
        alice = "A"
    else:
        raise UnsupportedCombinationError(f"unknown scheme '{scheme}'")

    joint: Dict[str, Dict[str, float]] = {}
    for weight, reg, q1, q2, basis in sources:
        for outcome in BELL_ORDER:
            prob, post = project_bell(reg, q1, q2, outcome)
            if post is None:
                continue
            row = joint.setdefault(outcome.value, {"0": 0.0, "1": 0.0})
            for bit, p in distribution(post, [(alice, basis)]).items():
                row[bit] += weight * prob * p
    return {outcome: {bit: p / sum(row.values()) for bit, p in row.items()}
            for outcome, row in joint.items()}
