"""Exact state-vector engine for the few-qubit registers used by the protocols.

Labels are kept in ket order: label 0 is the leftmost, most significant
position, so |ABC> with A=1, B=0, C=0 is amplitude index 0b100.
Measured qubits stay in the register, collapsed onto their eigenstate.
"""
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qkd_simulator.exceptions import (
    DimensionMismatchError,
    DuplicateLabelError,
    LabelMismatchError,
    NotNormalizableError,
    OutOfRangeError,
    SameQubitError,
    UnknownLabelError,
)
from qkd_simulator.logging_config import get_logger

logger = get_logger("quantum_core")

EXACT_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
# Outcome probabilities below this are float residue, not outcomes.
PROBABILITY_FLOOR = 1e-15

_SQRT1_2 = 1.0 / np.sqrt(2.0)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT1_2
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

SINGLE_QUBIT_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) * _SQRT1_2,
    "-": np.array([1, -1], dtype=complex) * _SQRT1_2,
}


class MeasurementBasis(Enum):
    """Single-qubit measurement basis; outcome bit 0 is |0> or |+>."""
    Z = "Z"
    X = "X"

    def eigenvector(self, bit: int) -> np.ndarray:
        if self is MeasurementBasis.Z:
            return SINGLE_QUBIT_KETS["1" if bit else "0"]
        return SINGLE_QUBIT_KETS["-" if bit else "+"]


class BellOutcome(Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


BELL_VECTORS = {
    BellOutcome.PHI_PLUS: np.array([1, 0, 0, 1], dtype=complex) * _SQRT1_2,
    BellOutcome.PHI_MINUS: np.array([1, 0, 0, -1], dtype=complex) * _SQRT1_2,
    BellOutcome.PSI_PLUS: np.array([0, 1, 1, 0], dtype=complex) * _SQRT1_2,
    BellOutcome.PSI_MINUS: np.array([0, 1, -1, 0], dtype=complex) * _SQRT1_2,
}
BELL_ORDER = (BellOutcome.PHI_PLUS, BellOutcome.PHI_MINUS,
              BellOutcome.PSI_PLUS, BellOutcome.PSI_MINUS)

OutcomeDistribution = Dict[str, float]


class Prng:
    """
    Seeded, splittable random stream.

    Draws come from numpy's PCG64 generator (128-bit permuted congruential
    state, 64-bit output) keyed by a SeedSequence built from the seed, so a
    seed reproduces the same stream on every platform numpy supports.
    split() spawns independent child streams from the same SeedSequence.
    `position` counts the values drawn so far.
    """

    def __init__(self, seed: int, _sequence: Optional[np.random.SeedSequence] = None):
        if not 0 <= int(seed) < 2 ** 64:
            raise OutOfRangeError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._sequence = _sequence if _sequence is not None else np.random.SeedSequence(self.seed)
        self._generator = np.random.Generator(np.random.PCG64(self._sequence))
        self.position = 0

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        self.position += 1
        return float(self._generator.random())

    def bit(self) -> int:
        return 1 if self.random() < 0.5 else 0

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def choice_index(self, weights: Sequence[float]) -> int:
        """Pick an index with probability proportional to its weight (one draw)."""
        total = float(sum(weights))
        u = self.random() * total
        cumulative = 0.0
        last_positive = None
        for i, w in enumerate(weights):
            if w <= 0:
                continue
            last_positive = i
            cumulative += w
            if u < cumulative:
                return i
        if last_positive is None:
            raise OutOfRangeError("choice_index needs at least one positive weight")
        return last_positive

    def sample_positions(self, population: int, count: int) -> List[int]:
        """Draw `count` distinct positions from range(population), ascending."""
        if not 0 <= count <= population:
            raise OutOfRangeError(f"cannot draw {count} positions from {population}")
        self.position += count
        drawn = self._generator.choice(population, size=count, replace=False)
        return sorted(int(i) for i in drawn)

    def bits(self, count: int) -> List[int]:
        self.position += count
        return [int(b) for b in self._generator.integers(0, 2, size=count)]

    def permutation(self, count: int) -> List[int]:
        self.position += count
        return [int(i) for i in self._generator.permutation(count)]

    def split(self, count: int) -> List["Prng"]:
        """Spawn `count` child streams; successive calls yield fresh children."""
        return [Prng(self.seed, _sequence=child) for child in self._sequence.spawn(count)]

    def replay(self) -> "Prng":
        """A fresh stream that repeats this one's draws from the start."""
        return Prng(self.seed, _sequence=self._sequence)


class Register:
    """
    Pure state over an ordered tuple of labelled qubits.

    Operations in this module never mutate a register; they return a new one.
    """

    __slots__ = ("labels", "amps")

    def __init__(self, labels: Sequence[str], amps: np.ndarray):
        self.labels = tuple(labels)
        self.amps = amps

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabelError(f"qubit '{label}' not in register {list(self.labels)}") from None

    def tensor(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n_qubits)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def ket_string(self, precision: int = 4) -> str:
        terms = []
        for i, amp in enumerate(self.amps):
            if abs(amp) < 1e-9:
                continue
            bits = format(i, f"0{self.n_qubits}b") if self.n_qubits else ""
            value = amp.real if abs(amp.imag) < 1e-12 else amp
            terms.append(f"{value:+.{precision}f}|{bits}>")
        return " ".join(terms) or "0"

    def __repr__(self) -> str:
        return f"Register({''.join(self.labels)}: {self.ket_string()})"


def _check_labels(labels: Sequence[str]) -> None:
    if len(set(labels)) != len(labels):
        raise DuplicateLabelError(f"labels must be unique, got {list(labels)}")


def make_register(labels: Sequence[str], amps: Iterable[complex]) -> Register:
    """
    Build a register, renormalizing small deviations from unit norm.

    Raises:
        DuplicateLabelError: labels repeat
        DimensionMismatchError: len(amps) != 2 ** len(labels)
        NotNormalizableError: norm is zero, non-finite or off by more than 1e-9
    """
    labels = tuple(labels)
    _check_labels(labels)
    vector = np.asarray(list(amps), dtype=complex)
    if vector.shape != (2 ** len(labels),):
        raise DimensionMismatchError(
            f"{len(labels)} labels need {2 ** len(labels)} amplitudes, got {vector.size}")
    if not np.all(np.isfinite(vector)):
        raise NotNormalizableError("amplitudes must be finite")
    norm_sq = float(np.vdot(vector, vector).real)
    if norm_sq == 0.0 or abs(norm_sq - 1.0) > RENORMALIZE_TOL:
        raise NotNormalizableError(f"squared norm {norm_sq} is not within {RENORMALIZE_TOL} of 1")
    return Register(labels, vector / np.sqrt(norm_sq))


def normalized_register(labels: Sequence[str], amps: Iterable[complex]) -> Register:
    """Build a register from any non-zero vector by dividing out its norm."""
    labels = tuple(labels)
    _check_labels(labels)
    vector = np.asarray(list(amps), dtype=complex)
    if vector.shape != (2 ** len(labels),):
        raise DimensionMismatchError(
            f"{len(labels)} labels need {2 ** len(labels)} amplitudes, got {vector.size}")
    norm_sq = float(np.vdot(vector, vector).real)
    if norm_sq == 0.0 or not np.isfinite(norm_sq):
        raise NotNormalizableError("cannot normalize a zero or non-finite vector")
    return Register(labels, vector / np.sqrt(norm_sq))


def product_amplitudes(symbols: str) -> np.ndarray:
    """Amplitudes of a product ket written with the symbols 0, 1, + and -."""
    vector = np.array([1], dtype=complex)
    for symbol in symbols:
        try:
            vector = np.kron(vector, SINGLE_QUBIT_KETS[symbol])
        except KeyError:
            raise OutOfRangeError(f"unknown ket symbol '{symbol}'") from None
    return vector


def superpose(terms: Iterable[Tuple[complex, str]]) -> np.ndarray:
    """Unnormalized sum of coefficient * product ket, e.g. [(1, '0+0'), (1, '1-1')]."""
    total = None
    for coefficient, symbols in terms:
        term = coefficient * product_amplitudes(symbols)
        total = term if total is None else total + term
    if total is None:
        raise OutOfRangeError("superpose needs at least one term")
    return total


def product_state(labels: Sequence[str], symbols: str) -> Register:
    if len(symbols) != len(labels):
        raise DimensionMismatchError(f"{len(labels)} labels but ket '{symbols}'")
    return make_register(labels, product_amplitudes(symbols))


def tensor_product(first: Register, second: Register) -> Register:
    labels = first.labels + second.labels
    _check_labels(labels)
    return Register(labels, np.kron(first.amps, second.amps))


def adjoin_qubit(reg: Register, label: str, symbol: str = "0") -> Register:
    """Append a fresh qubit in a product state on the right of the ket."""
    return tensor_product(reg, product_state([label], symbol))


def apply_single_qubit(reg: Register, q: str, matrix: np.ndarray) -> Register:
    axis = reg.index(q)
    psi = np.moveaxis(reg.tensor(), axis, 0)
    psi = np.tensordot(matrix, psi, axes=([1], [0]))
    return Register(reg.labels, np.moveaxis(psi, 0, axis).reshape(-1))


def apply_hadamard(reg: Register, q: str) -> Register:
    return apply_single_qubit(reg, q, HADAMARD)


def apply_pauli(reg: Register, q: str, pauli: str) -> Register:
    return apply_single_qubit(reg, q, PAULIS[pauli])


def _apply_z_cnot(reg: Register, control: int, target: int) -> Register:
    psi = reg.tensor()
    out = psi.copy()
    selector = [slice(None)] * reg.n_qubits
    selector[control] = 1
    selector = tuple(selector)
    # the control axis is dropped from the slice, shifting later axes down by one
    target_axis = target if target < control else target - 1
    out[selector] = np.flip(psi[selector], axis=target_axis)
    return Register(reg.labels, out.reshape(-1))


def apply_cnot(reg: Register, control: str, target: str,
               control_basis: MeasurementBasis = MeasurementBasis.Z) -> Register:
    """
    Controlled-NOT. With an X control basis the target flips when the
    control is |->, i.e. H(control) . CNOT . H(control).

    Raises:
        SameQubitError: control == target
        UnknownLabelError: a label is missing
    """
    if control == target:
        raise SameQubitError(f"control and target are both '{control}'")
    c, t = reg.index(control), reg.index(target)
    if control_basis is MeasurementBasis.X:
        reg = apply_hadamard(reg, control)
        reg = _apply_z_cnot(reg, c, t)
        return apply_hadamard(reg, control)
    return _apply_z_cnot(reg, c, t)


def _components(reg: Register, q: str, basis: MeasurementBasis) -> Tuple[int, np.ndarray, List[np.ndarray]]:
    axis = reg.index(q)
    moved = np.moveaxis(reg.tensor(), axis, 0)
    components = [basis.eigenvector(bit).conj() @ moved.reshape(2, -1) for bit in (0, 1)]
    return axis, moved, components


def outcome_probabilities(reg: Register, q: str, basis: MeasurementBasis) -> Tuple[float, float]:
    _, _, components = _components(reg, q, basis)
    p0, p1 = (float(np.vdot(c, c).real) for c in components)
    return p0, p1


def _collapse(basis: MeasurementBasis, bit: int, axis: int, moved: np.ndarray,
              component: np.ndarray, prob: float) -> np.ndarray:
    collapsed = np.outer(basis.eigenvector(bit), component / np.sqrt(prob))
    return np.moveaxis(collapsed.reshape(moved.shape), 0, axis).reshape(-1)


def project(reg: Register, q: str, basis: MeasurementBasis, bit: int) -> Tuple[float, Optional[Register]]:
    """
    Probability of reading `bit` on q, and the renormalized post-measurement
    register (None when the outcome is impossible).
    """
    axis, moved, components = _components(reg, q, basis)
    component = components[bit]
    prob = float(np.vdot(component, component).real)
    if prob < PROBABILITY_FLOOR:
        return prob, None
    return prob, Register(reg.labels, _collapse(basis, bit, axis, moved, component, prob))


def measure(reg: Register, q: str, basis: MeasurementBasis, rng: Prng) -> Tuple[int, Register]:
    """Sample one outcome of q in `basis` and collapse the register onto it."""
    axis, moved, components = _components(reg, q, basis)
    probs = [float(np.vdot(c, c).real) for c in components]
    bit = 1 if rng.random() * (probs[0] + probs[1]) < probs[1] else 0
    if probs[bit] < PROBABILITY_FLOOR:
        # only reachable through float residue on a certain outcome
        bit = 1 - bit
    return bit, Register(reg.labels, _collapse(basis, bit, axis, moved, components[bit], probs[bit]))


def _pair_matrix(reg: Register, q1: str, q2: str) -> Tuple[List[int], np.ndarray]:
    if q1 == q2:
        raise SameQubitError(f"Bell measurement needs two qubits, got '{q1}' twice")
    axes = [reg.index(q1), reg.index(q2)]
    moved = np.moveaxis(reg.tensor(), axes, [0, 1])
    return axes, moved


def bell_probabilities(reg: Register, q1: str, q2: str) -> Dict[BellOutcome, float]:
    _, moved = _pair_matrix(reg, q1, q2)
    flat = moved.reshape(4, -1)
    probs = {}
    for outcome in BELL_ORDER:
        component = BELL_VECTORS[outcome].conj() @ flat
        probs[outcome] = float(np.vdot(component, component).real)
    return probs


def project_bell(reg: Register, q1: str, q2: str, outcome: BellOutcome) -> Tuple[float, Optional[Register]]:
    """Probability of a Bell outcome on (q1, q2) and the collapsed register."""
    axes, moved = _pair_matrix(reg, q1, q2)
    bell = BELL_VECTORS[outcome]
    component = bell.conj() @ moved.reshape(4, -1)
    prob = float(np.vdot(component, component).real)
    if prob < PROBABILITY_FLOOR:
        return prob, None
    collapsed = np.outer(bell, component / np.sqrt(prob)).reshape(moved.shape)
    collapsed = np.moveaxis(collapsed, [0, 1], axes)
    return prob, Register(reg.labels, collapsed.reshape(-1))


def measure_bell(reg: Register, q1: str, q2: str, rng: Prng) -> Tuple[BellOutcome, Register]:
    """Sample a Bell-basis outcome on (q1, q2) and collapse onto that Bell state."""
    probs = bell_probabilities(reg, q1, q2)
    outcome = BELL_ORDER[rng.choice_index([probs[o] for o in BELL_ORDER])]
    _, collapsed = project_bell(reg, q1, q2, outcome)
    return outcome, collapsed


def distribution(reg: Register,
                 schedule: Sequence[Tuple[str, MeasurementBasis]]) -> OutcomeDistribution:
    """
    Exact joint outcome probabilities for measuring the scheduled qubits.

    Keys are bit strings in schedule order; outcomes below PROBABILITY_FLOOR
    are omitted.

    Raises:
        DuplicateLabelError: a label is scheduled twice
        UnknownLabelError: a scheduled label is missing
    """
    labels = [label for label, _ in schedule]
    if len(set(labels)) != len(labels):
        raise DuplicateLabelError(f"schedule repeats a label: {labels}")
    axes = [reg.index(label) for label in labels]

    # rotate X-measured qubits in register order so float results do not
    # depend on schedule order
    rotated = reg
    for axis in sorted(axes):
        basis = dict(schedule)[reg.labels[axis]]
        if basis is MeasurementBasis.X:
            rotated = apply_hadamard(rotated, reg.labels[axis])

    probs = np.abs(rotated.tensor()) ** 2
    others = tuple(i for i in range(reg.n_qubits) if i not in axes)
    marginal = probs.sum(axis=others) if others else probs
    kept = sorted(axes)
    marginal = np.transpose(marginal, [kept.index(a) for a in axes])

    result: OutcomeDistribution = {}
    for index in np.ndindex(*marginal.shape):
        p = float(marginal[index])
        if p >= PROBABILITY_FLOOR:
            result["".join(str(b) for b in index)] = p
    return result


def _aligned_amplitudes(a: Register, b: Register) -> np.ndarray:
    if set(a.labels) != set(b.labels) or len(a.labels) != len(b.labels):
        raise LabelMismatchError(f"label sets differ: {list(a.labels)} vs {list(b.labels)}")
    if a.labels == b.labels:
        return b.amps
    perm = [b.labels.index(label) for label in a.labels]
    return np.transpose(b.tensor(), perm).reshape(-1)


def inner_product(a: Register, b: Register) -> complex:
    """<a|b>, with b's qubits matched to a's by label."""
    return complex(np.vdot(a.amps, _aligned_amplitudes(a, b)))


def overlap_deficit(a: Register, b: Register) -> float:
    """1 - |<a|b>|, clamped at zero."""
    return max(0.0, 1.0 - abs(inner_product(a, b)))


def states_equal_up_to_phase(a: Register, b: Register, tol: float = EXACT_TOL) -> bool:
    return overlap_deficit(a, b) <= tol
