"""Named states of the three protocols and a runtime check of their algebra.

Printed forms are transcribed term by term with `superpose` and normalized,
so an identity compares directions; a printed prefactor that does not give
unit norm is reported as a note rather than a failure. Polarizations of the
Han state map H -> |0> and V -> |1>.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import (
    EXACT_TOL,
    MeasurementBasis,
    Register,
    apply_cnot,
    apply_hadamard,
    distribution,
    make_register,
    normalized_register,
    overlap_deficit,
    product_amplitudes,
    product_state,
    superpose,
    tensor_product,
)

logger = get_logger("states")

_SQRT1_2 = 1.0 / np.sqrt(2.0)


class NamedState(Enum):
    PHI_PLUS_AB = "PhiPlusAB"
    PHI_MINUS_AB = "PhiMinusAB"
    PHI_MINUS_HADAMARD = "PhiMinusHadamard"
    PHI_MINUS_X_FORM = "PhiMinusXForm"
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    HAN_ABC = "HanABC"
    PSI1 = "Psi1"
    PSI2 = "Psi2"
    GHZ_PLUS = "GhzPlus"


# labels, prefactor, terms as printed
_PRINTED = {
    NamedState.PHI_PLUS_AB: ("AB", _SQRT1_2, [(1, "00"), (1, "11")]),
    NamedState.PHI_MINUS_AB: ("AB", _SQRT1_2, [(1, "00"), (-1, "11")]),
    NamedState.PHI_MINUS_HADAMARD: ("AB", _SQRT1_2, [(1, "++"), (-1, "--")]),
    NamedState.PHI_MINUS_X_FORM: ("AB", _SQRT1_2, [(1, "+-"), (1, "-+")]),
    NamedState.OMEGA1: ("ABE", _SQRT1_2, [(1, "+-1"), (1, "-+0")]),
    NamedState.OMEGA2: ("ABE", _SQRT1_2, [(1, "011"), (1, "100")]),
    NamedState.HAN_ABC: (("1", "2", "3"), 0.5, [(1, "000"), (1, "011"), (1, "101"), (-1, "110")]),
    NamedState.PSI1: ("ABC", _SQRT1_2, [(1, "0+0"), (1, "1-1")]),
    NamedState.PSI2: ("ABC", _SQRT1_2, [(1, "0-0"), (1, "1+1")]),
    NamedState.GHZ_PLUS: ("ABC", _SQRT1_2, [(1, "000"), (1, "111")]),
}


@lru_cache(maxsize=None)
def _built_state(which: NamedState) -> Register:
    labels, prefactor, terms = _PRINTED[which]
    reg = make_register(tuple(labels), prefactor * superpose(terms))
    # shared between callers, so the amplitudes are frozen
    reg.amps.setflags(write=False)
    return reg


def named_state(which: NamedState) -> Register:
    """Register of a named state with its canonical labels."""
    return _built_state(which)


def printed_form(labels, prefactor: float, terms) -> "PrintedForm":
    vector = prefactor * superpose(terms)
    return PrintedForm(normalized_register(tuple(labels), vector),
                       float(np.sqrt(np.vdot(vector, vector).real)))


@dataclass
class PrintedForm:
    register: Register
    printed_norm: float


@dataclass
class IdentityCheck:
    name: str
    lhs: str
    rhs: str
    overlap_deficit: float
    passed: bool
    note: str = ""


@dataclass
class IdentityReport:
    checks: List[IdentityCheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> List[IdentityCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> Dict:
        return {
            "all_passed": self.all_passed,
            "identities": [asdict(c) for c in self.checks],
        }


def _norm_note(*forms: PrintedForm) -> str:
    notes = [f"printed prefactor gives norm {f.printed_norm:.6f}; compared after normalization"
             for f in forms if abs(f.printed_norm - 1.0) > EXACT_TOL]
    return "; ".join(notes)


def _check(name: str, lhs_text: str, rhs_text: str, lhs: Register, rhs: Register,
           note: str = "") -> IdentityCheck:
    deficit = overlap_deficit(lhs, rhs)
    return IdentityCheck(name, lhs_text, rhs_text, deficit, deficit <= EXACT_TOL, note)


def _hadamard_both(reg: Register) -> Register:
    return apply_hadamard(apply_hadamard(reg, "A"), "B")


def _phi_plus_hadamard_invariant(state: Callable[[NamedState], Register]) -> IdentityCheck:
    phi_plus = state(NamedState.PHI_PLUS_AB)
    x_form = printed_form("AB", _SQRT1_2, [(1, "++"), (1, "--")])
    check = _check("phi_plus_hadamard_invariant", "H(A)H(B)|phi+>", "(|++>+|-->)/sqrt2",
                   _hadamard_both(phi_plus), phi_plus)
    # the X-basis rewrite is checked alongside
    rewrite = overlap_deficit(phi_plus, x_form.register)
    check.overlap_deficit = max(check.overlap_deficit, rewrite)
    check.passed = check.overlap_deficit <= EXACT_TOL
    return check


def _phi_minus_hadamard_form(state: Callable[[NamedState], Register]) -> IdentityCheck:
    computed = _hadamard_both(state(NamedState.PHI_MINUS_AB))
    printed = state(NamedState.PHI_MINUS_HADAMARD)
    check = _check("phi_minus_hadamard_form", "H(A)H(B)|phi->", "(|++>-|-->)/sqrt2", computed, printed)
    if not check.passed:
        flipped = printed_form("AB", _SQRT1_2, [(1, "++"), (1, "--")]).register
        if overlap_deficit(computed, flipped) <= EXACT_TOL:
            check.note = "computed state matches (|++>+|-->)/sqrt2; printed sign disagrees"
    return check


def _phi_minus_x_form(state: Callable[[NamedState], Register]) -> IdentityCheck:
    return _check("phi_minus_x_form", "|phi->", "(|+->+|-+>)/sqrt2",
                  state(NamedState.PHI_MINUS_AB), state(NamedState.PHI_MINUS_X_FORM))


def _x_cnot_on_eve(state: Callable[[NamedState], Register]) -> Register:
    reg = tensor_product(state(NamedState.PHI_MINUS_AB), product_state("E", "0"))
    return apply_cnot(reg, "B", "E", MeasurementBasis.X)


def _omega1_from_x_cnot(state: Callable[[NamedState], Register]) -> IdentityCheck:
    return _check("omega1_from_x_cnot", "X-controlled CNOT(B->E) |phi->|0>", "(|+-1>+|-+0>)/sqrt2",
                  _x_cnot_on_eve(state), state(NamedState.OMEGA1))


def _omega2_from_hadamards(state: Callable[[NamedState], Register]) -> IdentityCheck:
    return _check("omega2_from_hadamards", "H(A)H(B)|Omega1>", "(|011>+|100>)/sqrt2",
                  _hadamard_both(_x_cnot_on_eve(state)), state(NamedState.OMEGA2))


def _han_factored_form(state: Callable[[NamedState], Register]) -> IdentityCheck:
    han = state(NamedState.HAN_ABC)
    # 1/2 [|H>(|HH>+|VV>) + |V>(|HV>-|VH>)], assembled factor by factor
    factored = 0.5 * (np.kron(product_amplitudes("0"), superpose([(1, "00"), (1, "11")]))
                      + np.kron(product_amplitudes("1"), superpose([(1, "01"), (-1, "10")])))
    rhs = normalized_register(("1", "2", "3"), factored)
    return _check("han_factored_form", "(|HHH>+|HVV>+|VHV>-|VVH>)/2",
                  "[|H>(|HH>+|VV>)+|V>(|HV>-|VH>)]/2", han, rhs)


def _psi1_x_rewrite(state: Callable[[NamedState], Register]) -> IdentityCheck:
    rewrite = printed_form("ABC", _SQRT1_2, [(1, "+0+"), (1, "+1-"), (1, "-0-"), (1, "-1+")])
    return _check("psi1_x_rewrite", "|Psi1>", "[|+>(|0+>+|1->)+|->(|0->+|1+>)]/sqrt2",
                  state(NamedState.PSI1), rewrite.register, _norm_note(rewrite))


def _psi2_x_rewrite(state: Callable[[NamedState], Register]) -> IdentityCheck:
    rewrite = printed_form("ABC", _SQRT1_2, [(1, "+0+"), (-1, "+1-"), (1, "-0-"), (-1, "-1+")])
    return _check("psi2_x_rewrite", "|Psi2>", "[|+>(|0+>-|1->)+|->(|0->-|1+>)]/sqrt2",
                  state(NamedState.PSI2), rewrite.register, _norm_note(rewrite))


# (left terms, right prefactor, right terms) for the four Bell-pair rewrites
_BELL_PAIR_LINES = [
    ([(1, "0+"), (1, "1-")], [(1, "00"), (-1, "11"), (1, "01"), (1, "10")]),
    ([(1, "0-"), (1, "1+")], [(1, "00"), (1, "11"), (-1, "01"), (1, "10")]),
    ([(1, "0+"), (-1, "1-")], [(1, "00"), (1, "11"), (1, "01"), (-1, "10")]),
    ([(1, "0-"), (-1, "1+")], [(1, "00"), (-1, "11"), (-1, "01"), (-1, "10")]),
]


def _bell_pair_expansions(_state: Callable[[NamedState], Register]) -> IdentityCheck:
    deficits = []
    for left_terms, right_terms in _BELL_PAIR_LINES:
        left = printed_form("BC", 1.0, left_terms)
        right = printed_form("BC", _SQRT1_2, right_terms)
        deficits.append(overlap_deficit(left.register, right.register))
    worst = max(deficits)
    return IdentityCheck("bell_pair_expansions", "|0+>+|1->, |0->+|1+>, |0+>-|1->, |0->-|1+>",
                         "computational-basis expansions (four lines)",
                         worst, worst <= EXACT_TOL,
                         "deficits per line: " + ", ".join(f"{d:.3e}" for d in deficits))


def _psi_correlations(state: Callable[[NamedState], Register]) -> IdentityCheck:
    mismatch = 0.0
    for which in (NamedState.PSI1, NamedState.PSI2):
        dist = distribution(state(which), [("A", MeasurementBasis.Z), ("C", MeasurementBasis.Z)])
        mismatch += dist.get("01", 0.0) + dist.get("10", 0.0)
    return IdentityCheck("psi_ac_correlation", "P(a != c) in Z for |Psi1>, |Psi2>", "0",
                         mismatch, mismatch <= EXACT_TOL)


PSI_TAGS = {NamedState.PSI1: 0, NamedState.PSI2: 1}


def psi_schedule(alice_basis: MeasurementBasis) -> Tuple[MeasurementBasis, MeasurementBasis]:
    """Bob's and Charlie's bases once Alice has published hers."""
    if alice_basis is MeasurementBasis.Z:
        return MeasurementBasis.X, MeasurementBasis.Z
    return MeasurementBasis.Z, MeasurementBasis.X


def psi_correlation_holds(tag: int, alice_basis: MeasurementBasis, a: int, b: int, c: int) -> bool:
    """
    Whether three outcomes measured on |Psi1> (tag 0) or |Psi2> (tag 1)
    under `psi_schedule` obey the state's correlations.

    Alice Z: Charlie repeats Alice and Bob reads a XOR tag.
    Alice X: Charlie reads a XOR b.
    """
    if alice_basis is MeasurementBasis.Z:
        return c == a and b == a ^ tag
    return c == a ^ b


_CATALOGUE = (
    _phi_plus_hadamard_invariant,
    _phi_minus_hadamard_form,
    _phi_minus_x_form,
    _omega1_from_x_cnot,
    _omega2_from_hadamards,
    _han_factored_form,
    _psi1_x_rewrite,
    _psi2_x_rewrite,
    _bell_pair_expansions,
    _psi_correlations,
)


def verify_identities(overrides: Optional[Dict[NamedState, Register]] = None) -> IdentityReport:
    """
    Check every catalogued identity at overlap deficit <= 1e-12.

    Args:
        overrides: replacement registers for named states, used to confirm a
            perturbed state is caught

    Returns:
        IdentityReport with one entry per identity; failures are entries,
        never exceptions
    """
    overrides = overrides or {}

    def state(which: NamedState) -> Register:
        return overrides[which] if which in overrides else named_state(which)

    report = IdentityReport([check(state) for check in _CATALOGUE])
    for failed in report.failures():
        logger.error(f"Identity {failed.name} failed: deficit {failed.overlap_deficit:.3e} "
                     f"({failed.lhs} vs {failed.rhs})")
    logger.info(f"Verified {len(report.checks)} identities, {len(report.failures())} failed")
    return report
