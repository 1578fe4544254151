"""Tests for the exact branch-enumeration oracle."""
import math

import pytest

from qkd_simulator.adversary import BasisPolicy, EveStrategy, ResendPolicy
from qkd_simulator.config import Protocol
from qkd_simulator.exceptions import UnsupportedCombinationError
from qkd_simulator.oracle import (
    bell_attack_conditionals,
    controlled_key_mutual_information,
    exact_qber_oracle,
    is_supported,
    noise_branches,
)
from qkd_simulator.quantum_core import MeasurementBasis, apply_hadamard, distribution, make_register, product_state
from qkd_simulator.states import NamedState, named_state

S = 1 / math.sqrt(2)
Z, X = MeasurementBasis.Z, MeasurementBasis.X


class TestProtocol2:

    def test_intercept_resend_cells(self):
        result = exact_qber_oracle(Protocol.P2, EveStrategy.intercept_resend())
        assert result.cells["phi+/Z"] == pytest.approx(0.5, abs=1e-12)
        assert result.cells["phi+/X"] == pytest.approx(0.0, abs=1e-12)
        assert result.cells["phi-/Z"] == pytest.approx(0.5, abs=1e-12)
        assert result.cells["phi-/X"] == pytest.approx(0.5, abs=1e-12)
        assert result.overall == pytest.approx(3 / 8, abs=1e-12)
        assert sum(result.cell_weights.values()) == pytest.approx(1.0, abs=1e-12)

    def test_always_z_phi_plus_cell(self):
        result = exact_qber_oracle(Protocol.P2, EveStrategy.intercept_resend(BasisPolicy.ALWAYS_Z))
        assert result.cells["phi+/Z"] == pytest.approx(0.5, abs=1e-12)

    def test_phi_plus_eve_z_cell_by_hand(self):
        # Eve's Z result 0 leaves |0+>, result 1 leaves |1->; both measured in X
        for symbols in ("0+", "1-"):
            dist = distribution(product_state("AB", symbols), [("A", X), ("B", X)])
            assert dist.get("01", 0.0) + dist.get("10", 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_phi_minus_eve_x_cell_by_hand(self):
        # |+-> or |-+> after Eve, then H on both before the X measurements
        for symbols in ("+-", "-+"):
            reg = apply_hadamard(apply_hadamard(product_state("AB", symbols), "A"), "B")
            dist = distribution(reg, [("A", X), ("B", X)])
            assert dist.get("01", 0.0) + dist.get("10", 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_collective_x_control(self):
        result = exact_qber_oracle(Protocol.P2, EveStrategy.collective_cnot(X))
        assert result.overall == pytest.approx(0.25, abs=1e-12)
        assert result.cells["phi+/cnot"] == pytest.approx(0.0, abs=1e-12)
        assert result.cells["phi-/cnot"] == pytest.approx(0.5, abs=1e-12)

    def test_collective_z_control(self):
        result = exact_qber_oracle(Protocol.P2, EveStrategy.collective_cnot(Z))
        assert result.overall == pytest.approx(0.25, abs=1e-12)
        assert result.cells["phi+/cnot"] == pytest.approx(0.5, abs=1e-12)
        assert result.cells["phi-/cnot"] == pytest.approx(0.0, abs=1e-12)

    def test_collective_cell_by_hand(self):
        # the |phi-> branch after both Hadamards, (|011> + |100>)/sqrt2
        reg = make_register("ABE", [0, 0, 0, S, S, 0, 0, 0])
        dist = distribution(reg, [("A", X), ("B", X)])
        assert dist.get("01", 0.0) + dist.get("10", 0.0) == pytest.approx(0.5, abs=1e-12)

    def test_no_attack(self):
        assert exact_qber_oracle(Protocol.P2, EveStrategy.none()).overall == pytest.approx(0.0, abs=1e-12)

    def test_noise_is_strictly_increasing(self):
        values = [exact_qber_oracle(Protocol.P2, EveStrategy.none(), {"noise_p": p}).overall
                  for p in (0.0, 0.02, 0.05)]
        assert values[0] < values[1] < values[2]
        # two of the three Paulis flip the X-basis comparison for either preparation
        assert values[1] == pytest.approx(2 * 0.02 / 3, abs=1e-12)


class TestProtocol1:

    def test_intercept_resend(self):
        result = exact_qber_oracle(Protocol.P1, EveStrategy.intercept_resend())
        assert result.overall == pytest.approx(3 / 8, abs=1e-12)

    def test_no_attack_either_basis(self):
        for basis in (Z, X):
            result = exact_qber_oracle(Protocol.P1, EveStrategy.none(), {"final_basis": basis})
            assert result.overall == pytest.approx(0.0, abs=1e-12)

    def test_eigenstate_resend_z_without_hadamards(self):
        attack = EveStrategy.intercept_resend(BasisPolicy.ALWAYS_Z, ResendPolicy.AS_MEASURED_EIGENSTATE)
        result = exact_qber_oracle(Protocol.P1, attack, {"hadamard_fraction": 0.0})
        assert result.overall == pytest.approx(0.0, abs=1e-12)


class TestProtocol3:

    @pytest.mark.parametrize("protocol", [Protocol.P3_CONTROLLED, Protocol.P3_THREE_PARTY])
    def test_no_attack(self, protocol):
        result = exact_qber_oracle(protocol, EveStrategy.none())
        assert result.overall == pytest.approx(0.0, abs=1e-12)
        assert result.subsets == pytest.approx({"Z": 0.0, "X": 0.0}, abs=1e-12)

    def test_bell_attack_is_loud(self):
        result = exact_qber_oracle(Protocol.P3_CONTROLLED, EveStrategy.bell_intercept())
        assert result.subsets["Z"] == pytest.approx(0.75, abs=1e-12)
        assert result.subsets["X"] == pytest.approx(0.5, abs=1e-12)
        assert result.overall == pytest.approx(0.625, abs=1e-12)
        assert set(result.cells) == {f"{which}/{outcome}" for which in ("Psi1", "Psi2")
                                     for outcome in ("PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus")}

    def test_epsilon_weights_subsets(self):
        result = exact_qber_oracle(Protocol.P3_CONTROLLED, EveStrategy.bell_intercept(), {"epsilon": 0.2})
        assert result.overall == pytest.approx(0.2 * 0.75 + 0.8 * 0.5, abs=1e-12)


class TestSupport:

    @pytest.mark.parametrize("protocol, attack", [
        (Protocol.P2, EveStrategy.bell_intercept()),
        (Protocol.P1, EveStrategy.bell_intercept()),
        (Protocol.P3_CONTROLLED, EveStrategy.intercept_resend()),
        (Protocol.P3_THREE_PARTY, EveStrategy.collective_cnot()),
    ])
    def test_unsupported(self, protocol, attack):
        assert not is_supported(protocol, attack)
        with pytest.raises(UnsupportedCombinationError):
            exact_qber_oracle(protocol, attack)

    def test_noise_branches_sum_to_one(self):
        reg = named_state(NamedState.PSI1)
        branches = list(noise_branches(reg, ["B", "C"], 0.3))
        assert len(branches) == 16
        assert sum(w for w, _ in branches) == pytest.approx(1.0, abs=1e-12)

    def test_full_noise_drops_identity_branch(self):
        assert len(list(noise_branches(named_state(NamedState.PHI_PLUS_AB), ["B"], 1.0))) == 3


class TestInformation:

    def test_controlled_key_is_independent_of_public_record(self):
        assert controlled_key_mutual_information() == pytest.approx(0.0, abs=1e-12)

    def test_han_conditionals_are_point_masses(self):
        cond = bell_attack_conditionals("han")
        assert set(cond) == {"PhiPlus", "PsiMinus"}
        assert cond["PhiPlus"]["0"] == pytest.approx(1.0, abs=1e-12)
        assert cond["PsiMinus"]["1"] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("basis", [Z, X])
    def test_controlled_conditionals_are_uniform(self, basis):
        cond = bell_attack_conditionals("controlled", basis)
        assert len(cond) == 4
        for row in cond.values():
            assert row["0"] == pytest.approx(0.5, abs=1e-12)

    def test_unknown_scheme(self):
        with pytest.raises(UnsupportedCombinationError):
            bell_attack_conditionals("bb84")
