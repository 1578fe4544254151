"""Tests for eavesdropper strategies and the attack demonstrations."""
import math

import numpy as np
import pytest

from qkd_simulator.adversary import (
    AttackKind,
    BasisPolicy,
    Eavesdropper,
    EveRecord,
    EveStrategy,
    ResendPolicy,
    bell_guess,
    controlled_bell_attack_demo,
    eve_bell_intercept,
    eve_collective_cnot,
    eve_intercept_resend,
    fresh_ancilla_label,
    han_attack_demo,
    parse_strategy,
)
from qkd_simulator.exceptions import ConfigError, UnknownLabelError
from qkd_simulator.quantum_core import (
    BELL_ORDER,
    BellOutcome,
    MeasurementBasis,
    Prng,
    bell_probabilities,
    make_register,
    product_amplitudes,
    product_state,
    states_equal_up_to_phase,
)
from qkd_simulator.states import NamedState, named_state

S = 1 / math.sqrt(2)
Z, X = MeasurementBasis.Z, MeasurementBasis.X


def record_for(strategy):
    rec = EveRecord(strategy)
    rec.begin_round(0)
    return rec


class TestStrategyNames:

    @pytest.mark.parametrize("text, name", [
        ("none", "none"),
        ("intercept-resend", "intercept-resend"),
        ("intercept-resend:random", "intercept-resend"),
        ("intercept-resend:z", "intercept-resend:z"),
        ("intercept-resend:x:eigenstate", "intercept-resend:x:eigenstate"),
        ("intercept-resend:random:eigenstate", "intercept-resend:random:eigenstate"),
        ("cnot", "cnot"),
        ("cnot:x", "cnot"),
        ("CNOT:Z", "cnot:z"),
        ("bell", "bell"),
    ])
    def test_canonical_name(self, text, name):
        assert parse_strategy(text).name == name

    @pytest.mark.parametrize("text", ["", "sniff", "cnot:y", "bell:z", "intercept-resend:z:remap:x"])
    def test_unknown(self, text):
        with pytest.raises(ConfigError):
            parse_strategy(text)

    def test_defaults(self):
        strategy = EveStrategy.intercept_resend()
        assert strategy.basis_policy is BasisPolicy.RANDOM_ZX
        assert strategy.resend_policy is ResendPolicy.X_REMAP
        assert EveStrategy.none().is_none
        assert EveStrategy.collective_cnot().control_basis is X


class TestInterceptResend:

    def test_phi_plus_z_remap(self):
        strategy = EveStrategy.intercept_resend(BasisPolicy.ALWAYS_Z)
        for seed in range(8):
            rec = record_for(strategy)
            out = eve_intercept_resend(named_state(NamedState.PHI_PLUS_AB), "B", strategy, Prng(seed), rec)
            expected = "0+" if rec.current.guess == 0 else "1-"
            assert states_equal_up_to_phase(out, product_state("AB", expected))
            assert rec.current.bases == ["Z"]

    def test_phi_minus_x_eigenstate(self):
        strategy = EveStrategy.intercept_resend(BasisPolicy.ALWAYS_X, ResendPolicy.AS_MEASURED_EIGENSTATE)
        seen = set()
        for seed in range(20):
            rec = record_for(strategy)
            out = eve_intercept_resend(named_state(NamedState.PHI_MINUS_AB), "B", strategy, Prng(seed), rec)
            expected = "-+" if rec.current.guess == 0 else "+-"
            assert states_equal_up_to_phase(out, product_state("AB", expected))
            seen.add(rec.current.guess)
        assert seen == {0, 1}

    def test_eigenstate_unchanged(self):
        strategy = EveStrategy.intercept_resend(BasisPolicy.ALWAYS_Z, ResendPolicy.AS_MEASURED_EIGENSTATE)
        rec = record_for(strategy)
        reg = product_state("A", "0")
        out = eve_intercept_resend(reg, "A", strategy, Prng(0), rec)
        np.testing.assert_allclose(out.amps, reg.amps)
        assert rec.current.guess == 0

    def test_unknown_label(self):
        strategy = EveStrategy.intercept_resend()
        with pytest.raises(UnknownLabelError):
            eve_intercept_resend(product_state("A", "0"), "B", strategy, Prng(0), record_for(strategy))


class TestCollectiveCnot:

    def test_phi_minus_x_control_gives_ancilla_state(self):
        rec = record_for(EveStrategy.collective_cnot())
        out = eve_collective_cnot(named_state(NamedState.PHI_MINUS_AB), "B", X, rec)
        assert out.labels == ("A", "B", "E")
        assert states_equal_up_to_phase(out, named_state(NamedState.OMEGA1))
        assert rec.current.ancillas == ["E"]

    def test_phi_plus_x_control(self):
        out = eve_collective_cnot(named_state(NamedState.PHI_PLUS_AB), "B", X,
                                  record_for(EveStrategy.collective_cnot()))
        expected = make_register("ABE", S * (product_amplitudes("++0") + product_amplitudes("--1")))
        assert states_equal_up_to_phase(out, expected)

    def test_phi_plus_z_control_gives_ghz(self):
        out = eve_collective_cnot(named_state(NamedState.PHI_PLUS_AB), "B", Z,
                                  record_for(EveStrategy.collective_cnot(Z)))
        assert states_equal_up_to_phase(out, make_register("ABE", [S, 0, 0, 0, 0, 0, 0, S]))

    def test_fresh_label_skips_taken(self):
        reg = make_register(("A", "E"), [1, 0, 0, 0])
        assert fresh_ancilla_label(reg) == "E2"


class TestBellIntercept:

    @pytest.mark.parametrize("which", [NamedState.PSI1, NamedState.PSI2])
    def test_uniform_outcomes_on_psi_states(self, which):
        probs = bell_probabilities(named_state(which), "B", "C")
        for outcome in BELL_ORDER:
            assert probs[outcome] == pytest.approx(0.25, abs=1e-12)

    def test_eigenstate(self):
        reg = make_register(("A", "B", "C"), np.kron([1, 0], [S, 0, 0, S]))
        for seed in range(5):
            rec = record_for(EveStrategy.bell_intercept())
            eve_bell_intercept(reg, "B", "C", Prng(seed), rec)
            assert rec.current.outcomes == ["PhiPlus"]
            assert rec.current.guess == 0

    def test_guess_map(self):
        assert bell_guess(BellOutcome.PHI_PLUS) == 0
        assert bell_guess(BellOutcome.PSI_PLUS) == 0
        assert bell_guess(BellOutcome.PHI_MINUS) == 1
        assert bell_guess(BellOutcome.PSI_MINUS) == 1

    def test_hook_rejects_single_qubit(self):
        eve = Eavesdropper(EveStrategy.bell_intercept(), Prng(0))
        eve.begin_round(0)
        with pytest.raises(ConfigError):
            eve.intercept(named_state(NamedState.PHI_PLUS_AB), ["B"])


class TestEavesdropper:

    def test_none_is_passthrough(self):
        eve = Eavesdropper(EveStrategy.none(), Prng(0))
        reg = named_state(NamedState.PHI_PLUS_AB)
        assert eve.intercept(reg, ["B"]) is reg
        assert eve.rng.position == 0

    def test_ancilla_read_stores_guess(self):
        eve = Eavesdropper(EveStrategy.collective_cnot(Z), Prng(2))
        eve.begin_round(3)
        reg = eve.intercept(named_state(NamedState.PHI_PLUS_AB), ["B"])
        eve.read_ancilla(3, reg, hadamard_declared=False)
        assert eve.record.guess(3) in (0, 1)
        assert "ancilla-Z" in eve.record.rounds[3].bases
        assert eve.strategy.kind is AttackKind.COLLECTIVE_CNOT


class TestAttackDemos:

    def test_han_demo_is_undetected(self):
        report = han_attack_demo(4000, Prng(11))
        assert report.guess_accuracy == 1.0
        assert report.detection_events == 0
        freq = report.outcome_frequencies
        assert freq["PhiMinus"] == 0.0 and freq["PsiPlus"] == 0.0
        sigma = math.sqrt(0.25 / 4000)
        assert abs(freq["PhiPlus"] - 0.5) <= 4 * sigma
        assert freq["PhiPlus"] + freq["PsiMinus"] == pytest.approx(1.0)

    def test_controlled_demo_guesses_at_chance(self):
        rounds = 4000
        report = controlled_bell_attack_demo(rounds, Prng(12))
        sigma = math.sqrt(0.25 / rounds)
        assert abs(report.guess_accuracy - 0.5) <= 4 * sigma
        assert report.detection_rate > 0.4
        for outcome in BELL_ORDER:
            assert abs(report.outcome_frequencies[outcome.value] - 0.25) <= 4 * math.sqrt(0.1875 / rounds)

    def test_single_round(self):
        report = han_attack_demo(1, Prng(0))
        assert report.rounds == 1
        assert report.to_dict()["detection_events"] == 0

    def test_rejects_zero_rounds(self):
        with pytest.raises(ConfigError):
            han_attack_demo(0, Prng(0))
        with pytest.raises(ConfigError):
            controlled_bell_attack_demo(0, Prng(0))
