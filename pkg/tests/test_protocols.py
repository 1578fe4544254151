"""Tests for the protocol session runners."""
import math
from dataclasses import replace

import pytest

from qkd_simulator.adversary import BasisPolicy, EveStrategy
from qkd_simulator.analysis import empirical_mutual_information
from qkd_simulator.channels import ClassicalMessage, NoiseSpec, PayloadKind
from qkd_simulator.config import Protocol, SessionConfig
from qkd_simulator.exceptions import ConfigMismatchError, EmptySampleError, MissingAnnouncementError
from qkd_simulator.oracle import exact_qber_oracle
from qkd_simulator.protocols import (
    KeyMode,
    RoundTrace,
    RunStatus,
    check_eavesdropping,
    p3_extract_keys,
    run_protocol1,
    run_protocol2,
    run_protocol3,
    run_session,
)
from qkd_simulator.quantum_core import MeasurementBasis
from qkd_simulator.states import psi_correlation_holds

ALL_MODES = [Protocol.P1, Protocol.P2, Protocol.P3_CONTROLLED, Protocol.P3_THREE_PARTY]
TAGS = {"Psi1": 0, "Psi2": 1}


def config(protocol, **changes):
    return replace(SessionConfig(protocol=protocol, rounds=300), **changes)


def within_sigma(errors, trials, p, k=4.0):
    sigma = math.sqrt(trials * p * (1 - p))
    return abs(errors - trials * p) <= k * sigma + 1e-9


def trace_errors(result):
    """Disagreements over every round of a run, checked or not."""
    if result.config.protocol.is_controlled_family:
        return sum(not psi_correlation_holds(TAGS[t.state_tag], MeasurementBasis(t.alice_basis),
                                             t.a_bit, t.b_bit, t.c_bit) for t in result.traces)
    return sum(t.a_bit != t.b_bit for t in result.traces)


class TestNoAttack:

    @pytest.mark.parametrize("protocol", ALL_MODES)
    @pytest.mark.parametrize("seed", range(10))
    def test_perfect_agreement(self, protocol, seed):
        result = run_session(config(protocol, seed=seed))
        assert result.status is RunStatus.COMPLETED
        assert result.qber_estimate == 0.0
        assert result.check_disagreements == 0
        assert trace_errors(result) == 0
        sifted = list(result.sifted_keys.values())
        assert all(key == sifted[0] for key in sifted)
        finals = list(result.final_keys.values())
        assert len(finals[0]) > 0
        assert all(key == finals[0] for key in finals)

    def test_protocol1_x_basis(self):
        result = run_protocol1(config(Protocol.P1, final_basis=MeasurementBasis.X, seed=4))
        assert result.sifted_keys["alice"] == result.sifted_keys["bob"]
        assert {t.alice_basis for t in result.traces} == {"X"}

    def test_three_party_keys(self):
        result = run_protocol3(config(Protocol.P3_THREE_PARTY, seed=21))
        assert set(result.final_keys) == {"alice", "bob", "charlie"}
        assert result.reference_party == "alice"
        assert result.final_keys["alice"] == result.final_keys["bob"] == result.final_keys["charlie"]

    def test_controlled_key_is_independent_of_public_record(self):
        result = run_protocol3(config(Protocol.P3_CONTROLLED, rounds=1000, seed=3))
        pairs = [((TAGS[t.state_tag], t.a_bit), t.b_bit) for t in result.traces if t.sifted]
        assert len(pairs) > 500
        assert empirical_mutual_information(pairs) < 0.02
        assert result.reference_party == "bob"

    def test_noisy_channel_still_distills(self):
        result = run_protocol2(config(Protocol.P2, rounds=4000, noise=NoiseSpec(0.03), seed=8))
        assert not result.aborted
        assert 0.0 < result.qber_estimate <= 0.11
        assert all(c.converged for c in result.corrections.values())
        assert result.final_keys["alice"] == result.final_keys["bob"]
        assert len(result.final_key) > 0


class TestAccounting:

    @pytest.mark.parametrize("protocol", [Protocol.P1, Protocol.P2])
    def test_two_party_counters(self, protocol):
        result = run_session(config(protocol, seed=1))
        counters = result.counters
        checked = sum(t.check for t in result.traces)
        assert counters.q_t == 300
        assert counters.q_u + checked == counters.q_t
        assert counters.q_u == result.sifted_length
        assert counters.b_t == (300 if protocol is Protocol.P2 else 0)
        assert counters.b_s == len(result.final_key)

    def test_protocol3_counters(self):
        result = run_protocol3(config(Protocol.P3_CONTROLLED, seed=2))
        counters = result.counters
        key_rounds = sum(t.sifted for t in result.traces)
        assert counters.q_t == 2 * 300 * 2
        assert counters.q_u == 2 * key_rounds
        # one basis bit per round plus Alice's published X results
        assert counters.b_t == 600 + key_rounds
        assert counters.q_checked == 2 * sum(t.check for t in result.traces)

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_used_qubits_per_key_round(self, protocol):
        result = run_session(config(protocol, seed=4))
        key_rounds = sum(t.sifted for t in result.traces)
        assert key_rounds > 0
        assert result.counters.q_u == protocol.qubits_per_round * key_rounds

    def test_check_sample_size(self):
        result = run_protocol2(config(Protocol.P2, seed=5))
        assert result.check_sample == 75
        assert sum(t.check for t in result.traces) == 75
        assert not any(t.check and t.sifted for t in result.traces)

    def test_protocol3_checks_every_batch(self):
        result = run_protocol3(config(Protocol.P3_THREE_PARTY, session_batches=3, seed=6))
        assert len(result.checks) == 3
        assert {t.batch for t in result.traces} == {0, 1, 2}
        assert sum(result.basis_yield.values()) == pytest.approx(1.0)

    def test_protocol2_announcements_per_round(self):
        result = run_protocol2(config(Protocol.P2, seed=7))
        infos = result.log.of_kind(PayloadKind.INITIAL_STATE_INFO)
        assert len(infos) == 300
        for msg, trace in zip(infos, result.traces):
            assert msg.bits == ((1,) if trace.state_tag == "phi-" else (0,))


class TestDeterminism:

    @pytest.mark.parametrize("protocol", ALL_MODES)
    def test_same_seed_same_run(self, protocol):
        cfg = config(protocol, seed=42, attack=EveStrategy.none())
        first, second = run_session(cfg), run_session(cfg)
        assert [t.to_row() for t in first.traces] == [t.to_row() for t in second.traces]
        assert first.final_keys == second.final_keys
        assert first.counters == second.counters
        assert first.log.to_rows() == second.log.to_rows()
        assert first.toeplitz_seed == second.toeplitz_seed

    def test_eve_does_not_shift_party_draws(self):
        plain = run_protocol2(config(Protocol.P2, seed=9))
        attacked = run_protocol2(config(Protocol.P2, seed=9, attack=EveStrategy.intercept_resend()))
        assert [t.state_tag for t in plain.traces] == [t.state_tag for t in attacked.traces]

    def test_different_seeds_differ(self):
        a = run_protocol2(config(Protocol.P2, seed=1))
        b = run_protocol2(config(Protocol.P2, seed=2))
        assert a.final_key != b.final_key


class TestAttacks:

    @pytest.mark.parametrize("protocol, attack", [
        (Protocol.P1, EveStrategy.intercept_resend()),
        (Protocol.P2, EveStrategy.intercept_resend()),
        (Protocol.P2, EveStrategy.collective_cnot()),
        (Protocol.P3_CONTROLLED, EveStrategy.bell_intercept()),
        (Protocol.P3_THREE_PARTY, EveStrategy.bell_intercept()),
    ])
    def test_attack_aborts(self, protocol, attack):
        result = run_session(config(protocol, rounds=1000, attack=attack, seed=13))
        assert result.status is RunStatus.ABORTED
        assert result.qber_estimate > 0.11
        assert all(key == [] for key in result.final_keys.values())
        assert result.counters.b_s == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_bell_attack_aborts_first_batch(self, seed):
        result = run_protocol3(config(Protocol.P3_CONTROLLED, rounds=200, attack=EveStrategy.bell_intercept(),
                                      seed=seed))
        assert result.aborted
        assert len(result.checks) == 1
        assert len(result.traces) == 200

    @pytest.mark.parametrize("protocol, attack", [
        (Protocol.P1, EveStrategy.intercept_resend()),
        (Protocol.P2, EveStrategy.intercept_resend()),
        (Protocol.P2, EveStrategy.collective_cnot(MeasurementBasis.X)),
        (Protocol.P2, EveStrategy.collective_cnot(MeasurementBasis.Z)),
        (Protocol.P3_CONTROLLED, EveStrategy.bell_intercept()),
    ])
    def test_sampler_matches_oracle(self, protocol, attack):
        rounds = 4000
        result = run_session(config(protocol, rounds=rounds, attack=attack, seed=17))
        expected = exact_qber_oracle(protocol, attack).overall
        assert len(result.traces) == rounds
        assert within_sigma(trace_errors(result), rounds, expected)

    def test_always_z_phi_plus_rounds(self):
        attack = EveStrategy.intercept_resend(BasisPolicy.ALWAYS_Z)
        result = run_protocol2(config(Protocol.P2, rounds=4000, attack=attack, seed=18))
        phi_plus = [t for t in result.traces if t.state_tag == "phi+"]
        errors = sum(t.a_bit != t.b_bit for t in phi_plus)
        assert within_sigma(errors, len(phi_plus), 0.5)

    def test_bell_attack_guess_accuracy(self):
        rounds = 4000
        result = run_protocol3(config(Protocol.P3_CONTROLLED, rounds=rounds,
                                      attack=EveStrategy.bell_intercept(), seed=19))
        assert abs(result.eve_guess_accuracy - 0.5) <= 4 * math.sqrt(0.25 / rounds)

    def test_intercept_resend_accuracy_is_recorded(self):
        result = run_protocol2(config(Protocol.P2, attack=EveStrategy.intercept_resend(), seed=20))
        assert 0.0 <= result.eve_guess_accuracy <= 1.0
        assert result.traces[0].eve_actions

    def test_collective_guess_uses_ancilla(self):
        result = run_protocol1(config(Protocol.P1, attack=EveStrategy.collective_cnot(MeasurementBasis.Z),
                                      hadamard_fraction=0.0, seed=22))
        # Z-controlled copy of a Z-measured pair: the ancilla reads Alice's bit exactly
        assert result.eve_guess_accuracy == 1.0
        assert result.qber_estimate == 0.0


class TestConfigMismatch:

    def test_wrong_runner(self):
        with pytest.raises(ConfigMismatchError):
            run_protocol1(config(Protocol.P2))
        with pytest.raises(ConfigMismatchError):
            run_protocol3(config(Protocol.P1))

    @pytest.mark.parametrize("protocol, attack", [
        (Protocol.P1, EveStrategy.bell_intercept()),
        (Protocol.P2, EveStrategy.bell_intercept()),
        (Protocol.P3_CONTROLLED, EveStrategy.intercept_resend()),
        (Protocol.P3_THREE_PARTY, EveStrategy.collective_cnot()),
    ])
    def test_unmodelled_attack(self, protocol, attack):
        with pytest.raises(ConfigMismatchError):
            run_session(config(protocol, attack=attack))


class TestControllerPermission:

    def test_withheld_results(self):
        result = run_protocol3(config(Protocol.P3_CONTROLLED, controller_permits=False, seed=23))
        assert result.status is RunStatus.COMPLETED
        assert result.key_withheld
        assert result.final_keys == {"bob": [], "charlie": []}
        assert result.log.of_kind(PayloadKind.X_RESULT_PUBLICATION) == []
        # without Alice's results Charlie's raw bits match Bob's only by chance
        bob, charlie = result.sifted_keys["bob"], result.sifted_keys["charlie"]
        agreement = sum(b == c for b, c in zip(bob, charlie)) / len(bob)
        assert 0.3 < agreement < 0.7

    def test_flag_ignored_in_three_party_mode(self):
        result = run_protocol3(config(Protocol.P3_THREE_PARTY, controller_permits=False, seed=24))
        assert not result.key_withheld
        assert len(result.final_key) > 0


class TestExtractKeys:

    def test_controlled_examples(self):
        traces = [
            RoundTrace(0, "Psi1", "X", "Z", "X", a_bit=0, b_bit=0, c_bit=0),
            RoundTrace(1, "Psi1", "X", "Z", "X", a_bit=1, b_bit=0, c_bit=1),
            RoundTrace(2, "Psi2", "Z", "X", "Z", a_bit=1, b_bit=0, c_bit=1),
        ]
        published = ClassicalMessage("alice", PayloadKind.X_RESULT_PUBLICATION, (0, 1), (0, 1))
        keys = p3_extract_keys(traces, [published], KeyMode.CONTROLLED)
        assert keys == {"bob": [0, 0], "charlie": [0, 0]}

    def test_three_party_example(self):
        traces = [RoundTrace(5, "Psi2", "Z", "X", "Z", a_bit=0, b_bit=1, c_bit=0)]
        published = ClassicalMessage("alice", PayloadKind.INITIAL_STATE_INFO, (1,), (5,))
        keys = p3_extract_keys(traces, [published], KeyMode.THREE_PARTY)
        assert keys == {"alice": [0], "bob": [0], "charlie": [0]}

    def test_check_rounds_are_skipped(self):
        traces = [RoundTrace(0, "Psi1", "X", "Z", "X", a_bit=0, b_bit=0, c_bit=0, check=True)]
        assert p3_extract_keys(traces, [], KeyMode.CONTROLLED) == {"bob": [], "charlie": []}

    def test_missing_announcement(self):
        traces = [RoundTrace(3, "Psi1", "X", "Z", "X", a_bit=0, b_bit=1, c_bit=1)]
        published = ClassicalMessage("alice", PayloadKind.X_RESULT_PUBLICATION, (0,), (2,))
        with pytest.raises(MissingAnnouncementError):
            p3_extract_keys(traces, [published], KeyMode.CONTROLLED)


class TestCheckEavesdropping:

    def test_clean_sample(self):
        decision = check_eavesdropping([(0, 0)] * 100, 0.11)
        assert decision.qber == 0.0
        assert decision.proceed

    def test_quarter_disagreement(self):
        pairs = [(0, 1)] * 25 + [(1, 1)] * 75
        decision = check_eavesdropping(pairs, 0.11)
        assert decision.qber == 0.25
        assert not decision.proceed
        assert decision.disagreements == 25

    def test_threshold_is_inclusive(self):
        pairs = [(0, 1)] * 11 + [(0, 0)] * 89
        assert check_eavesdropping(pairs, 0.11).proceed

    def test_empty(self):
        with pytest.raises(EmptySampleError):
            check_eavesdropping([], 0.11)
