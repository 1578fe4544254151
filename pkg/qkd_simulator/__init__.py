"""Simulator for three entanglement-based quantum key distribution protocols."""
from qkd_simulator.adversary import EveStrategy, han_attack_demo, parse_strategy
from qkd_simulator.analysis import build_report, efficiency_qubits, efficiency_total, summarize
from qkd_simulator.config import Protocol, SessionConfig
from qkd_simulator.oracle import exact_qber_oracle
from qkd_simulator.protocols import RunResult, run_protocol1, run_protocol2, run_protocol3, run_session
from qkd_simulator.states import NamedState, named_state, verify_identities

__version__ = "0.1.0"

__all__ = [
    "EveStrategy",
    "NamedState",
    "Protocol",
    "RunResult",
    "SessionConfig",
    "build_report",
    "efficiency_qubits",
    "efficiency_total",
    "exact_qber_oracle",
    "han_attack_demo",
    "named_state",
    "parse_strategy",
    "run_protocol1",
    "run_protocol2",
    "run_protocol3",
    "run_session",
    "summarize",
    "verify_identities",
]
