"""Session configuration for the QKD simulator."""
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from qkd_simulator.adversary import EveStrategy
from qkd_simulator.channels import NoiseSpec
from qkd_simulator.exceptions import ConfigError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.quantum_core import MeasurementBasis
from qkd_simulator.validators import validate_session_input

logger = get_logger("config")

SEED_ENV = "QKD_SEED"


class Protocol(Enum):
    P1 = "p1"
    P2 = "p2"
    P3_CONTROLLED = "p3-controlled"
    P3_THREE_PARTY = "p3-three-party"

    @property
    def is_controlled_family(self) -> bool:
        return self in (Protocol.P3_CONTROLLED, Protocol.P3_THREE_PARTY)

    @property
    def qubits_per_round(self) -> int:
        return 2 if self.is_controlled_family else 1


@dataclass
class SessionConfig:
    """
    Every parameter of one protocol run.

    Args:
        protocol: which protocol to run
        rounds: N, rounds per batch
        check_fraction: fraction of rounds sacrificed to the eavesdropping check
        abort_threshold: largest QBER that still proceeds
        attack: eavesdropper strategy
        epsilon: probability that Alice measures in Z (Protocol 3)
        noise: depolarizing channel noise
        seed: root seed of the run's random streams
        session_batches: batches of N rounds, each followed by a check (Protocol 3)
        hadamard_fraction: fraction of pairs Bob flags for Hadamards (Protocol 1)
        final_basis: session-wide measurement basis (Protocol 1)
        ec_block: first-pass error correction block size
        ec_passes: error correction passes
        security_param: bits subtracted from the final key length
        controller_permits: whether Alice publishes her X results (Protocol 3 controlled mode)
    """
    protocol: Protocol = Protocol.P2
    rounds: int = 1000
    check_fraction: float = 0.25
    abort_threshold: float = 0.11
    attack: EveStrategy = field(default_factory=EveStrategy.none)
    epsilon: float = 0.5
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    session_batches: int = 2
    hadamard_fraction: float = 0.5
    final_basis: MeasurementBasis = MeasurementBasis.Z
    ec_block: int = 16
    ec_passes: int = 4
    security_param: int = 64
    controller_permits: bool = True

    def as_validation_input(self) -> Dict[str, Any]:
        return {
            "rounds": self.rounds,
            "check_fraction": self.check_fraction,
            "abort_threshold": self.abort_threshold,
            "epsilon": self.epsilon,
            "noise_p": self.noise.p,
            "seed": self.seed,
            "session_batches": self.session_batches,
            "hadamard_fraction": self.hadamard_fraction,
            "ec_block": self.ec_block,
            "ec_passes": self.ec_passes,
            "security_param": self.security_param,
        }

    def validate(self) -> "SessionConfig":
        """Raise ConfigError if any parameter is out of range; returns self."""
        result = validate_session_input(self.as_validation_input())
        if result is not True:
            logger.error(f"Invalid session config: {result}")
            raise ConfigError(result)
        if not isinstance(self.protocol, Protocol):
            raise ConfigError(f"'protocol' must be a Protocol, got {self.protocol!r}")
        return self

    def check_count(self, population: Optional[int] = None) -> int:
        """Rounds sampled for the check out of `population` (default N)."""
        population = self.rounds if population is None else population
        return int(round(self.check_fraction * population))


def resolve_seed(cli_seed: Optional[int], default: int = 0) -> int:
    """
    Apply the QKD_SEED environment override to a command-line seed.

    Raises:
        ConfigError: QKD_SEED is set but not an integer
    """
    override = os.environ.get(SEED_ENV)
    if override is not None and override.strip():
        try:
            seed = int(override.strip(), 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got '{override}'") from None
        if cli_seed is not None and cli_seed != seed:
            logger.info(f"{SEED_ENV}={seed} overrides --seed {cli_seed}")
        return seed
    return default if cli_seed is None else cli_seed
