"""Efficiency figures, run reports and multi-run summaries.

Efficiencies are exact fractions of the traffic counters, so a figure
recomputed from a stored report always matches bit for bit.
"""
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from qkd_simulator.channels import TrafficCounters
from qkd_simulator.exceptions import EfficiencyUndefinedError, EmptyInputError, HeterogeneousCellError
from qkd_simulator.logging_config import get_logger
from qkd_simulator.postprocess import bits_to_hex

logger = get_logger("analysis")

# two-sided 99% normal quantile
Z_99 = 2.5758293035489

REPORT_KEYS = ("protocol", "attack", "seed", "n_rounds", "check_fraction", "abort_threshold",
               "epsilon", "noise_p", "qber", "qber_oracle", "aborted", "key_len_sifted",
               "key_len_final", "counters", "efficiency_total", "efficiency_qubits",
               "final_key_hex", "toeplitz_seed_hex")


@dataclass(frozen=True)
class EfficiencyInputs:
    b_s: int
    q_t: int
    b_t: int
    q_u: int

    @classmethod
    def from_counters(cls, counters: TrafficCounters) -> "EfficiencyInputs":
        return cls(counters.b_s, counters.q_t, counters.b_t, counters.q_u)


def efficiency_total(inputs: EfficiencyInputs) -> Fraction:
    """
    b_s / (q_t + b_t).

    Raises:
        EfficiencyUndefinedError: q_t + b_t is zero
    """
    denominator = inputs.q_t + inputs.b_t
    if denominator == 0:
        raise EfficiencyUndefinedError("total efficiency needs q_t + b_t > 0")
    return Fraction(inputs.b_s, denominator)


def efficiency_qubits(inputs: EfficiencyInputs) -> Fraction:
    """
    q_u / q_t.

    Raises:
        EfficiencyUndefinedError: q_t is zero
    """
    if inputs.q_t == 0:
        raise EfficiencyUndefinedError("qubit efficiency needs q_t > 0")
    return Fraction(inputs.q_u, inputs.q_t)


def asymptotic_inputs(counters: TrafficCounters, sifted_length: int) -> EfficiencyInputs:
    """
    Counters with the check fraction taken to zero: checked qubits leave q_t,
    b_t shrinks in proportion, and the sifted key stands in for b_s.
    """
    q_t = counters.q_t - counters.q_checked
    b_t = Fraction(counters.b_t * q_t, counters.q_t) if counters.q_t else Fraction(0)
    return EfficiencyInputs(sifted_length, q_t, b_t, counters.q_u)


def asymptotic_efficiencies(counters: TrafficCounters, sifted_length: int,
                            aborted: bool) -> Tuple[Optional[Fraction], Optional[Fraction]]:
    """Total and qubit efficiency in the zero-check-fraction limit; None for aborted runs."""
    if aborted:
        return None, None
    asym = asymptotic_inputs(counters, sifted_length)
    if asym.q_t <= 0:
        return None, None
    return Fraction(asym.b_s) / (asym.q_t + asym.b_t), Fraction(asym.q_u, asym.q_t)


def mutual_information(joint: Dict[Tuple[Hashable, Hashable], float]) -> float:
    """I(X;Y) in bits from a joint distribution keyed by (x, y)."""
    total = float(sum(joint.values()))
    if total <= 0:
        raise EmptyInputError("mutual information needs a non-empty distribution")
    px: Dict[Hashable, float] = {}
    py: Dict[Hashable, float] = {}
    for (x, y), p in joint.items():
        px[x] = px.get(x, 0.0) + p / total
        py[y] = py.get(y, 0.0) + p / total
    info = 0.0
    for (x, y), p in joint.items():
        pxy = p / total
        if pxy > 0:
            info += pxy * np.log2(pxy / (px[x] * py[y]))
    return max(0.0, float(info))


def empirical_mutual_information(pairs: Iterable[Tuple[Hashable, Hashable]]) -> float:
    """Plug-in estimate of I(X;Y) from sampled (x, y) pairs."""
    counts = Counter(pairs)
    if not counts:
        raise EmptyInputError("no samples")
    return mutual_information({key: float(n) for key, n in counts.items()})


@dataclass
class RunReport:
    """
    Flat record of one run. The first block of fields is the JSON schema;
    the rest is carried for summaries and the extended report.
    """
    protocol: str
    attack: str
    seed: int
    n_rounds: int
    check_fraction: float
    abort_threshold: float
    epsilon: float
    noise_p: float
    qber: float
    qber_oracle: Optional[float]
    aborted: bool
    key_len_sifted: int
    key_len_final: int
    counters: TrafficCounters
    efficiency_total: Fraction
    efficiency_qubits: Fraction
    final_key_hex: str
    toeplitz_seed_hex: str
    key_len_raw: int = 0
    check_sample: int = 0
    check_disagreements: int = 0
    subset_qbers: Dict[str, float] = field(default_factory=dict)
    basis_yield: Dict[str, float] = field(default_factory=dict)
    efficiency_total_asymptotic: Optional[Fraction] = None
    efficiency_qubits_asymptotic: Optional[Fraction] = None
    eve_guess_accuracy: Optional[float] = None
    ec_leaked: int = 0
    ec_converged: bool = True
    key_withheld: bool = False

    def recomputed_efficiencies(self) -> Tuple[Fraction, Fraction]:
        inputs = EfficiencyInputs.from_counters(self.counters)
        return efficiency_total(inputs), efficiency_qubits(inputs)

    def to_json_dict(self, extended: bool = False) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "protocol": self.protocol,
            "attack": self.attack,
            "seed": self.seed,
            "n_rounds": self.n_rounds,
            "check_fraction": self.check_fraction,
            "abort_threshold": self.abort_threshold,
            "epsilon": self.epsilon,
            "noise_p": self.noise_p,
            "qber": self.qber,
            "qber_oracle": self.qber_oracle,
            "aborted": self.aborted,
            "key_len_sifted": self.key_len_sifted,
            "key_len_final": self.key_len_final,
            "counters": self.counters.as_dict(),
            "efficiency_total": float(self.efficiency_total),
            "efficiency_qubits": float(self.efficiency_qubits),
            "final_key_hex": self.final_key_hex,
            "toeplitz_seed_hex": self.toeplitz_seed_hex,
        }
        if extended:
            payload["extended"] = {
                "key_len_raw": self.key_len_raw,
                "check_sample": self.check_sample,
                "check_disagreements": self.check_disagreements,
                "q_checked": self.counters.q_checked,
                "subset_qbers": dict(self.subset_qbers),
                "basis_yield": dict(self.basis_yield),
                "efficiency_total_asymptotic": _optional_float(self.efficiency_total_asymptotic),
                "efficiency_qubits_asymptotic": _optional_float(self.efficiency_qubits_asymptotic),
                "eve_guess_accuracy": self.eve_guess_accuracy,
                "ec_leaked": self.ec_leaked,
                "ec_converged": self.ec_converged,
                "key_withheld": self.key_withheld,
            }
        return payload

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "RunReport":
        """Rebuild a report; efficiencies are recomputed from the counters."""
        counters = TrafficCounters(**data["counters"])
        extended = data.get("extended", {})
        counters.q_checked = extended.get("q_checked", 0)
        inputs = EfficiencyInputs.from_counters(counters)
        asym_total, asym_qubits = asymptotic_efficiencies(counters, data["key_len_sifted"], data["aborted"])
        return cls(
            protocol=data["protocol"], attack=data["attack"], seed=data["seed"],
            n_rounds=data["n_rounds"], check_fraction=data["check_fraction"],
            abort_threshold=data["abort_threshold"], epsilon=data["epsilon"],
            noise_p=data["noise_p"], qber=data["qber"], qber_oracle=data["qber_oracle"],
            aborted=data["aborted"], key_len_sifted=data["key_len_sifted"],
            key_len_final=data["key_len_final"], counters=counters,
            efficiency_total=efficiency_total(inputs), efficiency_qubits=efficiency_qubits(inputs),
            final_key_hex=data["final_key_hex"], toeplitz_seed_hex=data["toeplitz_seed_hex"],
            key_len_raw=extended.get("key_len_raw", 0),
            check_sample=extended.get("check_sample", 0),
            check_disagreements=extended.get("check_disagreements", 0),
            subset_qbers=extended.get("subset_qbers", {}),
            basis_yield=extended.get("basis_yield", {}),
            efficiency_total_asymptotic=asym_total if extended else None,
            efficiency_qubits_asymptotic=asym_qubits if extended else None,
            eve_guess_accuracy=extended.get("eve_guess_accuracy"),
            ec_leaked=extended.get("ec_leaked", 0),
            ec_converged=extended.get("ec_converged", True),
            key_withheld=extended.get("key_withheld", False),
        )


def _optional_float(value: Optional[Fraction]) -> Optional[float]:
    return None if value is None else float(value)


def build_report(result, qber_oracle: Optional[float] = None) -> RunReport:
    """
    Flatten a RunResult into a RunReport.

    Args:
        result: protocols.RunResult of one run
        qber_oracle: exact QBER for the configuration, when modelled
    """
    cfg = result.config
    counters = result.counters
    inputs = EfficiencyInputs.from_counters(counters)
    asym_total, asym_qubits = asymptotic_efficiencies(counters, result.sifted_length, result.aborted)
    return RunReport(
        protocol=cfg.protocol.value,
        attack=cfg.attack.name,
        seed=cfg.seed,
        n_rounds=cfg.rounds,
        check_fraction=cfg.check_fraction,
        abort_threshold=cfg.abort_threshold,
        epsilon=cfg.epsilon,
        noise_p=cfg.noise.p,
        qber=result.qber_estimate,
        qber_oracle=qber_oracle,
        aborted=result.aborted,
        key_len_sifted=result.sifted_length,
        key_len_final=len(result.final_key),
        counters=counters,
        efficiency_total=efficiency_total(inputs),
        efficiency_qubits=efficiency_qubits(inputs),
        final_key_hex=bits_to_hex(result.final_key),
        toeplitz_seed_hex=result.toeplitz_seed.hex() if result.toeplitz_seed else "",
        key_len_raw=len(result.traces),
        check_sample=result.check_sample,
        check_disagreements=result.check_disagreements,
        subset_qbers=dict(result.subset_qbers),
        basis_yield=dict(result.basis_yield),
        efficiency_total_asymptotic=asym_total,
        efficiency_qubits_asymptotic=asym_qubits,
        eve_guess_accuracy=result.eve_guess_accuracy,
        ec_leaked=result.leaked,
        ec_converged=all(c.converged for c in result.corrections.values()),
        key_withheld=result.key_withheld,
    )


@dataclass
class CellSummary:
    """Aggregate of the runs of one sweep cell."""
    protocol: str
    attack: str
    runs: int
    mean_qber: Fraction
    ci_low: float
    ci_high: float
    abort_rate: Fraction
    mean_efficiency_total: Fraction
    mean_efficiency_qubits: Fraction
    qber_oracle: Optional[float] = None
    mean_yield_z: Optional[float] = None
    mean_yield_x: Optional[float] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    def to_row(self) -> Dict[str, Any]:
        row = dict(self.parameters)
        row.update({
            "protocol": self.protocol,
            "attack": self.attack,
            "runs": self.runs,
            "mean_qber": float(self.mean_qber),
            "ci99_low": self.ci_low,
            "ci99_high": self.ci_high,
            "qber_oracle": self.qber_oracle,
            "abort_rate": float(self.abort_rate),
            "mean_efficiency_total": float(self.mean_efficiency_total),
            "mean_efficiency_qubits": float(self.mean_efficiency_qubits),
            "mean_yield_z": self.mean_yield_z,
            "mean_yield_x": self.mean_yield_x,
        })
        return row


def binomial_interval(successes: int, trials: int, z: float = Z_99) -> Tuple[float, float]:
    """Normal-approximation interval with continuity correction, clipped to [0, 1]."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    half = z * math.sqrt(p * (1.0 - p) / trials) + 1.0 / (2 * trials)
    return max(0.0, p - half), min(1.0, p + half)


def summarize(reports: Sequence[RunReport], parameters: Optional[Dict[str, Any]] = None) -> CellSummary:
    """
    Pool the runs of one cell: QBER over every compared check bit, its 99%
    interval, the abort rate and mean efficiencies.

    Raises:
        EmptyInputError: no reports
        HeterogeneousCellError: reports disagree on protocol or attack
    """
    if not reports:
        raise EmptyInputError("summarize needs at least one report")
    cells = {(r.protocol, r.attack) for r in reports}
    if len(cells) > 1:
        raise HeterogeneousCellError(f"reports span several cells: {sorted(cells)}")
    protocol, attack = cells.pop()

    sample = sum(r.check_sample for r in reports)
    errors = sum(r.check_disagreements for r in reports)
    if sample:
        mean_qber = Fraction(errors, sample)
    else:
        mean_qber = sum((Fraction(r.qber) for r in reports), Fraction(0)) / len(reports)
    low, high = binomial_interval(errors, sample) if sample else (float(mean_qber), float(mean_qber))
    runs = len(reports)
    yields_z = [r.basis_yield["Z"] for r in reports if "Z" in r.basis_yield]
    yields_x = [r.basis_yield["X"] for r in reports if "X" in r.basis_yield]
    summary = CellSummary(
        protocol=protocol,
        attack=attack,
        runs=runs,
        mean_qber=mean_qber,
        ci_low=low,
        ci_high=high,
        abort_rate=Fraction(sum(r.aborted for r in reports), runs),
        mean_efficiency_total=sum((r.efficiency_total for r in reports), Fraction(0)) / runs,
        mean_efficiency_qubits=sum((r.efficiency_qubits for r in reports), Fraction(0)) / runs,
        qber_oracle=reports[0].qber_oracle,
        mean_yield_z=float(np.mean(yields_z)) if yields_z else None,
        mean_yield_x=float(np.mean(yields_x)) if yields_x else None,
        parameters=dict(parameters or {}),
    )
    logger.debug(f"Summarized {runs} runs of {protocol}/{attack}: qber {float(mean_qber):.4f}")
    return summary
