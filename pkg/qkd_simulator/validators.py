"""Input validation for QKD session parameters."""
from typing import Any, Dict, List, Union

MIN_ROUNDS = 20
MIN_CHECK_SAMPLE = 10
MAX_SEED = 2 ** 64


def validate_dict_input(input_data: Any) -> Union[bool, str]:
    """Validate if input is a dictionary."""
    if not isinstance(input_data, dict):
        return "Input must be a dictionary"
    return True


def validate_required_keys(input_data: Dict, required_keys: List[str]) -> Union[bool, str]:
    """Validate if all required keys are present."""
    for key in required_keys:
        if key not in input_data:
            return f"Missing required key: {key}"
    return True


def validate_count(name: str, value: Any, minimum: int = 1) -> Union[bool, str]:
    """Validate an integer count with a lower bound."""
    if isinstance(value, bool) or not isinstance(value, int):
        return f"'{name}' must be an integer, got {type(value).__name__}"
    if value < minimum:
        return f"'{name}' must be at least {minimum}, got {value}"
    return True


def validate_probability(name: str, value: Any, low_open: bool = False,
                         high_open: bool = False) -> Union[bool, str]:
    """Validate a real in [0, 1]; either end may be excluded."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return f"'{name}' must be a number, got {type(value).__name__}"
    low_ok = value > 0 if low_open else value >= 0
    high_ok = value < 1 if high_open else value <= 1
    if not (low_ok and high_ok):
        interval = f"{'(' if low_open else '['}0, 1{')' if high_open else ']'}"
        return f"'{name}' must lie in {interval}, got {value}"
    return True


def validate_seed(seed: Any) -> Union[bool, str]:
    """Validate a 64-bit unsigned seed."""
    if isinstance(seed, bool) or not isinstance(seed, int):
        return f"'seed' must be an integer, got {type(seed).__name__}"
    if not (0 <= seed < MAX_SEED):
        return f"'seed' must be between 0 and 2**64 - 1, got {seed}"
    return True


def validate_check_sample(rounds: int, check_fraction: float) -> Union[bool, str]:
    """The check sample must hold at least MIN_CHECK_SAMPLE rounds."""
    if check_fraction * rounds < MIN_CHECK_SAMPLE:
        return (f"check_fraction * rounds must be at least {MIN_CHECK_SAMPLE}, "
                f"got {check_fraction} * {rounds}")
    return True


def validate_session_input(input_data: Dict[str, Any]) -> Union[bool, str]:
    """Validate the numeric fields of a session configuration."""
    dict_validation = validate_dict_input(input_data)
    if dict_validation is not True:
        return dict_validation

    required_keys = ["rounds", "check_fraction", "abort_threshold", "epsilon",
                     "noise_p", "seed", "session_batches", "hadamard_fraction"]
    keys_validation = validate_required_keys(input_data, required_keys)
    if keys_validation is not True:
        return keys_validation

    checks = [
        validate_count("rounds", input_data["rounds"], MIN_ROUNDS),
        validate_probability("check_fraction", input_data["check_fraction"], True, True),
        validate_probability("abort_threshold", input_data["abort_threshold"], True, True),
        validate_probability("epsilon", input_data["epsilon"], low_open=True),
        validate_probability("noise_p", input_data["noise_p"]),
        validate_probability("hadamard_fraction", input_data["hadamard_fraction"]),
        validate_seed(input_data["seed"]),
        validate_count("session_batches", input_data["session_batches"]),
    ]
    for result in checks:
        if result is not True:
            return result

    # extra postprocessing knobs are optional
    for name, minimum in (("ec_block", 2), ("ec_passes", 1), ("security_param", 0)):
        if name in input_data:
            result = validate_count(name, input_data[name], minimum)
            if result is not True:
                return result

    return validate_check_sample(input_data["rounds"], input_data["check_fraction"])
