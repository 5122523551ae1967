"""
Experiment configuration loading and validation.
"""

import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from wak_converse.code_model import DEFAULT_WORK_CAP, HELPER_ENCODERS
from wak_converse.prob_core import (
    JointPmf,
    ProbabilityError,
    dsbs,
    product_joint,
    uniform_joint,
)
from wak_converse.serialization import load_source
from wak_converse.types_method import DEFAULT_ENUMERATION_CAP

OUTPUT_FORMATS = ("csv", "json")
BOUND_MODES = ("exact", "mc", "off")

_NUMBER = r"\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*"
_INTEGER = r"\s*([0-9]+)\s*"
_FAMILIES = {
    name: re.compile(rf"^{name}\({args}\)$", re.IGNORECASE)
    for name, args in (
        ("dsbs", _NUMBER),
        ("uniform", f"{_INTEGER},{_INTEGER}"),
        ("product", f"{_NUMBER},{_NUMBER}"),
    )
}


class ConfigValidationError(Exception):
    """Exception raised when configuration validation fails."""

    pass


@dataclass
class ExperimentConfig:
    """
    Configuration of a blocklength sweep.

    Attributes:
        source: Named family ("dsbs(0.1)", "uniform(2,2)",
            "product(0.3,0.6)") or path to a source JSON file.
        blocklengths: Blocklengths to sweep, each at least 1.
        r0: Helper rate in bits per symbol.
        r2: Main rate in bits per symbol.
        seed: Base seed.
        codes_per_blocklength: Random codes drawn per blocklength and
            helper encoder.
        helpers: Helper encoders tried ("binning", "prefix").
        mc_trials: Monte Carlo trials when exact evaluation is capped.
        threads: Blocklengths evaluated concurrently.
        enumeration_cap: Largest enumerated set (types or class members).
        work_cap: Largest |X|^n|Y|^n evaluated exactly.
        restarts: Optimizer restarts.
        iterations: Optimizer iteration limit per start.
        tolerance: Optimizer tolerance.
        bound_mode: "exact", "mc" or "off".
        bound_trials: Type draws in "mc" bound mode.
        output_path: Output file (optional; CLI default otherwise).
        output_format: "csv" or "json".
        base_dir: Directory relative source paths are resolved against.
    """

    source: str
    blocklengths: List[int]
    r0: float
    r2: float
    seed: int = 0
    codes_per_blocklength: int = 16
    helpers: List[str] = field(default_factory=lambda: list(HELPER_ENCODERS))
    mc_trials: int = 100_000
    threads: int = 1
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP
    work_cap: int = DEFAULT_WORK_CAP
    restarts: int = 32
    iterations: int = 4000
    tolerance: float = 1e-6
    bound_mode: str = "exact"
    bound_trials: int = 10_000
    output_path: Optional[str] = None
    output_format: str = "csv"
    base_dir: str = field(default=".")


def resolve_source(spec: str, base_dir: str = ".") -> JointPmf:
    """Build a source from a named family or load it from JSON.

    Handles:
    - dsbs(p): doubly symmetric binary source
    - uniform(kx,ky): uniform over a kx × ky alphabet
    - product(a,b): independent Bernoulli(a) and Bernoulli(b)
    - anything else: path to a source JSON file

    Args:
        spec: Source specification.
        base_dir: Directory for relative paths.

    Returns:
        The joint pmf.

    Raises:
        ConfigValidationError: If a family's parameters are invalid.
        FileNotFoundError: If a path does not exist.
        SchemaError: If the JSON file is not a valid source.
    """
    spec = spec.strip()
    try:
        match = _FAMILIES["dsbs"].match(spec)
        if match:
            return dsbs(float(match.group(1)))
        match = _FAMILIES["uniform"].match(spec)
        if match:
            return uniform_joint(int(match.group(1)), int(match.group(2)))
        match = _FAMILIES["product"].match(spec)
        if match:
            return product_joint(
                float(match.group(1)), float(match.group(2))
            )
    except ProbabilityError as e:
        raise ConfigValidationError(f"Invalid source '{spec}': {e}") from e
    path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
    return load_source(path)


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = data.get(name, {})
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigValidationError(f"'{name}' section must be a dictionary")
    return section


def _integer(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(f"{name} must be an integer")
    if value < minimum:
        raise ConfigValidationError(f"{name} must be at least {minimum}")
    return value


def _number(value: Any, name: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{name} must be a number")
    if positive and not value > 0:
        raise ConfigValidationError(f"{name} must be positive")
    if not value >= 0:
        raise ConfigValidationError(f"{name} must be nonnegative")
    return float(value)


def load_config(path: str) -> ExperimentConfig:
    """Load a sweep configuration from a YAML file.

    Args:
        path: Path to the configuration YAML file.

    Returns:
        ExperimentConfig with validated values and defaults applied.

    Raises:
        FileNotFoundError: If the configuration file does not exist.
        yaml.YAMLError: If the YAML syntax is invalid.
        ConfigValidationError: If required fields are missing or invalid.
    """
    with open(path) as f:
        data = yaml.safe_load(f)

    if not isinstance(data, dict):
        raise ConfigValidationError(
            "Configuration file must contain a YAML dictionary"
        )

    # Source
    if "source" not in data:
        raise ConfigValidationError(
            "Configuration must contain 'source' field (required)"
        )
    source = data["source"]
    if not isinstance(source, str) or not source.strip():
        raise ConfigValidationError("'source' must be a non-empty string")

    # Blocklengths
    if "blocklengths" not in data:
        raise ConfigValidationError(
            "Configuration must contain 'blocklengths' field (required)"
        )
    blocklengths = data["blocklengths"]
    if not isinstance(blocklengths, list):
        raise ConfigValidationError("'blocklengths' must be a list")
    if len(blocklengths) == 0:
        raise ConfigValidationError("'blocklengths' list cannot be empty")
    blocklengths = [_integer(n, "each blocklength", 1) for n in blocklengths]

    # Rates
    if "rates" not in data:
        raise ConfigValidationError(
            "Configuration must contain 'rates' section (required)"
        )
    rates = _section(data, "rates")
    for key in ("r0", "r2"):
        if key not in rates:
            raise ConfigValidationError(f"rates.{key} is required")
    r0 = _number(rates["r0"], "rates.r0")
    r2 = _number(rates["r2"], "rates.r2")

    limits = _section(data, "limits")
    optimizer = _section(data, "optimizer")
    bound = _section(data, "bound")
    output = _section(data, "output")

    bound_mode = bound.get("mode", "exact")
    if bound_mode is False:
        # YAML reads a bare off as false
        bound_mode = "off"
    if bound_mode not in BOUND_MODES:
        raise ConfigValidationError(
            f"bound.mode must be one of {', '.join(BOUND_MODES)}"
        )
    helpers = data.get("helpers", list(HELPER_ENCODERS))
    if (
        not isinstance(helpers, list)
        or not helpers
        or any(h not in HELPER_ENCODERS for h in helpers)
    ):
        raise ConfigValidationError(
            "helpers must be a nonempty list drawn from "
            f"{', '.join(HELPER_ENCODERS)}"
        )
    output_format = output.get("format", "csv")
    if output_format not in OUTPUT_FORMATS:
        raise ConfigValidationError(
            f"output.format must be one of {', '.join(OUTPUT_FORMATS)}"
        )
    output_path = output.get("path")
    if output_path is not None and not isinstance(output_path, str):
        raise ConfigValidationError("output.path must be a string")

    return ExperimentConfig(
        source=source,
        blocklengths=blocklengths,
        r0=r0,
        r2=r2,
        seed=_integer(data.get("seed", 0), "seed", 0),
        codes_per_blocklength=_integer(
            data.get("codes_per_blocklength", 16), "codes_per_blocklength", 1
        ),
        helpers=helpers,
        mc_trials=_integer(data.get("mc_trials", 100_000), "mc_trials", 1),
        threads=_integer(data.get("threads", 1), "threads", 1),
        enumeration_cap=_integer(
            limits.get("enumeration_cap", DEFAULT_ENUMERATION_CAP),
            "limits.enumeration_cap",
            1,
        ),
        work_cap=_integer(
            limits.get("work_cap", DEFAULT_WORK_CAP), "limits.work_cap", 1
        ),
        restarts=_integer(
            optimizer.get("restarts", 32), "optimizer.restarts", 0
        ),
        iterations=_integer(
            optimizer.get("iterations", 4000), "optimizer.iterations", 1
        ),
        tolerance=_number(
            optimizer.get("tolerance", 1e-6),
            "optimizer.tolerance",
            positive=True,
        ),
        bound_mode=bound_mode,
        bound_trials=_integer(
            bound.get("trials", 10_000), "bound.trials", 1
        ),
        output_path=output_path,
        output_format=output_format,
        base_dir=os.path.dirname(os.path.abspath(path)),
    )
