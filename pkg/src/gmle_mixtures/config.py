"""Loading and validating YAML/JSON input documents.

Every document goes through two phases: `load_document` returns either the
parsed mapping or a list of error messages, and a `validate_*` function
returns every problem it finds at once. Only a document without errors is
handed to the matching `from_dict` constructor.

Numbers are written with 17 significant digits so that floats round-trip
bit-exactly; they may be read back either as numbers or as strings.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import yaml

SPEC_REQUIRED_KEYS = {"loc_lo", "loc_hi", "scale_hi"}
SPEC_OPTIONAL_KEYS = {"scale_lo", "symmetric", "scale_values"}
SPEC_VALID_KEYS = SPEC_REQUIRED_KEYS | SPEC_OPTIONAL_KEYS

FIT_VALID_KEYS = {
    "loc_grid_size",
    "scale_grid_size",
    "max_em_iters",
    "loglik_rel_tol",
    "atom_weight_floor",
    "scale_floor",
    "rng_seed",
}

EXPERIMENT_REQUIRED_KEYS = {"truth", "spec", "sample_sizes"}
EXPERIMENT_OPTIONAL_KEYS = {"replications", "rng_seed", "comparison", "model", "fit"}
EXPERIMENT_VALID_KEYS = EXPERIMENT_REQUIRED_KEYS | EXPERIMENT_OPTIONAL_KEYS

COMPARISONS = {"TRUTH", "LIMIT_ORACLE", "BOTH"}
MODELS = {"joint", "independent"}

# Named support specifications accepted wherever a spec document is expected.
SPEC_PRESETS: dict[str, dict[str, Any]] = {
    "real-line": {"loc_lo": "-inf", "loc_hi": "inf", "scale_lo": 0.0, "scale_hi": 1.0},
    "halfline-binary": {"loc_lo": "-inf", "loc_hi": 0.0, "scale_values": [0.0, 1.0], "scale_hi": 1.0},
    "halfline": {"loc_lo": "-inf", "loc_hi": 0.0, "scale_lo": 0.0, "scale_hi": 2.0},
    "symmetric": {"loc_lo": -1.959964, "loc_hi": 1.959964, "scale_lo": 0.0, "scale_hi": 1.0, "symmetric": True},
}


def format_float(value: float) -> str:
    """Format a float with 17 significant digits.

    Args:
        value: Number to format

    Returns:
        Decimal string that parses back to the identical float
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def parse_float(value: object) -> float:
    """Parse a number given as int, float or decimal string (YAML `.inf` spellings included).

    Raises:
        ValueError: If the value is not a number
    """
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, int | float):
        return float(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in {".inf", "+.inf", "+inf"}:
            return math.inf
        if text == "-.inf":
            return -math.inf
        return float(text)
    raise ValueError(f"expected a number, got {value!r}")


def _is_number(value: object) -> bool:
    try:
        parse_float(value)
    except ValueError:
        return False
    return True


def load_document(filepath: Path) -> dict[str, Any] | list[str]:
    """Load a YAML or JSON mapping from disk.

    Returns:
        The mapping on success, or a list of error messages on failure
    """
    try:
        with filepath.open() as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        return [f"Invalid YAML/JSON in {filepath}: {e}"]
    except FileNotFoundError:
        return [f"File not found: {filepath}"]

    if data is None:
        return [f"Document is empty: {filepath}"]

    if not isinstance(data, dict):
        return [f"Document must be a mapping: {filepath}"]

    return data


def load_inline_or_file(text: str) -> dict[str, Any] | list[str]:
    """Parse an inline YAML/JSON mapping, or load it from a file if `text` names one."""
    candidate = Path(text)
    if candidate.suffix in {".json", ".yml", ".yaml"} and candidate.exists():
        return load_document(candidate)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        return [f"Invalid inline YAML/JSON: {e}"]
    if not isinstance(data, dict):
        return ["Inline document must be a mapping"]
    return data


def _validate_unknown_keys(data: dict[str, Any], valid: set[str], what: str) -> list[str]:
    """Report keys that are not part of the schema."""
    return [f"Unknown {what} key: {key}" for key in data if key not in valid]


def _validate_required_keys(data: dict[str, Any], required: set[str], what: str) -> list[str]:
    """Report required keys that are missing."""
    return [f"Missing required {what} key: {key}" for key in sorted(required) if key not in data]


def validate_support_spec(data: dict[str, Any]) -> list[str]:
    """Validate a support specification document.

    Args:
        data: Parsed mapping

    Returns:
        List of error messages (empty if valid)
    """
    errors = _validate_unknown_keys(data, SPEC_VALID_KEYS, "spec")
    required = set(SPEC_REQUIRED_KEYS)
    if "scale_values" in data:
        required.discard("scale_hi")
    errors.extend(_validate_required_keys(data, required, "spec"))

    for key in ("loc_lo", "loc_hi", "scale_lo", "scale_hi"):
        if key in data and not _is_number(data[key]):
            errors.append(f"{key} must be a number, got {data[key]!r}")
    if errors:
        return errors

    lo, hi = parse_float(data["loc_lo"]), parse_float(data["loc_hi"])
    if not lo < hi:
        errors.append(f"loc_lo must be below loc_hi, got [{lo}, {hi}]")

    if "scale_values" in data:
        values = data["scale_values"]
        if not isinstance(values, list) or not values:
            errors.append("scale_values must be a non-empty list")
        elif not all(_is_number(v) for v in values):
            errors.append("scale_values must contain numbers only")
        elif any(parse_float(v) < 0 or not math.isfinite(parse_float(v)) for v in values):
            errors.append("scale_values must be finite and non-negative")
    else:
        a = parse_float(data.get("scale_lo", 0.0))
        b = parse_float(data["scale_hi"])
        if a < 0:
            errors.append(f"scale_lo must be non-negative, got {a}")
        if not math.isfinite(b) or b < a:
            errors.append(f"scale_hi must be finite and at least scale_lo, got {b}")

    symmetric = data.get("symmetric", False)
    if not isinstance(symmetric, bool):
        errors.append("symmetric must be a boolean")
    elif symmetric and lo != -hi:
        errors.append(f"symmetric spec needs loc_lo = -loc_hi, got [{lo}, {hi}]")

    return errors


def validate_fit_config(data: dict[str, Any]) -> list[str]:
    """Validate a fit configuration document.

    Args:
        data: Parsed mapping

    Returns:
        List of error messages (empty if valid)
    """
    errors = _validate_unknown_keys(data, FIT_VALID_KEYS, "fit config")
    for key in ("loc_grid_size", "scale_grid_size"):
        if key in data and (not isinstance(data[key], int) or isinstance(data[key], bool) or data[key] < 2):
            errors.append(f"{key} must be an integer >= 2")
    if "max_em_iters" in data and (not isinstance(data["max_em_iters"], int) or data["max_em_iters"] < 1):
        errors.append("max_em_iters must be a positive integer")
    for key in ("loglik_rel_tol", "atom_weight_floor", "scale_floor"):
        if key in data and (not _is_number(data[key]) or not parse_float(data[key]) > 0):
            errors.append(f"{key} must be a positive number")
    if "rng_seed" in data and (not isinstance(data["rng_seed"], int) or not 0 <= data["rng_seed"] < 2**64):
        errors.append("rng_seed must be an unsigned 64-bit integer")
    return errors


def validate_mixing(data: dict[str, Any]) -> list[str]:
    """Validate the shape of a mixing distribution document.

    Value invariants (weights summing to one, symmetry) are checked when the
    distribution is constructed.
    """
    errors = _validate_unknown_keys(data, {"atoms", "symmetric"}, "mixing")
    atoms = data.get("atoms")
    if not isinstance(atoms, list) or not atoms:
        errors.append("atoms must be a non-empty list")
        return errors

    for i, atom in enumerate(atoms):
        if not isinstance(atom, dict):
            errors.append(f"atom {i} must be a mapping")
            continue
        loc = atom.get("loc")
        if not isinstance(loc, dict) or loc.get("type") not in {"point", "blob"}:
            errors.append(f"atom {i}: loc must be a mapping with type 'point' or 'blob'")
        elif loc["type"] == "point" and not _is_number(loc.get("x")):
            errors.append(f"atom {i}: point location needs a numeric x")
        elif loc["type"] == "blob" and not (_is_number(loc.get("mu")) and _is_number(loc.get("tau2"))):
            errors.append(f"atom {i}: blob location needs numeric mu and tau2")
        for key in ("s", "p"):
            if not _is_number(atom.get(key)):
                errors.append(f"atom {i}: {key} must be a number")
    if not isinstance(data.get("symmetric", False), bool):
        errors.append("symmetric must be a boolean")
    return errors


def validate_experiment_config(data: dict[str, Any]) -> list[str]:
    """Validate an experiment configuration document."""
    errors = _validate_unknown_keys(data, EXPERIMENT_VALID_KEYS, "experiment")
    errors.extend(_validate_required_keys(data, EXPERIMENT_REQUIRED_KEYS, "experiment"))

    sizes = data.get("sample_sizes")
    if "sample_sizes" in data:
        if not isinstance(sizes, list) or not sizes or not all(isinstance(n, int) and n >= 1 for n in sizes):
            errors.append("sample_sizes must be a non-empty list of positive integers")
        elif any(b <= a for a, b in zip(sizes, sizes[1:], strict=False)):
            errors.append("sample_sizes must be strictly increasing")

    reps = data.get("replications", 1)
    if not isinstance(reps, int) or reps < 1:
        errors.append("replications must be a positive integer")

    if str(data.get("comparison", "BOTH")).upper() not in COMPARISONS:
        errors.append(f"comparison must be one of {sorted(COMPARISONS)}")
    if data.get("model", "joint") not in MODELS:
        errors.append(f"model must be one of {sorted(MODELS)}")

    if isinstance(data.get("truth"), dict):
        errors.extend(f"truth: {e}" for e in validate_mixing(data["truth"]))
    elif "truth" in data:
        errors.append("truth must be a mixing distribution mapping")

    spec = data.get("spec")
    if isinstance(spec, str):
        if spec not in SPEC_PRESETS:
            errors.append(f"Unknown spec preset: {spec}")
    elif isinstance(spec, dict):
        errors.extend(f"spec: {e}" for e in validate_support_spec(spec))
    elif "spec" in data:
        errors.append("spec must be a mapping or a preset name")

    if isinstance(data.get("fit"), dict):
        errors.extend(f"fit: {e}" for e in validate_fit_config(data["fit"]))
    elif "fit" in data:
        errors.append("fit must be a mapping")

    return errors


def resolve_spec_document(spec: str | dict[str, Any]) -> dict[str, Any]:
    """Expand a preset name into its spec mapping; mappings pass through."""
    if isinstance(spec, str):
        return dict(SPEC_PRESETS[spec])
    return spec


def write_json(filepath: Path, data: dict[str, Any]) -> None:
    """Write a JSON document with a trailing newline."""
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with filepath.open("w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")
