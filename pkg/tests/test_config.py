"""Tests for document loading and validation."""

from __future__ import annotations

import json
import math
from pathlib import Path
from textwrap import dedent

import pytest

from gmle_mixtures.config import (
    SPEC_PRESETS,
    format_float,
    load_document,
    load_inline_or_file,
    parse_float,
    resolve_spec_document,
    validate_experiment_config,
    validate_fit_config,
    validate_mixing,
    validate_support_spec,
    write_json,
)
from gmle_mixtures.model import SupportSpec


@pytest.fixture
def temp_document(tmp_path: Path):
    """Create a temporary YAML document."""

    def _create(content: str, name: str = "doc.yml") -> Path:
        path = tmp_path / name
        path.write_text(dedent(content))
        return path

    return _create


class TestFloats:
    """Tests for format_float and parse_float."""

    @pytest.mark.parametrize("value", [0.1, 1 / 3, -2.5e-300, 1.959964, 5e-324, 1.7976931348623157e308])
    def test_round_trip(self, value):
        """Test that 17 significant digits parse back to the same float."""
        assert parse_float(format_float(value)) == value

    def test_special_values(self):
        """Test the spelling of infinities and NaN."""
        assert format_float(math.inf) == "inf"
        assert format_float(-math.inf) == "-inf"
        assert format_float(math.nan) == "nan"

    @pytest.mark.parametrize(
        ("text", "expected"), [(".inf", math.inf), ("-.inf", -math.inf), ("-inf", -math.inf), (3, 3.0)]
    )
    def test_parse_spellings(self, text, expected):
        """Test the accepted YAML and plain spellings."""
        assert parse_float(text) == expected

    @pytest.mark.parametrize("value", [True, None, "abc", [1.0]])
    def test_parse_rejects(self, value):
        """Test that non-numbers are rejected."""
        with pytest.raises(ValueError, match="number|convert"):
            parse_float(value)


class TestLoadDocument:
    """Tests for load_document and load_inline_or_file."""

    def test_valid_yaml(self, temp_document):
        """Test that a YAML mapping is returned as a dict."""
        path = temp_document("""
            loc_lo: -.inf
            loc_hi: 0.0
            scale_hi: 2.0
        """)
        data = load_document(path)
        assert data == {"loc_lo": -math.inf, "loc_hi": 0.0, "scale_hi": 2.0}

    def test_json_is_yaml(self, tmp_path: Path):
        """Test that JSON documents load through the same path."""
        path = tmp_path / "doc.json"
        path.write_text(json.dumps({"loc_lo": "-inf", "loc_hi": "inf", "scale_hi": 1.0}))
        assert load_document(path) == {"loc_lo": "-inf", "loc_hi": "inf", "scale_hi": 1.0}

    def test_missing_file(self, tmp_path: Path):
        """Test that a missing file is reported as an error message."""
        errors = load_document(tmp_path / "absent.yml")
        assert isinstance(errors, list)
        assert "File not found" in errors[0]

    def test_empty_file(self, temp_document):
        """Test that an empty document is reported."""
        errors = load_document(temp_document(""))
        assert "empty" in errors[0]

    def test_not_a_mapping(self, temp_document):
        """Test that a list document is reported."""
        errors = load_document(temp_document("- 1\n- 2\n"))
        assert "mapping" in errors[0]

    def test_invalid_yaml(self, temp_document):
        """Test that a syntax error is reported."""
        errors = load_document(temp_document("key: [unclosed\n"))
        assert "Invalid YAML/JSON" in errors[0]

    def test_inline(self):
        """Test that inline JSON is parsed."""
        assert load_inline_or_file('{"loc_lo": -1, "loc_hi": 1, "scale_hi": 1}') == {
            "loc_lo": -1,
            "loc_hi": 1,
            "scale_hi": 1,
        }

    def test_inline_names_a_file(self, temp_document):
        """Test that a path to a document is loaded instead of parsed."""
        path = temp_document("loc_lo: 0\nloc_hi: 1\nscale_hi: 1\n", name="spec.yaml")
        assert load_inline_or_file(str(path)) == {"loc_lo": 0, "loc_hi": 1, "scale_hi": 1}

    def test_inline_scalar(self):
        """Test that an inline scalar is not a document."""
        assert load_inline_or_file("3") == ["Inline document must be a mapping"]


class TestValidateSupportSpec:
    """Tests for validate_support_spec."""

    @pytest.mark.parametrize("name", sorted(SPEC_PRESETS))
    def test_presets_are_valid(self, name):
        """Test that every preset validates and builds."""
        document = resolve_spec_document(name)
        assert validate_support_spec(document) == []
        SupportSpec.from_dict(document)

    def test_symmetric_preset(self):
        """Test that the symmetric preset is [-1.959964, 1.959964] x [0, 1]."""
        spec = SupportSpec.from_dict(resolve_spec_document("symmetric"))
        assert spec == SupportSpec.symmetric_interval(1.959964, 1.0)

    def test_missing_and_unknown_keys(self):
        """Test that all key problems are reported together."""
        errors = validate_support_spec({"loc_lo": 0, "colour": "red"})
        assert "Unknown spec key: colour" in errors
        assert "Missing required spec key: loc_hi" in errors
        assert "Missing required spec key: scale_hi" in errors

    def test_empty_interval(self):
        """Test that loc_lo must be below loc_hi."""
        errors = validate_support_spec({"loc_lo": 1, "loc_hi": 1, "scale_hi": 1})
        assert any("loc_lo must be below loc_hi" in e for e in errors)

    def test_bad_scales(self):
        """Test negative and infinite scale bounds."""
        errors = validate_support_spec({"loc_lo": 0, "loc_hi": 1, "scale_lo": -1, "scale_hi": "inf"})
        assert any("scale_lo" in e for e in errors)
        assert any("scale_hi" in e for e in errors)

    def test_scale_values(self):
        """Test that scale_values replaces scale_hi and must be non-negative numbers."""
        assert validate_support_spec({"loc_lo": "-inf", "loc_hi": 0, "scale_values": [0, 1]}) == []
        errors = validate_support_spec({"loc_lo": "-inf", "loc_hi": 0, "scale_values": [-1]})
        assert errors == ["scale_values must be finite and non-negative"]
        errors = validate_support_spec({"loc_lo": "-inf", "loc_hi": 0, "scale_values": []})
        assert errors == ["scale_values must be a non-empty list"]

    def test_symmetric_needs_centered_interval(self):
        """Test that a symmetric spec needs loc_lo = -loc_hi."""
        errors = validate_support_spec({"loc_lo": -1, "loc_hi": 2, "scale_hi": 1, "symmetric": True})
        assert any("symmetric spec" in e for e in errors)

    def test_non_numeric(self):
        """Test that non-numeric bounds are reported."""
        errors = validate_support_spec({"loc_lo": "left", "loc_hi": 1, "scale_hi": 1})
        assert errors == ["loc_lo must be a number, got 'left'"]


class TestValidateFitConfig:
    """Tests for validate_fit_config."""

    def test_defaults(self):
        """Test that an empty document is valid."""
        assert validate_fit_config({}) == []

    def test_all_problems(self):
        """Test that every bad field is reported."""
        errors = validate_fit_config(
            {"loc_grid_size": 1, "max_em_iters": 0, "loglik_rel_tol": -1, "rng_seed": -5, "speed": "fast"}
        )
        assert len(errors) == 5
        assert "Unknown fit config key: speed" in errors

    def test_booleans_are_not_sizes(self):
        """Test that True is not accepted as a grid size."""
        assert validate_fit_config({"scale_grid_size": True}) == ["scale_grid_size must be an integer >= 2"]


class TestValidateMixing:
    """Tests for validate_mixing."""

    def test_valid(self):
        """Test a point and a blob atom."""
        data = {
            "atoms": [
                {"loc": {"type": "point", "x": "0.5"}, "s": 1, "p": 0.5},
                {"loc": {"type": "blob", "mu": 0, "tau2": 2}, "s": 0, "p": 0.5},
            ]
        }
        assert validate_mixing(data) == []

    def test_problems(self):
        """Test that bad atoms are reported by index."""
        data = {"atoms": [{"loc": {"type": "cloud"}, "s": 1, "p": 1}, {"loc": {"type": "point"}, "p": "x"}]}
        errors = validate_mixing(data)
        assert errors == [
            "atom 0: loc must be a mapping with type 'point' or 'blob'",
            "atom 1: point location needs a numeric x",
            "atom 1: s must be a number",
            "atom 1: p must be a number",
        ]

    def test_no_atoms(self):
        """Test that at least one atom is needed."""
        assert validate_mixing({"atoms": []}) == ["atoms must be a non-empty list"]


class TestValidateExperimentConfig:
    """Tests for validate_experiment_config."""

    @pytest.fixture
    def document(self) -> dict:
        """Minimal valid experiment document."""
        return {
            "truth": {"atoms": [{"loc": {"type": "point", "x": 0}, "s": 1, "p": 1}]},
            "spec": "halfline-binary",
            "sample_sizes": [100, 1000],
        }

    def test_valid(self, document):
        """Test that the minimal document is valid."""
        assert validate_experiment_config(document) == []

    def test_sizes_must_increase(self, document):
        """Test that sample sizes must be strictly increasing."""
        document["sample_sizes"] = [100, 100]
        assert validate_experiment_config(document) == ["sample_sizes must be strictly increasing"]

    def test_nested_errors_are_prefixed(self, document):
        """Test that spec and fit problems carry their section name."""
        document["spec"] = {"loc_lo": 0, "loc_hi": 1}
        document["fit"] = {"max_em_iters": 0}
        errors = validate_experiment_config(document)
        assert "spec: Missing required spec key: scale_hi" in errors
        assert "fit: max_em_iters must be a positive integer" in errors

    def test_unknown_preset_and_comparison(self, document):
        """Test that unknown presets and comparisons are reported."""
        document["spec"] = "quarter-plane"
        document["comparison"] = "NEITHER"
        errors = validate_experiment_config(document)
        assert "Unknown spec preset: quarter-plane" in errors
        assert any(e.startswith("comparison must be one of") for e in errors)


class TestWriteJson:
    """Tests for write_json."""

    def test_creates_parents(self, tmp_path: Path):
        """Test that parent directories are created and a newline is appended."""
        path = tmp_path / "a" / "b" / "out.json"
        write_json(path, {"x": "1"})
        assert path.read_text().endswith("}\n")
        assert json.loads(path.read_text()) == {"x": "1"}
