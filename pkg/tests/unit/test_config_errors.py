#!/usr/bin/env python3
"""
Unit tests for runtime settings, the error hierarchy and CSV output
"""

import logging
import os
import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent.parent))
from scripts import errors
from scripts.config import RuntimeSettings, configure_logging, resolve_threads
from scripts.io_utils import format_value, write_rows


class TestRuntimeSettings:
    """PLASMOSHAPE_* environment variables"""

    def test_defaults(self):
        with patch.dict(os.environ, {}, clear=True):
            settings = RuntimeSettings.from_env()
        assert settings == RuntimeSettings(threads=1, log_level="WARNING", output_dir="./outputs")

    def test_values_from_environment(self):
        env = {
            'PLASMOSHAPE_THREADS': '4',
            'PLASMOSHAPE_LOG_LEVEL': 'debug',
            'PLASMOSHAPE_OUTPUT_DIR': '/tmp/plasmo',
        }
        with patch.dict(os.environ, env, clear=True):
            settings = RuntimeSettings.from_env()
        assert settings.threads == 4
        assert settings.log_level == "DEBUG"
        assert settings.output_dir == "/tmp/plasmo"

    @pytest.mark.parametrize("env,message", [
        ({'PLASMOSHAPE_THREADS': 'many'}, "integer"),
        ({'PLASMOSHAPE_THREADS': '0'}, ">= 1"),
        ({'PLASMOSHAPE_LOG_LEVEL': 'LOUD'}, "not recognised"),
    ])
    def test_invalid_values(self, env, message):
        with patch.dict(os.environ, env, clear=True):
            with pytest.raises(errors.ConfigurationError, match=message):
                RuntimeSettings.from_env()

    def test_resolve_threads(self):
        assert resolve_threads(3) == 3
        with patch.dict(os.environ, {'PLASMOSHAPE_THREADS': '2'}, clear=True):
            assert resolve_threads(None) == 2
        with pytest.raises(errors.ConfigurationError):
            resolve_threads(0)

    def test_configure_logging_level(self):
        with patch('scripts.config.logging.basicConfig') as basic_config:
            configure_logging(RuntimeSettings(log_level="INFO"))
        assert basic_config.call_args.kwargs["level"] == logging.INFO


class TestErrorHierarchy:
    """Every failure is a PlasmoshapeError with the matching builtin base"""

    @pytest.mark.parametrize("name", [
        "ConfigurationError", "StarShapeError", "OrientationError", "PerturbationTooLargeError",
        "DomainError", "NearBoundaryError", "SingularContrastError", "UndefinedPosteriorError",
    ])
    def test_input_errors(self, name):
        cls = getattr(errors, name)
        assert issubclass(cls, errors.PlasmoshapeError)
        assert issubclass(cls, ValueError)

    @pytest.mark.parametrize("name", [
        "DiscretizationError", "ResonanceSingularityError", "DegeneracyError",
        "RegularizationRequiredError", "DivergenceError", "CovarianceError",
    ])
    def test_numerical_errors(self, name):
        cls = getattr(errors, name)
        assert issubclass(cls, errors.PlasmoshapeError)
        assert issubclass(cls, RuntimeError)


class TestCSVOutput:
    """Deterministic cell formatting"""

    @pytest.mark.parametrize("value,expected", [
        (None, ""),
        (True, "true"),
        (np.bool_(False), "false"),
        (0.1, "0.10000000000000001"),
        (np.float64(2.5), "2.5"),
        (7, "7"),
        ("ok", "ok"),
    ])
    def test_format_value(self, value, expected):
        assert format_value(value) == expected

    def test_write_rows(self, tmp_path):
        path = write_rows(tmp_path / "nested" / "table.csv", ("a", "b"), [(1, 0.5), (None, True)])
        assert path.read_text() == "a,b\n1,0.5\n,true\n"
