from pathlib import Path

import numpy as np
import pytest

from sphere_fmt import config as config_module
from sphere_fmt.fmt import LevelLayout, build_layout
from sphere_fmt.sht import HarmonicCoefficients


@pytest.fixture
def isolated_config_file(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect config read/write to a temp file for each test."""
    config_dir = tmp_path / ".sphere-fmt"
    config_file = config_dir / "config.json"
    monkeypatch.setattr(config_module, "CONFIG_DIR", config_dir)
    monkeypatch.setattr(config_module, "CONFIG_FILE", config_file)
    return config_file


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def small_layout() -> LevelLayout:
    """gl:4, gl:8, gl:16 on levels 2..4 (bandlimits 2, 4, 8)."""
    return build_layout(2, 4)


@pytest.fixture
def random_coefficients(rng: np.random.Generator):
    """Factory for complex Gaussian coefficients with a given bandlimit."""

    def make(bandlimit: int) -> HarmonicCoefficients:
        size = bandlimit * bandlimit
        return HarmonicCoefficients(bandlimit, rng.standard_normal(size) + 1j * rng.standard_normal(size))

    return make
