import numpy as np
import pytest

from schemas.request import ExperimentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def make_config(tmp_path):
    """tmp_path 아래로 산출물을 쓰는 ExperimentConfig 팩토리"""

    def factory(**overrides):
        data = {"problem": "toy", "output_dir": str(tmp_path / "run")}
        data.update(overrides)
        return ExperimentConfig(**data)

    return factory
