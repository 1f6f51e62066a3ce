from pathlib import Path

import pytest

from memshape.machine import load_machine
from memshape.workload import load_model

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
MACHINES = ROOT / "machines"
MODEL_NAMES = ("resnet50", "vgg16", "googlenet")


@pytest.fixture(scope="session")
def knl():
    return load_machine(MACHINES / "knl64.cfg")


@pytest.fixture(scope="session")
def models():
    return {name: load_model(MODELS / f"{name}.csv") for name in MODEL_NAMES}


@pytest.fixture(scope="session")
def resnet(models):
    return models["resnet50"]
