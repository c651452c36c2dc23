from __future__ import annotations

from pathlib import Path

import pytest

from scopevoice.dispatch import standard_registry
from scopevoice.proximity import distance_matrix
from scopevoice.scene import load_case

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def case_a_path() -> Path:
    return FIXTURES / "case_a" / "case.json"


@pytest.fixture(scope="session")
def case_b_path() -> Path:
    return FIXTURES / "case_b" / "case.json"


@pytest.fixture(scope="session")
def case_a(case_a_path):
    return load_case(case_a_path)


@pytest.fixture(scope="session")
def case_b(case_b_path):
    return load_case(case_b_path)


@pytest.fixture(scope="session")
def matrix_a(case_a):
    return distance_matrix(case_a)


@pytest.fixture(scope="session")
def matrix_b(case_b):
    return distance_matrix(case_b)


@pytest.fixture(scope="session")
def registry_a(case_a):
    return standard_registry(case_a)


@pytest.fixture()
def scripts_dir() -> Path:
    return FIXTURES / "scripts"


@pytest.fixture()
def golden_dir() -> Path:
    return FIXTURES / "golden"
