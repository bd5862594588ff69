from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


@pytest.fixture(scope="session")
def ethos_csv() -> Path:
    return DATA / "ethos_binary_synthetic.csv"


@pytest.fixture(scope="session")
def smoke_csv() -> Path:
    return DATA / "smoke_corpus.csv"


@pytest.fixture(scope="session")
def smoke_table() -> Path:
    return DATA / "smoke_table.txt"
