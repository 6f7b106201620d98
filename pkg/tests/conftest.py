from pathlib import Path

import pytest

from proofspace.taxonomy import TacticDb

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_db() -> TacticDb:
    return TacticDb.load(FIXTURES / "tactic_db_100.json")
