import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from torsionmine.store import TorsionStore, ingest

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"
UBQ_FIXTURE = FIXTURES / "1UBQ.pdb"

UBIQUITIN = (
    "MQIFVKTLTGKTITLEVEPSDTIENVKAKIQDKEGIPPDQQRLIFAGKQLEDGRTLSDYNIQKESTLHLVLRLRGG"
)


@pytest.fixture(scope="session")
def corpus_files() -> list[Path]:
    files = sorted(CORPUS_DIR.glob("*.pdb.gz"))
    assert files, "corpus fixtures missing; run tests/corpusgen.py"
    return files


@pytest.fixture(scope="session")
def corpus_store_path(tmp_path_factory, corpus_files) -> Path:
    dest = tmp_path_factory.mktemp("corpus-store") / "db"
    ingest(corpus_files, dest)
    return dest


@pytest.fixture(scope="session")
def corpus_store(corpus_store_path) -> TorsionStore:
    return TorsionStore.open(corpus_store_path)
