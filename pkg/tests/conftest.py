import pytest

from nullnrc.ast import Mode
from nullnrc.data import load_database
from nullnrc.gen import make_corpus

CORPUS_SIZE = 1000
CORPUS_SEEDS = {Mode.NRC: 11, Mode.NRC_OPT: 12, Mode.NRC_NULL: 13}

DISEASES_JSON = """
{"tables": {"diseases": {
  "columns": [{"name": "id", "type": "int", "nullable": false},
              {"name": "name", "type": "string", "nullable": false},
              {"name": "type", "type": "int", "nullable": true}],
  "rows": [[1, "covid-19", null], [2, "flu", 1], [3, "covid-19", 2]]}}}
"""

DISEASE_QUERY = 'for (x <- table diseases) where (x.name = "covid-19") yield x'

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def corpora():
    return {mode: make_corpus(mode, CORPUS_SIZE, seed=seed) for mode, seed in CORPUS_SEEDS.items()}


@pytest.fixture(scope="session")
def diseases_db():
    return load_database(DISEASES_JSON)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def three_handlers(result_ty):
    """All-optional, all-required and all-default handlers for a flat row type."""
    from nullnrc.ast import Const
    from nullnrc.handlers import Default, Optional, Required, make_handler

    samples = {"int": -1, "bool": True, "string": "missing", "float": -0.5}
    row = result_ty.elem
    return [
        make_handler(result_ty, {l: Optional() for l in row.labels}),
        make_handler(result_ty, {l: Required() for l in row.labels}),
        make_handler(result_ty, {l: Default(Const.of(samples[t.b.value])) for l, t in row.fields}),
    ]
