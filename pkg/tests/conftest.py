import pytest

from querycost import synth
from querycost.models import BoostingParams, LogisticParams
from querycost.pipeline import publish, train_bundles


@pytest.fixture(scope="session")
def small_records():
    return synth.generate(synth.default_spec(noise_rate=0.02), 6000, seed=11)


@pytest.fixture(scope="session")
def trained(small_records):
    """Logistic cpu/memory bundles trained on a small synthetic log."""
    return train_bundles(small_records, "logreg", "tfidf", grid=[LogisticParams()], seed=0)


@pytest.fixture(scope="session")
def gbt_trained(small_records):
    return train_bundles(small_records, "gbt", "tfidf", grid=[BoostingParams(n_rounds=30, max_depth=4)], seed=0)


@pytest.fixture
def repo(tmp_path, trained):
    path = tmp_path / "repo"
    publish(path, trained)
    return path


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
