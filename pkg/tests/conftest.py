import numpy as np
import pytest

from builders import desk_model


@pytest.fixture(scope="session")
def model90():
    return desk_model(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """Store a PASS/FAIL line for an acceptance criterion."""
    store = request.config.stash.setdefault(ACCEPTANCE, {})

    def _record(k, ok, detail):
        store[k] = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        print(store[k])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(ACCEPTANCE, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for k in sorted(store):
            terminalreporter.write_line(store[k])
