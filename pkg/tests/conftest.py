import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, d, n=None):
    shape = (d, d) if n is None else (n, d, d)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """criterion number -> one-line PASS/FAIL summary, printed at the end of the run."""
    return request.config.stash.setdefault(_ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(log):
        terminalreporter.write_line(log[k])
