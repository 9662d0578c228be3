import numpy as np
import pytest

from entsim._accel import HAVE_NUMBA

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, cutoff, n_modes=2, rank=None):
    """Random normalized density matrix with complex entries."""
    d = (cutoff + 1) ** n_modes
    k = d if rank is None else rank
    m = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = m @ m.conj().T
    rho /= np.trace(rho).real
    return rho.reshape((cutoff + 1,) * (2 * n_modes))


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion; lines are echoed in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
