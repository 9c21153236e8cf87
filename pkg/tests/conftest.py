import numpy as np
import pytest

from mcnm.data import Dataset

ACCEPTANCE = {}


def record(name, passed, detail):
    ACCEPTANCE[name] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        passed, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


def two_blobs(n=120, d=2, sep=8.0, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(2, size=n)
    x = rng.standard_normal((n, d)) + sep * labels[:, None] / np.sqrt(d)
    return x, labels


def hide(x, frac, seed=0):
    """Mask ``frac`` of rows, one random cell each (never a whole row)."""
    rng = np.random.default_rng(seed)
    n, d = x.shape
    mask = np.ones((n, d), dtype=bool)
    rows = rng.choice(n, size=int(round(frac * n)), replace=False)
    for i in rows:
        k = rng.integers(1, d) if d > 1 else 0
        mask[i, rng.choice(d, size=k, replace=False)] = False
    return Dataset(x, mask)


@pytest.fixture
def blobs():
    x, labels = two_blobs()
    return Dataset.from_array(x), labels
