import sys

import numpy as np
import pytest

from wassheat import make_discrete


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_measure(gen, n=None, d=1, scale=1.0):
    n = n or int(gen.integers(1, 6))
    return make_discrete(scale * gen.normal(size=(n, d)), gen.uniform(0.1, 1.0, n))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results, key=lambda c: int(c[1:])):
        ok, detail = results[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'} {detail}")
