import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wassmap.measure import DiscreteMeasure

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MNIST_DIR = os.environ.get("WASSMAP_MNIST_DIR", os.path.join(ROOT, "data", "mnist"))

coords = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def measures(draw, min_size=1, max_size=8, dim=2, uniform=False):
    n = draw(st.integers(min_size, max_size))
    loc = draw(arrays(np.float64, (n, dim), elements=coords))
    if uniform:
        w = np.ones(n)
    else:
        w = draw(arrays(np.float64, n, elements=st.floats(0.05, 1.0)))
    return DiscreteMeasure(loc, w)


def random_measure(rng, n, dim=2, uniform=False, scale=1.0):
    w = np.ones(n) if uniform else rng.random(n) + 0.05
    return DiscreteMeasure(rng.normal(size=(n, dim)) * scale, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_paths():
    img = os.path.join(MNIST_DIR, "train-images-idx3-ubyte")
    lab = os.path.join(MNIST_DIR, "train-labels-idx1-ubyte")
    if not (os.path.exists(img) and os.path.exists(lab)):
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (see README)")
    return img, lab


# acceptance report: one line per criterion, printed at the end of the run
ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(key, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {title}: {detail}"
        ACCEPTANCE.append((key, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        order = lambda kv: (int("".join(c for c in kv[0] if c.isdigit())), kv[0])
        for _, line in sorted(ACCEPTANCE, key=order):
            terminalreporter.write_line(line)
