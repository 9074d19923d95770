import numpy as np
import pytest

import molliwave.transmission
from molliwave.kernels import build_kernel

# not a test class, despite the name
molliwave.transmission.TestFunction.__test__ = False


def smooth_bump(x, center=1.5, width=1.0, amplitude=1.0):
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def step_fn(x, at=1.0, left=0.0, right=1.0):
    return np.where(np.asarray(x, dtype=float) > at, right, left)


def zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@pytest.fixture(scope="session")
def kernel_q0():
    return build_kernel(0, 1.0)


@pytest.fixture(scope="session")
def kernel_q2():
    return build_kernel(2, 1.0)


@pytest.fixture(scope="session")
def kernel_q2_narrow():
    return build_kernel(2, 0.6)
