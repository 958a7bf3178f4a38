import numpy as np
import pytest
import torch
from hypothesis import settings

from demoire.data import make_synthetic_dataset

settings.register_profile("cpu", deadline=None)
settings.load_profile("cpu")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_data(tmp_path_factory):
    """Ten synthetic 64x64 moire/clean pairs on disk."""
    return make_synthetic_dataset(tmp_path_factory.mktemp("desk") / "data", 10, 64, seed=7)


def zero_weights(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def central_diff_grad(fn, x, h=1e-6):
    """Full central-difference gradient of scalar ``fn`` at float64 ``x``."""
    x = x.detach().clone()
    flat = x.view(-1)
    g = torch.empty_like(flat)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            fp = float(fn(x))
            flat[i] = orig - h
            fm = float(fn(x))
            flat[i] = orig
            g[i] = (fp - fm) / (2 * h)
    return g.view_as(x)


def autograd_grad(fn, x):
    x = x.detach().clone().requires_grad_(True)
    (g,) = torch.autograd.grad(fn(x), x)
    return g


def rel_error(a, b):
    return float((a - b).norm() / max(a.norm(), b.norm(), 1e-30))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
