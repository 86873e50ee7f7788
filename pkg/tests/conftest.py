import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from idp_euler import thermo  # noqa: E402
from idp_euler.thermo import PrimitiveState, SpeciesTable  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def species():
    return SpeciesTable.from_pairs([(1.4, 1.0), (5.2, 3.12)])


@pytest.fixture
def air_helium():
    return SpeciesTable.from_pairs([(1005.0, 718.0), (5193.0, 3115.0)])


def random_primitive(rng, n, d, ns=2, vmax=1.0):
    Y = rng.dirichlet(np.ones(ns), size=n)
    return PrimitiveState(Y=Y, rho=rng.uniform(0.2, 3.0, n), v=rng.uniform(-vmax, vmax, (n, d)),
                          p=rng.uniform(0.2, 3.0, n))


def random_states(rng, n, d, species, vmax=1.0):
    return thermo.primitive_to_conserved(random_primitive(rng, n, d, species.n_species, vmax), species)


def smooth_states(x, species, amp=0.2):
    """Smooth periodic field on [0, 1] used by the scheme tests."""
    x = np.asarray(x)[:, 0]
    ph = 2 * np.pi * x
    Y1 = 0.5 + 0.3 * np.sin(ph)
    w = PrimitiveState(Y=np.stack([Y1, 1 - Y1], axis=1), rho=1.0 + amp * np.cos(ph),
                       v=(0.5 + 0.1 * np.sin(ph))[:, None], p=1.0 + amp * np.sin(2 * ph))
    return thermo.primitive_to_conserved(w, species)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
