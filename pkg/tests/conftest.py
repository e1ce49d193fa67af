import numpy as np
import pytest

from diamag import BoxSpec, CoulombWells, FieldConfig, HamiltonianFamily, SinusoidalVectorPotential


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def coulomb_config(omega=0.0, sinus=False, coupling=1.0):
    kw = {"vector_potential": SinusoidalVectorPotential()} if sinus else {}
    return FieldConfig(omega=omega, potential=CoulombWells(coupling), **kw)


def family(n=4, scale=1.0, cfg=None):
    return HamiltonianFamily(BoxSpec(n=n, scale=scale), cfg if cfg is not None else FieldConfig())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
