import os

import hypothesis
import numpy as np
import pytest

from src.lindblad import build_liouvillian, correlation_lines, steady_state
from src.operators import BareBasis, build_annihilation
from src.params import SystemParams

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=500, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def fig4_params() -> SystemParams:
    """Stark-splitting parameters: g_j = 6, gamma_j = 0.1, omega_c = 2, in kappa units."""
    return SystemParams(
        g1=6.0,
        g2=6.0,
        omega_c=2.0,
        gamma1=0.1,
        gamma2=0.1,
        gamma3=0.1,
        kappa=1.0,
        n_trunc=15,
    )


@pytest.fixture(scope="session")
def fig6_params() -> SystemParams:
    """Mollow-triplet parameters with a narrow cavity line."""
    return SystemParams(
        g1=6.0,
        g2=6.0,
        omega_c=2.0,
        delta=0.0,
        big_delta=0.1,
        gamma1=0.1,
        gamma2=0.1,
        gamma3=0.1,
        kappa=0.25,
        ep=0.45,
        n_trunc=15,
    )


@pytest.fixture
def detuned_params() -> SystemParams:
    """Generic parameters with every detuning and decay rate nonzero."""
    return SystemParams(
        g1=2.3,
        g2=1.7,
        omega_c=1.1,
        delta=0.4,
        big_delta=-0.3,
        gamma1=0.2,
        gamma2=0.15,
        gamma3=0.05,
        kappa=0.8,
        ep=0.3,
        n_trunc=6,
    )


@pytest.fixture
def small_basis() -> BareBasis:
    return BareBasis(4)


@pytest.fixture(scope="session")
def fig6_steady(fig6_params):
    """Liouvillian, steady state and basis at the strong-drive Mollow point."""
    basis = BareBasis.from_params(fig6_params)
    liouvillian = build_liouvillian(fig6_params, basis)
    return liouvillian, steady_state(liouvillian), basis


@pytest.fixture(scope="session")
def fig6_lines(fig6_steady):
    """Every mode of the strong-drive fluorescence spectrum, unfiltered."""
    liouvillian, rho, basis = fig6_steady
    a = build_annihilation(basis)
    fluctuation = a - rho.expect(a) * np.eye(basis.dim)
    return correlation_lines(
        liouvillian, rho.matrix, fluctuation.conj().T, fluctuation, floor=0.0
    )
