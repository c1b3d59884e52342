import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from src.reduced import (
    Regime,
    mollow_predictions,
    reduced_hamiltonian,
    resonant_decay_rate,
    resonant_rabi_frequency,
    stark_eigenvalues,
    stark_states,
    stark_sweep,
    threshold_ep,
)


class TestThreshold:
    def test_unit_cavity(self, fig4_params) -> None:
        """Test the threshold 0.5 / sqrt(10) ~ 0.16 kappa for g1 / omega_c = 3."""
        value = threshold_ep(fig4_params)
        assert value == pytest.approx(0.5 / math.sqrt(10))
        assert round(value, 2) == 0.16

    def test_narrow_cavity(self, fig6_params) -> None:
        """Test the Mollow threshold 0.0395 at kappa = 0.25."""
        assert threshold_ep(fig6_params) == pytest.approx(0.0395, abs=1e-3)

    def test_needs_coupling_field(self, fig4_params) -> None:
        """Test that the reduction is undefined without a coupling field."""
        with pytest.raises(ValueError, match="omega_c > 0"):
            threshold_ep(fig4_params.replace(omega_c=0.0))


class TestStarkEigenvalues:
    def test_strong_drive_numbers(self, fig6_params) -> None:
        """Test Omega_0, Gamma_0 and the splitting at ep = 0.45."""
        stark = stark_eigenvalues(fig6_params)
        assert stark.regime is Regime.SPLIT
        assert stark.omega0 == pytest.approx(0.14230, abs=1e-5)
        assert stark.gamma0 == pytest.approx(0.025)
        assert stark.splitting == pytest.approx(0.2835, abs=1e-4)
        assert stark.gamma_tilde == pytest.approx((0.0125, 0.0125))

    def test_weak_drive(self, fig4_params) -> None:
        """Test that below threshold only the decay rates differ."""
        stark = stark_eigenvalues(fig4_params.with_drive(0.05))
        assert stark.regime is Regime.WEAK
        assert stark.epsilon_tilde == (0.0, 0.0)
        gamma0 = resonant_decay_rate(fig4_params)
        omega0 = resonant_rabi_frequency(fig4_params.with_drive(0.05))
        spread = math.sqrt(gamma0**2 / 4 - omega0**2)
        assert stark.gamma_tilde == pytest.approx((gamma0 / 2 + spread, gamma0 / 2 - spread))

    def test_critical(self, fig4_params) -> None:
        """Test the regime at exactly the threshold drive."""
        stark = stark_eigenvalues(fig4_params.with_drive(threshold_ep(fig4_params)))
        assert stark.regime is Regime.CRITICAL
        assert stark.splitting == 0.0

    @given(ep=st.floats(min_value=0.0, max_value=1.0))
    def test_matches_reduced_hamiltonian(self, fig4_params, ep) -> None:
        """Test the closed form against the eigenvalues of the 2x2 reduction."""
        params = fig4_params.with_drive(ep)
        expected = np.sort_complex(linalg.eigvals(reduced_hamiltonian(params)))
        got = np.sort_complex(np.array(stark_eigenvalues(params).eigenvalues))
        assert np.allclose(got, expected, atol=1e-6)

    def test_independent_of_atomic_decay(self, fig4_params) -> None:
        """Test that the atomic decay rates do not enter the Stark pair."""
        params = fig4_params.with_drive(0.3)
        undamped = params.replace(gamma1=0.0, gamma2=0.0, gamma3=0.0)
        assert stark_eigenvalues(params) == stark_eigenvalues(undamped)


class TestStarkStates:
    def test_equal_weight_superpositions(self, fig4_params) -> None:
        """Test (|g> -+ i|e>)/sqrt(2) as eigenvectors of the undamped reduction."""
        params = fig4_params.replace(kappa=0.0, ep=0.2)
        states = stark_states(params)
        h_red = reduced_hamiltonian(params)
        omega0 = resonant_rabi_frequency(params)
        assert np.allclose(h_red @ states.reduced_plus, omega0 * states.reduced_plus)
        assert np.allclose(h_red @ states.reduced_minus, -omega0 * states.reduced_minus)
        assert not states.flagged

    def test_bare_expansion(self, fig4_params) -> None:
        """Test the expansion over |0,1>, |1,1>, |0,3>."""
        states = stark_states(fig4_params.with_drive(0.3))
        assert np.linalg.norm(states.plus) == pytest.approx(1.0)
        assert states.plus[0] == pytest.approx(1 / math.sqrt(2))
        assert states.plus[1] == pytest.approx(-1j / math.sqrt(2) / math.sqrt(10))
        assert states.plus[2] == pytest.approx(-3j / math.sqrt(2) / math.sqrt(10))

    def test_weak_regime_is_flagged(self, fig4_params) -> None:
        """Test that states below threshold come from the non-Hermitian solver."""
        states = stark_states(fig4_params.with_drive(0.01))
        assert states.regime is Regime.WEAK
        assert states.flagged


class TestMollowPredictions:
    def test_strong_drive(self, fig6_params) -> None:
        """Test center HWHM Gamma_0, sideband HWHM 1.5 Gamma_0 and the offset."""
        mollow = mollow_predictions(fig6_params)
        assert mollow.has_sidebands
        assert mollow.center_linewidth == pytest.approx(0.025)
        assert mollow.sideband_linewidth == pytest.approx(0.0375)
        assert mollow.sideband_offset == pytest.approx(0.2835, abs=1e-4)

    def test_below_threshold(self, fig6_params) -> None:
        """Test that no sidebands are predicted below threshold."""
        mollow = mollow_predictions(fig6_params.with_drive(0.02))
        assert not mollow.has_sidebands
        assert mollow.sideband_offset == 0.0


class TestStarkSweep:
    def test_zero_drive(self, fig4_params) -> None:
        """Test that the tracked pair starts at 0 and -i Gamma_0."""
        trace = stark_sweep(fig4_params, [0.0], n_trunc=6, check_convergence=False)
        ground, resonant = trace.samples[0].numeric
        assert abs(ground) < 1e-12
        assert resonant.real == pytest.approx(0.0, abs=1e-12)
        assert -resonant.imag == pytest.approx(0.1, rel=0.02)

    def test_agreement_with_reduction(self, fig4_params) -> None:
        """Test numeric real parts against the Stark pair above threshold."""
        grid = np.linspace(0.0, 0.5, 51)
        trace = stark_sweep(fig4_params, grid, n_trunc=15)
        assert trace.converged
        numeric = trace.numeric_sorted()
        for sample, pair in zip(trace.samples, numeric):
            if sample.flagged or sample.analytic.regime is not Regime.SPLIT:
                continue
            plus, minus = sample.analytic.epsilon_tilde
            assert abs(pair[1].real - plus) < 0.05
            assert abs(pair[0].real - minus) < 0.05

    def test_frame(self, fig4_params) -> None:
        """Test the tabular form of a sweep."""
        trace = stark_sweep(fig4_params, [0.0, 0.1, 0.2], n_trunc=6, check_convergence=False)
        frame = trace.to_frame()
        assert len(frame) == 3
        assert frame["regime"].tolist() == ["1", "1", "2"]
        assert trace.converged is None

    def test_invalid_grids(self, fig4_params) -> None:
        """Test that unsorted or negative grids are rejected."""
        with pytest.raises(ValueError, match="strictly increasing"):
            stark_sweep(fig4_params, [0.2, 0.1])
        with pytest.raises(ValueError, match="Invalid drive amplitude"):
            stark_sweep(fig4_params, [-0.1, 0.1])
        with pytest.raises(ValueError, match="nonempty"):
            stark_sweep(fig4_params, [])
