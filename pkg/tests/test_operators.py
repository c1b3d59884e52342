import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError
from scipy.constants import hbar

from src.operators import (
    BareBasis,
    build_annihilation,
    build_collapse_ops,
    build_damping_operator,
    build_H0,
    build_Hd,
    build_Heff,
    build_number,
    build_population_inversion,
    build_sigma,
    drive_amplitude_from_power,
    dump_matrix,
    is_hermitian,
    load_matrix,
)
from src.params import SystemParams

rates = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
detunings = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


def excitation_number(basis: BareBasis) -> np.ndarray:
    return (
        build_number(basis)
        + build_sigma(basis, 2, 2)
        + build_sigma(basis, 3, 3)
        + 2 * build_sigma(basis, 4, 4)
    )


class TestBareBasis:
    def test_index_layout(self, small_basis) -> None:
        """Test the flat index 4n + (l - 1) and its inverse."""
        assert small_basis.dim == 16
        assert small_basis.index(0, 1) == 0
        assert small_basis.index(2, 3) == 10
        assert small_basis.pair(10) == (2, 3)
        assert small_basis.manifold_of(small_basis.index(1, 4)) == 3

    def test_invalid_arguments(self, small_basis) -> None:
        """Test that out-of-range levels and photon numbers are rejected."""
        with pytest.raises(ValueError, match="Invalid atomic level"):
            small_basis.index(0, 5)
        with pytest.raises(ValueError, match="Invalid photon number"):
            small_basis.index(4, 1)
        with pytest.raises(ValueError, match="Invalid flat index"):
            small_basis.pair(16)
        with pytest.raises(ValueError, match="Invalid truncation"):
            BareBasis(0)

    def test_manifold_slots_edges(self, small_basis) -> None:
        """Test that slots outside the truncated space come back as None."""
        assert small_basis.manifold_slots(0) == [0, None, None, None]
        assert small_basis.manifold_slots(2) == [8, 5, 6, 3]
        assert small_basis.manifold_slots(5) == [None, None, None, 15]
        assert small_basis.max_manifold == 5

    def test_sector(self, small_basis) -> None:
        """Test that the sector of manifolds <= 1 holds |0,1>, |1,1>, |0,2>, |0,3>."""
        assert sorted(small_basis.sector(1).tolist()) == [0, 1, 2, 4]


class TestOperators:
    def test_operators_are_read_only(self, small_basis) -> None:
        """Test that the builders return frozen arrays."""
        a = build_annihilation(small_basis)
        with pytest.raises(ValueError):
            a[0, 0] = 1.0

    def test_annihilation_commutator(self, small_basis) -> None:
        """Test [a, a^dag] = 1 below the photon truncation."""
        a = build_annihilation(small_basis)
        comm = a @ a.conj().T - a.conj().T @ a
        inner = small_basis.photon_numbers() < small_basis.n_trunc - 1
        assert np.allclose(np.diag(comm)[inner], 1.0)

    def test_population_inversion(self, small_basis) -> None:
        """Test D_31 = s33 - s11."""
        d31 = build_population_inversion(small_basis, 3)
        assert np.allclose(d31, build_sigma(small_basis, 3, 3) - build_sigma(small_basis, 1, 1))

    def test_h0_matrix_elements(self, detuned_params) -> None:
        """Test the coupling entries of H0."""
        basis = BareBasis(3)
        h0 = build_H0(detuned_params, basis)
        assert h0[basis.index(1, 1), basis.index(0, 2)] == pytest.approx(1j * detuned_params.g1)
        assert h0[basis.index(0, 2), basis.index(0, 3)] == pytest.approx(
            1j * detuned_params.omega_c
        )
        assert h0[basis.index(1, 3), basis.index(0, 4)] == pytest.approx(1j * detuned_params.g2)
        assert h0[basis.index(0, 4), basis.index(0, 4)] == pytest.approx(
            detuned_params.big_delta
        )

    @given(g1=rates, g2=rates, omega_c=rates, delta=detunings, big_delta=detunings)
    def test_h0_hermitian_and_excitation_conserving(
        self, g1, g2, omega_c, delta, big_delta
    ) -> None:
        """Test that H0 is Hermitian and conserves the excitation number."""
        params = SystemParams(
            g1=g1, g2=g2, omega_c=omega_c, delta=delta, big_delta=big_delta, n_trunc=4
        )
        basis = BareBasis.from_params(params)
        h0 = build_H0(params, basis)
        assert is_hermitian(h0)
        n_exc = excitation_number(basis)
        assert np.max(np.abs(h0 @ n_exc - n_exc @ h0)) < 1e-12

    def test_heff_decomposition(self, detuned_params) -> None:
        """Test that the anti-Hermitian part of Heff is minus the damping operator."""
        basis = BareBasis.from_params(detuned_params)
        heff = build_Heff(detuned_params, basis)
        anti = (heff - heff.conj().T) / 2j
        assert np.allclose(anti, -build_damping_operator(detuned_params, basis))
        hermitian = (heff + heff.conj().T) / 2
        assert np.allclose(
            hermitian, build_H0(detuned_params, basis) + build_Hd(detuned_params, basis)
        )

    def test_collapse_ops_order(self, detuned_params) -> None:
        """Test the order gamma1 s12, gamma2 s32, gamma3 s34, kappa a."""
        basis = BareBasis(3)
        ops = build_collapse_ops(detuned_params, basis)
        assert len(ops) == 4
        assert np.allclose(ops[0], math.sqrt(0.2) * build_sigma(basis, 1, 2))
        assert np.allclose(ops[1], math.sqrt(0.15) * build_sigma(basis, 3, 2))
        assert np.allclose(ops[2], math.sqrt(0.05) * build_sigma(basis, 3, 4))
        assert np.allclose(ops[3], math.sqrt(0.8) * build_annihilation(basis))

    def test_drive_is_hermitian(self, detuned_params) -> None:
        """Test that i ep (a - a^dag) is Hermitian."""
        assert is_hermitian(build_Hd(detuned_params, BareBasis(5)))


class TestDriveAmplitude:
    def test_value(self) -> None:
        """Test sqrt(P kappa T^2 / (4 hbar omega_cav))."""
        value = drive_amplitude_from_power(1e-9, 2e7, 0.01, 2.4e15)
        assert value == pytest.approx(math.sqrt(1e-9 * 2e7 * 1e-4 / (4 * hbar * 2.4e15)))

    def test_zero_cavity_frequency(self) -> None:
        """Test that omega_cav = 0 is rejected."""
        with pytest.raises(ValueError, match="cavity frequency"):
            drive_amplitude_from_power(1e-9, 1.0, 0.1, 0.0)

    def test_negative_power(self) -> None:
        """Test that a negative power is rejected."""
        with pytest.raises(ValueError, match="Invalid power"):
            drive_amplitude_from_power(-1.0, 1.0, 0.1, 1.0)


class TestSystemParams:
    def test_truncation_bound(self) -> None:
        """Test that n_trunc below 3 is rejected."""
        with pytest.raises(ValidationError):
            SystemParams(g1=1.0, g2=1.0, omega_c=1.0, n_trunc=2)

    def test_negative_rate(self) -> None:
        """Test that negative rates are rejected."""
        with pytest.raises(ValidationError):
            SystemParams(g1=1.0, g2=1.0, omega_c=1.0, kappa=-0.1)

    def test_unknown_field(self) -> None:
        """Test that unknown fields are rejected."""
        with pytest.raises(ValidationError):
            SystemParams(g1=1.0, g2=1.0, omega_c=1.0, gamma4=0.1)

    def test_replace_validates(self, fig4_params) -> None:
        """Test that replace goes through validation."""
        assert fig4_params.with_drive(0.3).ep == 0.3
        assert fig4_params.with_drive(0.3).g1 == fig4_params.g1
        with pytest.raises(ValidationError):
            fig4_params.with_drive(-0.3)

    def test_coupling_ratio(self, fig4_params) -> None:
        """Test g1 / omega_c and its undefined case."""
        assert fig4_params.coupling_ratio == 3.0
        with pytest.raises(ValueError, match="omega_c = 0"):
            fig4_params.replace(omega_c=0.0).coupling_ratio


def test_matrix_dump_roundtrip(tmp_path, detuned_params) -> None:
    """Test that a dumped operator loads back unchanged."""
    heff = build_Heff(detuned_params, BareBasis(3))
    path = dump_matrix(heff, tmp_path / "heff.txt")
    assert path.read_text().startswith("# dim 12 12\n")
    assert np.array_equal(load_matrix(path), heff)


def test_load_matrix_bad_header(tmp_path) -> None:
    """Test that a file without the dimension header is rejected."""
    path = tmp_path / "bad.txt"
    path.write_text("0 0 1.0 0.0\n")
    with pytest.raises(ValueError, match="header"):
        load_matrix(path)
