"""Two-level reduction: the ground state and the resonant first-manifold polariton.

Keeping only |e_0^(0)> and |e_0^(1)> gives

    H_red = i Omega_0 (p - p^dag) - i Gamma_0 p^dag p

whose complex eigenvalues -i Gamma_0/2 +- sqrt(Omega_0^2 - (Gamma_0/2)^2)
describe the dynamic Stark splitting. Below the threshold drive the pair
only differs in decay (regime 1), above it only in energy (regime 2).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy import linalg

from src.constants import (
    BRANCH_AMBIGUITY_TOL,
    CONVERGENCE_DRIFT_TOL,
    DEFAULT_N_TRUNC,
)
from src.dressed import embed, first_manifold
from src.operators import BareBasis, build_Heff
from src.params import SystemParams
from src.workers import ordered_map

# adjacent-sample eigenvector overlap below this breaks branch continuity
CONTINUITY_OVERLAP = 0.9


class Regime(str, Enum):
    WEAK = "1"
    SPLIT = "2"
    CRITICAL = "critical"


@dataclass(frozen=True)
class StarkResult:
    epsilon_tilde: tuple[float, float]  # (+, -)
    gamma_tilde: tuple[float, float]  # (+, -)
    regime: Regime
    omega0: float
    gamma0: float
    threshold_ep: float

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return (
            complex(self.epsilon_tilde[0], -self.gamma_tilde[0]),
            complex(self.epsilon_tilde[1], -self.gamma_tilde[1]),
        )

    @property
    def splitting(self) -> float:
        return self.epsilon_tilde[0] - self.epsilon_tilde[1]


def _mixing(params: SystemParams) -> float:
    """1 + (g1/omega_c)^2."""
    if params.omega_c <= 0:
        raise ValueError("The two-level reduction needs omega_c > 0")
    return 1 + (params.g1 / params.omega_c) ** 2


def resonant_rabi_frequency(params: SystemParams) -> float:
    return params.ep / math.sqrt(_mixing(params))


def resonant_decay_rate(params: SystemParams) -> float:
    return params.kappa / _mixing(params)


def threshold_ep(params: SystemParams) -> float:
    """Drive amplitude at which Omega_0 = Gamma_0 / 2."""
    return (params.kappa / 2) / math.sqrt(_mixing(params))


def reduced_hamiltonian(params: SystemParams) -> npt.NDArray[np.complex128]:
    """2x2 H_red over (|e_0^(0)>, |e_0^(1)>)."""
    omega0 = resonant_rabi_frequency(params)
    gamma0 = resonant_decay_rate(params)
    return np.array([[0.0, 1j * omega0], [-1j * omega0, -1j * gamma0]])


def stark_eigenvalues(params: SystemParams) -> StarkResult:
    omega0 = resonant_rabi_frequency(params)
    gamma0 = resonant_decay_rate(params)
    half = gamma0 / 2
    if omega0 == half or math.isclose(omega0, half, rel_tol=1e-12, abs_tol=0.0):
        return StarkResult(
            (0.0, 0.0), (half, half), Regime.CRITICAL, omega0, gamma0, threshold_ep(params)
        )
    if omega0 > half:
        split = math.sqrt(omega0**2 - half**2)
        return StarkResult(
            (split, -split), (half, half), Regime.SPLIT, omega0, gamma0, threshold_ep(params)
        )
    spread = math.sqrt(half**2 - omega0**2)
    return StarkResult(
        (0.0, 0.0),
        (half + spread, half - spread),
        Regime.WEAK,
        omega0,
        gamma0,
        threshold_ep(params),
    )


@dataclass(frozen=True)
class StarkStates:
    """Stark doublet over (|0,1>, |1,1>, |0,3>) and over the reduced basis."""

    plus: npt.NDArray[np.complex128]
    minus: npt.NDArray[np.complex128]
    reduced_plus: npt.NDArray[np.complex128]
    reduced_minus: npt.NDArray[np.complex128]
    regime: Regime
    flagged: bool = False


def stark_states(params: SystemParams) -> StarkStates:
    """
    Eigenstates of the reduced Hamiltonian expanded in bare states.

    Above threshold they are (|e_0^(0)> -+ i|e_0^(1)>)/sqrt(2): the drive
    enters as i ep (a - a^dag), so the equal-weight superpositions carry a
    relative phase of -+i. Below threshold (and at it) the non-Hermitian
    eigenvectors of H_red are returned instead and the result is flagged.
    """
    stark = stark_eigenvalues(params)
    if stark.regime is Regime.SPLIT:
        reduced_plus = np.array([1.0, -1j]) / math.sqrt(2)
        reduced_minus = np.array([1.0, 1j]) / math.sqrt(2)
        flagged = False
    else:
        eigvals, eigvecs = linalg.eig(reduced_hamiltonian(params))
        # plus is the faster-decaying branch
        order = np.argsort(eigvals.imag)
        reduced_plus = eigvecs[:, order[0]] / np.linalg.norm(eigvecs[:, order[0]])
        reduced_minus = eigvecs[:, order[1]] / np.linalg.norm(eigvecs[:, order[1]])
        flagged = True
        logging.info("Stark states requested in regime %s", stark.regime.value)

    resonant = first_manifold(params).state("0").coeffs

    def bare(reduced: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        return np.array(
            [reduced[0], reduced[1] * resonant[0], reduced[1] * resonant[2]],
            dtype=complex,
        )

    return StarkStates(
        bare(reduced_plus),
        bare(reduced_minus),
        reduced_plus,
        reduced_minus,
        stark.regime,
        flagged,
    )


@dataclass(frozen=True)
class MollowPrediction:
    """Half widths at half maximum in the kappa convention of the master equation."""

    center_linewidth: float
    sideband_linewidth: float | None
    sideband_offset: float

    @property
    def has_sidebands(self) -> bool:
        return self.sideband_linewidth is not None


def mollow_predictions(params: SystemParams) -> MollowPrediction:
    stark = stark_eigenvalues(params)
    if stark.regime is not Regime.SPLIT:
        return MollowPrediction(stark.gamma0, None, 0.0)
    return MollowPrediction(stark.gamma0, 1.5 * stark.gamma0, stark.splitting)


@dataclass(frozen=True)
class SweepSample:
    ep: float
    analytic: StarkResult
    numeric: tuple[complex, complex]  # branches anchored at (e_0^(0), e_0^(1))
    overlaps: tuple[float, float]
    flagged: bool


@dataclass
class SweepTrace:
    n_trunc: int
    samples: list[SweepSample] = field(default_factory=list)
    convergence_drift: float | None = None

    @property
    def converged(self) -> bool | None:
        if self.convergence_drift is None:
            return None
        return self.convergence_drift < CONVERGENCE_DRIFT_TOL

    @property
    def ep_values(self) -> npt.NDArray[np.float64]:
        return np.array([s.ep for s in self.samples])

    def numeric_sorted(self) -> npt.NDArray[np.complex128]:
        """Numeric pairs ordered by real part, shape (samples, 2), as (minus, plus)."""
        pairs = np.array([s.numeric for s in self.samples])
        order = np.argsort(pairs.real, axis=1, kind="stable")
        return np.take_along_axis(pairs, order, axis=1)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.samples:
            rows.append(
                {
                    "ep": s.ep,
                    "eps_tilde_plus": s.analytic.epsilon_tilde[0],
                    "eps_tilde_minus": s.analytic.epsilon_tilde[1],
                    "gamma_tilde_plus": s.analytic.gamma_tilde[0],
                    "gamma_tilde_minus": s.analytic.gamma_tilde[1],
                    "regime": s.analytic.regime.value,
                    "numeric_re_0": s.numeric[0].real,
                    "numeric_im_0": s.numeric[0].imag,
                    "numeric_re_1": s.numeric[1].real,
                    "numeric_im_1": s.numeric[1].imag,
                    "overlap_0": s.overlaps[0],
                    "overlap_1": s.overlaps[1],
                    "flagged": s.flagged,
                }
            )
        return pd.DataFrame(rows)


def _anchor_vectors(params: SystemParams, basis: BareBasis) -> list[npt.NDArray[np.complex128]]:
    ground = basis.basis_vector(0, 1)
    resonant = embed(first_manifold(params).state("0"), basis.manifold_slots(1), basis.dim)
    return [ground, resonant]


def _track_branches(
    params: SystemParams, ep_grid: npt.NDArray[np.float64], n_trunc: int
) -> tuple[list[tuple[complex, complex]], list[tuple[float, float]], list[bool]]:
    truncated = params.with_truncation(n_trunc)
    basis = BareBasis(n_trunc)

    def decompose(ep: float):
        return linalg.eig(build_Heff(truncated.with_drive(ep), basis))

    decompositions = ordered_map(decompose, list(ep_grid))
    previous = _anchor_vectors(truncated, basis)
    values, overlaps, flags = [], [], []
    for ep, (eigvals, eigvecs) in zip(ep_grid, decompositions):
        vecs = eigvecs / np.linalg.norm(eigvecs, axis=0)
        chosen: list[int] = []
        sample_overlaps: list[float] = []
        flagged = False
        for anchor in previous:
            scores = np.abs(vecs.conj().T @ anchor)
            scores[chosen] = -1.0
            ranked = np.argsort(scores)[::-1]
            best, runner_up = scores[ranked[0]], scores[ranked[1]]
            if best - runner_up < BRANCH_AMBIGUITY_TOL or best < CONTINUITY_OVERLAP:
                flagged = True
            chosen.append(int(ranked[0]))
            sample_overlaps.append(float(best))
        if flagged:
            logging.warning("Ambiguous branch tracking at ep = %s", ep)
        previous = [vecs[:, k] for k in chosen]
        values.append((complex(eigvals[chosen[0]]), complex(eigvals[chosen[1]])))
        overlaps.append((sample_overlaps[0], sample_overlaps[1]))
        flags.append(flagged)
    return values, overlaps, flags


def stark_sweep(
    params: SystemParams,
    ep_grid: npt.ArrayLike,
    n_trunc: int | None = None,
    check_convergence: bool = True,
) -> SweepTrace:
    """
    Analytic Stark pair next to the two eigenvalues of the full effective
    Hamiltonian that continue from the ground state and the resonant
    polariton at zero drive.

    Branches are followed by maximal eigenvector overlap from one grid point
    to the next. The convergence check repeats the tracking at twice the
    truncation and records the largest eigenvalue drift over unflagged
    samples.
    """
    grid = np.asarray(ep_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("ep_grid must be a nonempty one-dimensional grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("ep_grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError(f"Invalid drive amplitude: {grid[0]}")
    n_trunc = DEFAULT_N_TRUNC if n_trunc is None else n_trunc
    logging.info("Stark sweep over %s drive values at n_trunc = %s", grid.size, n_trunc)

    values, overlaps, flags = _track_branches(params, grid, n_trunc)
    trace = SweepTrace(n_trunc)
    for ep, pair, overlap, flagged in zip(grid, values, overlaps, flags):
        analytic = stark_eigenvalues(params.with_drive(ep))
        trace.samples.append(SweepSample(float(ep), analytic, pair, overlap, flagged))

    if check_convergence:
        doubled, _, doubled_flags = _track_branches(params, grid, 2 * n_trunc)
        drifts = [
            max(abs(a[0] - b[0]), abs(a[1] - b[1]))
            for a, b, f1, f2 in zip(values, doubled, flags, doubled_flags)
            if not (f1 or f2)
        ]
        trace.convergence_drift = max(drifts, default=0.0)
        if not trace.converged:
            logging.warning(
                "Stark sweep not converged in n_trunc: drift %.3e",
                trace.convergence_drift,
            )
    return trace
