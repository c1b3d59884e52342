"""Driving and damping rewritten in the dressed-state (polariton) basis.

p_ij^(n) = |e_i^(n-1)><e_j^(n)| lowers the excitation number by one. The
drive becomes a table of effective Rabi frequencies between adjacent
manifolds and the damping a Hermitian decay matrix inside each manifold.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from src.constants import COMMUTATOR_TOL, CROSS_CHECK_TOL, HERMITIAN_TOL
from src.dressed import DressedPath, ManifoldSpectrum, manifold_spectrum
from src.errors import ConsistencyError
from src.operators import (
    MANIFOLD_SHIFT,
    BareBasis,
    OperatorMatrix,
    freeze,
    build_annihilation,
    build_damping_operator,
    build_H0,
    build_Hd,
    build_population_inversion,
    build_sigma,
)
from src.params import SystemParams

Matrix = npt.NDArray[np.complex128]


def embedded_vectors(spectrum: ManifoldSpectrum, basis: BareBasis) -> Matrix:
    """dim x k matrix of the manifold's dressed states in the bare basis."""
    m = spectrum.manifold
    if m > basis.n_trunc - 1:
        raise ValueError(
            f"Manifold {m} is not complete for n_trunc = {basis.n_trunc}"
        )
    slots = basis.manifold_slots(m)
    out = np.zeros((basis.dim, len(spectrum.states)), dtype=complex)
    for slot, flat in enumerate(slots):
        if flat is not None:
            out[flat, :] = spectrum.vectors[slot, :]
    return out


@dataclass(frozen=True)
class TransformationMatrix:
    """b_n = M_n d_n: row i expands the bare slot i over the dressed states."""

    manifold: int
    matrix: Matrix
    path: DressedPath

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


def transformation_matrix(params: SystemParams, n: int) -> TransformationMatrix:
    if n < 1:
        raise ValueError(f"Invalid manifold for a transformation matrix: {n}")
    spectrum = manifold_spectrum(params, n)
    k = len(spectrum.states)
    return TransformationMatrix(n, spectrum.vectors[:k].conj(), spectrum.path)


def annihilation_component(basis: BareBasis, n: int) -> OperatorMatrix:
    """
    Part of the field operator a that takes manifold n to manifold n - 1.

    Manifolds n_trunc and n_trunc + 1 only exist partially in the truncated
    space; their components keep whatever transitions stay inside it, so the
    components for n = 1..n_trunc + 1 add up to ``build_annihilation``.
    """
    if not 1 <= n <= basis.max_manifold:
        raise ValueError(f"Invalid manifold: {n} not in [1, {basis.max_manifold}]")
    out = np.zeros((basis.dim, basis.dim))
    for level, shift in MANIFOLD_SHIFT.items():
        photons = n - shift
        if 1 <= photons <= basis.n_trunc - 1:
            out[basis.index(photons - 1, level), basis.index(photons, level)] = math.sqrt(
                photons
            )
    return freeze(out)


def _slot_weights(values: list[float]) -> npt.NDArray[np.float64]:
    return np.array([max(v, 0.0) for v in values])


@dataclass(frozen=True)
class CouplingTable:
    """Effective Rabi frequencies: rows are states of manifold n - 1, columns of n."""

    manifold: int
    matrix: Matrix
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    paths: tuple[DressedPath, DressedPath]
    max_deviation: float = 0.0

    def entry(self, i: str, j: str) -> complex:
        return complex(self.matrix[self.row_labels.index(i), self.col_labels.index(j)])


def rabi_table(params: SystemParams, n: int, check: bool = True) -> CouplingTable:
    """
    Effective Rabi frequencies Omega_ij^(n, n-1) = ep <e_i^(n-1)| a |e_j^(n)>.

    The table is evaluated from the dressed-state coefficients and, when
    ``check`` is set, compared with the matrix element <e_i|H_d|e_j>/i of the
    bare drive operator.

    Raises:
        ConsistencyError: if the two evaluations differ by more than the
            cross-check tolerance.
    """
    if n < 1:
        raise ValueError(f"Invalid manifold for a Rabi table: {n}")
    lower, upper = manifold_spectrum(params, n - 1), manifold_spectrum(params, n)
    weights = np.sqrt(_slot_weights([n, n - 1, n - 1, n - 2]))
    table = params.ep * lower.vectors.conj().T @ np.diag(weights) @ upper.vectors

    deviation = 0.0
    if check:
        basis = BareBasis(n + 1)
        bracket = (
            embedded_vectors(lower, basis).conj().T
            @ build_Hd(params, basis)
            @ embedded_vectors(upper, basis)
        ) / 1j
        deviation = float(np.max(np.abs(table - bracket)))
        if deviation > CROSS_CHECK_TOL * max(1.0, params.ep):
            raise ConsistencyError(
                f"Rabi table ({n - 1}, {n}) deviates from the drive matrix "
                f"elements by {deviation:.3e}"
            )
    return CouplingTable(
        n, table, lower.labels, upper.labels, (lower.path, upper.path), deviation
    )


@dataclass(frozen=True)
class DampingMatrix:
    manifold: int
    matrix: Matrix
    labels: tuple[str, ...]
    path: DressedPath
    max_deviation: float = 0.0

    @property
    def rates(self) -> npt.NDArray[np.float64]:
        return np.real(np.diag(self.matrix))

    def rate(self, label: str) -> float:
        return float(self.rates[self.labels.index(label)])

    def is_positive_semidefinite(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.matrix) >= -tol))

    def diagonal_only(self) -> "DampingMatrix":
        return DampingMatrix(
            self.manifold,
            np.diag(np.diag(self.matrix)),
            self.labels,
            self.path,
            self.max_deviation,
        )


def first_manifold_decay_rates(params: SystemParams) -> dict[str, float]:
    """Closed-form diagonal decay rates of the first manifold."""
    g1, omega_c = params.g1, params.omega_c
    spectrum = manifold_spectrum(params, 1)
    rates = {"0": params.kappa / (1 + (g1 / omega_c) ** 2)}
    for label in ("-", "+"):
        eps = spectrum.state(label).epsilon
        rates[label] = (params.kappa * g1**2 + (params.gamma1 + params.gamma2) * eps**2) / (
            g1**2 + omega_c**2 + eps**2
        )
    return rates


def damping_matrix(params: SystemParams, n: int, check: bool = True) -> DampingMatrix:
    """
    Decay matrix Gamma_jk^(n) of manifold n.

    Each slot decays at its bare rate (n kappa for |n,1>, (n-1) kappa + gamma1
    + gamma2 for |n-1,2>, (n-1) kappa for |n-1,3>, (n-2) kappa + gamma3 for
    |n-2,4>); the dressed states mix these rates and produce cross terms.
    """
    if n < 0:
        raise ValueError(f"Invalid manifold for a damping matrix: {n}")
    spectrum = manifold_spectrum(params, n)
    kappa = params.kappa
    rates = _slot_weights(
        [
            n * kappa,
            (n - 1) * kappa + params.gamma1 + params.gamma2,
            (n - 1) * kappa,
            (n - 2) * kappa + params.gamma3,
        ]
    )
    v = spectrum.vectors
    gamma = v.conj().T @ np.diag(rates) @ v

    deviation = 0.0
    if check and n >= 1:
        basis = BareBasis(n + 1)
        e = embedded_vectors(spectrum, basis)
        h_res = -1j * build_damping_operator(params, basis)
        bracket = (e.conj().T @ h_res @ e) / -1j
        deviation = float(np.max(np.abs(gamma - bracket)))
        if n == 1 and spectrum.path is DressedPath.CLOSED_FORM:
            closed = first_manifold_decay_rates(params)
            diag = np.real(np.diag(gamma))
            for pos, label in enumerate(spectrum.labels):
                deviation = max(deviation, abs(diag[pos] - closed[label]))
        if deviation > CROSS_CHECK_TOL * max(1.0, kappa, params.gamma1 + params.gamma2):
            raise ConsistencyError(
                f"Damping matrix of manifold {n} deviates from the damping "
                f"matrix elements by {deviation:.3e}"
            )
    return DampingMatrix(n, gamma, spectrum.labels, spectrum.path, deviation)


def damping_cosines(damping: DampingMatrix) -> npt.NDArray[np.float64]:
    """cos(theta_jk) = Gamma_jk / sqrt(Gamma_jj Gamma_kk); zero where a rate vanishes."""
    rates = damping.rates
    norm = np.sqrt(np.outer(rates, rates))
    cosines = np.zeros_like(norm)
    np.divide(np.real(damping.matrix), norm, out=cosines, where=norm > 0)
    return cosines


def cross_damping_effect(params: SystemParams, n: int) -> npt.NDArray[np.float64]:
    """
    Relative change of the effective decay rate of each dressed state when the
    off-diagonal part of Gamma^(n) is dropped.

    The effective rates are minus the imaginary parts of the eigenvalues of
    diag(eps) - i Gamma, paired with the dressed states by energy.
    """
    spectrum = manifold_spectrum(params, n)
    gamma = damping_matrix(params, n, check=False)
    eigvals = np.linalg.eigvals(np.diag(spectrum.energies) - 1j * gamma.matrix)
    order = [int(np.argmin(np.abs(eigvals.real - eps))) for eps in spectrum.energies]
    effective = -eigvals[order].imag
    diagonal = gamma.rates
    change = np.zeros_like(diagonal)
    np.divide(np.abs(effective - diagonal), diagonal, out=change, where=diagonal > 0)
    return change


@dataclass(frozen=True)
class PolaritonOperator:
    manifold: int
    lower: str
    upper: str
    matrix: Matrix
    # p_j^dag for the first manifold as coefficients of a^dag, sigma_21, sigma_31
    mixing: dict[str, complex] | None = None

    @property
    def dag(self) -> Matrix:
        return self.matrix.conj().T


def _first_manifold_creation(
    basis: BareBasis, mixing: dict[str, complex]
) -> OperatorMatrix:
    a_dag = build_annihilation(basis).conj().T
    return (
        mixing["a_dag"] * a_dag
        + mixing["sigma_21"] * build_sigma(basis, 2, 1)
        + mixing["sigma_31"] * build_sigma(basis, 3, 1)
    )


def first_manifold_mixing(params: SystemParams, label: str) -> dict[str, complex]:
    alpha, beta, mu, _ = manifold_spectrum(params, 1).state(label).coeffs
    return {"a_dag": complex(alpha), "sigma_21": complex(beta), "sigma_31": complex(mu)}


def polariton_operator(
    params: SystemParams, basis: BareBasis, n: int, i: str, j: str
) -> PolaritonOperator:
    """
    Rank-one operator |e_i^(n-1)><e_j^(n)| in the bare basis.

    For n = 1 the operator is also rebuilt from its decomposition over
    a^dag, sigma_21 and sigma_31 acting on the ground state, and the two
    constructions must agree.
    """
    if not 1 <= n <= basis.n_trunc - 1:
        raise ValueError(f"Invalid manifold: {n} not in [1, {basis.n_trunc - 1}]")
    lower, upper = manifold_spectrum(params, n - 1), manifold_spectrum(params, n)
    bra = embedded_vectors(upper, basis)[:, upper.position(j)]
    ket = embedded_vectors(lower, basis)[:, lower.position(i)]
    matrix = freeze(np.outer(ket, bra.conj()))

    mixing = None
    if n == 1:
        mixing = first_manifold_mixing(params, j)
        ground = np.zeros((basis.dim, basis.dim))
        ground[0, 0] = 1.0
        rebuilt = _first_manifold_creation(basis, mixing) @ ground
        deviation = np.max(np.abs(rebuilt - matrix.conj().T))
        if deviation > HERMITIAN_TOL:
            raise ConsistencyError(
                f"First-manifold polariton {j} does not match its operator form "
                f"({deviation:.3e})"
            )
    return PolaritonOperator(n, i, j, matrix, mixing)


@dataclass
class CommutatorReport:
    deviations: dict[str, float] = field(default_factory=dict)
    ground_expectations: dict[str, float] = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    @property
    def passed(self) -> bool:
        expectation_error = max(
            (abs(v - 1.0) for v in self.ground_expectations.values()), default=0.0
        )
        return self.max_deviation <= COMMUTATOR_TOL and expectation_error <= COMMUTATOR_TOL


def polariton_commutator(
    params: SystemParams, basis: BareBasis, label: str
) -> tuple[OperatorMatrix, OperatorMatrix]:
    """
    [p_j, p_j^dag] for a first-manifold polariton, built twice: from the
    operator products and from the closed expression

        |alpha|^2 - |beta|^2 D21 - |mu|^2 D31 - conj(beta) mu s32 - conj(mu) beta s23

    with p_j^dag = alpha a^dag + beta s21 + mu s31. For the resonant state
    beta = 0 and this reduces to (1 - (g1/omega_c)^2 D31) / N_0^2.
    """
    mixing = first_manifold_mixing(params, label)
    create = _first_manifold_creation(basis, mixing)
    destroy = create.conj().T
    lhs = destroy @ create - create @ destroy
    alpha, beta, mu = mixing["a_dag"], mixing["sigma_21"], mixing["sigma_31"]
    rhs = (
        abs(alpha) ** 2 * np.eye(basis.dim)
        - abs(beta) ** 2 * build_population_inversion(basis, 2)
        - abs(mu) ** 2 * build_population_inversion(basis, 3)
        - np.conj(beta) * mu * build_sigma(basis, 3, 2)
        - np.conj(mu) * beta * build_sigma(basis, 2, 3)
    )
    return freeze(lhs), freeze(rhs)


def commutator_check(params: SystemParams, basis: BareBasis) -> CommutatorReport:
    """
    Verify the first-manifold polariton commutators away from the photon
    truncation edge, plus their ground-state expectation value.
    """
    if basis.n_trunc < 3:
        raise ValueError(f"Invalid truncation for the commutator check: {basis.n_trunc}")
    if params.omega_c <= 0:
        raise ValueError("Commutator check needs omega_c > 0")
    inner = np.flatnonzero(basis.photon_numbers() <= basis.n_trunc - 2)
    report = CommutatorReport()
    for label in ("-", "0", "+"):
        lhs, rhs = polariton_commutator(params, basis, label)
        window = np.ix_(inner, inner)
        report.deviations[label] = float(np.max(np.abs(lhs[window] - rhs[window])))
        report.ground_expectations[label] = float(np.real(lhs[0, 0]))
    if not report.passed:
        logging.warning("Commutator check failed: %s", report.deviations)
    return report


@dataclass(frozen=True)
class PolaritonGenerator:
    n_max: int
    h0: OperatorMatrix
    hd: OperatorMatrix
    hres: OperatorMatrix
    damping: tuple[DampingMatrix, ...]
    rabi: tuple[CouplingTable, ...]
    sector: npt.NDArray[np.int_]

    @property
    def heff(self) -> Matrix:
        return self.h0 + self.hd + self.hres

    def restrict(self, matrix: npt.ArrayLike) -> Matrix:
        return np.asarray(matrix)[np.ix_(self.sector, self.sector)]


def assemble_polariton_generator(
    params: SystemParams,
    basis: BareBasis,
    n_max: int,
    keep_cross_damping: bool = True,
) -> PolaritonGenerator:
    """
    Rebuild H0, H_d and the damping term from dressed states of manifolds
    0..n_max. On the sector of manifolds <= n_max the sum equals the bare
    effective Hamiltonian.
    """
    if not 1 <= n_max <= basis.n_trunc - 1:
        raise ValueError(f"Invalid n_max: {n_max} not in [1, {basis.n_trunc - 1}]")
    dim = basis.dim
    h0 = np.zeros((dim, dim), dtype=complex)
    hd = np.zeros((dim, dim), dtype=complex)
    hres = np.zeros((dim, dim), dtype=complex)
    dampings: list[DampingMatrix] = []
    tables: list[CouplingTable] = []
    previous: Matrix | None = None
    for n in range(n_max + 1):
        spectrum = manifold_spectrum(params, n)
        e = embedded_vectors(spectrum, basis)
        h0 += e @ np.diag(spectrum.energies) @ e.conj().T
        damping = damping_matrix(params, n, check=False)
        if not keep_cross_damping:
            damping = damping.diagonal_only()
        dampings.append(damping)
        hres += -1j * (e @ damping.matrix @ e.conj().T)
        if previous is not None:
            table = rabi_table(params, n, check=False)
            tables.append(table)
            lowering = previous @ table.matrix @ e.conj().T
            hd += 1j * (lowering - lowering.conj().T)
        previous = e
    return PolaritonGenerator(
        n_max,
        freeze(h0),
        freeze(hd),
        freeze(hres),
        tuple(dampings),
        tuple(tables),
        basis.sector(n_max),
    )


def generator_deviation(
    params: SystemParams, basis: BareBasis, n_max: int | None = None
) -> float:
    """Largest entry of |H_polariton - H_eff| on the covered sector."""
    n_max = basis.n_trunc - 1 if n_max is None else n_max
    generator = assemble_polariton_generator(params, basis, n_max)
    bare = build_H0(params, basis) + build_Hd(params, basis)
    bare = bare - 1j * build_damping_operator(params, basis)
    return float(np.max(np.abs(generator.restrict(generator.heff - bare))))


@dataclass(frozen=True)
class PolaritonCollapse:
    manifold: int
    lower: str
    upper: str
    matrix: OperatorMatrix


def polariton_collapse_ops(
    params: SystemParams, basis: BareBasis, n_max: int
) -> list[PolaritonCollapse]:
    """S_ij^(n) = sqrt(Gamma_jj^(n)) p_ij^(n) for n = 1..n_max."""
    if not 1 <= n_max <= basis.n_trunc - 1:
        raise ValueError(f"Invalid n_max: {n_max} not in [1, {basis.n_trunc - 1}]")
    ops = []
    for n in range(1, n_max + 1):
        lower, upper = manifold_spectrum(params, n - 1), manifold_spectrum(params, n)
        rates = damping_matrix(params, n, check=False).rates
        e_low, e_up = embedded_vectors(lower, basis), embedded_vectors(upper, basis)
        for i, low in enumerate(lower.labels):
            for j, up in enumerate(upper.labels):
                matrix = math.sqrt(max(rates[j], 0.0)) * np.outer(
                    e_low[:, i], e_up[:, j].conj()
                )
                ops.append(PolaritonCollapse(n, low, up, freeze(matrix)))
    return ops
