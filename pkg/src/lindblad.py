"""Master equation, steady state and fluorescence spectrum.

    d rho / dt = -i (H_eff rho - rho H_eff^dag) + 2 sum_k C_k rho C_k^dag

Density matrices are vectorized by column stacking, vec(X) = X.flatten("F"),
so that vec(A X B) = (B^T kron A) vec(X). With C = sqrt(kappa) a the field
amplitude <a> decays at rate kappa and the empty-cavity line has half width
kappa.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy import integrate, linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from src.constants import MAX_LIOUVILLIAN_SIZE, STEADY_STATE_TOL
from src.errors import (
    ConsistencyError,
    DegenerateSteadyStateError,
    ResourceLimitError,
)
from src.operators import (
    BareBasis,
    build_annihilation,
    build_collapse_ops,
    build_Heff,
    freeze,
)
from src.params import SystemParams
from src.workers import ordered_map

Backend = Literal["resolvent", "eig"]

# dense eigendecomposition backend is limited to small truncations
MAX_EIG_SIZE = 6400
POSITIVITY_TOL = 1e-8
DEGENERACY_TOL = 1e-8
# spectral lines below this fraction of the tallest one are dropped
LINE_HEIGHT_FLOOR = 1e-6


def vec(matrix: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    return np.asarray(matrix, dtype=complex).flatten(order="F")


def unvec(vector: npt.ArrayLike, dim: int) -> npt.NDArray[np.complex128]:
    return np.asarray(vector, dtype=complex).reshape((dim, dim), order="F")


@dataclass(frozen=True)
class Liouvillian:
    matrix: sparse.csr_matrix
    dim: int

    @property
    def size(self) -> int:
        return self.dim * self.dim

    def apply(self, rho: npt.ArrayLike) -> npt.NDArray[np.complex128]:
        return unvec(self.matrix @ vec(rho), self.dim)

    def trace_row(self) -> sparse.csr_matrix:
        """Row functional x -> Tr(unvec(x))."""
        cols = np.arange(self.dim) * (self.dim + 1)
        return sparse.csr_matrix(
            (np.ones(self.dim, dtype=complex), (np.zeros(self.dim, dtype=int), cols)),
            shape=(1, self.size),
        )

    def trace_defect(self) -> float:
        """Largest column of t L, which vanishes for a trace-preserving generator."""
        return float(np.max(np.abs((self.trace_row() @ self.matrix).toarray()), initial=0.0))


def build_liouvillian(
    params: SystemParams,
    basis: BareBasis | None = None,
    max_size: int = MAX_LIOUVILLIAN_SIZE,
) -> Liouvillian:
    basis = BareBasis.from_params(params) if basis is None else basis
    dim = basis.dim
    if dim * dim > max_size:
        raise ResourceLimitError(
            f"Liouvillian of side {dim * dim} exceeds the cap {max_size}; "
            "lower n_trunc or raise max_liouvillian_size"
        )
    identity = sparse.identity(dim, dtype=complex, format="csr")
    heff = sparse.csr_matrix(build_Heff(params, basis))
    generator = -1j * (sparse.kron(identity, heff) - sparse.kron(heff.conj(), identity))
    for op in build_collapse_ops(params, basis):
        c = sparse.csr_matrix(op)
        if c.nnz:
            generator = generator + 2 * sparse.kron(c.conj(), c)
    logging.debug("Liouvillian of side %s with %s nonzeros", dim * dim, generator.nnz)
    return Liouvillian(sparse.csr_matrix(generator), dim)


def _with_trace_row(matrix: sparse.spmatrix, trace: sparse.csr_matrix, row: int) -> sparse.csc_matrix:
    size = matrix.shape[0]
    keep = sparse.diags(np.where(np.arange(size) == row, 0.0, 1.0))
    pick = sparse.csr_matrix(([1.0], ([row], [0])), shape=(size, 1))
    return (keep @ matrix + pick @ trace).tocsc()


@dataclass(frozen=True)
class DensityMatrix:
    matrix: npt.NDArray[np.complex128]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expect(self, op: npt.ArrayLike) -> complex:
        return complex(np.trace(np.asarray(op) @ self.matrix))

    def photon_number(self, basis: BareBasis) -> float:
        return float(np.real(np.sum(np.diag(self.matrix) * basis.photon_numbers())))

    def tail_population(self, basis: BareBasis, levels: int = 2) -> float:
        """Population of the `levels` highest photon-number states."""
        top = basis.photon_numbers() >= basis.n_trunc - levels
        return float(np.real(np.sum(np.diag(self.matrix)[top])))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.matrix)))


def _solve_with_trace_row(liouvillian: Liouvillian, row: int) -> npt.NDArray[np.complex128]:
    system = _with_trace_row(liouvillian.matrix, liouvillian.trace_row(), row)
    rhs = np.zeros(liouvillian.size, dtype=complex)
    rhs[row] = 1.0
    try:
        solution = sparse_linalg.splu(system).solve(rhs)
    except RuntimeError as exc:
        raise DegenerateSteadyStateError(
            f"Steady state is not unique (singular system: {exc})"
        ) from exc
    if not np.all(np.isfinite(solution)):
        raise DegenerateSteadyStateError("Steady state is not unique (non-finite solve)")
    rho = unvec(solution, liouvillian.dim)
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def steady_state(liouvillian: Liouvillian) -> DensityMatrix:
    """
    Null vector of the Liouvillian, normalized to unit trace.

    One equation of L x = 0 is replaced by Tr x = 1. A second solve replaces
    a different equation; with a one-dimensional null space both give the
    same state.

    Raises:
        DegenerateSteadyStateError: when the null space is not one-dimensional.
        ConsistencyError: when the solution is not a valid density matrix.
    """
    dim = liouvillian.dim
    rho = _solve_with_trace_row(liouvillian, 0)
    other = _solve_with_trace_row(liouvillian, (dim - 1) * (dim + 1))
    spread = float(np.max(np.abs(rho - other)))
    if spread > DEGENERACY_TOL:
        raise DegenerateSteadyStateError(
            f"Steady state depends on the normalization row (spread {spread:.3e})"
        )

    residual = float(np.max(np.abs(liouvillian.matrix @ vec(rho))))
    scale = sparse_linalg.norm(liouvillian.matrix, np.inf)
    if residual > STEADY_STATE_TOL * max(scale, 1.0):
        raise DegenerateSteadyStateError(
            f"Steady-state residual {residual:.3e} exceeds tolerance"
        )
    state = DensityMatrix(freeze(rho))
    if state.min_eigenvalue() < -POSITIVITY_TOL:
        raise ConsistencyError(
            f"Steady state is not positive: eigenvalue {state.min_eigenvalue():.3e}"
        )
    return state


@dataclass(frozen=True)
class TruncationReport:
    n_trunc: int
    tail_population: float
    photon_number: float
    doubled_photon_number: float

    @property
    def drift(self) -> float:
        return abs(self.doubled_photon_number - self.photon_number)


def truncation_report(params: SystemParams, levels: int = 2) -> TruncationReport:
    """Tail population at n_trunc and the photon-number drift when it is doubled."""
    basis = BareBasis.from_params(params)
    rho = steady_state(build_liouvillian(params, basis))
    doubled_params = params.with_truncation(2 * params.n_trunc)
    doubled_basis = BareBasis.from_params(doubled_params)
    doubled = steady_state(build_liouvillian(doubled_params, doubled_basis))
    return TruncationReport(
        params.n_trunc,
        rho.tail_population(basis, levels),
        rho.photon_number(basis),
        doubled.photon_number(doubled_basis),
    )


def _resolvent_values(
    liouvillian: Liouvillian,
    source: npt.NDArray[np.complex128],
    readout: npt.NDArray[np.complex128],
    omega: npt.NDArray[np.float64],
) -> npt.NDArray[np.complex128]:
    size = liouvillian.size
    # equation 0 becomes Tr x = 0; the source is traceless
    base = _with_trace_row(liouvillian.matrix, liouvillian.trace_row(), 0)
    shift = sparse.diags(np.where(np.arange(size) == 0, 0.0, 1.0)).tocsc()
    rhs = -source.copy()
    rhs[0] = 0.0

    def solve(w: float) -> complex:
        try:
            x = sparse_linalg.splu((base + 1j * w * shift).tocsc()).solve(rhs)
        except RuntimeError:
            return complex(np.nan, np.nan)
        if not np.all(np.isfinite(x)):
            return complex(np.nan, np.nan)
        return complex(readout @ x)

    return np.array(ordered_map(solve, list(omega)), dtype=complex)


def _pole_terms(
    liouvillian: Liouvillian,
    source: npt.NDArray[np.complex128],
    readout: npt.NDArray[np.complex128],
) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    if liouvillian.size > MAX_EIG_SIZE:
        raise ResourceLimitError(
            f"eig backend limited to Liouvillian side {MAX_EIG_SIZE}, "
            f"got {liouvillian.size}"
        )
    eigvals, right = linalg.eig(liouvillian.matrix.toarray())
    weights = linalg.solve(right, -source)
    amplitudes = readout @ right
    scale = np.max(np.abs(eigvals))
    live = np.abs(eigvals) > 1e-10 * scale
    return eigvals[live], (amplitudes * weights)[live]


def _pole_sum(
    poles: npt.NDArray[np.complex128],
    terms: npt.NDArray[np.complex128],
    omega: npt.NDArray[np.float64],
) -> npt.NDArray[np.complex128]:
    return np.array([np.sum(terms / (poles + 1j * w)) for w in omega])


def _correlation_vectors(
    rho: npt.ArrayLike, first: npt.ArrayLike, second: npt.ArrayLike
) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.complex128]]:
    rho = np.asarray(rho, dtype=complex)
    first = np.asarray(first, dtype=complex)
    second = np.asarray(second, dtype=complex)
    if abs(np.trace(rho @ first)) > 1e-10:
        raise ValueError(
            "Correlation source has a stationary part; subtract the mean first"
        )
    # Tr(second X) = vec(second^T) . vec(X)
    return vec(rho @ first), vec(second.T)


def _frequency_grid(omega_grid: npt.ArrayLike) -> npt.NDArray[np.float64]:
    omega = np.asarray(omega_grid, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega_grid must be finite")
    return omega


def correlation_spectrum(
    liouvillian: Liouvillian,
    rho: npt.ArrayLike,
    first: npt.ArrayLike,
    second: npt.ArrayLike,
    omega_grid: npt.ArrayLike,
    backend: Backend = "resolvent",
) -> npt.NDArray[np.complex128]:
    """
    One-sided transform int_0^inf <first(0) second(tau)> e^{i omega tau} dtau.

    By the regression theorem the correlation is Tr[second e^{L tau}(rho first)],
    so each sample solves (L + i omega) x = -vec(rho first). ``rho first`` must
    be traceless: stationary parts would put a delta at omega = 0. Samples
    where the solve fails come back as NaN.
    """
    source, readout = _correlation_vectors(rho, first, second)
    omega = _frequency_grid(omega_grid)
    if backend == "resolvent":
        return _resolvent_values(liouvillian, source, readout, omega)
    if backend == "eig":
        return _pole_sum(*_pole_terms(liouvillian, source, readout), omega)
    raise ValueError(f"Invalid spectrum backend: {backend!r}")


@dataclass(frozen=True)
class SpectralLine:
    """
    One Liouvillian mode seen in a spectrum. With the mode eigenvalue
    lambda = -hwhm - i center and weight w it adds
    Re[w / (lambda + i omega)] = height * hwhm * (hwhm + skew * x) / (x^2 + hwhm^2),
    x = omega - center.
    """

    center: float
    hwhm: float
    weight: complex

    @property
    def height(self) -> float:
        return -self.weight.real / self.hwhm

    @property
    def skew(self) -> float:
        return self.weight.imag / -self.weight.real if self.weight.real else math.inf

    def evaluate(self, omega: npt.ArrayLike) -> npt.NDArray[np.float64]:
        x = np.asarray(omega, dtype=float) - self.center
        return np.real(self.weight / (-self.hwhm + 1j * x))


def correlation_lines(
    liouvillian: Liouvillian,
    rho: npt.ArrayLike,
    first: npt.ArrayLike,
    second: npt.ArrayLike,
    floor: float = LINE_HEIGHT_FLOOR,
) -> list[SpectralLine]:
    """
    Modes of the one-sided correlation transform whose peak height
    |height| is at least ``floor`` times the tallest one, sorted by center.

    Uses the dense eigendecomposition, so the Liouvillian side must not
    exceed MAX_EIG_SIZE.
    """
    if floor < 0:
        raise ValueError(f"Invalid line floor: {floor}")
    source, readout = _correlation_vectors(rho, first, second)
    poles, terms = _pole_terms(liouvillian, source, readout)
    return _select_lines(poles, terms, floor)


def _select_lines(
    poles: npt.NDArray[np.complex128], terms: npt.NDArray[np.complex128], floor: float
) -> list[SpectralLine]:
    damped = poles.real < 0
    lines = [
        SpectralLine(float(-p.imag), float(-p.real), complex(t))
        for p, t in zip(poles[damped], terms[damped])
    ]
    if not lines:
        return []
    tallest = max(abs(line.height) for line in lines)
    kept = [line for line in lines if abs(line.height) >= floor * tallest]
    return sorted(kept, key=lambda line: line.center)


@dataclass
class SpectrumTrace:
    """Incoherent fluorescence spectrum; omega is measured from the cavity frequency."""

    omega: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    coherent_weight: float
    mean_field: complex
    photon_number: float
    flagged: npt.NDArray[np.int_]
    backend: str = "resolvent"
    peaks: list = field(default_factory=list)
    # filled by the eig backend only
    lines: list[SpectralLine] = field(default_factory=list)

    @property
    def incoherent_number(self) -> float:
        """<da^dag da> = <a^dag a> - |<a>|^2."""
        return self.photon_number - self.coherent_weight

    @property
    def step(self) -> float:
        return float(np.mean(np.diff(self.omega))) if self.omega.size > 1 else 0.0

    def integrated(self) -> float:
        ok = np.isfinite(self.values)
        return float(integrate.trapezoid(self.values[ok], self.omega[ok]))


def fluorescence_spectrum(
    params: SystemParams,
    basis: BareBasis | None,
    omega_grid: npt.ArrayLike,
    backend: Backend = "resolvent",
    liouvillian: Liouvillian | None = None,
    steady: DensityMatrix | None = None,
    line_floor: float = LINE_HEIGHT_FLOOR,
) -> SpectrumTrace:
    """
    Steady-state spectrum of the light leaving the cavity,
    S(omega) = Re int_0^inf <da^dag(0) da(tau)> e^{i omega tau} dtau with
    da = a - <a>. The coherent part |<a>|^2, a delta at omega = 0, is
    reported separately in ``coherent_weight``.

    The eig backend also lists the modes behind the spectrum in ``lines``
    (see correlation_lines), including lines that overlap too much to show
    a maximum of their own.
    """
    basis = BareBasis.from_params(params) if basis is None else basis
    liouvillian = build_liouvillian(params, basis) if liouvillian is None else liouvillian
    steady = steady_state(liouvillian) if steady is None else steady
    omega = _frequency_grid(omega_grid)
    logging.info(
        "Fluorescence spectrum at ep = %s over %s points (%s backend)",
        params.ep,
        omega.size,
        backend,
    )

    a = build_annihilation(basis)
    mean = steady.expect(a)
    fluctuation = a - mean * np.eye(basis.dim)
    lines: list[SpectralLine] = []
    if backend == "eig":
        source, readout = _correlation_vectors(steady.matrix, fluctuation.conj().T, fluctuation)
        poles, terms = _pole_terms(liouvillian, source, readout)
        raw = _pole_sum(poles, terms, omega)
        lines = _select_lines(poles, terms, line_floor)
        logging.info("Kept %s spectral lines above %.1e of the tallest", len(lines), line_floor)
    else:
        raw = correlation_spectrum(
            liouvillian, steady.matrix, fluctuation.conj().T, fluctuation, omega, backend
        )
    values = raw.real
    flagged = np.flatnonzero(~np.isfinite(values))
    if flagged.size:
        logging.warning("Skipped %s spectrum samples with failed solves", flagged.size)
    finite = values[np.isfinite(values)]
    if finite.size and finite.min() < -POSITIVITY_TOL * max(finite.max(), 1e-300):
        logging.warning("Spectrum has negative samples down to %.3e", finite.min())
    return SpectrumTrace(
        omega=omega,
        values=values,
        coherent_weight=abs(mean) ** 2,
        mean_field=mean,
        photon_number=steady.photon_number(basis),
        flagged=flagged,
        backend=backend,
        lines=lines,
    )
