"""Bare basis and operators of the driven atom-cavity system.

States are |n, l> with n photons (0..N-1) and atomic level l in {1, 2, 3, 4}.
The flat index is ``4 * n + (l - 1)``. Every operator is ``kron(photon, atom)``
and is returned as a read-only dense complex array.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy.constants import hbar

from src.params import SystemParams

OperatorMatrix = npt.NDArray[np.complex128]

LEVELS = (1, 2, 3, 4)
# manifold of |n, l> is n + MANIFOLD_SHIFT[l]
MANIFOLD_SHIFT = {1: 0, 2: 1, 3: 1, 4: 2}


@dataclass(frozen=True)
class BareBasis:
    n_trunc: int

    def __post_init__(self):
        if self.n_trunc < 1:
            raise ValueError(f"Invalid truncation: n_trunc {self.n_trunc} < 1")

    @classmethod
    def from_params(cls, params: SystemParams) -> "BareBasis":
        return cls(params.n_trunc)

    @property
    def dim(self) -> int:
        return 4 * self.n_trunc

    @property
    def max_manifold(self) -> int:
        """Highest manifold with at least one state; manifolds above n_trunc - 1 are partial."""
        return self.n_trunc + 1

    def index(self, n: int, level: int) -> int:
        if level not in LEVELS:
            raise ValueError(f"Invalid atomic level: {level}")
        if not 0 <= n < self.n_trunc:
            raise ValueError(f"Invalid photon number: {n} not in [0, {self.n_trunc})")
        return 4 * n + (level - 1)

    def pair(self, flat: int) -> tuple[int, int]:
        if not 0 <= flat < self.dim:
            raise ValueError(f"Invalid flat index: {flat} not in [0, {self.dim})")
        n, offset = divmod(flat, 4)
        return n, offset + 1

    def manifold_of(self, flat: int) -> int:
        n, level = self.pair(flat)
        return n + MANIFOLD_SHIFT[level]

    def manifold_slots(self, m: int) -> list[int | None]:
        """Flat indices of |m,1>, |m-1,2>, |m-1,3>, |m-2,4>; None outside the truncated space."""
        slots: list[int | None] = []
        for level in LEVELS:
            n = m - MANIFOLD_SHIFT[level]
            slots.append(4 * n + level - 1 if 0 <= n < self.n_trunc else None)
        return slots

    def sector(self, max_manifold: int) -> npt.NDArray[np.int_]:
        """Flat indices of every state whose manifold is <= max_manifold."""
        return np.array(
            [k for k in range(self.dim) if self.manifold_of(k) <= max_manifold],
            dtype=int,
        )

    def photon_numbers(self) -> npt.NDArray[np.int_]:
        return np.repeat(np.arange(self.n_trunc), 4)

    def basis_vector(self, n: int, level: int) -> npt.NDArray[np.complex128]:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(n, level)] = 1.0
        return vec


def freeze(matrix: npt.ArrayLike) -> OperatorMatrix:
    out = np.array(matrix, dtype=complex)
    out.setflags(write=False)
    return out


def _ladder(n_trunc: int) -> npt.NDArray[np.float64]:
    return np.diagflat(np.sqrt(np.arange(1, n_trunc, dtype=float)), 1)


def build_sigma(basis: BareBasis, i: int, j: int) -> OperatorMatrix:
    """Atomic operator |i><j| on every photon number."""
    if i not in LEVELS or j not in LEVELS:
        raise ValueError(f"Invalid atomic level pair: ({i}, {j})")
    atom = np.zeros((4, 4))
    atom[i - 1, j - 1] = 1.0
    return freeze(np.kron(np.eye(basis.n_trunc), atom))


def build_annihilation(basis: BareBasis) -> OperatorMatrix:
    return freeze(np.kron(_ladder(basis.n_trunc), np.eye(4)))


def build_number(basis: BareBasis) -> OperatorMatrix:
    return freeze(np.kron(np.diag(np.arange(basis.n_trunc, dtype=float)), np.eye(4)))


def build_population_inversion(basis: BareBasis, level: int) -> OperatorMatrix:
    """D_l1 = sigma_ll - sigma_11."""
    return freeze(build_sigma(basis, level, level) - build_sigma(basis, 1, 1))


def is_hermitian(matrix: OperatorMatrix, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(matrix - matrix.conj().T), initial=0.0) <= tol)


def build_H0(params: SystemParams, basis: BareBasis) -> OperatorMatrix:
    a = build_annihilation(basis)
    ad = a.conj().T
    s = {(i, j): build_sigma(basis, i, j) for i in LEVELS for j in LEVELS}
    h0 = (
        params.delta * s[2, 2]
        + params.big_delta * s[4, 4]
        + 1j * params.g1 * (ad @ s[1, 2] - s[2, 1] @ a)
        + 1j * params.omega_c * (s[2, 3] - s[3, 2])
        + 1j * params.g2 * (ad @ s[3, 4] - s[4, 3] @ a)
    )
    return freeze(h0)


def build_Hd(params: SystemParams, basis: BareBasis) -> OperatorMatrix:
    a = build_annihilation(basis)
    return freeze(1j * params.ep * (a - a.conj().T))


def build_collapse_ops(params: SystemParams, basis: BareBasis) -> list[OperatorMatrix]:
    """[sqrt(gamma1) s12, sqrt(gamma2) s32, sqrt(gamma3) s34, sqrt(kappa) a], in this order."""
    return [
        freeze(math.sqrt(params.gamma1) * build_sigma(basis, 1, 2)),
        freeze(math.sqrt(params.gamma2) * build_sigma(basis, 3, 2)),
        freeze(math.sqrt(params.gamma3) * build_sigma(basis, 3, 4)),
        freeze(math.sqrt(params.kappa) * build_annihilation(basis)),
    ]


def build_damping_operator(params: SystemParams, basis: BareBasis) -> OperatorMatrix:
    """Sum of C^dag C over the collapse operators (the -i coefficient of Heff)."""
    total = np.zeros((basis.dim, basis.dim), dtype=complex)
    for op in build_collapse_ops(params, basis):
        total += op.conj().T @ op
    return freeze(total)


def build_Heff(params: SystemParams, basis: BareBasis) -> OperatorMatrix:
    return freeze(
        build_H0(params, basis)
        + build_Hd(params, basis)
        - 1j * build_damping_operator(params, basis)
    )


def drive_amplitude_from_power(
    power: float, kappa: float, transmission: float, omega_cav: float
) -> float:
    """
    Drive amplitude sqrt(P kappa T^2 / (4 hbar omega_cav)).

    This is the only dimensional entry point: power in W, kappa and omega_cav
    in rad/s, transmission dimensionless; the result is in s^-1. Divide by the
    reference rate to obtain the dimensionless ``ep`` used everywhere else.
    Whether kappa is the half or full width of the cavity line is not fixed by
    the formula; it is used here exactly as it enters the master equation.
    """
    if omega_cav == 0:
        raise ValueError("Invalid cavity frequency: omega_cav must be > 0")
    for name, value in (
        ("power", power),
        ("kappa", kappa),
        ("transmission", transmission),
        ("omega_cav", omega_cav),
    ):
        if value < 0 or not math.isfinite(value):
            raise ValueError(f"Invalid {name}: {value}")
    return math.sqrt(power * kappa * transmission**2 / (4 * hbar * omega_cav))


def dump_matrix(matrix: npt.ArrayLike, path: Path) -> Path:
    """Write the nonzero entries as ``row col re im`` lines."""
    m = np.asarray(matrix, dtype=complex)
    rows, cols = np.nonzero(m)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# dim {m.shape[0]} {m.shape[1]}\n")
        for r, c in zip(rows, cols):
            f.write(f"{r} {c} {float(m[r, c].real)!r} {float(m[r, c].imag)!r}\n")
    logging.debug("Wrote %s nonzeros to %s", len(rows), path)
    return path


def load_matrix(path: Path) -> OperatorMatrix:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if header[:2] != ["#", "dim"]:
            raise ValueError(f"Invalid matrix dump header in {path}")
        m = np.zeros((int(header[2]), int(header[3])), dtype=complex)
        for line in f:
            r, c, re, im = line.split()
            m[int(r), int(c)] = complex(float(re), float(im))
    return freeze(m)
