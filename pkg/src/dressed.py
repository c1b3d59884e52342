"""Dressed states of the undriven, undamped Hamiltonian, manifold by manifold.

Manifold n holds the bare states |n,1>, |n-1,2>, |n-1,3>, |n-2,4> (the
"slots" alpha, beta, mu, nu). Coefficient vectors are always stored over all
four slots, absent slots being zero: the ground manifold only has alpha, the
first manifold has no nu.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy import linalg

from src.constants import (
    CLOSED_FORM_TOL,
    EIGEN_RESIDUAL_TOL,
    IMAG_RESIDUE_TOL,
    PHASE_FIX_TOL,
)
from src.params import SystemParams

SLOT_NAMES = ("alpha", "beta", "mu", "nu")
FIRST_MANIFOLD_LABELS = ("-", "0", "+")
HIGHER_MANIFOLD_LABELS = ("1", "2", "3", "4")


class DressedPath(str, Enum):
    CLOSED_FORM = "closed-form"
    NUMERIC = "numeric"


class ClosedFormRejected(ValueError):
    """The closed-form evaluation is ill-conditioned for these parameters."""


@dataclass(frozen=True)
class DressedState:
    manifold: int
    label: str
    epsilon: float
    coeffs: npt.NDArray[np.complex128]
    path: DressedPath

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass(frozen=True)
class ManifoldSpectrum:
    manifold: int
    states: tuple[DressedState, ...]
    sum_rule: float
    path: DressedPath
    reason: str = field(default="", compare=False)

    @property
    def energies(self) -> npt.NDArray[np.float64]:
        return np.array([s.epsilon for s in self.states])

    @property
    def vectors(self) -> npt.NDArray[np.complex128]:
        """4 x k matrix whose columns are the coefficient vectors over the slots."""
        return np.column_stack([s.coeffs for s in self.states])

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states)

    def state(self, label: str) -> DressedState:
        for s in self.states:
            if s.label == label:
                return s
        raise ValueError(f"Invalid state label {label!r} for manifold {self.manifold}")

    def position(self, label: str) -> int:
        if label not in self.labels:
            raise ValueError(
                f"Invalid state label {label!r} for manifold {self.manifold}"
            )
        return self.labels.index(label)

    def gram(self) -> npt.NDArray[np.complex128]:
        v = self.vectors
        return v.conj().T @ v

    def residual(self, block: npt.NDArray[np.complex128]) -> float:
        """max_k ||H v_k - eps_k v_k|| over the present slots."""
        k = block.shape[0]
        v = self.vectors[:k]
        return float(np.max(np.linalg.norm(block @ v - v * self.energies, axis=0)))


def slot_count(n: int) -> int:
    return 1 if n == 0 else 3 if n == 1 else 4


def manifold_block(params: SystemParams, n: int) -> npt.NDArray[np.complex128]:
    """Block of H0 over the present slots of manifold n (1x1, 3x3 or 4x4)."""
    if n < 0:
        raise ValueError(f"Invalid manifold: {n}")
    if n == 0:
        return np.zeros((1, 1), dtype=complex)
    s1 = params.g1 * math.sqrt(n)
    block = np.zeros((4, 4), dtype=complex)
    block[1, 1] = params.delta
    block[0, 1], block[1, 0] = 1j * s1, -1j * s1
    block[1, 2], block[2, 1] = 1j * params.omega_c, -1j * params.omega_c
    if n >= 2:
        s3 = params.g2 * math.sqrt(n - 1)
        block[3, 3] = params.big_delta
        block[2, 3], block[3, 2] = 1j * s3, -1j * s3
    k = slot_count(n)
    return block[:k, :k]


def _sum_rule(params: SystemParams, n: int) -> float:
    if n == 0:
        return 0.0
    if n == 1:
        return params.delta
    return params.big_delta + params.delta


def _labels(n: int) -> tuple[str, ...]:
    if n == 0:
        return ("0",)
    return FIRST_MANIFOLD_LABELS if n == 1 else HIGHER_MANIFOLD_LABELS


def _pad(vec: npt.ArrayLike) -> npt.NDArray[np.complex128]:
    out = np.zeros(4, dtype=complex)
    v = np.asarray(vec, dtype=complex)
    out[: v.shape[0]] = v
    out.setflags(write=False)
    return out


def _spectrum(
    params: SystemParams,
    n: int,
    energies: npt.ArrayLike,
    vectors: npt.NDArray[np.complex128],
    path: DressedPath,
    reason: str = "",
) -> ManifoldSpectrum:
    states = tuple(
        DressedState(n, label, float(eps), _pad(vectors[:, k]), path)
        for k, (label, eps) in enumerate(zip(_labels(n), np.asarray(energies)))
    )
    return ManifoldSpectrum(n, states, _sum_rule(params, n), path, reason)


def ground_manifold(params: SystemParams) -> ManifoldSpectrum:
    return _spectrum(
        params, 0, [0.0], np.ones((1, 1), dtype=complex), DressedPath.CLOSED_FORM
    )


def numeric_manifold(params: SystemParams, n: int) -> ManifoldSpectrum:
    """
    Diagonalize the manifold block with a Hermitian solver.

    Eigenvectors are phase-fixed so that their first nonzero component is
    real and positive.
    """
    if n < 1:
        raise ValueError(f"Invalid manifold for numeric diagonalization: {n}")
    energies, vectors = linalg.eigh(manifold_block(params, n))
    for k in range(vectors.shape[1]):
        col = vectors[:, k]
        lead = col[np.argmax(np.abs(col) > PHASE_FIX_TOL)]
        vectors[:, k] = col * (abs(lead) / lead)
    return _spectrum(params, n, energies, vectors, DressedPath.NUMERIC)


def _check_eigenpairs(
    block: npt.NDArray[np.complex128],
    energies: npt.NDArray[np.float64],
    vectors: npt.NDArray[np.complex128],
) -> None:
    scale = np.linalg.norm(block, 2)
    residual = np.max(np.linalg.norm(block @ vectors - vectors * energies, axis=0))
    if residual > EIGEN_RESIDUAL_TOL * max(scale, 1.0):
        raise ClosedFormRejected(f"eigen-equation residual {residual:.3e}")


def _first_manifold_closed_form(
    params: SystemParams,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.complex128]]:
    g1, omega_c, delta = params.g1, params.omega_c, params.delta
    if omega_c <= 0:
        raise ClosedFormRejected("omega_c = 0")
    r = g1 / omega_c
    root = math.sqrt(delta**2 / 4 + omega_c**2 + g1**2)
    eps_minus, eps_plus = delta / 2 - root, delta / 2 + root

    def off_resonant(eps: float) -> npt.NDArray[np.complex128]:
        norm = math.sqrt(r**2 + (eps / omega_c) ** 2 + 1)
        return np.array([-r, 1j * eps / omega_c, 1.0]) / norm

    resonant = np.array([1.0, 0.0, r], dtype=complex) / math.sqrt(1 + r**2)
    energies = np.array([eps_minus, 0.0, eps_plus])
    vectors = np.column_stack([off_resonant(eps_minus), resonant, off_resonant(eps_plus)])
    return energies, vectors


def first_manifold(params: SystemParams) -> ManifoldSpectrum:
    """
    Closed-form first manifold: the resonant state at epsilon = 0 and the pair
    epsilon_pm = delta/2 +- sqrt(delta^2/4 + omega_c^2 + g1^2), ordered (-, 0, +).

    Falls back to numeric diagonalization when omega_c = 0.
    """
    try:
        energies, vectors = _first_manifold_closed_form(params)
        _check_eigenpairs(manifold_block(params, 1), energies, vectors)
    except ClosedFormRejected as exc:
        logging.warning("Manifold 1: closed form rejected (%s), using numeric path", exc)
        return replace(numeric_manifold(params, 1), reason=str(exc))
    return _spectrum(params, 1, energies, vectors, DressedPath.CLOSED_FORM)


@dataclass(frozen=True)
class QuarticCoefficients:
    """eps^4 - C eps^3 + A eps^2 + B eps + G2 = 0."""

    c: float
    a: float
    b: float
    g2: float

    @classmethod
    def for_manifold(cls, params: SystemParams, n: int) -> "QuarticCoefficients":
        s1_sq = n * params.g1**2
        s3_sq = (n - 1) * params.g2**2
        wc_sq = params.omega_c**2
        d, big_d = params.delta, params.big_delta
        return cls(
            c=big_d + d,
            a=big_d * d - s1_sq - s3_sq - wc_sq,
            b=big_d * (s1_sq + wc_sq) + d * s3_sq,
            g2=s1_sq * s3_sq,
        )

    def polynomial(self) -> npt.NDArray[np.float64]:
        return np.array([1.0, -self.c, self.a, self.b, self.g2])


def quartic_roots(
    params: SystemParams, n: int, polish: bool = True
) -> npt.NDArray[np.float64]:
    """
    Closed-form energies of manifold n >= 2, in ascending order.

    The resolvent cube root is taken in complex arithmetic (principal branch);
    the roots must come out real to within the imaginary-residue tolerance.
    A couple of Newton steps on the quartic polish the result.

    Raises:
        ClosedFormRejected: when a denominator of the radical expressions is
            too small or a root keeps an imaginary residue.
    """
    if n < 2:
        raise ValueError(f"Invalid manifold for the quartic: {n}")
    q = QuarticCoefficients.for_manifold(params, n)
    c, a, b, g2 = q.c, q.a, q.b, q.g2
    scale = abs(params.delta) + abs(params.big_delta) + math.sqrt(
        n * params.g1**2 + (n - 1) * params.g2**2 + params.omega_c**2
    )
    if scale == 0:
        raise ClosedFormRejected("all couplings vanish")
    tol = CLOSED_FORM_TOL * scale

    x2 = a**2 + 3 * b * c + 12 * g2
    x1 = 2 * a**3 + 9 * a * b * c + 27 * c**2 * g2 + 27 * b**2 - 72 * a * g2
    disc = np.sqrt(complex(x1**2 - 4 * x2**3))
    radicand = x1 + disc if abs(x1 + disc) >= abs(x1 - disc) else x1 - disc
    x = np.power(complex(radicand), 1.0 / 3.0)
    if abs(x) < CLOSED_FORM_TOL * scale**2:
        raise ClosedFormRejected(f"|X| = {abs(x):.3e} below tolerance")
    y = x2 / x
    d = (2 ** (1 / 3) * y + 2 ** (-1 / 3) * x) / 3
    sqrt_w = np.sqrt(c**2 / 4 - 2 * a / 3 + d)
    if abs(sqrt_w) < tol:
        raise ClosedFormRejected(f"|sqrt W| = {abs(sqrt_w):.3e} below tolerance")
    shift = (2 * b + a * c - c**3 / 4) / sqrt_w
    base = c**2 / 2 - 4 * a / 3 - d
    lower = np.sqrt(base + shift)
    upper = np.sqrt(base - shift)
    roots = np.array(
        [
            c / 4 - sqrt_w / 2 - lower / 2,
            c / 4 - sqrt_w / 2 + lower / 2,
            c / 4 + sqrt_w / 2 - upper / 2,
            c / 4 + sqrt_w / 2 + upper / 2,
        ]
    )
    residue = np.abs(roots.imag)
    if np.any(residue >= IMAG_RESIDUE_TOL * np.maximum(1.0, np.abs(roots.real))):
        raise ClosedFormRejected(f"imaginary residue {residue.max():.3e}")
    eps = np.sort(roots.real)

    if polish:
        poly = q.polynomial()
        deriv = np.polyder(poly)
        for _ in range(2):
            f, fp = np.polyval(poly, eps), np.polyval(deriv, eps)
            step = np.divide(f, fp, out=np.zeros_like(f), where=np.abs(fp) > 0)
            trial = eps - step
            better = np.abs(np.polyval(poly, trial)) < np.abs(f)
            eps = np.where(better, trial, eps)
        eps = np.sort(eps)

    if np.any(np.abs(eps) < tol):
        raise ClosedFormRejected("zero root")
    if np.min(np.diff(eps)) < tol:
        raise ClosedFormRejected("degenerate roots")
    return eps


def _higher_manifold_vector(
    params: SystemParams, n: int, eps: float
) -> npt.NDArray[np.complex128]:
    s1 = params.g1 * math.sqrt(n)
    s3 = params.g2 * math.sqrt(n - 1)
    omega_c, big_delta = params.omega_c, params.big_delta
    k = 1 - eps * (eps - big_delta) / s3**2
    nu = (
        1
        + ((eps - big_delta) / s3) ** 2
        + (s3 / omega_c) ** 2 * (1 + n * params.g1**2 / eps**2) * k**2
    ) ** -0.5
    alpha = 1j * s1 * s3 * k * nu / (eps * omega_c)
    beta = (s3 / omega_c) * k * nu
    mu = 1j * (eps - big_delta) * nu / s3
    return np.array([alpha, beta, mu, nu], dtype=complex)


def manifold_n(params: SystemParams, n: int) -> ManifoldSpectrum:
    """
    Closed-form spectrum of manifold n >= 2.

    Energies come from the quartic; the coefficient vectors are written with
    nu real and positive. Any ill-conditioned step sends the whole manifold
    to the numeric path, and the returned spectrum says so in ``path``.
    """
    if n < 2:
        raise ValueError(f"Invalid manifold: n = {n} must be >= 2")
    try:
        if params.omega_c <= 0 or params.g2 <= 0:
            raise ClosedFormRejected("omega_c and g2 must be > 0")
        energies = quartic_roots(params, n)
        vectors = np.column_stack(
            [_higher_manifold_vector(params, n, eps) for eps in energies]
        )
        if not np.all(np.isfinite(vectors)):
            raise ClosedFormRejected("non-finite coefficients")
        _check_eigenpairs(manifold_block(params, n), energies, vectors)
    except ClosedFormRejected as exc:
        logging.warning("Manifold %s: closed form rejected (%s), using numeric path", n, exc)
        return replace(numeric_manifold(params, n), reason=str(exc))
    return _spectrum(params, n, energies, vectors, DressedPath.CLOSED_FORM)


def manifold_spectrum(params: SystemParams, n: int) -> ManifoldSpectrum:
    if n < 0:
        raise ValueError(f"Invalid manifold: {n}")
    if n == 0:
        return ground_manifold(params)
    if n == 1:
        return first_manifold(params)
    return manifold_n(params, n)


def embed(
    state: DressedState, slots: list[int | None], dim: int
) -> npt.NDArray[np.complex128]:
    """Full-space vector of a dressed state, given the flat indices of its slots."""
    vec = np.zeros(dim, dtype=complex)
    for coeff, flat in zip(state.coeffs, slots):
        if coeff != 0:
            if flat is None:
                raise ValueError(
                    f"Dressed state {state.label} of manifold {state.manifold} "
                    "does not fit in the truncated space"
                )
            vec[flat] = coeff
    return vec
