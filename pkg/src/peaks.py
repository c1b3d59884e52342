"""Peak detection, Lorentzian fits and transition assignment for spectra."""

import logging
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import signal
from scipy.optimize import OptimizeWarning, curve_fit

from src.dressed import first_manifold, manifold_spectrum
from src.lindblad import SpectralLine, SpectrumTrace
from src.params import SystemParams
from src.reduced import Regime, stark_eigenvalues

# the outer sidebands sit on the tails of the triplet with a relative
# prominence near 1e-5
DEFAULT_PROMINENCE = 1e-6
DEFAULT_ASSIGNMENT_WINDOW = 0.1
FIT_WINDOW_HWHM = 3.0
# maxima closer than this many summed half widths are fitted together
GROUP_SPACING_HWHM = 8.0
MAX_SKEW = 10.0
MIN_FIT_POINTS = 5

UNASSIGNED = "unassigned"


def line_shape(
    x: npt.ArrayLike, center: float, height: float, hwhm: float, skew: float
) -> npt.NDArray[np.float64]:
    """
    Lorentzian with a dispersive admixture, the shape of one damped mode in a
    one-sided transform. ``skew = 0`` is the plain Lorentzian; the value at
    ``center`` is ``height`` for any skew.
    """
    d = np.asarray(x, dtype=float) - center
    return height * hwhm * (hwhm + skew * d) / (d**2 + hwhm**2)


def lorentzian(
    x: npt.ArrayLike, center: float, height: float, hwhm: float, offset: float
) -> npt.NDArray[np.float64]:
    return offset + line_shape(x, center, height, hwhm, 0.0)


@dataclass(frozen=True)
class Peak:
    center: float
    height: float
    hwhm: float
    residual: float
    fitted: bool
    index: int
    skew: float = 0.0

    @property
    def fwhm(self) -> float:
        return 2 * self.hwhm

    @property
    def status(self) -> str:
        return "fitted" if self.fitted else "unfitted"


def detect_peaks(
    omega: npt.ArrayLike, values: npt.ArrayLike, prominence: float = DEFAULT_PROMINENCE
) -> list[tuple[int, float]]:
    """
    Local maxima whose prominence exceeds ``prominence * max(values)``.

    Returns (index, hwhm estimate) pairs; the estimate is the half-prominence
    width interpolated on the omega grid.
    """
    omega = np.asarray(omega, dtype=float)
    values = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0)
    if values.size < 3 or values.max() <= 0:
        return []
    indices, _ = signal.find_peaks(values, prominence=prominence * values.max())
    if indices.size == 0:
        return []
    _, _, left, right = signal.peak_widths(values, indices, rel_height=0.5)
    grid = np.arange(omega.size)
    hwhm = (np.interp(right, grid, omega) - np.interp(left, grid, omega)) / 2
    return [(int(i), float(w)) for i, w in zip(indices, hwhm)]


def group_peaks(
    omega: npt.ArrayLike, detected: list[tuple[int, float]]
) -> list[list[tuple[int, float]]]:
    """Split detected peaks into runs of neighbours whose tails overlap."""
    omega = np.asarray(omega, dtype=float)
    groups: list[list[tuple[int, float]]] = []
    for index, hwhm in sorted(detected):
        if groups:
            last, last_hwhm = groups[-1][-1]
            gap = omega[index] - omega[last]
            if gap < GROUP_SPACING_HWHM * (hwhm + last_hwhm):
                groups[-1].append((index, hwhm))
                continue
        groups.append([(index, hwhm)])
    return groups


def _raw_peak(omega, values, index: int, hwhm: float) -> Peak:
    return Peak(float(omega[index]), float(values[index]), hwhm, float("nan"), False, index)


def _group_model(pivot: float):
    def model(x, offset, slope, *lines):
        total = offset + slope * (x - pivot)
        for k in range(0, len(lines), 4):
            total = total + line_shape(x, *lines[k : k + 4])
        return total

    return model


def fit_group(
    omega: npt.ArrayLike, values: npt.ArrayLike, group: list[tuple[int, float]]
) -> list[Peak]:
    """
    Joint least-squares fit of neighbouring peaks: one skewed Lorentzian per
    detected maximum on a sloped background, over the union of the windows of
    three estimated half widths around each maximum.

    A peak whose fitted center leaves its maximum by more than its estimated
    half width keeps its raw values; a failed fit leaves the whole group raw.
    """
    omega = np.asarray(omega, dtype=float)
    values = np.asarray(values, dtype=float)
    raw = [_raw_peak(omega, values, index, guess) for index, guess in group]
    centers = np.array([omega[index] for index, _ in group])
    guesses = np.array([guess for _, guess in group])
    label = ", ".join(f"{c:.4f}" for c in centers)
    if np.any(guesses <= 0):
        logging.warning("Peaks at %s left unfitted: no width estimate", label)
        return raw
    lo = np.min(centers - FIT_WINDOW_HWHM * guesses)
    hi = np.max(centers + FIT_WINDOW_HWHM * guesses)
    window = (omega >= lo) & (omega <= hi) & np.isfinite(values)
    n_params = 2 + 4 * len(group)
    if np.count_nonzero(window) < max(MIN_FIT_POINTS, n_params + 1):
        logging.warning("Peaks at %s left unfitted: window too narrow", label)
        return raw

    x, y = omega[window], values[window]
    floor = float(y.min())
    pivot = float(x.mean())
    p0: list[float] = [floor, 0.0]
    lower: list[float] = [-np.inf, -np.inf]
    upper: list[float] = [np.inf, np.inf]
    for (index, guess), center in zip(group, centers):
        span = FIT_WINDOW_HWHM * guess
        p0 += [center, max(values[index] - floor, 0.0), guess, 0.0]
        lower += [center - span, 0.0, 1e-3 * guess, -MAX_SKEW]
        upper += [center + span, np.inf, 2 * span, MAX_SKEW]
    model = _group_model(pivot)
    with warnings.catch_warnings():
        warnings.simplefilter("error", OptimizeWarning)
        try:
            popt, _ = curve_fit(
                model, x, y, p0=p0, bounds=(lower, upper), x_scale="jac", maxfev=20000
            )
        except (RuntimeError, ValueError, OptimizeWarning) as exc:
            logging.warning("Peaks at %s left unfitted: %s", label, exc)
            return raw
    if not np.all(np.isfinite(popt)):
        logging.warning("Peaks at %s left unfitted: degenerate fit", label)
        return raw

    rms = float(np.sqrt(np.mean((model(x, *popt) - y) ** 2)))
    peaks = []
    for k, ((index, guess), peak) in enumerate(zip(group, raw)):
        fit_center, height, hwhm, skew = (float(p) for p in popt[2 + 4 * k : 6 + 4 * k])
        if height <= 0 or hwhm <= 0 or abs(fit_center - peak.center) > guess:
            logging.warning(
                "Peak at %.4f left unfitted: fit moved to %.4f", peak.center, fit_center
            )
            peaks.append(peak)
            continue
        peaks.append(Peak(fit_center, height, hwhm, rms / height, True, index, skew))
    return peaks


def fit_peak(
    omega: npt.ArrayLike, values: npt.ArrayLike, index: int, hwhm_guess: float
) -> Peak:
    """Fit of a single, isolated peak."""
    return fit_group(omega, values, [(index, hwhm_guess)])[0]


def find_peaks(trace: SpectrumTrace, prominence: float = DEFAULT_PROMINENCE) -> list[Peak]:
    """Detect and fit the peaks of a spectrum; the result is also stored on the trace."""
    detected = detect_peaks(trace.omega, trace.values, prominence)
    found = [
        peak
        for group in group_peaks(trace.omega, detected)
        for peak in fit_group(trace.omega, trace.values, group)
    ]
    logging.info("Found %s peaks (%s fitted)", len(found), sum(p.fitted for p in found))
    trace.peaks = found
    return found


def transition_catalog(params: SystemParams) -> dict[str, float]:
    """
    Emission frequencies (relative to the cavity) of the transitions that
    shape the fluorescence spectrum.

    The Mollow set comes from the Stark doublet; the remaining lines connect
    the doublet, the first manifold and the middle dressed states of the
    second and third manifolds. The Stark doublet needs omega_c > 0.
    """
    stark = stark_eigenvalues(params)
    plus, minus = stark.epsilon_tilde
    first = first_manifold(params)
    second = manifold_spectrum(params, 2)
    third = manifold_spectrum(params, 3)

    def eps(spectrum, label: str) -> float:
        return spectrum.state(label).epsilon

    catalog = {"mollow_center": 0.0}
    if stark.regime is Regime.SPLIT:
        catalog["mollow_+"] = stark.splitting
        catalog["mollow_-"] = -stark.splitting
    catalog.update(
        {
            "+delta_1": eps(third, "3") - eps(second, "3"),
            "-delta_1": eps(third, "2") - eps(second, "2"),
            "+delta_2": eps(second, "3") - plus,
            "-delta_2": eps(second, "2") - minus,
            "+delta_3": eps(second, "3") - minus,
            "-delta_3": eps(second, "2") - plus,
            "+delta_4": eps(first, "+") - minus,
            "-delta_4": eps(first, "-") - plus,
        }
    )
    return catalog


@dataclass(frozen=True)
class AssignedPeak:
    peak: Peak | SpectralLine
    label: str
    target: float | None

    @property
    def residual(self) -> float | None:
        return None if self.target is None else abs(self.peak.center - self.target)

    @property
    def assigned(self) -> bool:
        return self.label != UNASSIGNED


def identify_transitions(
    params: SystemParams,
    peaks: Sequence[Peak | SpectralLine],
    window: float = DEFAULT_ASSIGNMENT_WINDOW,
    catalog: dict[str, float] | None = None,
) -> list[AssignedPeak]:
    """
    Nearest catalog entry within ``window`` of each fitted peak or spectral
    line, else unassigned.
    """
    if window <= 0:
        raise ValueError(f"Invalid assignment window: {window}")
    catalog = transition_catalog(params) if catalog is None else catalog
    labels = list(catalog)
    targets = np.array([catalog[k] for k in labels])
    assigned = []
    for peak in peaks:
        distance = np.abs(targets - peak.center)
        best = int(np.argmin(distance))
        if distance[best] <= window:
            assigned.append(AssignedPeak(peak, labels[best], float(targets[best])))
        else:
            assigned.append(AssignedPeak(peak, UNASSIGNED, None))
    return assigned
