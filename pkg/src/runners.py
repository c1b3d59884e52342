"""Subcommands: run a configured computation and write its tables and sidecars.

Every table is written with a ``# polariton-lab <version>`` first line, then a
header row; structured results go to a JSON sidecar with sorted keys. For a
fixed config and version the output is byte-identical.
"""

import json
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from src import __version__
from src.config import RunConfig
from src.constants import COMMUTATOR_TOL, CROSS_CHECK_TOL, HERMITIAN_TOL
from src.dressed import SLOT_NAMES, manifold_spectrum, numeric_manifold
from src.errors import (
    ConfigError,
    ConsistencyError,
    DegenerateSteadyStateError,
)
from src.lindblad import build_liouvillian, fluorescence_spectrum, steady_state
from src.operators import (
    BareBasis,
    build_annihilation,
    build_H0,
    build_Hd,
    build_Heff,
    dump_matrix,
)
from src.params import SystemParams
from src.peaks import find_peaks, identify_transitions
from src.polariton import (
    annihilation_component,
    assemble_polariton_generator,
    commutator_check,
    cross_damping_effect,
    damping_cosines,
    damping_matrix,
    generator_deviation,
    rabi_table,
    transformation_matrix,
)
from src.reduced import mollow_predictions, stark_eigenvalues, stark_sweep

SUBCOMMANDS = ("manifolds", "couplings", "stark", "spectrum", "validate", "figures")
STARK_FIGURES = ("fig4", "fig5")
SPECTRUM_FIGURES = ("fig6", "fig7")


@dataclass
class RunResult:
    status: int = 0
    artifacts: list[Path] = field(default_factory=list)


class ArtifactWriter:
    """Writes tables and sidecars into the configured output directory."""

    def __init__(self, config: RunConfig):
        self.directory = Path(config.output.directory)
        self.separator = config.output.separator
        self.suffix = config.output.format
        self.written: list[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            logging.error("Cannot create output directory %s: %s", self.directory, exc)
            raise

    def path(self, name: str) -> Path:
        return self.directory / name

    def table(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.path(f"{name}.{self.suffix}")
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# polariton-lab {__version__}\n")
            frame.to_csv(f, sep=self.separator, index=False, lineterminator="\n")
        return self._record(path)

    def sidecar(self, name: str, data: dict[str, Any]) -> Path:
        path = self.path(f"{name}.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        return self._record(path)

    def matrix(self, name: str, matrix: np.ndarray) -> Path:
        return self._record(dump_matrix(matrix, self.path(f"{name}.txt")))

    def _record(self, path: Path) -> Path:
        logging.info("Wrote %s", path)
        self.written.append(path)
        return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(value.real), "im": _jsonable(value.imag)}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        # JSON has no NaN or infinity
        return float(value) if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def _manifolds(config: RunConfig, writer: ArtifactWriter) -> int:
    params, n_max = config.system, config.run.n_max
    rows, summary = [], {}
    for n in range(n_max + 1):
        spectrum = manifold_spectrum(params, n)
        for state in spectrum.states:
            row: dict[str, Any] = {
                "manifold": n,
                "label": state.label,
                "epsilon": state.epsilon,
                "path": state.path.value,
            }
            for name, coeff in zip(SLOT_NAMES, state.coeffs):
                row[f"{name}_re"] = coeff.real
                row[f"{name}_im"] = coeff.imag
            rows.append(row)
        summary[str(n)] = {
            "path": spectrum.path.value,
            "reason": spectrum.reason,
            "sum_rule": spectrum.sum_rule,
            "energy_sum": float(np.sum(spectrum.energies)),
        }
        if n >= 1:
            summary[str(n)]["unitarity_error"] = transformation_matrix(
                params, n
            ).unitarity_error()
    writer.table("manifolds", pd.DataFrame(rows))
    writer.sidecar("manifolds", {"manifolds": summary, "system": params.model_dump()})

    if config.run.dump_operators:
        basis = BareBasis.from_params(params)
        writer.matrix("operator_H0", build_H0(params, basis))
        writer.matrix("operator_Hd", build_Hd(params, basis))
        writer.matrix("operator_Heff", build_Heff(params, basis))
    return 0


def _couplings(config: RunConfig, writer: ArtifactWriter) -> int:
    params, n_max = config.system, config.run.n_max
    rabi_rows, damping_rows, summary = [], [], {}
    for n in range(1, n_max + 1):
        table = rabi_table(params, n)
        for i, low in enumerate(table.row_labels):
            for j, up in enumerate(table.col_labels):
                value = table.matrix[i, j]
                rabi_rows.append(
                    {"manifold": n, "lower": low, "upper": up, "re": value.real, "im": value.imag}
                )
        damping = damping_matrix(params, n)
        cosines = damping_cosines(damping)
        for j, row_label in enumerate(damping.labels):
            for k, col_label in enumerate(damping.labels):
                value = damping.matrix[j, k]
                damping_rows.append(
                    {
                        "manifold": n,
                        "row": row_label,
                        "col": col_label,
                        "re": value.real,
                        "im": value.imag,
                        "cosine": cosines[j, k],
                    }
                )
        summary[str(n)] = {
            "rabi_deviation": table.max_deviation,
            "damping_deviation": damping.max_deviation,
            "cross_damping_effect": dict(
                zip(damping.labels, cross_damping_effect(params, n).tolist())
            ),
        }

    basis = BareBasis(n_max + 2)
    generator = assemble_polariton_generator(
        params, basis, n_max, keep_cross_damping=config.run.keep_cross_damping
    )
    deviation = float(
        np.max(np.abs(generator.restrict(generator.heff - build_Heff(params, basis))))
    )
    writer.table("couplings_rabi", pd.DataFrame(rabi_rows))
    writer.table("couplings_damping", pd.DataFrame(damping_rows))
    writer.sidecar(
        "couplings",
        {
            "manifolds": summary,
            "keep_cross_damping": config.run.keep_cross_damping,
            "generator_deviation": deviation,
        },
    )
    return 0


def _stark_dataset(config: RunConfig, writer: ArtifactWriter, name: str) -> int:
    params, run = config.system, config.run
    grid = np.linspace(run.ep_min, run.ep_max, run.ep_points)
    trace = stark_sweep(params, grid, params.n_trunc, run.check_convergence)
    stark = stark_eigenvalues(params)
    mollow = mollow_predictions(params)
    writer.table(name, trace.to_frame())
    writer.sidecar(
        name,
        {
            "threshold_ep": stark.threshold_ep,
            "omega0": stark.omega0,
            "gamma0": stark.gamma0,
            "n_trunc": trace.n_trunc,
            "convergence_drift": trace.convergence_drift,
            "converged": trace.converged,
            "flagged_samples": int(sum(s.flagged for s in trace.samples)),
            "mollow": {
                "ep": params.ep,
                "center_linewidth": mollow.center_linewidth,
                "sideband_linewidth": mollow.sideband_linewidth,
                "sideband_offset": mollow.sideband_offset,
            },
        },
    )
    return 0


def _spectrum_dataset(config: RunConfig, writer: ArtifactWriter, name: str) -> int:
    params, run = config.system, config.run
    omega = np.linspace(run.omega_min, run.omega_max, run.omega_points)
    drives = run.ep_values or (params.ep,)
    basis = BareBasis.from_params(params)
    # transitions are catalogued from the Stark doublet, which needs omega_c > 0
    assign = params.omega_c > 0
    frames, runs = [], []
    for ep in drives:
        driven = params.with_drive(ep)
        liouvillian = build_liouvillian(driven, basis, run.max_liouvillian_size)
        trace = fluorescence_spectrum(
            driven,
            basis,
            omega,
            run.backend,
            liouvillian=liouvillian,
            line_floor=run.line_floor,
        )
        peaks = find_peaks(trace, run.peak_prominence)
        # lines outside the frequency grid are not reported
        lines = [
            line for line in trace.lines if run.omega_min <= line.center <= run.omega_max
        ]
        if assign:
            entries = [
                _peak_entry(item.peak, item.label, item.target)
                for item in identify_transitions(driven, peaks, run.assignment_window)
            ]
            line_entries = [
                _line_entry(item.peak, item.label, item.target)
                for item in identify_transitions(driven, lines, run.assignment_window)
            ]
        else:
            entries = [_peak_entry(p, None, None) for p in peaks]
            line_entries = [_line_entry(line, None, None) for line in lines]
        mollow = mollow_predictions(driven) if assign else None
        runs.append(
            {
                "ep": ep,
                "coherent_weight": trace.coherent_weight,
                "mean_field": trace.mean_field,
                "photon_number": trace.photon_number,
                "incoherent_number": trace.incoherent_number,
                "integrated": trace.integrated(),
                "flagged_samples": trace.flagged,
                "peaks": entries,
                "lines": line_entries,
                "mollow_offset": None if mollow is None else mollow.sideband_offset,
            }
        )
        frames.append(
            pd.DataFrame({"ep": ep, "omega": trace.omega, "S_incoherent": trace.values})
        )
    writer.table(name, pd.concat(frames, ignore_index=True))
    writer.sidecar(
        name, {"backend": run.backend, "n_trunc": params.n_trunc, "runs": runs}
    )
    return 0


def _peak_entry(peak, label: str | None, target: float | None) -> dict[str, Any]:
    return {
        "center": peak.center,
        "height": peak.height,
        "fwhm": peak.fwhm,
        "residual": peak.residual,
        "status": peak.status,
        "assignment": label,
        "target": target,
    }


def _line_entry(line, label: str | None, target: float | None) -> dict[str, Any]:
    return {
        "center": line.center,
        "hwhm": line.hwhm,
        "height": line.height,
        "skew": line.skew,
        "assignment": label,
        "target": target,
    }


@dataclass(frozen=True)
class Check:
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _guarded(name: str, tolerance: float, compute: Callable[[], float]) -> Check:
    try:
        return Check(name, float(compute()), tolerance)
    except (ConsistencyError, DegenerateSteadyStateError) as exc:
        logging.warning("Check %s failed: %s", name, exc)
        return Check(name, math.inf, tolerance)


def validation_checks(params: SystemParams, n_max: int) -> list[Check]:
    """Independent evaluations of the same quantities, one check per pair."""
    scale = max(1.0, params.g1, params.g2, params.omega_c, params.kappa)

    def dressed(kind: str) -> float:
        worst = 0.0
        for n in range(1, n_max + 1):
            spectrum, oracle = manifold_spectrum(params, n), numeric_manifold(params, n)
            if kind == "energies":
                worst = max(worst, float(np.max(np.abs(spectrum.energies - oracle.energies))))
            elif kind == "vectors":
                overlap = np.abs(np.sum(spectrum.vectors.conj() * oracle.vectors, axis=0))
                worst = max(worst, float(np.max(1 - overlap)))
            else:
                worst = max(worst, abs(float(np.sum(spectrum.energies)) - spectrum.sum_rule))
        return worst

    def couplings(kind: str) -> float:
        if kind == "rabi":
            return max(rabi_table(params, n).max_deviation for n in range(1, n_max + 1))
        return max(damping_matrix(params, n).max_deviation for n in range(1, n_max + 1))

    def annihilation_sum() -> float:
        basis = BareBasis.from_params(params)
        total = sum(annihilation_component(basis, n) for n in range(1, basis.max_manifold + 1))
        return float(np.max(np.abs(total - build_annihilation(basis))))

    checks = [
        _guarded("dressed_energies", 1e-8 * scale, lambda: dressed("energies")),
        _guarded("dressed_vectors", 1e-8, lambda: dressed("vectors")),
        _guarded("sum_rules", 1e-9 * scale, lambda: dressed("sum")),
        _guarded(
            "transformation_unitarity",
            CROSS_CHECK_TOL,
            lambda: max(
                transformation_matrix(params, n).unitarity_error() for n in range(1, n_max + 1)
            ),
        ),
        _guarded("rabi_cross_check", CROSS_CHECK_TOL * max(1.0, params.ep), lambda: couplings("rabi")),
        _guarded("damping_cross_check", CROSS_CHECK_TOL * scale, lambda: couplings("damping")),
        _guarded(
            "generator_reconstruction",
            CROSS_CHECK_TOL * scale,
            lambda: generator_deviation(params, BareBasis(n_max + 2), n_max),
        ),
        _guarded("annihilation_sum", HERMITIAN_TOL, annihilation_sum),
    ]

    if params.omega_c > 0:
        basis = BareBasis.from_params(params)

        def commutators() -> float:
            report = commutator_check(params, basis)
            ground = max(abs(v - 1.0) for v in report.ground_expectations.values())
            return max(report.max_deviation, ground)

        def dark_state() -> float:
            stark = stark_eigenvalues(params)
            undamped = stark_eigenvalues(params.replace(gamma1=0.0, gamma2=0.0, gamma3=0.0))
            return float(np.max(np.abs(np.subtract(stark.eigenvalues, undamped.eigenvalues))))

        checks.append(_guarded("polariton_commutators", COMMUTATOR_TOL, commutators))
        checks.append(_guarded("stark_atomic_decay_independence", 0.0, dark_state))
    else:
        logging.info("omega_c = 0: commutator and Stark checks skipped")

    liouvillian = build_liouvillian(params)
    checks.append(_guarded("liouvillian_trace", CROSS_CHECK_TOL * scale, liouvillian.trace_defect))
    if params.ep > 0:
        checks.append(
            _guarded(
                "steady_state_positivity",
                1e-8,
                lambda: max(0.0, -steady_state(liouvillian).min_eigenvalue()),
            )
        )
    return checks


def _validate(config: RunConfig, writer: ArtifactWriter) -> int:
    checks = validation_checks(config.system, config.run.n_max)
    for check in checks:
        logging.info(
            "%-32s max deviation %.3e (tolerance %.1e) %s",
            check.name,
            check.max_deviation,
            check.tolerance,
            "ok" if check.passed else "FAILED",
        )
    frame = pd.DataFrame(
        [
            {
                "check": c.name,
                "max_deviation": c.max_deviation,
                "tolerance": c.tolerance,
                "passed": c.passed,
            }
            for c in checks
        ]
    )
    writer.table("validate", frame)
    return 0 if all(c.passed for c in checks) else 1


def _figures(config: RunConfig, writer: ArtifactWriter) -> int:
    name = config.run.figure
    if name is None:
        raise ConfigError("figures needs run.figure or a figure name", key="figure")
    if name in STARK_FIGURES:
        return _stark_dataset(config, writer, name)
    if name in SPECTRUM_FIGURES:
        return _spectrum_dataset(config, writer, name)
    raise ConfigError(f"unknown figure {name!r}", key="figure")


RUNNERS: dict[str, Callable[[RunConfig, ArtifactWriter], int]] = {
    "manifolds": _manifolds,
    "couplings": _couplings,
    "stark": lambda config, writer: _stark_dataset(config, writer, "stark"),
    "spectrum": lambda config, writer: _spectrum_dataset(config, writer, "spectrum"),
    "validate": _validate,
    "figures": _figures,
}


def run_subcommand(name: str, config: RunConfig) -> RunResult:
    """
    Run one subcommand and write its artifacts.

    Returns the exit status (0, or 1 for a failed ``validate``) and the
    written paths. Errors of the computation propagate unchanged.
    """
    if name not in RUNNERS:
        raise ConfigError(f"unknown subcommand {name!r}, expected one of {SUBCOMMANDS}")
    logging.info("Running %s", name)
    writer = ArtifactWriter(config)
    status = RUNNERS[name](config, writer)
    logging.info("%s finished with status %s (%s artifacts)", name, status, len(writer.written))
    return RunResult(status, writer.written)
