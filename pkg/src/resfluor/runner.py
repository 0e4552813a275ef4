"""Scenario execution and machine-readable output files.

``run_scenario`` writes two artifacts per scenario: a CSV with columns
omega, S_inc, S_sy, S_asy (comma-separated, '.' decimals, LF endings) and a
JSON sidecar with the scalar results, the peak table, the coupling matrices,
and the resolved per-atom Rabi frequencies.  Floats are written with
round-trip precision, so identical configurations produce bitwise-identical
files on one platform.
"""

from __future__ import annotations

import json
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AsymmetryReport, degree_of_asymmetry
from .config import ScenarioConfig
from .geometry import AtomEnsemble, CouplingMatrices, DriveField, build_couplings
from .liouvillian import LiouvillianModel, build_liouvillian, steady_state
from .spectrum import (
    DetectorGeometry,
    FrequencyGrid,
    SpectrumResult,
    power_spectrum,
    steady_intensity,
    symmetric_asymmetric_split,
)


def assemble(config: ScenarioConfig):
    """Physics objects for a scenario: (ensemble, drive, couplings, rabi
    override, detector, grid)."""
    ensemble = AtomEnsemble(positions=np.array(config.positions),
                            dipole_direction=np.array(config.dipole_direction))
    couplings = build_couplings(ensemble)
    if config.zero_collective:
        couplings = couplings.zeroed()
    elif config.uniform_couplings is not None:
        couplings = CouplingMatrices.uniform(ensemble.count, *config.uniform_couplings)

    if config.drive_mode == "beam":
        drive = DriveField(omega0=config.omega0, fwhm_eta=config.fwhm_eta,
                           center=np.array(config.beam_center),
                           detuning_delta=config.detuning,
                           beam_axis=np.array(config.beam_axis))
        rabi_override = None
    elif config.drive_mode == "uniform":
        drive = DriveField(omega0=config.omega0, detuning_delta=config.detuning,
                           uniform=True)
        rabi_override = None
    else:
        drive = DriveField(omega0=0.0, detuning_delta=config.detuning, uniform=True)
        rabi_override = np.array(config.rabi_override)

    detector = DetectorGeometry(direction=np.array(config.detector_direction))
    grid = FrequencyGrid(width=config.grid_width, points=config.grid_points)
    return ensemble, drive, couplings, rabi_override, detector, grid


@dataclass(eq=False)
class ScenarioResult:
    config: ScenarioConfig
    model: LiouvillianModel
    detector: DetectorGeometry
    rho_ss: np.ndarray
    spectrum: SpectrumResult
    s_sy: np.ndarray
    s_asy: np.ndarray
    report: AsymmetryReport
    intensity: float


def evaluate_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run the full pipeline for one scenario, in memory."""
    ensemble, drive, couplings, rabi_override, detector, grid = assemble(config)
    model = build_liouvillian(ensemble, drive, couplings, rabi_override=rabi_override)
    rho_ss = steady_state(model)
    spec = power_spectrum(model, detector, grid=grid, rho_ss=rho_ss)
    s_sy, s_asy = symmetric_asymmetric_split(spec)
    report = degree_of_asymmetry(spec)
    intensity = steady_intensity(model, rho_ss, detector)
    return ScenarioResult(config=config, model=model, detector=detector,
                          rho_ss=rho_ss, spectrum=spec, s_sy=s_sy, s_asy=s_asy,
                          report=report, intensity=intensity)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_spectrum_csv(path, result: ScenarioResult) -> None:
    spec = result.spectrum
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("omega,S_inc,S_sy,S_asy\n")
        for w, s, sy, asy in zip(spec.grid, spec.incoherent, result.s_sy, result.s_asy):
            fh.write(f"{_fmt(w)},{_fmt(s)},{_fmt(sy)},{_fmt(asy)}\n")


def write_sidecar_json(path, result: ScenarioResult) -> None:
    spec, model = result.spectrum, result.model
    doc = {
        "tool": "resfluor",
        "version": __version__,
        "config": result.config.to_json_dict(),
        "steady_intensity": result.intensity,
        "coherent_weight": spec.coherent_weight,
        "s_max": result.report.s_max,
        "degree_of_asymmetry": result.report.d,
        "asymmetry_argmax_omega": result.report.argmax_omega,
        "rabi": model.rabi.tolist(),
        "coupling_j": model.couplings.j.tolist(),
        "coupling_gamma": model.couplings.gamma.tolist(),
        "spectrum_method": spec.method,
        "stationary_weight": spec.stationary_weight,
        "peaks": None if spec.peaks is None else spec.peaks.tolist(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def run_scenario(config: ScenarioConfig, out_dir, name: str = "scenario"):
    """Execute a scenario and write ``<name>.csv`` and ``<name>.json``.

    Returns (csv path, json path, in-memory result).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = evaluate_scenario(config)
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.json"
    write_spectrum_csv(csv_path, result)
    write_sidecar_json(json_path, result)
    return csv_path, json_path, result


def _base_omega1(config: ScenarioConfig) -> float:
    if config.drive_mode == "override":
        return float(config.rabi_override[0])
    return float(config.omega0)


def _sweep_row(args):
    config_doc, omega1, ratio, width, points = args
    from .config import config_from_dict
    config = config_from_dict(config_doc)
    ensemble, _, couplings, _, detector, _ = assemble(config)
    rabi = np.full(ensemble.count, ratio * omega1)
    rabi[0] = omega1
    drive = DriveField(omega0=omega1, detuning_delta=config.detuning, uniform=True)
    model = build_liouvillian(ensemble, drive, couplings, rabi_override=rabi)
    grid = FrequencyGrid(width=width, points=points).build(model)
    spec = power_spectrum(model, detector, grid=grid)
    return degree_of_asymmetry(spec).d


def run_sweep(config: ScenarioConfig, ratios, out_path, omega1_values=None,
              workers: int = 1) -> list[tuple]:
    """Sweep the drive ratio of the non-addressed atoms, writing one CSV row
    per point as it completes (resumable output; failed rows carry a marker).

    The CSV has columns (ratio, D), preceded by an omega1 column when more
    than one drive strength is requested.  Returns the failures, if any, as
    (omega1, ratio, error category) tuples.
    """
    ratios = [float(r) for r in ratios]
    omega1_values = [float(v) for v in (omega1_values or [_base_omega1(config)])]
    multi = len(omega1_values) > 1
    doc = config.to_json_dict()

    jobs = []
    for omega1 in omega1_values:
        # one shared grid per curve so D values along it are comparable
        width = config.grid_width
        if width is None:
            _, _, couplings, _, _, _ = assemble(config)
            j_max = float(np.abs(couplings.j).max()) if config.count > 1 else 0.0
            width = 5.0 * max(1.0, abs(config.detuning), omega1, j_max)
        jobs += [(doc, omega1, r, width, config.grid_points) for r in ratios]

    failures = []
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(("omega1,ratio,D" if multi else "ratio,D") + "\n")
        if workers > 1:
            pool = multiprocessing.Pool(workers)
            results = pool.imap(_sweep_row_safe, jobs)
        else:
            results = map(_sweep_row_safe, jobs)
        try:
            for (doc_, omega1, ratio, _w, _p), outcome in zip(jobs, results):
                ok, payload = outcome
                cell = _fmt(payload) if ok else f"ERROR[{payload}]"
                prefix = f"{_fmt(omega1)}," if multi else ""
                fh.write(f"{prefix}{_fmt(ratio)},{cell}\n")
                fh.flush()
                if not ok:
                    failures.append((omega1, ratio, payload))
        finally:
            if workers > 1:
                pool.close()
                pool.join()
    return failures


def _sweep_row_safe(args):
    try:
        return True, _sweep_row(args)
    except Exception as err:  # marker row; the sweep itself continues
        return False, type(err).__name__
