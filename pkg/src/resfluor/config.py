"""Scenario configuration: JSON parsing, validation, and serialization.

A scenario document fixes the atomic geometry, the drive, the detector, the
frequency grid, and the counterfactual coupling flags.  Positions and the
beam FWHM may be given in nanometres together with ``lambda0_nm``; the
canonical in-memory form is always in lambda_0 and gamma units.  A minimal
single-atom document is ``{"n": 1, "omega0": 0.1, "detuning": 1.0}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

Vec3 = tuple[float, float, float]


class ConfigError(ValueError):
    """Base class for configuration problems."""


class ConfigSchemaError(ConfigError):
    """Document structure or types are wrong."""


class ConfigUnitError(ConfigError):
    """Unit declarations are inconsistent (e.g. nm without lambda0_nm)."""


class ConfigInvariantError(ConfigError):
    """Well-formed document violating a physical or mode invariant."""


DRIVE_MODES = ("beam", "uniform", "override")


@dataclass(frozen=True)
class ScenarioConfig:
    """Canonical, fully resolved scenario (lambda_0 / gamma units)."""

    positions: tuple[Vec3, ...]
    dipole_direction: Vec3
    drive_mode: str
    omega0: float | None
    fwhm_eta: float | None
    beam_center: Vec3
    beam_axis: Vec3
    rabi_override: tuple[float, ...] | None
    detuning: float
    detector_direction: Vec3
    grid_width: float | None
    grid_points: int
    zero_collective: bool
    uniform_couplings: tuple[float, float] | None

    @property
    def count(self) -> int:
        return len(self.positions)

    def to_json_dict(self) -> dict:
        drive: dict = {"mode": self.drive_mode}
        if self.drive_mode in ("beam", "uniform"):
            drive["omega0"] = self.omega0
        if self.drive_mode == "beam":
            drive["fwhm"] = self.fwhm_eta
            drive["center"] = list(self.beam_center)
            drive["beam_axis"] = list(self.beam_axis)
        if self.drive_mode == "override":
            drive["rabi"] = list(self.rabi_override)
        return {
            "atoms": {
                "positions": [list(p) for p in self.positions],
                "dipole_direction": list(self.dipole_direction),
            },
            "drive": drive,
            "detuning": self.detuning,
            "detector": {"direction": list(self.detector_direction)},
            "grid": {"width": self.grid_width, "points": self.grid_points},
            "flags": {
                "zero_collective": self.zero_collective,
                "uniform_couplings": None if self.uniform_couplings is None else
                    {"j": self.uniform_couplings[0], "gamma": self.uniform_couplings[1]},
            },
        }


def _fail(cls, anchor: str, message: str):
    raise cls(f"{anchor}: {message}")


def _number(doc, anchor, allow_none=False):
    if doc is None and allow_none:
        return None
    if isinstance(doc, bool) or not isinstance(doc, (int, float)):
        _fail(ConfigSchemaError, anchor, f"expected a number, got {type(doc).__name__}")
    if not math.isfinite(doc):
        _fail(ConfigSchemaError, anchor, "must be finite")
    return float(doc)


def _vec3(doc, anchor) -> Vec3:
    if not isinstance(doc, (list, tuple)) or len(doc) != 3:
        _fail(ConfigSchemaError, anchor, "expected a 3-vector [x, y, z]")
    return tuple(_number(v, f"{anchor}[{i}]") for i, v in enumerate(doc))


def _check_keys(doc, anchor, allowed):
    extra = set(doc) - set(allowed)
    if extra:
        _fail(ConfigSchemaError, anchor,
              f"unknown key(s) {sorted(extra)}; allowed: {sorted(allowed)}")


def _expand_shorthand(doc: dict) -> dict:
    """Allow the minimal top-level form {n, omega0, detuning, ...}."""
    doc = dict(doc)
    n = doc.pop("n", None)
    omega0 = doc.pop("omega0", None)
    if n is not None:
        if doc.get("atoms") is not None:
            _fail(ConfigSchemaError, "/n", "give either 'n' or 'atoms', not both")
        if n != 1:
            _fail(ConfigInvariantError, "/n",
                  "shorthand 'n' only supports a single atom at the origin; "
                  "list atoms.positions for n > 1")
        doc["atoms"] = {"positions": [[0.0, 0.0, 0.0]]}
    if omega0 is not None:
        if doc.get("drive") is not None:
            _fail(ConfigSchemaError, "/omega0", "give either 'omega0' or 'drive', not both")
        doc["drive"] = {"mode": "uniform", "omega0": omega0}
    return doc


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigSchemaError("/: document must be a JSON object")
    doc = _expand_shorthand(doc)
    _check_keys(doc, "/", ["atoms", "drive", "detuning", "detector", "grid", "flags"])

    atoms = doc.get("atoms")
    if not isinstance(atoms, dict):
        _fail(ConfigSchemaError, "/atoms", "required object is missing")
    _check_keys(atoms, "/atoms", ["positions", "dipole_direction", "unit", "lambda0_nm"])
    unit = atoms.get("unit", "lambda0")
    if unit not in ("lambda0", "nm"):
        _fail(ConfigSchemaError, "/atoms/unit", f"must be 'lambda0' or 'nm', got {unit!r}")
    lambda0_nm = _number(atoms.get("lambda0_nm"), "/atoms/lambda0_nm", allow_none=True)
    if unit == "nm" and lambda0_nm is None:
        _fail(ConfigUnitError, "/atoms/unit", "positions in nm require atoms.lambda0_nm")
    raw_pos = atoms.get("positions")
    if not isinstance(raw_pos, list) or not raw_pos:
        _fail(ConfigSchemaError, "/atoms/positions", "expected a non-empty list of 3-vectors")
    scale = 1.0 / lambda0_nm if unit == "nm" else 1.0
    positions = tuple(tuple(c * scale for c in _vec3(p, f"/atoms/positions[{i}]"))
                      for i, p in enumerate(raw_pos))
    dipole = _vec3(atoms.get("dipole_direction", [0.0, 0.0, 1.0]), "/atoms/dipole_direction")

    drive = doc.get("drive")
    if not isinstance(drive, dict):
        _fail(ConfigSchemaError, "/drive", "required object is missing")
    _check_keys(drive, "/drive",
                ["mode", "omega0", "fwhm", "unit", "center", "beam_axis", "rabi"])
    mode = drive.get("mode", "beam" if "fwhm" in drive else "uniform")
    if mode not in DRIVE_MODES:
        _fail(ConfigSchemaError, "/drive/mode", f"must be one of {DRIVE_MODES}, got {mode!r}")
    omega0 = fwhm = None
    rabi = None
    center: Vec3 = (0.0, 0.0, 0.0)
    axis: Vec3 = (0.0, 0.0, 1.0)
    if mode == "override":
        if "omega0" in drive or "fwhm" in drive:
            _fail(ConfigInvariantError, "/drive",
                  "override mode takes 'rabi' only; omega0/fwhm belong to beam or uniform mode")
        raw = drive.get("rabi")
        if not isinstance(raw, list) or len(raw) != len(positions):
            _fail(ConfigSchemaError, "/drive/rabi",
                  f"expected a list of {len(positions)} Rabi frequencies")
        rabi = tuple(_number(v, f"/drive/rabi[{i}]") for i, v in enumerate(raw))
        if any(v < 0 for v in rabi):
            _fail(ConfigInvariantError, "/drive/rabi", "Rabi frequencies must be >= 0")
    else:
        omega0 = _number(drive.get("omega0"), "/drive/omega0")
        if omega0 < 0:
            _fail(ConfigInvariantError, "/drive/omega0", "must be >= 0")
        if "rabi" in drive:
            _fail(ConfigInvariantError, "/drive",
                  "'rabi' is exclusive to override mode; exactly one drive mode may be active")
        if mode == "beam":
            dunit = drive.get("unit", "lambda0")
            if dunit not in ("lambda0", "nm"):
                _fail(ConfigSchemaError, "/drive/unit", f"must be 'lambda0' or 'nm', got {dunit!r}")
            fwhm = _number(drive.get("fwhm"), "/drive/fwhm")
            if dunit == "nm":
                if lambda0_nm is None:
                    _fail(ConfigUnitError, "/drive/unit",
                          "beam FWHM in nm requires atoms.lambda0_nm")
                fwhm /= lambda0_nm
            if fwhm <= 0:
                _fail(ConfigInvariantError, "/drive/fwhm", "must be > 0")
            center = _vec3(drive.get("center", [0.0, 0.0, 0.0]), "/drive/center")
            if unit == "nm" and "center" in drive:
                center = tuple(c / lambda0_nm for c in center)
            axis = _vec3(drive.get("beam_axis", [0.0, 0.0, 1.0]), "/drive/beam_axis")
        elif "fwhm" in drive:
            _fail(ConfigInvariantError, "/drive", "'fwhm' is exclusive to beam mode")

    detuning = _number(doc.get("detuning"), "/detuning")

    det = doc.get("detector", {"direction": [0.0, 1.0, 0.0]})
    if not isinstance(det, dict):
        _fail(ConfigSchemaError, "/detector", "expected an object")
    _check_keys(det, "/detector", ["direction", "theta"])
    if ("direction" in det) == ("theta" in det):
        _fail(ConfigInvariantError, "/detector",
              "give exactly one of 'direction' or 'theta' (in-plane angle)")
    if "theta" in det:
        theta = _number(det["theta"], "/detector/theta")
        direction = (math.cos(theta), math.sin(theta), 0.0)
    else:
        direction = _vec3(det["direction"], "/detector/direction")
        norm = math.sqrt(sum(c * c for c in direction))
        if abs(norm - 1.0) > 1e-9:
            direction = tuple(c / norm for c in direction)

    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        _fail(ConfigSchemaError, "/grid", "expected an object")
    _check_keys(grid, "/grid", ["width", "points"])
    width = _number(grid.get("width"), "/grid/width", allow_none=True)
    if width is not None and width <= 0:
        _fail(ConfigInvariantError, "/grid/width", "must be > 0")
    points = grid.get("points", 4001)
    if isinstance(points, bool) or not isinstance(points, int):
        _fail(ConfigSchemaError, "/grid/points", "expected an integer")
    if points < 3 or points % 2 == 0:
        _fail(ConfigInvariantError, "/grid/points", "must be odd and >= 3 for a symmetric grid")

    flags = doc.get("flags", {})
    if not isinstance(flags, dict):
        _fail(ConfigSchemaError, "/flags", "expected an object")
    _check_keys(flags, "/flags", ["zero_collective", "uniform_couplings"])
    zero = flags.get("zero_collective", False)
    if not isinstance(zero, bool):
        _fail(ConfigSchemaError, "/flags/zero_collective", "expected a boolean")
    uc = flags.get("uniform_couplings")
    uniform = None
    if uc is not None:
        if not isinstance(uc, dict):
            _fail(ConfigSchemaError, "/flags/uniform_couplings",
                  "expected {'j': ..., 'gamma': ...} or null")
        _check_keys(uc, "/flags/uniform_couplings", ["j", "gamma"])
        uniform = (_number(uc.get("j"), "/flags/uniform_couplings/j"),
                   _number(uc.get("gamma"), "/flags/uniform_couplings/gamma"))
    if zero and uniform is not None:
        _fail(ConfigInvariantError, "/flags",
              "zero_collective and uniform_couplings are mutually exclusive")

    return ScenarioConfig(
        positions=positions, dipole_direction=dipole, drive_mode=mode,
        omega0=omega0, fwhm_eta=fwhm, beam_center=center, beam_axis=axis,
        rabi_override=rabi, detuning=detuning, detector_direction=direction,
        grid_width=width, grid_points=points, zero_collective=zero,
        uniform_couplings=uniform)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigSchemaError(
                f"{path}:{err.lineno}:{err.colno}: invalid JSON: {err.msg}") from err
    return config_from_dict(doc)


def save_config(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config.to_json_dict(), fh, indent=2)
        fh.write("\n")
