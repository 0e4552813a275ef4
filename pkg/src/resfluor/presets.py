"""Built-in scenarios: the driven-array configurations studied in the figures.

Two experimental lattices appear, both for the Rb-87 D2 line (lambda_0 =
780 nm): a 640 nm lattice probed by a 600 nm-FWHM beam with the detector in
the atomic plane at 0.92 rad from the array axis, and a 532 nm lattice
(neighbors at sqrt(2) times the lattice constant dominate the coupling there)
probed by a 700 nm beam with the detector on the y axis.
"""

from __future__ import annotations

import math

from .config import ScenarioConfig, config_from_dict

LAMBDA0_NM = 780.0

_A_FIG3 = 640.0 / LAMBDA0_NM        # lattice constant, figure-3 family
_ETA_FIG3 = 600.0 / LAMBDA0_NM      # beam FWHM, figure-3 family
_THETA_FIG3 = 0.92                  # in-plane detector angle from the array axis
_A_FIG4B = math.sqrt(2.0) * 532.0 / LAMBDA0_NM   # diagonal-neighbor distance
_ETA_FIG4B = 700.0 / LAMBDA0_NM


def _scenario(positions, *, drive, detuning=1.0, detector=None, flags=None) -> dict:
    return {
        "atoms": {"positions": [list(p) for p in positions],
                  "dipole_direction": [0.0, 0.0, 1.0]},
        "drive": drive,
        "detuning": detuning,
        "detector": detector or {"theta": _THETA_FIG3},
        "grid": {"width": None, "points": 4001},
        "flags": flags or {},
    }


def _beam(omega0, fwhm):
    return {"mode": "beam", "omega0": omega0, "fwhm": fwhm,
            "center": [0.0, 0.0, 0.0], "beam_axis": [0.0, 0.0, 1.0]}


_CHAIN3 = [[0.0, 0.0, 0.0], [_A_FIG3, 0.0, 0.0], [-_A_FIG3, 0.0, 0.0]]
_CROSS5 = _CHAIN3 + [[0.0, _A_FIG3, 0.0], [0.0, -_A_FIG3, 0.0]]
_CHAIN3_4B = [[0.0, 0.0, 0.0], [_A_FIG4B, 0.0, 0.0], [-_A_FIG4B, 0.0, 0.0]]
_CROSS5_4B = _CHAIN3_4B + [[0.0, _A_FIG4B, 0.0], [0.0, -_A_FIG4B, 0.0]]

_PRESETS: dict[str, tuple[str, dict]] = {
    "mollow1": (
        "single atom, Omega = 0.1, Delta = 1: the symmetric reference spectrum",
        _scenario([[0.0, 0.0, 0.0]], drive={"mode": "uniform", "omega0": 0.1})),
    "fig3a_addressed": (
        "two atoms 0.82 lambda_0 apart, 600 nm beam focused on atom 1",
        _scenario([[0.0, 0.0, 0.0], [_A_FIG3, 0.0, 0.0]], drive=_beam(0.1, _ETA_FIG3))),
    "fig3a_no_collective": (
        "fig3a_addressed with J and Gamma artificially zeroed",
        _scenario([[0.0, 0.0, 0.0], [_A_FIG3, 0.0, 0.0]], drive=_beam(0.1, _ETA_FIG3),
                  flags={"zero_collective": True})),
    "fig3a_equal_drive": (
        "two atoms illuminated equally (broad beam), full couplings",
        _scenario([[0.0, 0.0, 0.0], [_A_FIG3, 0.0, 0.0]],
                  drive={"mode": "uniform", "omega0": 0.1})),
    "fig3b_sweep": (
        "base scenario for the Omega_2/Omega_1 asymmetry sweep",
        _scenario([[0.0, 0.0, 0.0], [_A_FIG3, 0.0, 0.0]], drive=_beam(0.1, _ETA_FIG3))),
    "fig4a_1d": (
        "addressed atom with both 1D lattice neighbors (3 atoms)",
        _scenario(_CHAIN3, drive=_beam(0.1, _ETA_FIG3))),
    "fig4a_2d": (
        "addressed atom with all four 2D lattice neighbors (5 atoms)",
        _scenario(_CROSS5, drive=_beam(0.1, _ETA_FIG3))),
    "fig4b_2atom": (
        "532 nm lattice, one diagonal neighbor, Omega_0 = 0.5, detector on y",
        _scenario([[0.0, 0.0, 0.0], [_A_FIG4B, 0.0, 0.0]],
                  drive=_beam(0.5, _ETA_FIG4B), detector={"direction": [0.0, 1.0, 0.0]})),
    "fig4b_3atom": (
        "532 nm lattice, both x-diagonal neighbors (3 atoms)",
        _scenario(_CHAIN3_4B, drive=_beam(0.5, _ETA_FIG4B),
                  detector={"direction": [0.0, 1.0, 0.0]})),
    "fig4b_5atom": (
        "532 nm lattice, all four diagonal neighbors (5 atoms)",
        _scenario(_CROSS5_4B, drive=_beam(0.5, _ETA_FIG4B),
                  detector={"direction": [0.0, 1.0, 0.0]})),
}

PRESET_IDS = tuple(_PRESETS)


def preset_description(preset_id: str) -> str:
    return _PRESETS[preset_id][0]


def expand_preset(preset_id: str) -> ScenarioConfig:
    """Fully specified scenario for a named preset."""
    try:
        _, doc = _PRESETS[preset_id]
    except KeyError:
        raise ValueError(
            f"unknown preset {preset_id!r}; known: {', '.join(PRESET_IDS)}") from None
    return config_from_dict(doc)
