"""Atomic geometry, driving beam, and photon-mediated pair couplings.

Conventions used throughout the package: lengths are measured in units of the
atomic transition wavelength lambda_0 (so the wave number is k_0 = 2*pi) and
all rates and frequencies in units of the single-atom decay rate gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GAMMA = 1.0          # single-atom decay rate; the frequency unit
N_MAX = 6            # generator dimension 4**N; dense solves stay interactive up to here

_UNIT_TOL = 1e-12
_PLANE_TOL = 1e-9
_PSD_FLOOR = -1e-10


class GeometryError(ValueError):
    """Invalid atomic geometry or beam configuration."""


class CouplingError(ValueError):
    """Pair couplings that do not form a valid dissipator."""


def _as_unit(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > _UNIT_TOL:
        raise GeometryError(f"{name} must be a unit vector, |{name}| = {norm!r}")
    return v


@dataclass(frozen=True, eq=False)
class AtomEnsemble:
    """Fixed atom positions (in lambda_0) and a common dipole orientation."""

    positions: np.ndarray          # (N, 3), units of lambda_0
    dipole_direction: np.ndarray   # unit 3-vector

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise GeometryError(f"positions must be an (N, 3) array, got shape {pos.shape}")
        n = pos.shape[0]
        if not 1 <= n <= N_MAX:
            raise GeometryError(f"atom count must be in 1..{N_MAX}, got {n}")
        for mu in range(n):
            for nu in range(mu + 1, n):
                if np.linalg.norm(pos[mu] - pos[nu]) == 0.0:
                    raise GeometryError(f"atoms {mu} and {nu} coincide")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(
            self, "dipole_direction", _as_unit(self.dipole_direction, "dipole_direction")
        )

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class DriveField:
    """Gaussian driving beam, normal to the atomic plane.

    ``omega0`` is the peak Rabi frequency (units of gamma), ``fwhm_eta`` the
    intensity-profile FWHM (units of lambda_0) and ``detuning_delta`` the
    atom-laser detuning.  With ``uniform=True`` every atom sees the peak
    amplitude regardless of position (broad-beam limit).
    """

    omega0: float
    fwhm_eta: float = 1.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    detuning_delta: float = 0.0
    beam_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    uniform: bool = False

    def __post_init__(self):
        if self.omega0 < 0:
            raise GeometryError(f"omega0 must be >= 0, got {self.omega0}")
        if self.fwhm_eta <= 0:
            raise GeometryError(f"fwhm_eta must be > 0, got {self.fwhm_eta}")
        center = np.asarray(self.center, dtype=float).reshape(3)
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "beam_axis", _as_unit(self.beam_axis, "beam_axis"))


def rabi_profile(position, drive: DriveField) -> float:
    """Rabi frequency seen by an atom at ``position`` (units of gamma).

    The Gaussian envelope depends only on the in-plane distance from the beam
    center; the coordinate along the beam axis is ignored.  Equals omega0/2
    exactly at in-plane distance fwhm_eta/2.
    """
    if drive.uniform:
        return drive.omega0
    rel = np.asarray(position, dtype=float).reshape(3) - drive.center
    rel_inplane = rel - np.dot(rel, drive.beam_axis) * drive.beam_axis
    r2 = float(np.dot(rel_inplane, rel_inplane))
    return drive.omega0 * math.exp(-4.0 * math.log(2.0) * r2 / drive.fwhm_eta**2)


def rabi_frequencies(ensemble: AtomEnsemble, drive: DriveField) -> np.ndarray:
    """Per-atom Rabi frequencies for the ensemble under ``drive``.

    For a focused beam all atoms must lie in one plane perpendicular to the
    beam axis (tolerance 1e-9 lambda_0); a uniform drive has no such
    requirement.
    """
    if not drive.uniform:
        axial = ensemble.positions @ drive.beam_axis
        if axial.max() - axial.min() > _PLANE_TOL:
            raise GeometryError(
                "atoms are not coplanar perpendicular to the beam axis "
                f"(axial spread {axial.max() - axial.min():.3e} lambda_0)"
            )
    return np.array([rabi_profile(r, drive) for r in ensemble.positions])


def coupling_j(alpha: float, x: float) -> float:
    """Coherent dipole-dipole exchange rate for one atom pair (units of gamma).

    Parameters
    ----------
    alpha : angle between the pair separation vector and the dipole axis.
    x : pair separation in units of lambda_0; must be > 0.
    """
    if x <= 0:
        raise ValueError(f"pair separation must be > 0, got {x}")
    u = 2.0 * math.pi * x
    c2 = math.cos(alpha) ** 2
    return 0.75 * GAMMA * (
        (c2 - 1.0) * math.cos(u) / u
        + (1.0 - 3.0 * c2) * (math.sin(u) / u**2 + math.cos(u) / u**3)
    )


def coupling_gamma(alpha: float, x: float) -> float:
    """Collective (cross-)damping rate for one atom pair (units of gamma).

    Same arguments as :func:`coupling_j`.  Tends to gamma/2 as x -> 0, which
    matches the gamma/2 weight of the single-atom decay term in the master
    equation.
    """
    if x <= 0:
        raise ValueError(f"pair separation must be > 0, got {x}")
    u = 2.0 * math.pi * x
    c2 = math.cos(alpha) ** 2
    return 0.75 * GAMMA * (
        (1.0 - c2) * math.sin(u) / u
        + (1.0 - 3.0 * c2) * (math.cos(u) / u**2 - math.sin(u) / u**3)
    )


@dataclass(frozen=True, eq=False)
class CouplingMatrices:
    """Symmetric pair-coupling matrices J and Gamma with zero diagonal.

    The damping coefficient matrix (gamma_single/2 on the diagonal, Gamma off
    the diagonal) multiplies the jump terms of the master equation and must be
    positive semidefinite for the generator to be completely positive; the
    constructor rejects matrices violating this.
    """

    j: np.ndarray
    gamma: np.ndarray
    gamma_single: float = GAMMA

    def __post_init__(self):
        j = np.asarray(self.j, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        n = j.shape[0]
        if j.shape != (n, n) or g.shape != (n, n):
            raise CouplingError(f"J and Gamma must be square and congruent, got {j.shape}, {g.shape}")
        if self.gamma_single <= 0:
            raise CouplingError(f"gamma_single must be > 0, got {self.gamma_single}")
        for m, name in ((j, "J"), (g, "Gamma")):
            if np.any(m != m.T):
                raise CouplingError(f"{name} must be symmetric")
            if np.any(np.diag(m) != 0.0):
                raise CouplingError(f"{name} must have zero diagonal")
        eigs = np.linalg.eigvalsh(self.damping_coefficients(g))
        if eigs.min() < _PSD_FLOOR * self.gamma_single:
            raise CouplingError(
                "damping matrix is not positive semidefinite "
                f"(smallest eigenvalue {eigs.min():.6e})"
            )
        j.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "gamma", g)

    def damping_coefficients(self, gamma_matrix=None) -> np.ndarray:
        """Coefficient matrix of the jump terms: gamma/2 diagonal, Gamma off it."""
        g = self.gamma if gamma_matrix is None else gamma_matrix
        out = g.copy()
        np.fill_diagonal(out, 0.5 * self.gamma_single)
        return out

    @property
    def count(self) -> int:
        return self.j.shape[0]

    def zeroed(self, j: bool = True, gamma: bool = True) -> "CouplingMatrices":
        """Counterfactual couplings with J and/or Gamma switched off."""
        n = self.count
        return CouplingMatrices(
            j=np.zeros((n, n)) if j else self.j.copy(),
            gamma=np.zeros((n, n)) if gamma else self.gamma.copy(),
            gamma_single=self.gamma_single,
        )

    @classmethod
    def uniform(cls, n: int, j: float, gamma: float,
                gamma_single: float = GAMMA) -> "CouplingMatrices":
        """Artificial all-pairs-equal couplings J and Gamma for ``n`` atoms."""
        off = ~np.eye(n, dtype=bool)
        return cls(j=j * off, gamma=gamma * off, gamma_single=gamma_single)


def build_couplings(ensemble: AtomEnsemble, gamma_single: float = GAMMA) -> CouplingMatrices:
    """Evaluate J and Gamma for every atom pair of the ensemble.

    For each pair the separation x (in lambda_0) and the angle alpha between
    the separation vector and the dipole axis feed the closed-form coupling
    functions; both depend on alpha only through cos^2, so the orientation of
    the separation vector drops out.
    """
    n = ensemble.count
    j = np.zeros((n, n))
    g = np.zeros((n, n))
    d0 = ensemble.dipole_direction
    for mu in range(n):
        for nu in range(mu + 1, n):
            r = ensemble.positions[mu] - ensemble.positions[nu]
            x = np.linalg.norm(r)
            alpha = math.acos(np.clip(np.dot(r / x, d0), -1.0, 1.0))
            j[mu, nu] = j[nu, mu] = coupling_j(alpha, x)
            g[mu, nu] = g[nu, mu] = coupling_gamma(alpha, x)
    return CouplingMatrices(j=j, gamma=g, gamma_single=gamma_single)
