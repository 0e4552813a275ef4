"""Dense master-equation generator, steady state, and spectral decomposition.

Density matrices are vectorized by column stacking: ``vec(A @ X @ B) ==
kron(B.T, A) @ vec(X)``.  The tensor-product basis is site major with atom 0
as the slowest index; within each site the excited state comes first
(index 0).  Everything is dense complex128, sized for N <= 6 atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .geometry import AtomEnsemble, CouplingMatrices, DriveField, rabi_frequencies

TOL_NULL = 1e-9          # relative threshold isolating the stationary mode
DEFECTIVE_COND = 1e8     # eigenvector-matrix condition flagging a defective generator

_SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)   # |g><e|
_SIGMA_PLUS = _SIGMA_MINUS.T.copy()
_SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


class SteadyStateError(RuntimeError):
    """Steady-state solve failed or the stationary state is not unique."""


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Embed a single-atom operator at ``site`` in the N-atom product space."""
    out = np.eye(1, dtype=complex)
    for k in range(n):
        out = np.kron(out, op if k == site else np.eye(2, dtype=complex))
    return out


def lowering_operator(site: int, n: int) -> np.ndarray:
    return site_operator(_SIGMA_MINUS, site, n)


def raising_operator(site: int, n: int) -> np.ndarray:
    return site_operator(_SIGMA_PLUS, site, n)


def sigma_z_operator(site: int, n: int) -> np.ndarray:
    return site_operator(_SIGMA_Z, site, n)


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = round(math_isqrt(v.size))
    return v.reshape((dim, dim), order="F")


def math_isqrt(n: int) -> int:
    r = int(round(n**0.5))
    if r * r != n:
        raise ValueError(f"vector length {n} is not a perfect square")
    return r


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator for left multiplication, rho -> a @ rho."""
    return np.kron(np.eye(a.shape[0], dtype=complex), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator for right multiplication, rho -> rho @ a."""
    return np.kron(a.T, np.eye(a.shape[0], dtype=complex))


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator for rho -> a @ rho @ b."""
    return np.kron(b.T, a)


def build_hamiltonian(ensemble: AtomEnsemble, drive: DriveField,
                      couplings: CouplingMatrices,
                      rabi_override: np.ndarray | None = None) -> np.ndarray:
    """Rotating-frame Hamiltonian: detuning + drive + dipole-dipole exchange.

    H = (Delta/2) sum_mu sz_mu + sum_mu Omega_mu (sp_mu + sm_mu)
        + sum_{mu != nu} (J_{mu nu}/2) (sp_mu sm_nu + sp_nu sm_mu),  hbar = 1.

    The exchange sum runs over ordered pairs and its summand already contains
    both orderings, so each unordered pair carries total weight 2 * (J/2) = J
    on sp_mu sm_nu; the single-excitation block of a pair splits by +-J.
    """
    n = ensemble.count
    if couplings.count != n:
        raise ValueError(f"couplings are for {couplings.count} atoms, ensemble has {n}")
    rabi = rabi_frequencies(ensemble, drive) if rabi_override is None else np.asarray(
        rabi_override, dtype=float)
    if rabi.shape != (n,):
        raise ValueError(f"need {n} Rabi frequencies, got shape {rabi.shape}")
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    sm = [lowering_operator(mu, n) for mu in range(n)]
    sp = [m.conj().T for m in sm]
    for mu in range(n):
        h += 0.5 * drive.detuning_delta * sigma_z_operator(mu, n)
        h += rabi[mu] * (sp[mu] + sm[mu])
    for mu in range(n):
        for nu in range(n):
            if mu != nu:
                h += couplings.j[mu, nu] * (sp[mu] @ sm[nu])
    return h


@dataclass(eq=False)
class LiouvillianModel:
    """Hamiltonian plus dissipators as a dense superoperator."""

    n: int
    hamiltonian: np.ndarray     # (2^n, 2^n)
    generator: np.ndarray       # (4^n, 4^n), acts on column-stacked rho
    couplings: CouplingMatrices
    rabi: np.ndarray            # per-atom Rabi frequencies
    delta: float
    ensemble: AtomEnsemble
    _decomposition: "SpectralDecomposition | None" = field(
        default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return 2**self.n

    def decomposition(self) -> "SpectralDecomposition":
        """Spectral decomposition of the generator, computed once and cached."""
        if self._decomposition is None:
            self._decomposition = spectral_decomposition(self)
        return self._decomposition


def build_liouvillian(ensemble: AtomEnsemble, drive: DriveField,
                      couplings: CouplingMatrices,
                      rabi_override: np.ndarray | None = None) -> LiouvillianModel:
    """Assemble the master-equation generator for the driven ensemble.

    The dissipator carries the single-atom term with weight gamma/2 and the
    cross terms with weight Gamma_{mu nu} (no extra 1/2), so the coefficient
    matrix of the jump terms is ``couplings.damping_coefficients()``.
    Counterfactual couplings (zeroed or uniform) are built with
    :meth:`CouplingMatrices.zeroed` / :meth:`CouplingMatrices.uniform` and
    passed in like physical ones.
    """
    n = ensemble.count
    h = build_hamiltonian(ensemble, drive, couplings, rabi_override=rabi_override)
    rabi = rabi_frequencies(ensemble, drive) if rabi_override is None else np.asarray(
        rabi_override, dtype=float)
    sm = [lowering_operator(mu, n) for mu in range(n)]
    sp = [m.conj().T for m in sm]
    gen = -1j * (spre(h) - spost(h))
    coeff = couplings.damping_coefficients()
    for mu in range(n):
        for nu in range(n):
            a = coeff[mu, nu]
            if a == 0.0:
                continue
            pm = sp[mu] @ sm[nu]
            gen += a * (2.0 * sandwich(sm[nu], sp[mu]) - spre(pm) - spost(pm))
    return LiouvillianModel(n=n, hamiltonian=h, generator=gen, couplings=couplings,
                            rabi=rabi, delta=drive.detuning_delta, ensemble=ensemble)


@dataclass(eq=False)
class SpectralDecomposition:
    """Eigen data of the generator with a biorthogonal dual basis.

    ``left`` holds the dual basis as rows (the inverse of the right
    eigenvector matrix), so ``left[q] @ right[:, p] == delta_qp`` up to solve
    error.  ``defective`` flags an eigenvector matrix too ill-conditioned for
    mode expansions; callers then fall back to time-domain integration.
    """

    eigenvalues: np.ndarray      # (d^2,)
    right: np.ndarray            # (d^2, d^2), columns are eigenvectors
    left: np.ndarray | None      # (d^2, d^2) or None when defective
    cond: float
    defective: bool

    def null_index(self) -> int:
        """Index of the stationary mode; errors if it is absent or degenerate."""
        mags = np.abs(self.eigenvalues)
        scale = mags.max()
        small = np.flatnonzero(mags < TOL_NULL * scale)
        if small.size == 0:
            raise SteadyStateError("generator has no stationary mode")
        if small.size > 1:
            raise SteadyStateError(
                f"non-unique steady state: {small.size} eigenvalues below "
                f"{TOL_NULL:g} * max|lambda|")
        return int(small[0])


def spectral_decomposition(model: LiouvillianModel) -> SpectralDecomposition:
    """Full dense eigendecomposition of the generator."""
    w, right = np.linalg.eig(model.generator)
    try:
        left = np.linalg.inv(right)
        cond = float(np.linalg.norm(right, 1) * np.linalg.norm(left, 1))
    except np.linalg.LinAlgError:
        left, cond = None, np.inf
    defective = not np.isfinite(cond) or cond > DEFECTIVE_COND
    return SpectralDecomposition(eigenvalues=w, right=right,
                                 left=None if defective else left,
                                 cond=cond, defective=defective)


def steady_state(model: LiouvillianModel, check_unique: bool = True) -> np.ndarray:
    """Unique stationary density matrix of the generator.

    Solved by shifted inverse iteration on the null space, which avoids the
    full decomposition when only rho_ss is needed (the cached decomposition is
    reused if it already exists).  Raises :class:`SteadyStateError` for a
    degenerate null space or a residual above 1e-8.
    """
    gen = model.generator
    d2 = gen.shape[0]
    dim = model.dim
    scale = max(np.abs(model.generator).max(), 1e-300)

    if model._decomposition is not None and not model._decomposition.defective:
        dec = model._decomposition
        v = dec.right[:, dec.null_index()].copy()
    else:
        shift = 1e-8 * scale
        lu = scipy.linalg.lu_factor(gen - shift * np.eye(d2))
        v = vec(np.eye(dim, dtype=complex) / dim)
        for _ in range(30):
            v = scipy.linalg.lu_solve(lu, v)
            v /= np.linalg.norm(v)
            if np.linalg.norm(gen @ v) < 1e-13 * scale:
                break
        if check_unique:
            rng = np.random.default_rng(0)
            u = rng.standard_normal(d2) + 1j * rng.standard_normal(d2)
            for _ in range(3):
                u -= (v.conj() @ u) * v
                u = scipy.linalg.lu_solve(lu, u)
                u /= np.linalg.norm(u)
            u -= (v.conj() @ u) * v
            if np.linalg.norm(u) > 1e-3 and (
                    np.linalg.norm(gen @ (u / np.linalg.norm(u))) < TOL_NULL * scale):
                raise SteadyStateError("non-unique steady state: second null vector found")

    rho = unvec(v, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = np.linalg.norm(gen @ vec(rho))
    if residual > 1e-8:
        raise SteadyStateError(f"steady-state residual {residual:.3e} exceeds 1e-8")
    min_pop = np.linalg.eigvalsh(rho).min()
    if min_pop < -1e-8:
        raise SteadyStateError(f"steady state has negative population {min_pop:.3e}")
    return rho


def _segment_runs(tau: np.ndarray) -> list[tuple[int, int, float]]:
    """Split an ascending grid into maximal runs of equal step."""
    steps = np.diff(tau)
    runs = []
    start = 0
    for k in range(1, len(steps)):
        if not np.isclose(steps[k], steps[start], rtol=1e-12, atol=0.0):
            runs.append((start, k, float(steps[start])))
            start = k
    runs.append((start, len(steps), float(steps[start])))
    return runs


def evolve_vectorized(model: LiouvillianModel, v0: np.ndarray, tau_grid,
                      method: str = "auto") -> np.ndarray:
    """Propagate a vectorized operator: rows ``exp(L tau_k) v0``.

    ``method`` is one of "auto", "eig", "expm" or "ode".  "eig" expands in the
    cached eigenbasis; "expm" steps with matrix exponentials (one per distinct
    step size, so piecewise-uniform grids are cheap); "ode" integrates with a
    stiff adaptive solver at rtol 1e-9, used automatically when the generator
    is defective.  The first row equals ``v0`` exactly when tau starts at 0.
    """
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau_grid must be ascending and start at 0")
    v0 = np.asarray(v0, dtype=complex).reshape(-1)
    if method == "auto":
        method = "ode" if model.decomposition().defective else "eig"

    if method == "eig":
        dec = model.decomposition()
        if dec.defective:
            raise ValueError("generator is defective; use method='ode' or 'expm'")
        a = dec.left @ v0
        out = (dec.right @ (a[:, None] * np.exp(np.outer(dec.eigenvalues, tau)))).T
    elif method == "expm":
        out = np.empty((tau.size, v0.size), dtype=complex)
        out[0] = v0
        cache: dict[float, np.ndarray] = {}
        v = v0
        idx = 1
        for start, stop, h in _segment_runs(tau):
            if h not in cache:
                cache[h] = scipy.linalg.expm(model.generator * h)
            p = cache[h]
            for _ in range(start, stop):
                v = p @ v
                out[idx] = v
                idx += 1
    elif method == "ode":
        sol = solve_ivp(lambda _t, y: model.generator @ y, (0.0, tau[-1]), v0,
                        method="BDF", t_eval=tau, jac=model.generator,
                        rtol=1e-9, atol=1e-12 * max(1.0, np.abs(v0).max()))
        if not sol.success:
            raise RuntimeError(f"time integration failed: {sol.message}")
        out = sol.y.T.astype(complex)
    else:
        raise ValueError(f"unknown method {method!r}")

    out[0] = v0
    return out
