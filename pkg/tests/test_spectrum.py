import numpy as np
import pytest

from resfluor import (
    AtomEnsemble,
    CouplingMatrices,
    DetectorGeometry,
    DriveField,
    FrequencyGrid,
    SpectrumResult,
    build_couplings,
    build_liouvillian,
    coherent_weight,
    peak_decomposition,
    power_spectrum,
    qrt_correlators,
    spectrum_from_peaks,
    steady_intensity,
    steady_state,
    symmetric_asymmetric_split,
)
from resfluor.spectrum import atom_phases, pair_transforms

from conftest import ETA_FIG3, mirror_asymmetry

RHO_EE_01_1 = 0.007874015748031496063
ABS_SM_SQ_01_1 = 0.007750015500031000062   # |<sigma->_ss|^2 at Omega=0.1, Delta=1


def _uniform(omega, delta=1.0):
    return DriveField(omega0=omega, detuning_delta=delta, uniform=True)


@pytest.fixture(scope="module")
def mollow_model(single_atom):
    ens, cpl = single_atom
    return build_liouvillian(ens, _uniform(0.1), cpl)


def test_grid_is_symmetric_with_zero(fig3a_model):
    grid = FrequencyGrid(points=4001).build(fig3a_model)
    assert grid.size == 4001
    assert grid[2000] == 0.0
    assert np.array_equal(grid, -grid[::-1])
    # default width covers 5x the largest rate scale
    assert grid[-1] == pytest.approx(5.0 * 1.0)


def test_grid_rejects_even_points(fig3a_model):
    with pytest.raises(ValueError, match="odd"):
        FrequencyGrid(points=4000).build(fig3a_model)


def test_detector_validation():
    with pytest.raises(ValueError, match="unit"):
        DetectorGeometry(direction=[1.0, 1.0, 0.0])
    det = DetectorGeometry.in_plane(0.92)
    assert det.direction[2] == 0.0
    assert np.linalg.norm(det.direction) == pytest.approx(1.0, abs=1e-15)


def test_intensity_single_atom(mollow_model, detector):
    rho = steady_state(mollow_model)
    assert steady_intensity(mollow_model, rho, detector) == pytest.approx(RHO_EE_01_1, rel=1e-9)


def test_intensity_dark_second_atom(fig3a_pair, detector):
    # atom 2 undriven and uncoupled contributes nothing
    ens, cpl = fig3a_pair
    model = build_liouvillian(ens, _uniform(0.1), cpl.zeroed(),
                              rabi_override=np.array([0.1, 0.0]))
    rho = steady_state(model)
    assert steady_intensity(model, rho, detector) == pytest.approx(RHO_EE_01_1, rel=1e-9)


def test_intensity_operator_oracle(fig3a_model, detector):
    # independent route: expectation of the assembled detection operator
    from resfluor.liouvillian import lowering_operator
    rho = steady_state(fig3a_model)
    phases = atom_phases(fig3a_model.ensemble, detector)
    field_op = sum(phases[mu].conjugate() * lowering_operator(mu, 2) for mu in range(2))
    oracle = np.trace(field_op.conj().T @ field_op @ rho).real
    assert steady_intensity(fig3a_model, rho, detector) == pytest.approx(oracle, rel=1e-12)


def test_correlators_equal_time_identity(fig3a_model):
    rho = steady_state(fig3a_model)
    corr = qrt_correlators(fig3a_model, rho)
    assert np.abs(corr.evaluate(0.0)[0] - corr.equal_time).max() < 1e-10


def test_correlators_vanish_in_ground_state(single_atom):
    ens, cpl = single_atom
    model = build_liouvillian(ens, _uniform(0.0, delta=0.0), cpl)
    corr = qrt_correlators(model, steady_state(model))
    taus = np.linspace(0.0, 10.0, 20)
    assert np.abs(corr.evaluate(taus)).max() < 1e-12


def test_correlators_factorize_at_long_times(mollow_model):
    rho = steady_state(mollow_model)
    corr = qrt_correlators(mollow_model, rho)
    late = corr.evaluate(80.0)[0, 0, 0]
    assert late == pytest.approx(corr.coherent_offsets[0, 0], abs=1e-12)
    assert abs(corr.coherent_offsets[0, 0]) == pytest.approx(ABS_SM_SQ_01_1, rel=1e-9)


def test_correlators_grid_form_matches_modes(fig3a_model):
    rho = steady_state(fig3a_model)
    taus = np.linspace(0.0, 6.0, 31)
    modes = qrt_correlators(fig3a_model, rho)
    sampled = qrt_correlators(fig3a_model, rho, tau_grid=taus)
    assert np.abs(sampled.samples - modes.evaluate(taus)).max() < 1e-9


def test_mollow_triplet_structure(single_atom, detector):
    # strong resonant drive: sidebands at +-2 Omega with 3:1 center-to-side height
    ens, cpl = single_atom
    model = build_liouvillian(ens, _uniform(20.0, delta=0.0), cpl)
    spec = power_spectrum(model, detector, grid=FrequencyGrid(width=60.0, points=12001))
    g, s = spec.grid, spec.incoherent
    assert mirror_asymmetry(spec) < 1e-8
    side = g[g > 10][np.argmax(s[g > 10])]
    assert side == pytest.approx(40.0, rel=2e-2)
    center_height = s[np.abs(g).argmin()]
    side_height = s[g > 10].max()
    assert center_height / side_height == pytest.approx(3.0, rel=5e-2)


def test_weak_drive_side_peaks(mollow_model, detector):
    spec = power_spectrum(mollow_model, detector)
    g, s = spec.grid, spec.incoherent
    assert mirror_asymmetry(spec) < 1e-8
    peak = g[g > 0][np.argmax(s[g > 0])]
    # doublet near +-Delta; the exact maximum sits at sqrt(Delta^2 - gamma^2/4)
    assert peak == pytest.approx(1.0, abs=0.15)
    assert peak == pytest.approx(np.sqrt(1.0 - 0.25), abs=0.02)


def test_fig3a_right_peak_suppressed(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    g, s = spec.grid, spec.incoherent
    d = mirror_asymmetry(spec)
    assert d > 0.05
    assert d == pytest.approx(0.3409394988, rel=1e-3)    # pipeline regression value
    assert s[g > 0].max() < s[g < 0].max()


def test_no_collective_is_sum_of_single_spectra(fig3a_pair, single_atom, detector):
    ens2, cpl2 = fig3a_pair
    beam = DriveField(omega0=0.1, fwhm_eta=ETA_FIG3, center=[0, 0, 0], detuning_delta=1.0)
    model = build_liouvillian(ens2, beam, cpl2.zeroed())
    spec = power_spectrum(model, detector)
    assert mirror_asymmetry(spec) < 1e-8

    ens1, cpl1 = single_atom
    omega2 = 0.1 * np.exp(-4 * np.log(2) * (640 / 600) ** 2)
    parts = 0.0
    for omega in (0.1, omega2):
        m = build_liouvillian(ens1, _uniform(omega), cpl1)
        parts = parts + power_spectrum(m, detector, grid=spec.grid).incoherent
    assert np.abs(spec.incoherent - parts).max() < 1e-8 * spec.incoherent.max()


def test_equal_drive_symmetric(fig3a_pair, detector):
    ens, cpl = fig3a_pair
    model = build_liouvillian(ens, _uniform(0.1), cpl)
    assert mirror_asymmetry(power_spectrum(model, detector)) < 1e-8


def test_spectrum_nonnegative(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    assert spec.incoherent.min() >= -1e-8 * spec.incoherent.max()


def test_coherent_weight_formula(fig3a_model, detector):
    from resfluor.liouvillian import lowering_operator
    rho = steady_state(fig3a_model)
    phases = atom_phases(fig3a_model.ensemble, detector)
    amp = sum(phases[mu].conjugate() * np.trace(lowering_operator(mu, 2) @ rho)
              for mu in range(2))
    assert coherent_weight(fig3a_model, rho, detector) == pytest.approx(abs(amp) ** 2, rel=1e-12)


def test_sum_rule(fig3a_model, detector):
    rho = steady_state(fig3a_model)
    wide = FrequencyGrid(width=600.0, points=60001)
    spec = power_spectrum(fig3a_model, detector, grid=wide, rho_ss=rho)
    total = np.trapezoid(spec.incoherent, spec.grid) + spec.coherent_weight
    intensity = steady_intensity(fig3a_model, rho, detector)
    assert spec.incoherent[0] < 1e-6 * spec.incoherent.max()   # tails clear the grid edge
    assert total == pytest.approx(intensity, rel=1e-3)


def test_integration_path_matches_eigen(fig3a_model, detector):
    ref = power_spectrum(fig3a_model, detector)
    for propagator in ("expm", "ode"):
        alt = power_spectrum(fig3a_model, detector, method="integration",
                             propagator=propagator)
        rel = np.abs(alt.incoherent - ref.incoherent).max() / ref.incoherent.max()
        assert rel < 1e-6, propagator
        assert alt.peaks is None and alt.method == "integration"


def test_peak_reconstruction_identity(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    rebuilt = spectrum_from_peaks(spec.peaks, spec.grid)
    assert np.abs(rebuilt - spec.incoherent).max() < 1e-6 * spec.incoherent.max()
    table = peak_decomposition(fig3a_model, detector)
    assert np.allclose(table, spec.peaks)
    assert table.shape == (4 ** 2 - 1, 4)      # one row per non-stationary mode


def test_stationary_mode_carries_no_weight(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    assert spec.stationary_weight < 1e-8


def test_split_identity_and_routes(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    s_sy, s_asy = symmetric_asymmetric_split(spec)
    assert np.abs(s_sy + s_asy - spec.incoherent).max() < 1e-15
    m_sy, m_asy = symmetric_asymmetric_split(spec, via="peaks")
    assert np.abs(s_sy - m_sy).max() < 1e-8
    assert np.abs(s_asy - m_asy).max() < 1e-8
    assert np.abs(s_asy).max() > 0.01 * spec.incoherent.max()


def test_split_equal_drive_has_no_odd_part(fig3a_pair, detector):
    ens, cpl = fig3a_pair
    spec = power_spectrum(build_liouvillian(ens, _uniform(0.1), cpl), detector)
    _, s_asy = symmetric_asymmetric_split(spec)
    assert np.abs(s_asy).max() < 1e-8 * spec.incoherent.max()


def test_split_rejects_asymmetric_grid(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    bad = SpectrumResult(grid=spec.grid + 0.01, incoherent=spec.incoherent,
                         coherent_weight=0.0, detector=detector)
    with pytest.raises(ValueError, match="symmetric"):
        symmetric_asymmetric_split(bad)


def test_permutation_symmetric_reduction():
    # uniform couplings + uniform drive: S = N S_11 + N (N-1) S_12
    n = 3
    ens = AtomEnsemble(positions=[[0.7 * k, 0, 0] for k in range(n)],
                       dipole_direction=[0, 0, 1])
    cpl = CouplingMatrices.uniform(n, j=-0.06, gamma=-0.08)
    model = build_liouvillian(ens, _uniform(0.2), cpl)
    grid = FrequencyGrid().build(model)
    f = pair_transforms(model, grid)
    full = f.sum(axis=(0, 1))
    reduced = n * f[0, 0] + n * (n - 1) * f[0, 1]
    assert np.abs(full - reduced).max() < 1e-8 * np.abs(full).max()
    # and the real part of the unphased sum is the z-detector spectrum
    spec = power_spectrum(model, DetectorGeometry(direction=[0, 0, 1]), grid=grid)
    assert np.abs(full.real - spec.incoherent).max() < 1e-10 * spec.incoherent.max()


def test_real_correlators_iff_symmetric(fig3a_pair, fig3a_model, detector):
    # permutation-symmetric model: phase-summed correlator real, spectrum symmetric
    ens, _ = fig3a_pair
    cpl = CouplingMatrices.uniform(2, j=-0.0855, gamma=-0.114)
    model = build_liouvillian(ens, _uniform(0.1), cpl)
    taus = np.linspace(0.0, 30.0, 121)

    def phase_summed(m):
        corr = qrt_correlators(m, steady_state(m), tau_grid=taus)
        phases = atom_phases(m.ensemble, detector)
        return np.einsum("m,tmn,n->t", phases, corr.samples - corr.coherent_offsets,
                         phases.conj())

    sym = phase_summed(model)
    assert np.abs(sym.imag).max() < 1e-10 * np.abs(sym).max()
    assert mirror_asymmetry(power_spectrum(model, detector)) < 1e-8
    # addressed model: complex correlator and asymmetric spectrum go together
    asym = phase_summed(fig3a_model)
    assert np.abs(asym.imag).max() > 1e-3 * np.abs(asym).max()
    assert mirror_asymmetry(power_spectrum(fig3a_model, detector)) > 0.05


def test_defective_fallback_wiring(fig3a_model, detector, monkeypatch):
    dec = fig3a_model.decomposition()
    ref = power_spectrum(fig3a_model, detector)
    monkeypatch.setattr(dec, "defective", True)
    monkeypatch.setattr(dec, "left", None)
    spec = power_spectrum(fig3a_model, detector, grid=ref.grid)
    assert spec.method == "integration" and spec.peaks is None
    assert np.abs(spec.incoherent - ref.incoherent).max() < 1e-5 * ref.incoherent.max()
