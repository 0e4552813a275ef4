import numpy as np
import pytest

from resfluor import (
    AtomEnsemble,
    CouplingError,
    DetectorGeometry,
    DriveField,
    SpectrumResult,
    asymmetry_sweep,
    build_couplings,
    build_liouvillian,
    degree_of_asymmetry,
    dressed_detailed_balance,
    peak_decomposition,
    permutation_symmetry_check,
    power_spectrum,
    sister_peak_balance,
    symmetric_asymmetric_split,
)

from conftest import A_FIG3


def _uniform(omega, delta=1.0):
    return DriveField(omega0=omega, detuning_delta=delta, uniform=True)


def test_degree_of_asymmetry_mollow(single_atom, detector):
    ens, cpl = single_atom
    for omega, delta in [(0.1, 1.0), (1.0, 0.0), (20.0, 1.0)]:
        model = build_liouvillian(ens, _uniform(omega, delta), cpl)
        report = degree_of_asymmetry(power_spectrum(model, detector))
        assert report.d < 1e-8


def test_degree_of_asymmetry_addressed(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    report = degree_of_asymmetry(spec)
    assert report.d > 0.05
    assert report.d == pytest.approx(0.3409394988, rel=1e-3)   # pipeline regression value
    # definitional identities
    diff = np.abs(spec.incoherent - spec.incoherent[::-1])
    assert report.d * report.s_max == diff.max()
    _, s_asy = symmetric_asymmetric_split(spec)
    assert report.d * report.s_max == pytest.approx(2.0 * np.abs(s_asy).max(), abs=1e-10)
    assert report.profile[:, 0].min() > 0
    assert report.profile[:, 1].max() == diff.max()


def test_degree_of_asymmetry_scale_invariant(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    scaled = SpectrumResult(grid=spec.grid, incoherent=37.0 * spec.incoherent,
                            coherent_weight=0.0, detector=spec.detector)
    assert degree_of_asymmetry(scaled).d == pytest.approx(degree_of_asymmetry(spec).d, rel=1e-12)


def test_degree_of_asymmetry_reports_argmax(fig3a_model, detector):
    spec = power_spectrum(fig3a_model, detector)
    report = degree_of_asymmetry(spec)
    k = np.argmax(report.profile[:, 1])
    assert report.argmax_omega == report.profile[k, 0]


def test_degree_of_asymmetry_rejects_zero_spectrum(detector):
    grid = np.linspace(-1, 1, 21)
    empty = SpectrumResult(grid=grid, incoherent=np.zeros(21), coherent_weight=0.0,
                           detector=detector)
    with pytest.raises(ValueError, match="undefined"):
        degree_of_asymmetry(empty)


def test_sweep_monotone_and_exact_zero_at_equal_drive(fig3a_pair, detector):
    ens, cpl = fig3a_pair
    points = asymmetry_sweep(ens, cpl, detector, np.linspace(0, 1, 11), omega1=0.1, delta=1.0)
    ds = [d for _, d in points]
    assert all(a >= b - 1e-6 for a, b in zip(ds, ds[1:]))
    assert ds[-1] < 1e-8
    assert ds[0] > ds[-1]
    assert ds[0] == pytest.approx(0.3470434267, rel=1e-3)   # pipeline regression value


def test_sweep_decreases_with_drive_strength(fig3a_pair, detector):
    ens, cpl = fig3a_pair
    d0 = {}
    for omega1 in (0.1, 0.5, 1.0):
        (_, d), = asymmetry_sweep(ens, cpl, detector, [0.0], omega1=omega1, delta=1.0)
        d0[omega1] = d
    assert d0[0.1] > d0[0.5] > d0[1.0]


def test_sweep_validates_ratios(fig3a_pair, detector):
    ens, cpl = fig3a_pair
    with pytest.raises(ValueError, match="ratios"):
        asymmetry_sweep(ens, cpl, detector, [0.5, 0.2], omega1=0.1, delta=1.0)
    with pytest.raises(ValueError, match="ratios"):
        asymmetry_sweep(ens, cpl, detector, [-0.1, 0.5], omega1=0.1, delta=1.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("jg", [(-0.0855, -0.114), (0.031, 0.05)])
def test_permutation_symmetry_uniform_couplings(n, jg, detector):
    d = permutation_symmetry_check(n, jg[0], jg[1], omega=0.1, delta=1.0, detector=detector)
    assert d < 1e-7


def test_permutation_symmetry_check_psd_guard(detector):
    with pytest.raises(CouplingError):
        permutation_symmetry_check(5, j=0.0, gamma=-0.2, omega=0.1, delta=1.0,
                                   detector=detector)


def test_physical_equal_drive_nearly_symmetric(detector):
    # physical (geometry-derived) couplings, equal drive: small but nonzero D
    ens = AtomEnsemble(positions=[[0, 0, 0], [A_FIG3, 0, 0], [-A_FIG3, 0, 0]],
                       dipole_direction=[0, 0, 1])
    cpl = build_couplings(ens)
    model = build_liouvillian(ens, _uniform(0.1), cpl)
    d = degree_of_asymmetry(power_spectrum(model, detector)).d
    assert 1e-10 < d < 0.05


def test_sister_balance_symmetric_cases(single_atom, fig3a_pair, detector):
    ens1, cpl1 = single_atom
    mollow = build_liouvillian(ens1, _uniform(0.1), cpl1)
    report = sister_peak_balance(peak_decomposition(mollow, detector))
    assert report.max_residual < 1e-8 * report.weight_scale
    assert report.pairs                     # at least the two side modes pair up

    ens2, cpl2 = fig3a_pair
    equal = build_liouvillian(ens2, _uniform(0.1), cpl2)
    report2 = sister_peak_balance(peak_decomposition(equal, detector))
    assert report2.max_residual < 1e-6 * report2.weight_scale


def test_sister_balance_detects_addressing(fig3a_model, detector):
    report = sister_peak_balance(peak_decomposition(fig3a_model, detector))
    assert report.max_residual > 1e-3 * report.weight_scale


def test_sister_balance_pairs_everything(fig3a_model, detector):
    report = sister_peak_balance(peak_decomposition(fig3a_model, detector))
    paired = {i for a, b, _ in report.pairs for i in (a, b)}
    assert paired.isdisjoint(report.central)
    assert len(paired) + len(report.central) == len(report.peaks)


def test_sister_balance_merges_degenerate_modes(fig3a_pair, detector):
    # independent equal atoms: modes coincide exactly and must merge cleanly
    ens, cpl = fig3a_pair
    model = build_liouvillian(ens, _uniform(0.1), cpl.zeroed())
    report = sister_peak_balance(peak_decomposition(model, detector))
    assert report.max_residual < 1e-8 * report.weight_scale


def test_sister_balance_rejects_orphan_peak():
    peaks = np.array([
        [+2.0, 1.0, 0.5, 0.01],
        [-2.0, 1.0, 0.5, -0.01],
        [+4.0, 1.0, 0.3, 0.0],      # heavy peak with no mirror partner
        [0.0, 1.0, 1.0, 0.0],
    ])
    with pytest.raises(ValueError, match="sister"):
        sister_peak_balance(peaks)


def test_dressed_detailed_balance_strong_drive():
    report = dressed_detailed_balance(20.0)
    rho_pp, rho_mm = report.populations
    p_pm, p_mp = report.rates
    assert rho_pp == pytest.approx(0.5, abs=1e-6)
    assert rho_mm == pytest.approx(0.5, abs=1e-6)
    assert p_pm == pytest.approx(0.25, abs=1e-12)
    assert p_mp == pytest.approx(0.25, abs=1e-12)
    flux = rho_pp * p_pm
    assert report.detailed_balance_residual < 1e-3 * flux
    assert report.max_residual < 1e-8 * report.weight_scale

    side = report.peaks[np.abs(report.peaks[:, 0]) > 20.0]
    assert len(side) == 2
    # dressed splitting 2 Omega, located within 2%
    assert np.abs(np.abs(side[:, 0]) - 40.0).max() < 0.02 * 40.0
    # dispersive-to-Lorentzian weight ratio is (5/8) gamma/Omega at resonance
    kl = np.abs(side[:, 3] / side[:, 2])
    assert kl == pytest.approx(5.0 / (8.0 * 20.0), rel=1e-2)


def test_dressed_detailed_balance_preconditions():
    with pytest.raises(ValueError, match="10 gamma"):
        dressed_detailed_balance(5.0)
    with pytest.raises(ValueError, match="delta"):
        dressed_detailed_balance(20.0, delta=0.5)
