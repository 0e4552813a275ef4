import numpy as np
import pytest

from resfluor import (
    AtomEnsemble,
    DetectorGeometry,
    DriveField,
    build_couplings,
    build_liouvillian,
)

A_FIG3 = 640.0 / 780.0
ETA_FIG3 = 600.0 / 780.0


@pytest.fixture(scope="session")
def single_atom():
    ens = AtomEnsemble(positions=[[0.0, 0.0, 0.0]], dipole_direction=[0, 0, 1])
    return ens, build_couplings(ens)


@pytest.fixture(scope="session")
def fig3a_pair():
    ens = AtomEnsemble(positions=[[0.0, 0.0, 0.0], [A_FIG3, 0.0, 0.0]],
                       dipole_direction=[0, 0, 1])
    return ens, build_couplings(ens)


@pytest.fixture(scope="session")
def detector():
    return DetectorGeometry.in_plane(0.92)


@pytest.fixture(scope="session")
def fig3a_model(fig3a_pair):
    ens, cpl = fig3a_pair
    beam = DriveField(omega0=0.1, fwhm_eta=ETA_FIG3, center=[0, 0, 0],
                      detuning_delta=1.0)
    return build_liouvillian(ens, beam, cpl)


@pytest.fixture(scope="session")
def preset_results():
    """Lazily evaluated cache of preset pipeline results, shared by tests."""
    from resfluor import evaluate_scenario, expand_preset

    cache = {}

    def get(preset_id):
        if preset_id not in cache:
            cache[preset_id] = evaluate_scenario(expand_preset(preset_id))
        return cache[preset_id]

    return get


def mirror_asymmetry(spectrum):
    s = spectrum.incoherent
    return float(np.max(np.abs(s - s[::-1])) / s.max())


# acceptance reporting: one visible pass/fail line per criterion at the end
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
