import math

import numpy as np
import pytest

from crowlattice.enums import Boundary, CellVariant
from crowlattice.exceptions import BandEdgeDivergenceException, EvanescentRegimeException, LatticeSpecException
from crowlattice.lattice import LatticeSpec, build_h0
from crowlattice.tmatrix import (
    ChainParams,
    TransferMatrix,
    backscatter_amplitudes,
    backscatter_eps_prime,
    backscatter_tolerance,
    bloch_hamiltonian,
    branch_cosines,
    disorder_cell,
    dispersion_rows,
    hamiltonian_cross_check,
    intrinsic_loss_rate,
    lattice_branches,
    loss_attenuation,
    lossy_dispersion,
    m_cpl,
    mode_basis,
    mode_cell,
    mode_scatterer,
    model_scattering_solution,
    reflection_from_finesse,
    roundtrip_loss,
    s_matrix,
    spin_flip_eigenvalues,
    unit_cell,
    zeeman_epsilon,
)

FINESSE = 300.0
EPSILON = 0.05


def cell(variant=CellVariant.PLAIN, detuning=0.0, epsilon=0.0):
    return unit_cell(ChainParams.from_finesse(FINESSE, detuning), variant, epsilon)


def test_transfer_matrix_shape():
    """Test transfer matrices must be 4x4"""

    with pytest.raises(LatticeSpecException, match="4x4"):
        TransferMatrix(np.eye(3))


def test_coupler_identity():
    """Test a coupler with no reflection is the identity"""

    assert np.allclose(m_cpl(0.0, 1.0).entries, np.eye(4))


def test_cells_are_unimodular():
    """Test every lossless cell has |det M| = 1"""

    for variant in CellVariant:
        for detuning in (-0.7, 0.0, 0.4):
            m = cell(variant, detuning, EPSILON)
            assert m.is_lossless()
            assert abs(m.det) == pytest.approx(1.0, abs=1e-10)


def test_chain_params_validation():
    """Test coupler and resonance-order checks"""

    with pytest.raises(LatticeSpecException, match="must be odd"):
        ChainParams.at_detuning(0.9, 0.0, p=2)
    with pytest.raises(LatticeSpecException, match=">= 1"):
        ChainParams.at_detuning(0.9, 0.0, n=0)
    with pytest.raises(LatticeSpecException, match=r"\(0, 1\)"):
        ChainParams(1.0, 0.0, 0.0, 0.0)
    with pytest.raises(LatticeSpecException, match="not lossless"):
        ChainParams(0.6, 0.6, 0.0, 0.0)
    with pytest.raises(LatticeSpecException, match="exceed pi"):
        ChainParams.from_finesse(3.0, 0.0)


def test_finesse_round_trip():
    """Test F = pi/(1 - r^2) inverts reflection_from_finesse"""

    params = ChainParams.from_finesse(FINESSE, 0.1)
    assert params.finesse == pytest.approx(FINESSE)
    assert params.r == pytest.approx(reflection_from_finesse(FINESSE))
    assert params.coupler_t == pytest.approx(1j * params.t)


def test_plain_dispersion():
    """Test the plain cell follows cos(KLambda) = -d to O(1/F)"""

    for detuning in np.linspace(-0.9, 0.9, 19):
        cosines = branch_cosines(cell(CellVariant.PLAIN, detuning))
        expected = lattice_branches(CellVariant.PLAIN, detuning, 0.0, FINESSE)
        assert np.max(np.abs(cosines - expected)) <= 5 / FINESSE * max(abs(detuning), 1 / FINESSE)


def test_waveguide_scatterer_dispersion():
    """Test the waveguide scatterer splits the band like a kappa(1 +/- eps) hop"""

    for detuning in np.linspace(-0.9, 0.9, 19):
        cosines = branch_cosines(cell(CellVariant.WAVEGUIDE_SCATTERER, detuning, EPSILON))
        expected = lattice_branches(CellVariant.WAVEGUIDE_SCATTERER, detuning, EPSILON, FINESSE)
        assert np.max(np.abs(cosines - expected)) <= 5 / FINESSE * max(abs(detuning), 1 / FINESSE)


def test_resonator_scatterer_split():
    """Test the resonator scatterer shifts the branches by +-2 eps F/pi"""

    epsilon = zeeman_epsilon(FINESSE)
    assert epsilon == pytest.approx(0.25 * math.pi / (2 * FINESSE))
    expected = lattice_branches(CellVariant.RESONATOR_SCATTERER, 0.0, epsilon, FINESSE)
    assert expected[1] - expected[0] == pytest.approx(0.5)
    for detuning in np.linspace(-0.6, 0.6, 13):
        cosines = branch_cosines(cell(CellVariant.RESONATOR_SCATTERER, detuning, epsilon))
        assert cosines[1] - cosines[0] == pytest.approx(4 * epsilon * FINESSE / math.pi, rel=0.1)


def test_zero_epsilon_reproduces_plain_cell():
    """Test the scatterer variants reduce to the plain cell at eps = 0"""

    plain = cell(CellVariant.PLAIN, 0.3)
    for variant in (CellVariant.WAVEGUIDE_SCATTERER, CellVariant.RESONATOR_SCATTERER):
        assert np.allclose(cell(variant, 0.3, 0.0).entries, plain.entries, atol=1e-10)


def test_spin_flip_closed_form():
    """Test the closed-form eigenvalues against the numerical cell"""

    for detuning in np.linspace(-0.8, 0.8, 9):
        closed = spin_flip_eigenvalues(detuning, EPSILON)
        expected = np.sort([np.real(sum(closed["forward"]) / 2), np.real(sum(closed["backward"]) / 2)])
        numeric = branch_cosines(cell(CellVariant.WAVEGUIDE_SCATTERER, detuning, EPSILON))
        assert np.max(np.abs(numeric - expected)) <= 5 / FINESSE
        lo, hi = sorted(closed["first_order"])
        assert expected[0] == pytest.approx(lo, abs=EPSILON ** 2 + 1e-12)
        assert expected[1] == pytest.approx(hi, abs=EPSILON ** 2 + 1e-12)


def test_spin_flip_closed_form_outside_band():
    """Test the closed form refuses detunings outside the band"""

    with pytest.raises(LatticeSpecException, match="outside the spin-flip band"):
        spin_flip_eigenvalues(0.99, EPSILON)


def test_dispersion_rows_propagating_count():
    """Test four propagating modes inside the band and none outside"""

    rows = dispersion_rows(CellVariant.PLAIN, [0.3, 1.2], FINESSE)
    assert len(rows[0]) == 10
    assert rows[0][-1] == 4
    assert rows[1][-1] == 0


def test_bloch_hamiltonian_ring():
    """Test the plain ring's Bloch matrix is -2 kappa cos(K) on both spins"""

    ring = LatticeSpec(1, 24, boundary=Boundary.TORUS)
    k = 2 * math.pi * 5 / 24
    block = bloch_hamiltonian(build_h0(ring), k)
    assert np.allclose(block, -2 * math.cos(k) * np.eye(2), atol=1e-12)


def test_hamiltonian_cross_check_plain_ring():
    """Test the plain ring and the plain cell agree on the ring's k-grid"""

    ring = LatticeSpec(1, 24, boundary=Boundary.TORUS)
    ks = 2 * math.pi * np.arange(4, 9) / 24
    assert hamiltonian_cross_check(build_h0(ring), CellVariant.PLAIN, 0.0, FINESSE, ks) <= 5 / FINESSE


def test_mode_cell_is_diagonal():
    """Test the plain cell is diagonal in its flux-normalized mode basis"""

    for k in (math.pi / 3, math.pi / 2, 2 * math.pi / 3):
        entries = mode_cell(k, FINESSE).entries
        assert np.allclose(entries - np.diag(np.diag(entries)), 0, atol=1e-9)
        assert np.allclose(np.abs(np.diag(entries)), 1, atol=1e-9)
        assert np.diag(entries)[0] == pytest.approx(np.exp(1j * k), abs=1e-2)
        assert np.diag(entries)[1] == pytest.approx(np.exp(-1j * k), abs=1e-2)
        _, basis = mode_basis(k, FINESSE)
        flux = np.diag(basis.conj().T @ np.diag([1, -1, 1, -1]) @ basis).real
        assert np.allclose(flux, [1, -1, 1, -1])


def test_s_matrix_unitary():
    """Test the S matrix of a disordered resonator is unitary"""

    for k in (math.pi / 3, math.pi / 2, 2 * math.pi / 3):
        s = s_matrix(disorder_cell(k, 0.01, FINESSE))
        assert np.allclose(s.conj().T @ s, np.eye(4), atol=1e-8)


def test_s_matrix_evanescent():
    """Test a singular backward block is reported"""

    entries = np.eye(4)
    entries[1, 3] = entries[3, 1] = 1.0
    with pytest.raises(EvanescentRegimeException, match="singular"):
        s_matrix(TransferMatrix(entries))


def test_band_edge_divergence():
    """Test the scatterer diverges at KLambda = 0 and pi"""

    with pytest.raises(BandEdgeDivergenceException):
        mode_scatterer(0.0, 0.01, FINESSE)
    with pytest.raises(BandEdgeDivergenceException):
        model_scattering_solution(math.pi, 0.1)
    with pytest.raises(LatticeSpecException, match="KLambda"):
        mode_basis(-math.pi / 2, FINESSE)


def test_backscatter_eps_prime():
    """Test eps' = -4 eps F/pi"""

    assert backscatter_eps_prime(0.001, FINESSE) == pytest.approx(-1.2 / math.pi)


def test_backscatter_first_order():
    """Test spin-flipped magnitudes of the physical chain match |eps'|/(2 sin(KLambda))"""

    epsilon = 0.001
    for k in (math.pi / 3, math.pi / 2, 2 * math.pi / 3):
        amp = backscatter_amplitudes(k, epsilon, FINESSE)
        model = model_scattering_solution(k, backscatter_eps_prime(epsilon, FINESSE))
        assert abs(model.t_down) == pytest.approx(0.6 / (math.pi * math.sin(k)))
        assert abs(abs(amp.t_down) - abs(model.t_down)) / abs(model.t_down) <= backscatter_tolerance(epsilon)
        assert abs(abs(amp.r_down) - abs(model.r_down)) / abs(model.r_down) <= backscatter_tolerance(epsilon)
        assert abs(amp.t_down) == pytest.approx(abs(amp.r_down), rel=1e-3)


def test_backscatter_exact():
    """Test the physical chain follows the exact lattice model beyond first order"""

    epsilon = 0.01
    for k in (math.pi / 3, math.pi / 2, 2 * math.pi / 3):
        amp = backscatter_amplitudes(k, epsilon, FINESSE)
        eps_prime = backscatter_eps_prime(epsilon, FINESSE)
        model = model_scattering_solution(k, eps_prime, exact=True)
        first = model_scattering_solution(k, eps_prime)
        for a, b in ((amp.t_up, model.t_up), (amp.r_up, model.r_up), (amp.t_down, model.t_down), (amp.r_down, model.r_down)):
            assert abs(abs(a) - abs(b)) <= backscatter_tolerance(epsilon) * abs(b)
        # first order has broken down here, the chain is not a restatement of it
        assert abs(first.t_down) > 2 * abs(amp.t_down)
        assert amp.total == pytest.approx(1.0, abs=1e-8)


def test_backscatter_amplitudes_not_exact_lattice_model():
    """Test the chain differs from the lattice model at the level of its own corrections"""

    epsilon = 0.001
    amp = backscatter_amplitudes(math.pi / 2, epsilon, FINESSE)
    model = model_scattering_solution(math.pi / 2, backscatter_eps_prime(epsilon, FINESSE), exact=True)
    assert abs(abs(amp.t_down) - abs(model.t_down)) > 1e-6


def test_backscatter_tolerance():
    """Test the tolerance floor"""

    assert backscatter_tolerance(0.001) == 0.1
    assert backscatter_tolerance(0.05) == pytest.approx(0.25)


def test_loss_helpers():
    """Test kappa_in = mu F/2pi 4 kappa and its inverse"""

    kappa_in = intrinsic_loss_rate(0.001, FINESSE)
    assert kappa_in == pytest.approx(0.001 * FINESSE / (2 * math.pi) * 4)
    assert roundtrip_loss(kappa_in, FINESSE) == pytest.approx(0.001)
    assert lossy_dispersion(math.pi / 2, 0.001, FINESSE).imag == pytest.approx(-kappa_in)
    assert lossy_dispersion(0.0, 0.0, FINESSE) == pytest.approx(-2.0)
    assert loss_attenuation(10, 0.02) == pytest.approx(math.exp(-0.8))
    with pytest.raises(LatticeSpecException, match="nonnegative"):
        intrinsic_loss_rate(-0.1, FINESSE)
