import csv

import numpy as np
import pytest

from crowlattice.enums import Spin
from crowlattice.exceptions import LatticeSpecException, SingularSystemException, SiteRangeException
from crowlattice.lattice import (
    DisorderSpec,
    HamiltonianMatrix,
    LatticeSpec,
    SiteIndex,
    apply_disorder,
    build_h0,
    build_spin_flip,
    sample_magnetic_disorder,
    sample_onsite_disorder,
)
from crowlattice.probe import (
    ProbeSpec,
    Resolvent,
    backward_feed,
    channel_matrix,
    greens_column,
    group_delay,
    self_energy,
    transport,
    transport_spectrum,
)


def single_resonator(nu=0.5):
    spec = LatticeSpec(1, 1)
    return build_h0(spec), ProbeSpec((0, 0), (0, 0), nu, single_resonator=True)


def test_probe_spec_validation():
    """Test probe placement and coupling checks"""

    with pytest.raises(LatticeSpecException, match="nu must be positive"):
        ProbeSpec((0, 0), (1, 0), 0.0)
    with pytest.raises(LatticeSpecException, match="coincide"):
        ProbeSpec((1, 0), (1, 0), 1.0)
    probe = ProbeSpec([1, 0], [3, 0], 6.0)
    assert probe.in_site == (1, 0)
    assert probe.swapped() == ProbeSpec((3, 0), (1, 0), 6.0)


def test_probe_outside_lattice():
    """Test probes must sit on the lattice"""

    h = build_h0(LatticeSpec(4, 4))
    with pytest.raises(SiteRangeException):
        transport(h, ProbeSpec((1, 0), (4, 0), 1.0), 0.0)


def test_self_energy():
    """Test -i nu kappa/2 on both spins of each probe site"""

    spec = LatticeSpec(3, 3, kappa=2.0)
    sigma = self_energy(ProbeSpec((0, 0), (2, 1), 3.0), spec)
    diagonal = np.diag(sigma.entries)
    for x, y in [(0, 0), (2, 1)]:
        for spin in (Spin.UP, Spin.DOWN):
            assert diagonal[spec.index(x, y, spin)] == pytest.approx(-3.0j)
    assert np.count_nonzero(diagonal) == 4
    assert not sigma.is_hermitian


def test_single_resonator_drop_filter():
    """Test r' = -nu/(nu - i omega) for a single probed resonator"""

    nu = 0.5
    h, probe = single_resonator(nu)
    omegas = np.linspace(-5 * nu, 5 * nu, 21)
    spectrum = transport_spectrum(h, probe, omegas)
    expected = -nu / (nu - 1j * omegas)
    assert np.max(np.abs(spectrum.r_prime - expected)) <= 1e-12


def test_single_resonator_delay():
    """Test the group delay at resonance is 1/nu"""

    nu = 0.5
    h, probe = single_resonator(nu)
    spectrum = transport_spectrum(h, probe, np.linspace(-0.01, 0.01, 5))
    delay = group_delay(spectrum)
    assert delay[2] == pytest.approx(1 / nu, rel=1e-3)


def test_greens_column_solves_system():
    """Test (omega - H - Sigma) g = e"""

    spec = LatticeSpec(4, 4, alpha=0.25)
    h = build_h0(spec)
    sigma = self_energy(ProbeSpec((1, 0), (2, 0), 1.0), spec)
    g = greens_column(h, sigma, 0.3, SiteIndex(1, 0, Spin.UP))
    rhs = (0.3 * np.eye(h.dim) - h.entries - sigma.entries) @ g
    expected = np.zeros(h.dim)
    expected[spec.index(1, 0)] = 1.0
    assert np.allclose(rhs, expected, atol=1e-12)


def test_singular_system():
    """Test SingularSystemException at an eigenvalue of an unprobed lossless block"""

    spec = LatticeSpec(1, 1)
    h = HamiltonianMatrix.from_array(np.zeros((2, 2)), spec)
    sigma = HamiltonianMatrix(np.zeros((2, 2)), False, spec)
    with pytest.raises(SingularSystemException, match="singular system at omega=0.0"):
        Resolvent(h, sigma, 0.0).column(0)


def test_unitarity():
    """Test |t|^2 + |r|^2 + |r'|^2 + |t'|^2 = 1 on a lossless lattice"""

    spec = LatticeSpec(6, 6, alpha=0.25)
    rng = np.random.default_rng(4)
    sites = rng.choice(spec.n_sites, size=2, replace=False)
    probe = ProbeSpec(
        (int(sites[0] % 6), int(sites[0] // 6)), (int(sites[1] % 6), int(sites[1] // 6)), 2.0
    )
    h = apply_disorder(build_h0(spec), spec, sample_magnetic_disorder(spec, 0.2, 9))
    spectrum = transport_spectrum(h, probe, np.linspace(-4, 4, 201))
    total = np.array([point.total for point in spectrum])
    assert np.max(np.abs(total - 1)) <= 1e-10


def test_clean_lattice_has_no_backward_channels():
    """Test r and t' vanish when H does not couple the circulations"""

    spec = LatticeSpec(5, 5, alpha=0.25)
    coefficients = transport(build_h0(spec), ProbeSpec((1, 0), (3, 0), 6.0), 1.5)
    assert abs(coefficients.r) < 1e-14
    assert abs(coefficients.t_prime) < 1e-14
    assert coefficients.reflectivity == pytest.approx(abs(coefficients.r_prime) ** 2)


def test_spin_flip_feeds_backward_channels():
    """Test spin mixing opens the backward channels"""

    spec = LatticeSpec(5, 5, alpha=0.25)
    coefficients = transport(build_spin_flip(spec, 0.2), ProbeSpec((1, 0), (3, 0), 6.0), 0.5)
    assert abs(coefficients.t_prime) > 1e-6


def test_loss_reduces_total():
    """Test intrinsic loss removes power from the channels"""

    spec = LatticeSpec(5, 5, alpha=0.25)
    h = apply_disorder(build_h0(spec), spec, DisorderSpec(loss_rate=0.05))
    spectrum = transport_spectrum(h, ProbeSpec((1, 0), (3, 0), 2.0), np.linspace(-3, 3, 31))
    assert all(point.total < 1 for point in spectrum)


def test_channel_matrix():
    """Test the 4x4 channel matrix is unitary and its first column is (t, r, r', t')"""

    spec = LatticeSpec(5, 4, alpha=0.25)
    h = apply_disorder(build_h0(spec), spec, sample_magnetic_disorder(spec, 0.3, 2))
    probe = ProbeSpec((1, 0), (3, 2), 2.0)
    s = channel_matrix(h, probe, 0.7)
    assert np.allclose(s.conj().T @ s, np.eye(4), atol=1e-10)
    c = transport(h, probe, 0.7)
    assert np.allclose(s[:, 0], [c.t, c.r, c.r_prime, c.t_prime], atol=1e-12)


def test_channel_matrix_reciprocity():
    """Test S(H*) = S(H)^T"""

    spec = LatticeSpec(5, 4, alpha=0.25)
    h = apply_disorder(build_h0(spec), spec, sample_magnetic_disorder(spec, 0.3, 5))
    probe = ProbeSpec((1, 0), (3, 2), 2.0)
    assert np.allclose(channel_matrix(h.conjugate(), probe, -0.4), channel_matrix(h, probe, -0.4).T, atol=1e-12)


def test_backward_feed_reciprocity():
    """Test the swapped-probe, spin-conjugated run sees the same drop and leakage"""

    spec = LatticeSpec(8, 8, alpha=0.25)
    dis = sample_onsite_disorder(spec, 0.4, 21).merged(sample_magnetic_disorder(spec, 0.1, 22))
    h = apply_disorder(build_h0(spec), spec, dis)
    probe = ProbeSpec((1, 0), (6, 0), 6.0)
    h_back, probe_back = backward_feed(h, probe)
    assert probe_back.in_site == (6, 0)
    for omega in np.linspace(-3, 3, 13):
        forward = transport(h, probe, omega)
        backward = transport(h_back, probe_back, omega)
        assert abs(abs(forward.r_prime) - abs(backward.r_prime)) <= 1e-10
        remainder = abs(forward.t) ** 2 + abs(forward.r) ** 2 + abs(forward.t_prime) ** 2
        remainder_back = abs(backward.t) ** 2 + abs(backward.r) ** 2 + abs(backward.t_prime) ** 2
        assert remainder == pytest.approx(remainder_back, abs=1e-10)


def test_transport_requires_full_hamiltonian():
    """Test probes refuse a single spin block"""

    h = build_h0(LatticeSpec(3, 3)).spin_block(Spin.UP)
    with pytest.raises(LatticeSpecException, match="single spin block"):
        transport(h, ProbeSpec((0, 0), (2, 0), 1.0), 0.0)


def test_omega_grid_increasing():
    """Test the frequency grid must be strictly increasing"""

    h = build_h0(LatticeSpec(3, 3))
    with pytest.raises(LatticeSpecException, match="strictly increasing"):
        transport_spectrum(h, ProbeSpec((0, 0), (2, 0), 1.0), [0.0, 0.0, 1.0])


def test_group_delay_needs_three_points():
    """Test group delay needs at least 3 frequencies"""

    h, probe = single_resonator()
    spectrum = transport_spectrum(h, probe, [0.0, 0.1])
    with pytest.raises(LatticeSpecException, match="at least 3"):
        group_delay(spectrum)


def test_group_delay_nan_where_drop_vanishes():
    """Test the delay is nan where |r'| vanishes"""

    spec = LatticeSpec(5, 5, alpha=0.25)
    h = build_h0(spec)
    spectrum = transport_spectrum(h, ProbeSpec((1, 0), (3, 0), 6.0), np.linspace(1.2, 2.4, 7))
    assert np.all(np.isfinite(group_delay(spectrum)))
    isolated = LatticeSpec(3, 1)
    h = HamiltonianMatrix.from_array(np.zeros((6, 6)), isolated)
    spectrum = transport_spectrum(h, ProbeSpec((0, 0), (2, 0), 1.0), np.linspace(-1, 1, 4))
    assert np.all(np.isnan(group_delay(spectrum)))


def test_transport_csv(tmp_path):
    """Test the transport CSV column contract"""

    h, probe = single_resonator()
    spectrum = transport_spectrum(h, probe, np.linspace(-1, 1, 5))
    path = spectrum.to_csv(tmp_path / "transport.csv")
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == [
        "omega", "t_re", "t_im", "r_re", "r_im", "rPrime_re", "rPrime_im",
        "tPrime_re", "tPrime_im", "R_prime", "delay",
    ]
    assert len(rows) == 6
    assert float(rows[3][0]) == 0.0
    assert float(rows[3][9]) == pytest.approx(1.0)


def test_resonance_peaks_sit_on_eigenvalues():
    """Test every R' peak of a weakly probed 4x4 lattice lies within nu of an eigenvalue"""

    spec = LatticeSpec(4, 4, alpha=0.25)
    nu = 8.0 / spec.n_sites
    h = build_h0(spec)
    energies = np.linalg.eigvalsh(h.spin_block(Spin.UP).entries)
    omegas = np.linspace(-4.5, 4.5, 3601)
    r = transport_spectrum(h, ProbeSpec((0, 0), (3, 0), nu), omegas).reflectivity
    peaks = [k for k in range(1, len(omegas) - 1) if r[k] > r[k - 1] and r[k] >= r[k + 1] and r[k] > 1e-6]
    assert peaks
    for k in peaks:
        assert np.min(np.abs(energies - omegas[k])) <= nu


def test_loss_never_raises_peak_drop():
    """Test max over omega of |r'|^2 does not grow as the intrinsic loss rate grows"""

    spec = LatticeSpec(5, 5, alpha=0.25)
    h = build_h0(spec)
    probe = ProbeSpec((1, 0), (3, 0), 2.0)
    omegas = np.linspace(-4, 4, 1601)
    peaks = []
    for loss_rate in (0.0, 0.01, 0.05, 0.2):
        lossy = apply_disorder(h, spec, DisorderSpec(loss_rate=loss_rate))
        peaks.append(np.max(transport_spectrum(lossy, probe, omegas).reflectivity))
    assert all(later <= earlier + 1e-12 for earlier, later in zip(peaks[:-1], peaks[1:]))
    assert peaks[-1] < peaks[0]


def test_backward_feed_is_transposed_scattering():
    """Test the reversed configuration scatters with the port-swapped transpose of the forward S matrix

    Reversal maps the drop r' onto itself, so |r'| agrees at every omega. The
    reversed t, r and t' are the forward S entries seen from the output port
    (S[out up, out up], S[out up, out down], S[out up, in down]), not the
    forward t, r and t'; the three only agree in total power.

    """
    spec = LatticeSpec(8, 8, alpha=0.25)
    dis = sample_onsite_disorder(spec, 0.4, 31).merged(sample_magnetic_disorder(spec, 0.1, 32))
    h = apply_disorder(build_h0(spec), spec, dis)
    probe = ProbeSpec((1, 0), (6, 0), 6.0)
    h_back, probe_back = backward_feed(h, probe)
    swap = [2, 3, 0, 1]
    for omega in np.linspace(-3, 3, 7):
        forward = channel_matrix(h, probe, omega)
        backward = channel_matrix(h_back, probe_back, omega)
        assert np.allclose(backward, forward.T[np.ix_(swap, swap)], atol=1e-10)
        f = transport(h, probe, omega)
        b = transport(h_back, probe_back, omega)
        assert abs(b.r_prime) == pytest.approx(abs(f.r_prime), abs=1e-10)
        assert abs(b.t) == pytest.approx(abs(forward[2, 2]), abs=1e-10)
        assert abs(b.r) == pytest.approx(abs(forward[2, 3]), abs=1e-10)
        assert abs(b.t_prime) == pytest.approx(abs(forward[2, 1]), abs=1e-10)
