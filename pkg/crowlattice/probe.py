"""Waveguide probes: self-energy, Green's function columns and transport coefficients

The input waveguide drives the Up (counter-clockwise) mode at the input site.
Both circulations of a probed resonator decay into the waveguide at rate nu,
so the backward channels (r, t') pick up whatever the Hamiltonian mixes into
the Down block.

"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .enums import Spin
from .exceptions import LatticeSpecException, SingularSystemException
from .lattice import HamiltonianMatrix, LatticeSpec, SiteIndex
from .utils import write_csv

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
VANISHING_AMPLITUDE = 1e-8

Site = Tuple[int, int]


@dataclass(frozen=True)
class ProbeSpec:
    """Input/output waveguide placement

    :param in_site: (x, y) of the resonator coupled to the input waveguide
    :param out_site: (x, y) of the resonator coupled to the output waveguide
    :param nu: waveguide-induced decay rate in units of kappa
    :param single_resonator: allow in_site == out_site (the one-resonator drop filter)

    """

    in_site: Site
    out_site: Site
    nu: float
    single_resonator: bool = False

    def __post_init__(self):
        object.__setattr__(self, "in_site", tuple(int(v) for v in self.in_site))
        object.__setattr__(self, "out_site", tuple(int(v) for v in self.out_site))
        if not self.nu > 0:
            raise LatticeSpecException("probe nu must be positive, got {}".format(self.nu))
        if self.in_site == self.out_site and not self.single_resonator:
            raise LatticeSpecException("inSite and outSite coincide at {}".format(self.in_site))

    def swapped(self) -> "ProbeSpec":
        return ProbeSpec(self.out_site, self.in_site, self.nu, self.single_resonator)

    def check(self, spec: LatticeSpec):
        spec.check_site(*self.in_site)
        spec.check_site(*self.out_site)


@dataclass(frozen=True)
class TransportCoefficients:
    omega: float
    t: complex
    r: complex
    r_prime: complex
    t_prime: complex

    @property
    def reflectivity(self) -> float:
        """Drop-channel reflectivity R' = |r'|^2"""
        return abs(self.r_prime) ** 2

    @property
    def total(self) -> float:
        return abs(self.t) ** 2 + abs(self.r) ** 2 + abs(self.r_prime) ** 2 + abs(self.t_prime) ** 2


@dataclass(frozen=True)
class TransportSpectrum:
    points: Tuple[TransportCoefficients, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def omega(self) -> np.ndarray:
        return np.array([p.omega for p in self.points], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return np.array([p.t for p in self.points], dtype=complex)

    @property
    def r(self) -> np.ndarray:
        return np.array([p.r for p in self.points], dtype=complex)

    @property
    def r_prime(self) -> np.ndarray:
        return np.array([p.r_prime for p in self.points], dtype=complex)

    @property
    def t_prime(self) -> np.ndarray:
        return np.array([p.t_prime for p in self.points], dtype=complex)

    @property
    def reflectivity(self) -> np.ndarray:
        return np.abs(self.r_prime) ** 2

    def group_delay(self) -> np.ndarray:
        return group_delay(self)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write one row per frequency

        Columns: omega, real/imaginary parts of t, r, rPrime, tPrime, then
        R_prime and delay (nan where undefined or with fewer than 3 points).

        """
        if len(self) >= 3:
            delay = group_delay(self)
        else:
            delay = np.full(len(self), np.nan)
        header = [
            "omega", "t_re", "t_im", "r_re", "r_im", "rPrime_re", "rPrime_im",
            "tPrime_re", "tPrime_im", "R_prime", "delay",
        ]
        rows = []
        for point, tau in zip(self.points, delay):
            rows.append([
                float(point.omega),
                float(point.t.real), float(point.t.imag),
                float(point.r.real), float(point.r.imag),
                float(point.r_prime.real), float(point.r_prime.imag),
                float(point.t_prime.real), float(point.t_prime.imag),
                float(point.reflectivity), float(tau),
            ])
        return write_csv(path, header, rows)


def _require_full(h: HamiltonianMatrix):
    if h.spin is not None:
        raise LatticeSpecException("probes attach to the full two-spin Hamiltonian, got a single spin block")


def self_energy(probe: ProbeSpec, spec: LatticeSpec) -> HamiltonianMatrix:
    """Diagonal anti-Hermitian self-energy of the two probe waveguides

    Each probe site gets -i*nu*kappa/2 on its Up and Down entries; a site probed
    twice gets -i*nu*kappa.

    """
    probe.check(spec)
    diagonal = np.zeros(spec.dim, dtype=complex)
    half_width = -0.5j * probe.nu * spec.kappa
    for site in (probe.in_site, probe.out_site):
        for spin in (Spin.UP, Spin.DOWN):
            diagonal[spec.index(site[0], site[1], spin)] += half_width
    return HamiltonianMatrix(np.diag(diagonal), False, spec)


class Resolvent:
    """LU factorization of (omega - H - Sigma) at one frequency

    Columns of the Green's function come from back-substitution, so any
    number of sources share the one factorization.

    """

    def __init__(self, h: HamiltonianMatrix, sigma: HamiltonianMatrix, omega: float):
        if h.dim != sigma.dim:
            raise LatticeSpecException("self-energy dimension {} does not match H ({})".format(sigma.dim, h.dim))
        self.omega = float(omega)
        self._matrix = self.omega * np.eye(h.dim, dtype=complex) - h.entries - sigma.entries
        try:
            self._lu = scipy.linalg.lu_factor(self._matrix, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as e:
            log.debug("factorization failed at omega=%s: %s", omega, e)
            raise SingularSystemException(self.omega, float("inf"))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        with np.errstate(all="ignore"):
            g = scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)
            residual = np.linalg.norm(self._matrix @ g - rhs)
        if not np.all(np.isfinite(g)) or not np.isfinite(residual):
            raise SingularSystemException(self.omega, float("inf"))
        scale = max(1.0, np.linalg.norm(self._matrix, np.inf) * np.linalg.norm(g, np.inf))
        if residual > RESIDUAL_TOL * scale:
            raise SingularSystemException(self.omega, float(residual))
        return g

    def column(self, source: int) -> np.ndarray:
        rhs = np.zeros(self._matrix.shape[0], dtype=complex)
        rhs[source] = 1.0
        return self.solve(rhs)

    def columns(self, sources: Sequence[int]) -> np.ndarray:
        rhs = np.zeros((self._matrix.shape[0], len(sources)), dtype=complex)
        for k, source in enumerate(sources):
            rhs[source, k] = 1.0
        return self.solve(rhs)


def greens_column(h: HamiltonianMatrix, sigma: HamiltonianMatrix, omega: float, source: SiteIndex) -> np.ndarray:
    """Solve (omega - H - Sigma) g = e_source

    :param h: system Hamiltonian, possibly lossy
    :param sigma: probe self-energy from :func:`self_energy`
    :param omega: real frequency in absolute units
    :param source: site and spin of the unit source
    :returns: complex vector g of length h.dim

    :raises SingularSystemException: the system is singular or the residual check fails

    """
    return Resolvent(h, sigma, omega).column(h.index(source.x, source.y, source.spin))


def _channels(spec: LatticeSpec, probe: ProbeSpec) -> List[int]:
    """Flat indices of (in Up, in Down, out Up, out Down)"""
    return [
        spec.index(probe.in_site[0], probe.in_site[1], Spin.UP),
        spec.index(probe.in_site[0], probe.in_site[1], Spin.DOWN),
        spec.index(probe.out_site[0], probe.out_site[1], Spin.UP),
        spec.index(probe.out_site[0], probe.out_site[1], Spin.DOWN),
    ]


def _coefficients(column: np.ndarray, channels: List[int], nu: float, omega: float) -> TransportCoefficients:
    in_up, in_down, out_up, out_down = channels
    return TransportCoefficients(
        omega=float(omega),
        t=complex(1 - 1j * nu * column[in_up]),
        r=complex(-1j * nu * column[in_down]),
        r_prime=complex(-1j * nu * column[out_up]),
        t_prime=complex(-1j * nu * column[out_down]),
    )


def transport(h: HamiltonianMatrix, probe: ProbeSpec, omega: float) -> TransportCoefficients:
    """Transport coefficients for an Up-spin drive at the input site

    With G the resolvent and in/out the probe sites:

    .. code-block:: python

        t  = 1 - 1j * nu * G[in_up, in_up]
        r  =    -1j * nu * G[in_down, in_up]
        r' =    -1j * nu * G[out_up, in_up]
        t' =    -1j * nu * G[out_down, in_up]

    `omega` is in absolute frequency units (the same as H entries); `nu`
    is scaled by kappa.

    """
    _require_full(h)
    spec = h.spec
    sigma = self_energy(probe, spec)
    channels = _channels(spec, probe)
    column = Resolvent(h, sigma, omega).column(channels[0])
    return _coefficients(column, channels, probe.nu * spec.kappa, omega)


def transport_spectrum(h: HamiltonianMatrix, probe: ProbeSpec, omega_grid: Sequence[float]) -> TransportSpectrum:
    _require_full(h)
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise LatticeSpecException("omega grid must be a non-empty 1D sequence")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise LatticeSpecException("omega grid must be strictly increasing")
    spec = h.spec
    sigma = self_energy(probe, spec)
    channels = _channels(spec, probe)
    nu = probe.nu * spec.kappa
    points = []
    for omega in grid:
        column = Resolvent(h, sigma, omega).column(channels[0])
        points.append(_coefficients(column, channels, nu, omega))
    return TransportSpectrum(tuple(points))


def group_delay(spectrum: TransportSpectrum) -> np.ndarray:
    """Group delay d arg r'(omega) / d omega in units of 1/kappa

    The phase of r' is unwrapped along the grid; interior points use central
    differences and the endpoints one-sided ones. Points where |r'| < 1e-8
    are nan.

    """
    if len(spectrum) < 3:
        raise LatticeSpecException("group delay needs at least 3 grid points, got {}".format(len(spectrum)))
    omega = spectrum.omega
    r_prime = spectrum.r_prime
    phase = np.unwrap(np.angle(r_prime))
    delay = np.gradient(phase, omega)
    delay[np.abs(r_prime) < VANISHING_AMPLITUDE] = np.nan
    return delay


def channel_matrix(h: HamiltonianMatrix, probe: ProbeSpec, omega: float) -> np.ndarray:
    """4x4 scattering matrix over the channels (in Up, in Down, out Up, out Down)

    S = I - i nu G restricted to the probe channels; column 0 holds
    (t, r, r', t'). For Hermitian H the matrix is unitary, and S(H*) = S(H)^T.

    """
    _require_full(h)
    if probe.in_site == probe.out_site:
        raise LatticeSpecException("the channel matrix needs distinct probe sites")
    spec = h.spec
    channels = _channels(spec, probe)
    block = Resolvent(h, self_energy(probe, spec), omega).columns(channels)[channels, :]
    return np.eye(4, dtype=complex) - 1j * probe.nu * spec.kappa * block


def backward_feed(h: HamiltonianMatrix, probe: ProbeSpec) -> Tuple[HamiltonianMatrix, ProbeSpec]:
    """The reversed configuration: probes swapped, Hamiltonian conjugated

    Conjugation exchanges the roles of the two circulations, so driving Up in
    the returned pair is the time-reverse of driving Down in the original.

    """
    return h.conjugate(), probe.swapped()
