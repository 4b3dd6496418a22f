"""4x4 transfer matrices of 1D resonator/waveguide chains

Field order is (a, b, c, d): (a, b) and (c, d) are the forward/backward pairs
coupled by the directional couplers, one pair per circulation. Phases are
expressed through the detuning d = Delta/2kappa; the chain resonates at
betaR = 2 pi n and betaL = (2p+1) pi/2 with p odd, so the tight-binding hop
is -kappa.

"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.linalg

from .enums import CellVariant
from .exceptions import BandEdgeDivergenceException, EvanescentRegimeException, LatticeSpecException
from .lattice import HamiltonianMatrix

log = logging.getLogger(__name__)

UNIMODULAR_TOL = 1e-8
EVANESCENT_COND = 1e12
ZEEMAN_SHIFT = 0.25


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (4, 4):
            raise LatticeSpecException("transfer matrices are 4x4, got {}".format(entries.shape))
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(self.entries @ other.entries)

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    def is_lossless(self, tol: float = 1e-10) -> bool:
        return abs(abs(self.det) - 1) <= tol

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(np.eye(4))

    @classmethod
    def product(cls, *matrices: "TransferMatrix") -> "TransferMatrix":
        """Ordered product, leftmost factor applied last"""
        result = np.eye(4, dtype=complex)
        for m in matrices:
            result = result @ m.entries
        return cls(result)


@dataclass(frozen=True)
class ChainParams:
    """Coupler and propagation phases of one chain cell

    :param r: coupler reflection in (0, 1)
    :param t: coupler transmission magnitude, r^2 + t^2 = 1
    :param beta_r: resonator half-perimeter phase
    :param beta_l: waveguide arm phase
    :param alpha_phase: arm imbalance 2 pi alpha y

    """

    r: float
    t: float
    beta_r: float
    beta_l: float
    alpha_phase: float = 0.0

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise LatticeSpecException("coupler reflection must lie in (0, 1), got {}".format(self.r))
        if abs(self.r ** 2 + self.t ** 2 - 1) > 1e-12:
            raise LatticeSpecException("coupler is not lossless: r^2 + t^2 = {}".format(self.r ** 2 + self.t ** 2))

    @property
    def finesse(self) -> float:
        return math.pi / (1 - self.r ** 2)

    @property
    def coupler_t(self) -> complex:
        """Coupler transmission with the quadrature phase that keeps r*t + r t* = 0"""
        return 1j * self.t

    @classmethod
    def at_detuning(cls, r: float, detuning: float, n: int = 1, p: int = 1, alpha_phase: float = 0.0) -> "ChainParams":
        """Cell phases at detuning d = Delta/2kappa

        With R = n lambda0 and L = (2p+1) lambda0/4, a detuning d moves the
        resonator phase by x = (1 - r^2) d / 2 and the waveguide phase by
        x (2p+1) / 4n.

        """
        if n < 1:
            raise LatticeSpecException("resonator order n must be >= 1, got {}".format(n))
        if p % 2 != 1:
            raise LatticeSpecException("waveguide order p must be odd for a -kappa hop, got {}".format(p))
        x = (1 - r ** 2) * detuning / 2
        beta_r = 2 * math.pi * n + x
        beta_l = (2 * p + 1) * math.pi / 2 + x * (2 * p + 1) / (4 * n)
        return cls(r, math.sqrt(1 - r ** 2), beta_r, beta_l, alpha_phase)

    @classmethod
    def from_finesse(cls, finesse: float, detuning: float, n: int = 1, p: int = 1, alpha_phase: float = 0.0) -> "ChainParams":
        if not finesse > math.pi:
            raise LatticeSpecException("finesse must exceed pi, got {}".format(finesse))
        return cls.at_detuning(math.sqrt(1 - math.pi / finesse), detuning, n, p, alpha_phase)


def reflection_from_finesse(finesse: float) -> float:
    return math.sqrt(1 - math.pi / finesse)


# Constituent matrices


def m_res(beta_r: float) -> TransferMatrix:
    return TransferMatrix(np.diag([
        np.exp(1j * beta_r), np.exp(-1j * beta_r), np.exp(1j * beta_r), np.exp(-1j * beta_r),
    ]))


def m_wg(beta_l: float, alpha_phase: float = 0.0) -> TransferMatrix:
    return TransferMatrix(np.diag([
        np.exp(1j * beta_l + 1j * alpha_phase),
        np.exp(-1j * beta_l + 1j * alpha_phase),
        np.exp(1j * beta_l - 1j * alpha_phase),
        np.exp(-1j * beta_l - 1j * alpha_phase),
    ]))


def _coupler_block(r: complex, t: complex) -> np.ndarray:
    return np.array([[(t ** 2 - r ** 2) / t, r / t], [-r / t, 1 / t]], dtype=complex)


def m_cpl(r: complex, t: complex) -> TransferMatrix:
    """Coupler between (a, b) and (c, d) pairs; m_cpl(0, 1) is the identity"""
    block = _coupler_block(r, t)
    m = np.zeros((4, 4), dtype=complex)
    m[:2, :2] = block
    m[2:, 2:] = block
    return TransferMatrix(m)


def m_scatt(epsilon: float) -> TransferMatrix:
    """Weak lossless scatterer coupling (a, d) and (b, c)

    t_s = 1 - eps^2/2 and r_s = i sqrt(1 - t_s^2).

    """
    ts = 1 - epsilon ** 2 / 2
    rs = 1j * math.sqrt(max(0.0, 1 - ts ** 2))
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = (ts ** 2 - rs ** 2) / ts
    m[0, 3] = rs / ts
    m[1, 1] = 1 / ts
    m[1, 2] = -rs / ts
    m[2, 1] = rs / ts
    m[2, 2] = (ts ** 2 - rs ** 2) / ts
    m[3, 0] = -rs / ts
    m[3, 3] = 1 / ts
    return TransferMatrix(m)


def unit_cell(params: ChainParams, variant: CellVariant = CellVariant.PLAIN, epsilon: float = 0.0) -> TransferMatrix:
    """Transfer matrix of one chain cell

    Every variant carries both couplers, so epsilon = 0 reproduces the plain
    cell; scatterers sit mid-waveguide or mid-resonator.

    """
    variant = CellVariant(variant)
    cpl = m_cpl(params.r, params.coupler_t)
    if variant is CellVariant.PLAIN:
        return TransferMatrix.product(cpl, m_wg(params.beta_l, params.alpha_phase), cpl, m_res(params.beta_r))
    half_wg = m_wg(params.beta_l / 2, params.alpha_phase / 2)
    half_res = m_res(params.beta_r / 2)
    if variant is CellVariant.WAVEGUIDE_SCATTERER:
        return TransferMatrix.product(cpl, half_wg, m_scatt(epsilon), half_wg, cpl, half_res, half_res)
    return TransferMatrix.product(cpl, half_wg, half_wg, cpl, half_res, m_scatt(epsilon), half_res)


# Dispersion


@dataclass(frozen=True)
class BlochPhase:
    eigenvalue: complex
    k_lambda: complex
    propagating: bool


def bloch_dispersion(m: TransferMatrix) -> List[BlochPhase]:
    """Bloch phases KLambda = -i log(lambda) of the four eigenvalues

    Sorted by the real part of KLambda; propagating when |lambda| = 1 within 1e-8.

    """
    values = np.linalg.eigvals(m.entries)
    phases = [
        BlochPhase(complex(v), complex(-1j * np.log(v)), bool(abs(abs(v) - 1) <= UNIMODULAR_TOL))
        for v in values
    ]
    return sorted(phases, key=lambda b: (b.k_lambda.real, b.k_lambda.imag))


def bloch_cosines(m: TransferMatrix) -> np.ndarray:
    """cos(KLambda) = (lambda + 1/lambda)/2 per eigenvalue, real parts sorted"""
    values = np.linalg.eigvals(m.entries)
    return np.sort(np.real((values + 1 / values) / 2))


def branch_cosines(m: TransferMatrix) -> np.ndarray:
    """One cos(KLambda) per eigenvalue pair (lambda, 1/lambda), ascending"""
    cosines = bloch_cosines(m)
    return np.array([cosines[0:2].mean(), cosines[2:4].mean()])


def spin_flip_eigenvalues(detuning: float, epsilon: float) -> Dict[str, object]:
    """Closed-form eigenvalues of the waveguide-scatterer cell

    Zeroth order in 1/F, all orders in epsilon. Keys: "forward" and
    "backward" hold (lambda_plus, lambda_minus) of the two Hadamard branches;
    "first_order" holds the cos(KLambda) = -(1 -/+ eps) d pair.

    """
    if abs(detuning) > 1 / (1 + abs(epsilon)):
        raise LatticeSpecException("|d| = {} lies outside the spin-flip band 1/(1+|eps|)".format(abs(detuning)))
    root = epsilon * math.sqrt(4 - epsilon ** 2)
    denominator = 2 - epsilon ** 2

    def pair(sign):
        real = (2 - sign * root) * detuning
        radicand = denominator ** 2 + (sign * 4 * root - 4 - 4 * epsilon ** 2 + epsilon ** 4) * detuning ** 2
        imag = np.sqrt(complex(radicand))
        return (-(real + 1j * imag) / denominator, -(real - 1j * imag) / denominator)

    return {
        "forward": pair(1),
        "backward": pair(-1),
        "first_order": (-(1 - epsilon) * detuning, -(1 + epsilon) * detuning),
    }


def lattice_branches(variant: CellVariant, detuning: float, epsilon: float, finesse: float) -> np.ndarray:
    """cos(KLambda) of the tight-binding branches at detuning d, ascending

    Plain: -d; spin-flip hop kappa(1 +/- eps): -d/(1 +/- eps); in-plane field
    4 eps kappa F/pi: -d -/+ 2 eps F/pi.

    """
    variant = CellVariant(variant)
    if variant is CellVariant.PLAIN:
        values = [-detuning, -detuning]
    elif variant is CellVariant.WAVEGUIDE_SCATTERER:
        values = [-detuning / (1 + epsilon), -detuning / (1 - epsilon)]
    else:
        shift = 2 * epsilon * finesse / math.pi
        values = [-detuning - shift, -detuning + shift]
    return np.sort(values)


def bloch_hamiltonian(h: HamiltonianMatrix, k_lambda: float) -> np.ndarray:
    """2x2 spin Bloch matrix sum_m H[(s,0),(s',m)] exp(i K m) of a translation-invariant ring

    `h` must be a full two-spin Hamiltonian of a ring along one axis.

    """
    n = h.spec.n_sites
    phases = np.exp(1j * k_lambda * np.arange(n))
    block = np.zeros((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            block[a, b] = np.sum(h.entries[a * n, b * n:(b + 1) * n] * phases)
    return block


def hamiltonian_cross_check(
    h: HamiltonianMatrix,
    variant: CellVariant,
    epsilon: float,
    finesse: float,
    k_points: Sequence[float],
    n: int = 1,
    p: int = 1,
) -> float:
    """Largest |cos K - cos K_tm| between a ring Hamiltonian and the transfer-matrix cell

    For each K, the ring's Bloch energies E give d = E/2kappa; the transfer
    matrix at that d must have a branch with cos(KLambda) = cos K.

    """
    kappa = h.spec.kappa
    worst = 0.0
    for k in k_points:
        for energy in np.linalg.eigvalsh(bloch_hamiltonian(h, k)):
            detuning = energy / (2 * kappa)
            params = ChainParams.from_finesse(finesse, detuning, n, p)
            cosines = branch_cosines(unit_cell(params, variant, epsilon))
            worst = max(worst, float(np.min(np.abs(cosines - math.cos(k)))))
    return worst


def zeeman_epsilon(finesse: float, shift: float = ZEEMAN_SHIFT) -> float:
    """Resonator-scatterer strength whose branch shift 2 eps F/pi equals `shift`"""
    return shift * math.pi / (2 * finesse)


# Backscattering


def s_matrix(m: TransferMatrix, incoming: Tuple[int, int] = (0, 2)) -> np.ndarray:
    """Scattering matrix from a transfer matrix

    Modes in `incoming` enter from the left (forward modes), the others from
    the right. Rows and columns are ordered incoming-first, so for the mode
    basis (fwd up, bwd up, fwd down, bwd down) the order is
    (fwd up, fwd down, bwd up, bwd down).

    :raises EvanescentRegimeException: the backward block D is singular

    """
    forward = list(incoming)
    backward = [k for k in range(4) if k not in forward]
    order = forward + backward
    entries = m.entries[np.ix_(order, order)]
    a, b = entries[:2, :2], entries[:2, 2:]
    c, d = entries[2:, :2], entries[2:, 2:]
    if np.linalg.cond(d) > EVANESCENT_COND:
        raise EvanescentRegimeException("backward block of the transfer matrix is singular (cond={:.3g})".format(np.linalg.cond(d)))
    d_inv = scipy.linalg.inv(d)
    return np.block([[a - b @ d_inv @ c, b @ d_inv], [-d_inv @ c, d_inv]])


def _check_k(k_lambda: float):
    if abs(math.sin(k_lambda)) < 1e-12:
        raise BandEdgeDivergenceException(k_lambda)
    if not 0 < k_lambda < math.pi:
        raise LatticeSpecException("KLambda must lie in (0, pi), got {}".format(k_lambda))


def backscatter_eps_prime(epsilon: float, finesse: float) -> float:
    """Lattice-model strength eps' of a scatterer inside one resonator

    With r_s = i sqrt(1 - t_s^2) ~ i eps the scatterer couples the two
    circulations like the in-plane field 4 eps kappa F / pi, so eps' = -4 eps F / pi.

    """
    return -4 * epsilon * finesse / math.pi


def mode_basis(k_lambda: float, finesse: float, n: int = 1, p: int = 1) -> Tuple[ChainParams, np.ndarray]:
    """Plain-cell phases at cos(KLambda) = -d and the Bloch modes of that cell

    Columns of the basis are (fwd up, bwd up, fwd down, bwd down). Each mode
    is scaled to unit power flux |a|^2 - |b|^2 and phased so its first
    component is real; forward modes carry positive flux.

    :raises BandEdgeDivergenceException: KLambda at 0 or pi
    :raises EvanescentRegimeException: the cell has no propagating pair at this detuning

    """
    _check_k(k_lambda)
    params = ChainParams.from_finesse(finesse, -math.cos(k_lambda), n, p)
    _, vectors = np.linalg.eig(unit_cell(params).entries[:2, :2])
    modes = []
    for v in vectors.T:
        flux = abs(v[0]) ** 2 - abs(v[1]) ** 2
        if abs(flux) < 1e-12:
            raise BandEdgeDivergenceException(k_lambda)
        v = v / math.sqrt(abs(flux))
        modes.append((flux, v * np.exp(-1j * np.angle(v[0]))))
    modes.sort(key=lambda mode: -mode[0])
    if not modes[0][0] > 0 > modes[1][0]:
        raise EvanescentRegimeException("no forward/backward mode pair at KLambda={}".format(k_lambda))
    basis = np.zeros((4, 4), dtype=complex)
    basis[:2, :2] = np.column_stack([mode[1] for mode in modes])
    basis[2:, 2:] = basis[:2, :2]
    return params, basis


def _to_modes(m: np.ndarray, basis: np.ndarray) -> TransferMatrix:
    return TransferMatrix(scipy.linalg.solve(basis, m @ basis))


def mode_cell(k_lambda: float, finesse: float, n: int = 1, p: int = 1) -> TransferMatrix:
    """Plain cell in its own mode basis, diag(lambda_f, lambda_b, lambda_f, lambda_b)"""
    params, basis = mode_basis(k_lambda, finesse, n, p)
    return _to_modes(unit_cell(params).entries, basis)


def mode_scatterer(k_lambda: float, epsilon: float, finesse: float, n: int = 1, p: int = 1) -> TransferMatrix:
    """Resonator scatterer relative to a free cell, in the plain-cell mode basis

    Built from the physical chain: M_rs M0^-1 with M_rs the resonator-scatterer
    cell and M0 the plain cell at the same detuning.

    """
    params, basis = mode_basis(k_lambda, finesse, n, p)
    plain = unit_cell(params).entries
    scattering = unit_cell(params, CellVariant.RESONATOR_SCATTERER, epsilon).entries
    return _to_modes(scattering @ scipy.linalg.inv(plain), basis)


def disorder_cell(k_lambda: float, epsilon: float, finesse: float, n: int = 1, p: int = 1) -> TransferMatrix:
    """Two free cells around a scatterer: M0 . Mscatt . M0"""
    m0 = mode_cell(k_lambda, finesse, n, p)
    return TransferMatrix.product(m0, mode_scatterer(k_lambda, epsilon, finesse, n, p), m0)


@dataclass(frozen=True)
class ScatteringAmplitudes:
    t_up: complex
    r_up: complex
    t_down: complex
    r_down: complex

    def magnitudes(self) -> np.ndarray:
        return np.abs([self.t_up, self.r_up, self.t_down, self.r_down])

    @property
    def total(self) -> float:
        return float(np.sum(self.magnitudes() ** 2))


def backscatter_amplitudes(k_lambda: float, epsilon: float, finesse: float, n: int = 1, p: int = 1) -> ScatteringAmplitudes:
    """Amplitudes of a forward Up wave hitting one disordered resonator of the physical chain

    The two-cell forward propagation phase is divided out; phases of the
    backward amplitudes still depend on the mode normalization, magnitudes do not.

    """
    cell = disorder_cell(k_lambda, epsilon, finesse, n, p)
    forward = mode_cell(k_lambda, finesse, n, p).entries[0, 0]
    s = s_matrix(cell) / forward ** 2
    return ScatteringAmplitudes(
        t_up=complex(s[0, 0]), t_down=complex(s[1, 0]), r_up=complex(s[2, 0]), r_down=complex(s[3, 0]),
    )


def model_scattering_solution(
    k_lambda: float, eps_prime: float, exact: bool = False, coupling: float = 1.0
) -> ScatteringAmplitudes:
    """Forward Up wave scattered by an on-site -eps' J sigma_x term in a -J chain

    First order: t_up = 1, r_up = 0, t_down = r_down = (i/2) eps'/sin(KLambda).
    With exact=True the six matching equations at sites 0 and +-1 are solved
    numerically.

    :raises BandEdgeDivergenceException: KLambda at 0 or pi

    """
    sin_k = math.sin(k_lambda)
    if abs(sin_k) < 1e-12:
        raise BandEdgeDivergenceException(k_lambda)
    if not exact:
        amplitude = 0.5j * eps_prime / sin_k
        return ScatteringAmplitudes(1.0 + 0j, 0j, amplitude, amplitude)

    j = coupling
    z = np.exp(1j * k_lambda)
    energy = -2 * j * math.cos(k_lambda)
    bulk = energy * z + j * z ** 2
    # unknowns: psi_up(0), psi_down(0), t_up, t_down, r_up, r_down
    a = np.array([
        [energy, eps_prime * j, j * z, 0, j * z, 0],
        [eps_prime * j, energy, 0, j * z, 0, j * z],
        [j, 0, bulk, 0, 0, 0],
        [0, j, 0, bulk, 0, 0],
        [j, 0, 0, 0, bulk, 0],
        [0, j, 0, 0, 0, bulk],
    ], dtype=complex)
    rhs = np.array([-j / z, 0, 0, 0, -energy / z - j / z ** 2, 0], dtype=complex)
    solution = scipy.linalg.solve(a, rhs)
    return ScatteringAmplitudes(
        t_up=complex(solution[2]), r_up=complex(solution[4]),
        t_down=complex(solution[3]), r_down=complex(solution[5]),
    )


# Loss


def intrinsic_loss_rate(mu: float, finesse: float, kappa: float = 1.0) -> float:
    """kappa_in = mu (F / 2 pi) (4 kappa)"""
    if mu < 0:
        raise LatticeSpecException("roundtrip loss must be nonnegative, got {}".format(mu))
    return mu * (finesse / (2 * math.pi)) * 4 * kappa


def roundtrip_loss(kappa_in: float, finesse: float, kappa: float = 1.0) -> float:
    """Inverse of :func:`intrinsic_loss_rate`"""
    return kappa_in * 2 * math.pi / (4 * kappa * finesse)


def lossy_dispersion(
    k_lambda: float, mu: float, finesse: float, kappa: float = 1.0, alpha_phase: float = 0.0
) -> complex:
    """omega(K) - omega0 = -2 kappa cos(KLambda + alpha_phase) - i kappa_in"""
    return complex(-2 * kappa * math.cos(k_lambda + alpha_phase) - 1j * intrinsic_loss_rate(mu, finesse, kappa))


def loss_attenuation(nx: int, loss_rate: float) -> float:
    """Edge-state attenuation around a perimeter of nx columns, exp(-4 nx kappa_in/kappa)"""
    return math.exp(-4 * nx * loss_rate)


def dispersion_rows(
    variant: CellVariant,
    detunings: Sequence[float],
    finesse: float,
    epsilon: float = 0.0,
    n: int = 1,
    p: int = 1,
    alpha_phase: float = 0.0,
) -> List[List[float]]:
    """Rows (detuning, re/im KLambda x4, propagating count) for CSV export"""
    rows = []
    for detuning in detunings:
        params = ChainParams.from_finesse(finesse, detuning, n, p, alpha_phase)
        phases = bloch_dispersion(unit_cell(params, variant, epsilon))
        row: List[float] = [float(detuning)]
        for phase in phases:
            row += [phase.k_lambda.real, phase.k_lambda.imag]
        row.append(sum(phase.propagating for phase in phases))
        rows.append(row)
    return rows


DISPERSION_HEADER = [
    "detuning",
    "K1_re", "K1_im", "K2_re", "K2_im", "K3_re", "K3_im", "K4_re", "K4_im",
    "propagating",
]


def s_matrix_rows(k_lambdas: Sequence[float], epsilon: float, finesse: float) -> List[List[float]]:
    rows = []
    for k in k_lambdas:
        amp = backscatter_amplitudes(k, epsilon, finesse)
        rows.append([
            float(k),
            amp.t_up.real, amp.t_up.imag, amp.r_up.real, amp.r_up.imag,
            amp.t_down.real, amp.t_down.imag, amp.r_down.real, amp.r_down.imag,
        ])
    return rows


S_MATRIX_HEADER = [
    "KLambda", "tUp_re", "tUp_im", "rUp_re", "rUp_im", "tDown_re", "tDown_im", "rDown_re", "rDown_im",
]


def backscatter_tolerance(epsilon: float) -> float:
    """Relative tolerance max(10%, 5 eps) between the physical chain and the lattice model"""
    return max(0.1, 5 * abs(epsilon))

