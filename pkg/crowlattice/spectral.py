"""Eigen-analysis of lattice Hamiltonians

Hofstadter butterfly scans (reflectivity and raw eigenvalues), edge/bulk
classification, probability currents, edge-state dispersion and the
infinite-lattice magnetic bands used to locate gaps.

"""
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed

from .enums import Boundary, Edge, Spin, StateKind
from .exceptions import EigensolverException, IncommensurateFluxException, LatticeSizeException, LatticeSpecException
from .lattice import MAX_DIM, HamiltonianMatrix, LatticeSpec, SiteIndex, build_h0
from .probe import ProbeSpec, transport_spectrum
from .utils import circular_mean, rational_flux, write_csv

log = logging.getLogger(__name__)

BUTTERFLY_THRESHOLD = 0.005
EDGE_THRESHOLD = 0.5
ROW_WEIGHT_FLOOR = 0.05
DEGENERACY_WINDOW = 0.05
SIGNIFICANT_AMPLITUDE = 1e-3
HARPER_K_POINTS = 33
HARPER_MAX_DENOMINATOR = 64


@dataclass(frozen=True, eq=False)
class EigenSet:
    """Eigenvalues in ascending order (real part first) and column eigenvectors"""

    values: np.ndarray
    vectors: np.ndarray
    hermitian: bool = True

    def __len__(self):
        return len(self.values)

    def vector(self, k: int) -> np.ndarray:
        return self.vectors[:, k]


def eigensolve(h: HamiltonianMatrix) -> EigenSet:
    """Dense eigendecomposition

    Hermitian matrices go through ``scipy.linalg.eigh`` (real ascending values,
    orthonormal vectors); lossy ones through ``scipy.linalg.eig`` with values
    sorted by real then imaginary part and unit-norm vectors.

    :raises EigensolverException: LAPACK did not converge; carries the condition number

    """
    if h.dim > MAX_DIM:
        raise LatticeSizeException(h.dim, MAX_DIM)
    entries = np.array(h.entries)
    try:
        if h.is_hermitian:
            values, vectors = scipy.linalg.eigh(entries)
            return EigenSet(values, vectors, True)
        values, vectors = scipy.linalg.eig(entries)
    except (np.linalg.LinAlgError, ValueError) as e:
        condition = float(np.linalg.cond(entries))
        raise EigensolverException("eigensolver failed for dim {}: {}".format(h.dim, e), condition)
    order = np.lexsort((values.imag, values.real))
    vectors = vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    return EigenSet(values[order], vectors, False)


# Butterfly


@dataclass(frozen=True, eq=False)
class ButterflyMap:
    alphas: np.ndarray
    omegas: np.ndarray
    reflectivity: np.ndarray
    threshold: float = BUTTERFLY_THRESHOLD

    @property
    def support(self) -> np.ndarray:
        """Boolean mask R' > threshold, shape (len(alphas), len(omegas))"""
        return self.reflectivity > self.threshold

    def support_of(self, alpha: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.alphas - alpha)))
        return self.omegas[self.support[k]]

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = []
        for i, alpha in enumerate(self.alphas):
            for j, omega in enumerate(self.omegas):
                value = float(self.reflectivity[i, j])
                rows.append([float(alpha), float(omega), value, int(value > self.threshold)])
        return write_csv(path, ["alpha", "omega", "R_prime", "inSupport"], rows)


def _butterfly_column(spec: LatticeSpec, omegas: np.ndarray, probe: ProbeSpec) -> Optional[np.ndarray]:
    try:
        h = build_h0(spec)
    except IncommensurateFluxException as e:
        log.debug("%s", e)
        return None
    return transport_spectrum(h, probe, omegas).reflectivity


def butterfly_scan(
    template: LatticeSpec,
    alphas: Sequence[float],
    omega_grid: Sequence[float],
    probe: ProbeSpec,
    threshold: float = BUTTERFLY_THRESHOLD,
    workers: int = 1,
) -> ButterflyMap:
    """Drop-channel reflectivity R'(alpha, omega)

    Each alpha column is an independent task; columns are assembled in alpha
    order whatever the worker count. On a torus, alpha values that do not fit
    the lattice are skipped with a RuntimeWarning.

    :param template: lattice whose alpha is replaced column by column
    :param alphas: flux values
    :param omega_grid: strictly increasing frequencies (absolute units)
    :param probe: probe placement, typically with nu = 0.02
    :param threshold: support threshold on R'
    :param workers: joblib worker count

    """
    omegas = np.asarray(omega_grid, dtype=float)
    alphas = [float(a) for a in alphas]
    log.info("butterfly scan: %d alpha columns x %d frequencies", len(alphas), len(omegas))
    columns = Parallel(n_jobs=workers)(
        delayed(_butterfly_column)(template.with_alpha(alpha), omegas, probe) for alpha in alphas
    )
    kept_alphas = []
    kept_columns = []
    for alpha, column in zip(alphas, columns):
        if column is None:
            message = "skipping alpha={}: incommensurate torus flux on {}x{}".format(alpha, template.nx, template.ny)
            log.warning(message)
            warnings.warn(message, RuntimeWarning)
            continue
        kept_alphas.append(alpha)
        kept_columns.append(column)
    reflectivity = np.array(kept_columns).reshape(len(kept_columns), len(omegas))
    return ButterflyMap(np.array(kept_alphas), omegas, reflectivity, threshold)


def eigenvalue_butterfly(
    template: LatticeSpec, alphas: Sequence[float], spin: Spin = Spin.UP
) -> List[Tuple[float, np.ndarray]]:
    """Single-spin eigenvalues of H0 for each alpha, incommensurate values skipped"""
    scan = []
    for alpha in alphas:
        try:
            h = build_h0(template.with_alpha(alpha))
        except IncommensurateFluxException as e:
            log.warning("%s", e)
            continue
        scan.append((float(alpha), eigensolve(h.spin_block(spin)).values))
    return scan


# Currents


@dataclass(frozen=True)
class Bond:
    source: SiteIndex
    target: SiteIndex
    current: float


@dataclass(frozen=True)
class CurrentField:
    """Probability currents on the bonds of a Hamiltonian

    Each bond is stored once with source index < target index;
    current(target -> source) is the negative.

    """

    bonds: Tuple[Bond, ...]

    def current(self, source: SiteIndex, target: SiteIndex) -> float:
        for bond in self.bonds:
            if bond.source == source and bond.target == target:
                return bond.current
            if bond.source == target and bond.target == source:
                return -bond.current
        return 0.0

    def divergence(self) -> dict:
        """Net current leaving each site (keyed by SiteIndex)"""
        net = {}
        for bond in self.bonds:
            net[bond.source] = net.get(bond.source, 0.0) + bond.current
            net[bond.target] = net.get(bond.target, 0.0) - bond.current
        return net

    def throughput(self, site: SiteIndex) -> float:
        """Total current flowing into `site`"""
        inflow = 0.0
        for bond in self.bonds:
            if bond.target == site and bond.current > 0:
                inflow += bond.current
            elif bond.source == site and bond.current < 0:
                inflow -= bond.current
        return inflow

    def perimeter_currents(self, spec: LatticeSpec, spin: Spin = Spin.UP) -> np.ndarray:
        """Currents along the counterclockwise perimeter path, one per perimeter bond"""
        path = spec.perimeter_sites()
        loop = path + path[:1]
        return np.array([
            self.current(SiteIndex(a[0], a[1], spin), SiteIndex(b[0], b[1], spin))
            for a, b in zip(loop[:-1], loop[1:])
        ])

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = [
            [b.source.x, b.source.y, b.target.x, b.target.y, float(b.current), int(b.source.spin), int(b.target.spin)]
            for b in self.bonds
        ]
        return write_csv(path, ["x1", "y1", "x2", "y2", "current", "spin1", "spin2"], rows)


def bond_current(h: HamiltonianMatrix, psi: np.ndarray) -> CurrentField:
    """current(i -> j) = 2 Im(conj(psi_i) H_ij psi_j) on every nonzero off-diagonal entry"""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (h.dim,):
        raise LatticeSpecException("state of length {} does not match H ({})".format(psi.shape[0], h.dim))
    rows, cols = np.nonzero(np.triu(h.entries, 1))
    bonds = []
    for i, j in zip(rows, cols):
        current = 2 * np.imag(np.conj(psi[i]) * h.entries[i, j] * psi[j])
        bonds.append(Bond(h.site(int(i)), h.site(int(j)), float(current)))
    return CurrentField(tuple(bonds))


# Edge states


def _site_weights(psi: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """|psi|^2 per (y, x) site, summed over spins for full-space vectors"""
    weights = np.abs(np.asarray(psi)) ** 2
    n = spec.n_sites
    if weights.shape[0] == 2 * n:
        weights = weights[:n] + weights[n:]
    elif weights.shape[0] != n:
        raise LatticeSpecException("state of length {} does not fit a {}x{} lattice".format(weights.shape[0], spec.nx, spec.ny))
    return weights.reshape(spec.ny, spec.nx)


def perimeter_weight(psi: np.ndarray, spec: LatticeSpec) -> float:
    weights = _site_weights(psi, spec)
    total = weights.sum()
    mask = np.zeros_like(weights, dtype=bool)
    for x, y in spec.perimeter_sites():
        mask[y, x] = True
    return float(weights[mask].sum() / total) if total > 0 else 0.0


def classify_state(psi: np.ndarray, spec: LatticeSpec, threshold: float = EDGE_THRESHOLD) -> StateKind:
    """Edge when at least `threshold` of the probability sits on perimeter sites"""
    return StateKind.EDGE if perimeter_weight(psi, spec) >= threshold else StateKind.BULK


@dataclass(frozen=True)
class DispersionPoint:
    energy: float
    k_lambda: float
    edge: Edge


def _edge_row(psi: np.ndarray, spec: LatticeSpec, edge: Edge) -> np.ndarray:
    n = spec.n_sites
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] == 2 * n:
        psi = psi[:n]
    return psi.reshape(spec.ny, spec.nx)[0 if edge is Edge.LOWER else spec.ny - 1]


def row_weight(psi: np.ndarray, spec: LatticeSpec, edge: Edge) -> float:
    """Share of the Up-block probability on the lower or upper row"""
    total = float(np.sum(np.abs(np.asarray(psi)[:spec.n_sites]) ** 2))
    if total <= 0:
        return 0.0
    return float(np.sum(np.abs(_edge_row(psi, spec, edge)) ** 2)) / total


def edge_wavenumber(psi: np.ndarray, spec: LatticeSpec, edge: Edge) -> Optional[float]:
    """Circular mean of arg(psi[x+1] conj(psi[x])) along an edge row

    Only pairs where both amplitudes carry at least 1e-3 of the row maximum
    contribute. Returns None with fewer than two significant amplitudes.

    """
    row = _edge_row(psi, spec, edge)
    weights = np.abs(row) ** 2
    if weights.max() <= 0:
        return None
    significant = weights >= SIGNIFICANT_AMPLITUDE * weights.max()
    if significant.sum() < 2:
        return None
    phases = [
        np.angle(row[x + 1] * np.conj(row[x]))
        for x in range(spec.nx - 1)
        if significant[x] and significant[x + 1]
    ]
    if not phases:
        return None
    return circular_mean(phases)


def edge_dispersion(
    h: HamiltonianMatrix,
    edge: Edge,
    threshold: float = EDGE_THRESHOLD,
    eigs: Optional[EigenSet] = None,
    row_floor: float = ROW_WEIGHT_FLOOR,
) -> List[DispersionPoint]:
    """KLambda(E) of the edge states along the lower or upper row

    Works on the Up block of an open-boundary Hamiltonian. Bulk (band) states
    have no well-defined wavenumber and are left out, as are edge states with
    less than `row_floor` of their probability on the chosen row.

    """
    spec = h.spec
    if spec.boundary is not Boundary.OPEN:
        raise LatticeSpecException("edge dispersion needs an open boundary")
    block = h.spin_block(Spin.UP)
    eigs = eigs if eigs is not None else eigensolve(block)
    points = []
    for k, energy in enumerate(eigs.values):
        psi = eigs.vector(k)
        if classify_state(psi, spec, threshold) is not StateKind.EDGE:
            continue
        if row_weight(psi, spec, edge) < row_floor:
            continue
        k_lambda = edge_wavenumber(psi, spec, edge)
        if k_lambda is None:
            log.debug("state %d at E=%s has fewer than 2 significant %s-edge amplitudes", k, energy, edge.name.lower())
            continue
        points.append(DispersionPoint(float(np.real(energy)), float(k_lambda), edge))
    return points


def dispersion_to_csv(points: Sequence[DispersionPoint], path: Union[str, Path]) -> Path:
    rows = [[p.energy, p.k_lambda, p.edge.name.lower()] for p in points]
    return write_csv(path, ["energy", "KLambda", "edge"], rows)


# Magnetic bands


@dataclass(frozen=True)
class BandGroup:
    lo: float
    hi: float
    bands: int
    count: int = 0

    def contains(self, value: float, window: float = 0.0) -> bool:
        return self.lo - window <= value <= self.hi + window


def harper_matrix(alpha: float, kx: float, ky: float, kappa: float = 1.0) -> np.ndarray:
    """q x q Bloch Hamiltonian of the flux p/q lattice in the Landau gauge"""
    frac = rational_flux(alpha, HARPER_MAX_DENOMINATOR)
    p, q = frac.numerator, frac.denominator
    h = np.zeros((q, q), dtype=complex)
    for m in range(q):
        h[m, m] += -2 * kappa * math.cos(kx + 2 * math.pi * p * m / q)
        target = (m + 1) % q
        amp = -kappa * (np.exp(1j * ky * q) if m == q - 1 else 1.0)
        h[target, m] += amp
        h[m, target] += np.conj(amp)
    return h


def harper_bands(alpha: float, kappa: float = 1.0, k_points: int = HARPER_K_POINTS) -> List[Tuple[float, float]]:
    """Infinite-lattice magnetic band intervals, lowest first

    alpha is approximated by p/q with q <= 64; the q bands come from
    diagonalizing the Harper matrix on a k_points x k_points grid of the
    magnetic zone [0, 2 pi/q]^2.

    """
    q = rational_flux(alpha, HARPER_MAX_DENOMINATOR).denominator
    ks = np.linspace(0.0, 2 * math.pi / q, k_points)
    energies = np.array([
        np.linalg.eigvalsh(harper_matrix(alpha, kx, ky, kappa)) for kx in ks for ky in ks
    ])
    return [(float(energies[:, b].min()), float(energies[:, b].max())) for b in range(q)]


def band_groups(bands: Sequence[Tuple[float, float]], window: float = DEGENERACY_WINDOW) -> List[BandGroup]:
    """Merge bands that overlap or touch within `window`"""
    groups: List[BandGroup] = []
    for lo, hi in sorted(bands):
        if groups and lo <= groups[-1].hi + window:
            last = groups[-1]
            groups[-1] = BandGroup(last.lo, max(last.hi, hi), last.bands + 1)
        else:
            groups.append(BandGroup(lo, hi, 1))
    return groups


def band_occupation(
    values: Sequence[float], alpha: float, window: float = DEGENERACY_WINDOW, kappa: float = 1.0
) -> List[BandGroup]:
    """Count eigenvalues per magnetic band group

    On a torus with flux p/q each band holds nx*ny/q states, so a group of b
    merged bands holds b*nx*ny/q.

    """
    values = np.real(np.asarray(values))
    groups = band_groups(harper_bands(alpha, kappa), window)
    occupied = []
    for group in groups:
        count = int(np.sum((values >= group.lo - window) & (values <= group.hi + window)))
        occupied.append(BandGroup(group.lo, group.hi, group.bands, count))
    return occupied


def count_clusters(values: Sequence[float], window: float = DEGENERACY_WINDOW) -> List[int]:
    """Sizes of single-linkage clusters of the sorted real eigenvalues"""
    values = np.sort(np.real(np.asarray(values)))
    if values.size == 0:
        return []
    sizes = [1]
    for previous, current in zip(values[:-1], values[1:]):
        if current - previous > window:
            sizes.append(1)
        else:
            sizes[-1] += 1
    return sizes


def spectral_gap(alpha: float, reference: float, kappa: float = 1.0, window: float = DEGENERACY_WINDOW) -> Optional[Tuple[float, float]]:
    """Gap between clean bulk band groups that contains `reference`

    Returns None when `reference` falls inside a band or outside the spectrum.

    """
    groups = band_groups(harper_bands(alpha, kappa), window)
    for lower, upper in zip(groups[:-1], groups[1:]):
        if lower.hi < reference < upper.lo:
            return lower.hi, upper.lo
    return None


def bulk_gap(
    eigs: EigenSet, spec: LatticeSpec, reference: float, threshold: float = EDGE_THRESHOLD
) -> Optional[Tuple[float, float]]:
    """Gap of a finite open lattice between the bulk states nearest `reference`

    Edge states inside the gap are skipped. Returns None when no bulk state
    lies on one side of `reference`.

    """
    lo, hi = -np.inf, np.inf
    for k, energy in enumerate(np.real(eigs.values)):
        if not lo < energy < hi:
            continue
        if classify_state(eigs.vector(k), spec, threshold) is not StateKind.BULK:
            continue
        if energy <= reference:
            lo = energy
        else:
            hi = energy
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return None
    return float(lo), float(hi)


def midgap_edge_state(
    eigs: EigenSet,
    spec: LatticeSpec,
    gap: Tuple[float, float],
    threshold: float = EDGE_THRESHOLD,
    target: Optional[float] = None,
) -> Optional[int]:
    """Index of the edge state inside `gap` closest to `target`, by default the gap center"""
    center = 0.5 * (gap[0] + gap[1]) if target is None else target
    best = None
    for k, energy in enumerate(np.real(eigs.values)):
        if not gap[0] < energy < gap[1]:
            continue
        if classify_state(eigs.vector(k), spec, threshold) is not StateKind.EDGE:
            continue
        if best is None or abs(energy - center) < abs(np.real(eigs.values[best]) - center):
            best = k
    return best
