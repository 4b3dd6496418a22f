"""Hamiltonians of 2D (and 1D) coupled-resonator lattices under synthetic flux

Basis convention: the flattened index of (x, y, sigma) is
``spin.offset * nx * ny + y * nx + x`` with the Up block first, rows y outer and
columns x inner. All Hamiltonian entries are absolute frequencies (kappa is
explicit); disorder values are stored in units of kappa.

"""
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse

from .enums import Boundary, Spin
from .exceptions import (
    IncommensurateFluxException,
    LatticeSizeException,
    LatticeSpecException,
    SiteRangeException,
)
from .utils import is_rational_flux, rational_flux

log = logging.getLogger(__name__)

MAX_DIM = 4096
HERMITIAN_TOL = 1e-12
SPIN_FLIP_WARN = 0.3

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class SiteIndex:
    x: int
    y: int
    spin: Spin = Spin.UP


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry, flux and coupling of a resonator lattice

    :param nx: number of columns
    :param ny: number of rows
    :param alpha: flux quanta per plaquette, interpreted modulo 1
    :param boundary: Boundary.OPEN or Boundary.TORUS
    :param kappa: tunneling rate, the global energy unit

    """

    nx: int
    ny: int
    alpha: float = 0.0
    boundary: Boundary = Boundary.OPEN
    kappa: float = 1.0

    def __post_init__(self):
        errors = []
        if int(self.nx) != self.nx or self.nx < 1:
            errors.append("nx must be a positive integer, got {}".format(self.nx))
        if int(self.ny) != self.ny or self.ny < 1:
            errors.append("ny must be a positive integer, got {}".format(self.ny))
        if not self.kappa > 0:
            errors.append("kappa must be positive, got {}".format(self.kappa))
        if not math.isfinite(self.alpha):
            errors.append("alpha must be finite, got {}".format(self.alpha))
        if errors:
            raise LatticeSpecException("; ".join(errors))
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    @property
    def dim(self) -> int:
        return 2 * self.n_sites

    def check_site(self, x: int, y: int):
        if not (0 <= x < self.nx and 0 <= y < self.ny):
            raise SiteRangeException(x, y, self.nx, self.ny)

    def index(self, x: int, y: int, spin: Spin = Spin.UP) -> int:
        self.check_site(x, y)
        return Spin(spin).offset * self.n_sites + y * self.nx + x

    def site(self, index: int) -> SiteIndex:
        if not 0 <= index < self.dim:
            raise SiteRangeException(index, -1, self.nx, self.ny)
        spin = Spin.UP if index < self.n_sites else Spin.DOWN
        rest = index % self.n_sites
        return SiteIndex(rest % self.nx, rest // self.nx, spin)

    def is_perimeter(self, x: int, y: int) -> bool:
        return x == 0 or y == 0 or x == self.nx - 1 or y == self.ny - 1

    def perimeter_sites(self) -> List[Tuple[int, int]]:
        """Perimeter sites in counterclockwise order starting at (0, 0)"""
        if self.nx == 1 or self.ny == 1:
            return [(x, y) for y in range(self.ny) for x in range(self.nx)]
        path = [(x, 0) for x in range(self.nx)]
        path += [(self.nx - 1, y) for y in range(1, self.ny)]
        path += [(x, self.ny - 1) for x in range(self.nx - 2, -1, -1)]
        path += [(0, y) for y in range(self.ny - 2, 0, -1)]
        return path

    def with_alpha(self, alpha: float) -> "LatticeSpec":
        return LatticeSpec(self.nx, self.ny, alpha, self.boundary, self.kappa)


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Square complex matrix over the site x spin basis

    `spin` is set when the matrix holds a single spin block (dimension
    nx*ny) rather than the full Up/Down space.

    """

    entries: np.ndarray
    is_hermitian: bool
    spec: LatticeSpec
    spin: Optional[Spin] = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_array(cls, entries, spec: LatticeSpec, spin: Optional[Spin] = None) -> "HamiltonianMatrix":
        entries = np.asarray(entries, dtype=complex)
        if entries.shape[0] > MAX_DIM:
            raise LatticeSizeException(entries.shape[0], MAX_DIM)
        deviation = np.max(np.abs(entries - entries.conj().T)) if entries.size else 0.0
        return cls(entries, bool(deviation <= HERMITIAN_TOL * spec.kappa), spec, spin)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def site(self, index: int) -> SiteIndex:
        if self.spin is None:
            return self.spec.site(index)
        found = self.spec.site(index)
        return SiteIndex(found.x, found.y, self.spin)

    def index(self, x: int, y: int, spin: Spin = Spin.UP) -> int:
        if self.spin is None:
            return self.spec.index(x, y, spin)
        if Spin(spin) is not self.spin:
            raise SiteRangeException(x, y, self.spec.nx, self.spec.ny)
        return self.spec.index(x, y, Spin.UP)

    def spin_block(self, spin: Spin = Spin.UP) -> "HamiltonianMatrix":
        if self.spin is not None:
            return self
        n = self.spec.n_sites
        lo = Spin(spin).offset * n
        return HamiltonianMatrix.from_array(self.entries[lo:lo + n, lo:lo + n], self.spec, Spin(spin))

    def conjugate(self) -> "HamiltonianMatrix":
        return HamiltonianMatrix(self.entries.conj(), self.is_hermitian, self.spec, self.spin)

    def with_entries(self, entries) -> "HamiltonianMatrix":
        return HamiltonianMatrix.from_array(entries, self.spec, self.spin)


@dataclass(frozen=True)
class MagneticScatterer:
    x: int
    y: int
    strength_eps_f: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phase", float(self.phase) % (2 * math.pi))

    def to_dict(self) -> Dict:
        return {"x": self.x, "y": self.y, "strengthEpsF": self.strength_eps_f, "phase": self.phase}


@dataclass(frozen=True)
class DisorderSpec:
    """On-site detunings, magnetic scatterers and intrinsic loss

    Values are in units of kappa: `onsite` maps (x, y) to U/kappa applied to
    both spins, `loss_rate` is kappa_in/kappa.

    """

    onsite: Dict[Tuple[int, int], float] = field(default_factory=dict)
    magnetic_scatterers: Tuple[MagneticScatterer, ...] = ()
    loss_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "magnetic_scatterers", tuple(self.magnetic_scatterers))
        if self.loss_rate < 0:
            raise LatticeSpecException("lossRate must be nonnegative, got {}".format(self.loss_rate))

    @property
    def is_empty(self) -> bool:
        return not self.onsite and not self.magnetic_scatterers and self.loss_rate == 0

    def merged(self, other: "DisorderSpec") -> "DisorderSpec":
        onsite = dict(self.onsite)
        for site, value in other.onsite.items():
            onsite[site] = onsite.get(site, 0.0) + value
        return DisorderSpec(
            onsite,
            self.magnetic_scatterers + other.magnetic_scatterers,
            self.loss_rate + other.loss_rate,
        )

    def to_dict(self) -> Dict:
        return {
            "onsite": [{"x": x, "y": y, "U": u} for (x, y), u in sorted(self.onsite.items(), key=lambda i: (i[0][1], i[0][0]))],
            "magneticScatterers": [s.to_dict() for s in self.magnetic_scatterers],
            "lossRate": self.loss_rate,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DisorderSpec":
        unknown = set(data) - {"onsite", "magneticScatterers", "lossRate"}
        if unknown:
            raise LatticeSpecException("unknown DisorderSpec keys: {}".format(sorted(unknown)))
        onsite = {(int(e["x"]), int(e["y"])): float(e["U"]) for e in data.get("onsite", [])}
        scatterers = [
            MagneticScatterer(int(e["x"]), int(e["y"]), float(e["strengthEpsF"]), float(e.get("phase", 0.0)))
            for e in data.get("magneticScatterers", [])
        ]
        return cls(onsite, tuple(scatterers), float(data.get("lossRate", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DisorderSpec":
        return cls.from_dict(json.loads(text))


def _check_dim(spec: LatticeSpec):
    if spec.dim > MAX_DIM:
        raise LatticeSizeException(spec.dim, MAX_DIM)


def _check_torus_flux(spec: LatticeSpec):
    if spec.boundary is not Boundary.TORUS:
        return
    if not is_rational_flux(spec.alpha, spec.n_sites):
        raise IncommensurateFluxException(spec.alpha, spec.nx, spec.ny)
    frac = rational_flux(spec.alpha, spec.n_sites)
    if spec.n_sites % frac.denominator:
        raise IncommensurateFluxException(spec.alpha, spec.nx, spec.ny)


def _bonds(spec: LatticeSpec) -> Iterator[Tuple[str, int, int, int, int, bool]]:
    """Yield (direction, x, y, x_to, y_to, wraps) for every nearest-neighbour bond"""
    torus = spec.boundary is Boundary.TORUS
    for y in range(spec.ny):
        for x in range(spec.nx):
            if x + 1 < spec.nx:
                yield "x", x, y, x + 1, y, False
            elif torus and spec.nx > 1:
                yield "x", x, y, 0, y, True
            if y + 1 < spec.ny:
                yield "y", x, y, x, y + 1, False
            elif torus and spec.ny > 1:
                yield "y", x, y, x, 0, True


def _assemble(spec: LatticeSpec, vertical: Optional[np.ndarray] = None, onsite: Optional[np.ndarray] = None) -> np.ndarray:
    """Hopping Hamiltonian in the Landau gauge

    `vertical` is the 2x2 spin matrix multiplying -kappa on y bonds and
    `onsite` a 2x2 spin matrix added at every site.

    """
    _check_dim(spec)
    _check_torus_flux(spec)
    n = spec.n_sites
    kappa = spec.kappa
    two_pi_alpha = 2 * math.pi * spec.alpha
    vertical = np.eye(2, dtype=complex) if vertical is None else np.asarray(vertical, dtype=complex)
    spins = (Spin.UP, Spin.DOWN)
    h = np.zeros((2 * n, 2 * n), dtype=complex)

    for direction, x, y, x2, y2, wraps in _bonds(spec):
        src = y * spec.nx + x
        dst = y2 * spec.nx + x2
        for a, s_out in enumerate(spins):
            for b, s_in in enumerate(spins):
                if direction == "x":
                    if a != b:
                        continue
                    amp = -kappa * np.exp(-1j * two_pi_alpha * y * s_in)
                else:
                    amp = -kappa * vertical[a, b]
                    if amp == 0:
                        continue
                    if wraps:
                        # y-wrap gauge: closes every wrap plaquette on flux 2*pi*alpha
                        amp *= np.exp(1j * two_pi_alpha * spec.ny * x * (s_out + s_in) / 2)
                i = a * n + dst
                j = b * n + src
                h[i, j] += amp
                h[j, i] += np.conj(amp)

    if onsite is not None:
        onsite = np.asarray(onsite, dtype=complex)
        for site in range(n):
            for a in range(2):
                for b in range(2):
                    h[a * n + site, b * n + site] += onsite[a, b]
    return h


# Builders


def build_h0(spec: LatticeSpec) -> HamiltonianMatrix:
    """Magnetic tight-binding Hamiltonian with decoupled spin blocks

    The x hop (x, y) -> (x+1, y) of spin sigma carries -kappa*exp(-i 2 pi alpha y sigma),
    y hops carry -kappa.

    :raises IncommensurateFluxException: torus with alpha = p/q where q does not divide nx*ny

    """
    return HamiltonianMatrix.from_array(_assemble(spec), spec)


def build_spin_flip(spec: LatticeSpec, epsilon: float) -> HamiltonianMatrix:
    """build_h0 with every vertical bond carrying -kappa*[[1, eps], [eps, 1]]"""
    if abs(epsilon) > SPIN_FLIP_WARN:
        message = "spin-flip strength |epsilon|={} is outside the first-order regime".format(epsilon)
        log.warning(message)
        warnings.warn(message, RuntimeWarning)
    vertical = np.array([[1, epsilon], [epsilon, 1]], dtype=complex)
    return HamiltonianMatrix.from_array(_assemble(spec, vertical=vertical), spec)


def build_zeeman(spec: LatticeSpec, epsilon: float, finesse: float) -> HamiltonianMatrix:
    """build_h0 plus the in-plane field -(4 eps kappa F / pi) sigma_x at every site"""
    if not finesse >= 1:
        raise LatticeSpecException("finesse must be >= 1, got {}".format(finesse))
    if not math.isfinite(epsilon * finesse):
        raise LatticeSpecException("epsilon*finesse must be finite")
    field_strength = 4 * epsilon * spec.kappa * finesse / math.pi
    return HamiltonianMatrix.from_array(_assemble(spec, onsite=-field_strength * SIGMA_X), spec)


def build_crow_chain(n: int, kappa: float = 1.0) -> HamiltonianMatrix:
    """Open 1D chain of n resonators with both spin blocks"""
    if int(n) != n or n < 2:
        raise LatticeSpecException("a CROW chain needs n >= 2 resonators, got {}".format(n))
    return build_h0(LatticeSpec(nx=int(n), ny=1, alpha=0.0, boundary=Boundary.OPEN, kappa=kappa))


# Disorder


def apply_disorder(h: HamiltonianMatrix, spec: LatticeSpec, dis: DisorderSpec) -> HamiltonianMatrix:
    """Add on-site detunings, magnetic scatterers and loss to a full Hamiltonian

    A scatterer of strength s = eps*F and phase phi adds
    (2 s kappa / pi) [[0, exp(-i phi)], [exp(i phi), 0]] at its site; the sign of
    the perturbation is carried by s. Loss adds -i kappa_in on every diagonal entry.

    """
    if dis.is_empty:
        return h
    if h.spin is not None or h.dim != spec.dim:
        raise LatticeSpecException("disorder applies to the full two-spin Hamiltonian of the same spec")
    n = spec.n_sites
    entries = np.array(h.entries)
    for (x, y), u in dis.onsite.items():
        spec.check_site(x, y)
        site = y * spec.nx + x
        entries[site, site] += u * spec.kappa
        entries[n + site, n + site] += u * spec.kappa
    for scatterer in dis.magnetic_scatterers:
        spec.check_site(scatterer.x, scatterer.y)
        site = scatterer.y * spec.nx + scatterer.x
        strength = 2 * scatterer.strength_eps_f * spec.kappa / math.pi
        entries[site, n + site] += strength * np.exp(-1j * scatterer.phase)
        entries[n + site, site] += strength * np.exp(1j * scatterer.phase)
    if dis.loss_rate > 0:
        entries[np.diag_indices_from(entries)] += -1j * dis.loss_rate * spec.kappa
    return HamiltonianMatrix.from_array(entries, spec)


def sample_onsite_disorder(spec: LatticeSpec, width: float, seed: int) -> DisorderSpec:
    """Gaussian on-site detunings with standard deviation width*kappa

    Draws come from numpy's PCG64 (``np.random.default_rng(seed)``) filled
    row-major by (y, x).

    """
    if width < 0:
        raise LatticeSpecException("disorder width must be nonnegative, got {}".format(width))
    rng = np.random.default_rng(seed)
    values = rng.normal(0.0, width, size=(spec.ny, spec.nx))
    return DisorderSpec({(x, y): float(values[y, x]) for y in range(spec.ny) for x in range(spec.nx)})


def sample_magnetic_disorder(spec: LatticeSpec, strength_width: float, seed: int) -> DisorderSpec:
    """A magnetic scatterer at every site: Gaussian eps*F, phase uniform in [0, 2 pi)

    All strengths are drawn first, then all phases, both row-major by (y, x).

    """
    if strength_width < 0:
        raise LatticeSpecException("strength width must be nonnegative, got {}".format(strength_width))
    rng = np.random.default_rng(seed)
    strengths = rng.normal(0.0, strength_width, size=(spec.ny, spec.nx))
    phases = rng.uniform(0.0, 2 * math.pi, size=(spec.ny, spec.nx))
    scatterers = tuple(
        MagneticScatterer(x, y, float(strengths[y, x]), float(phases[y, x]))
        for y in range(spec.ny)
        for x in range(spec.nx)
    )
    return DisorderSpec(magnetic_scatterers=scatterers)


# Export


def export_matrix_market(h: HamiltonianMatrix, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(h.entries), field="complex", precision=17)
    # mmwrite appends .mtx when the suffix is missing
    return path if path.suffix == ".mtx" else path.with_name(path.name + ".mtx")


def load_matrix_market(path: Union[str, Path], spec: LatticeSpec, spin: Optional[Spin] = None) -> HamiltonianMatrix:
    matrix = scipy.io.mmread(str(path))
    dense = matrix.toarray() if scipy.sparse.issparse(matrix) else np.asarray(matrix)
    return HamiltonianMatrix.from_array(dense, spec, spin)
