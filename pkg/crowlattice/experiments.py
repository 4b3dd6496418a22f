"""Experiment runners

Every run is a pure function of its :class:`~crowlattice.config.ExperimentConfig`.
Disorder realizations are independent work units dispatched to a joblib pool;
realization k draws its disorder from ``split_seed(seed, k, family)`` and results
are reduced in index order, so outputs do not depend on the worker count.

.. code-block:: python

    from crowlattice.config import load_config
    from crowlattice.experiments import ExperimentRunner

    runner = ExperimentRunner(load_config("ensemble.json"), workers=4)
    stats = runner.run_transport_ensemble()
    edge = stats["lattice"].band_average(runner.edge_band_mask())

"""
import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .config import ExperimentConfig, default_probe_sites
from .enums import Boundary, CellVariant, Edge, Family, Spin, StateKind
from .exceptions import CrowLatticeException, LatticeSpecException, RealizationFailedException
from .lattice import (
    DisorderSpec,
    HamiltonianMatrix,
    LatticeSpec,
    SiteIndex,
    apply_disorder,
    build_h0,
    build_spin_flip,
    build_zeeman,
    sample_magnetic_disorder,
    sample_onsite_disorder,
)
from .probe import ProbeSpec, TransportSpectrum, group_delay, transport_spectrum
from .spectral import (
    BandGroup,
    ButterflyMap,
    CurrentField,
    DispersionPoint,
    EigenSet,
    band_groups,
    band_occupation,
    bond_current,
    bulk_gap,
    butterfly_scan,
    classify_state,
    count_clusters,
    dispersion_to_csv,
    edge_dispersion,
    eigensolve,
    harper_bands,
    midgap_edge_state,
    perimeter_weight,
    spectral_gap,
)
from .tmatrix import (
    DISPERSION_HEADER,
    S_MATRIX_HEADER,
    ChainParams,
    backscatter_amplitudes,
    backscatter_eps_prime,
    backscatter_tolerance,
    branch_cosines,
    dispersion_rows,
    hamiltonian_cross_check,
    lattice_branches,
    loss_attenuation,
    model_scattering_solution,
    s_matrix_rows,
    spin_flip_eigenvalues,
    unit_cell,
    zeeman_epsilon,
)
from .utils import split_seed, worker_count, write_csv

log = logging.getLogger(__name__)

LOSS_RATE = 0.02
BACKSCATTER_K = (math.pi / 3, math.pi / 2, 2 * math.pi / 3)
BACKSCATTER_FIRST_ORDER_EPS = 0.001
BACKSCATTER_EXACT_EPS = 0.01
GAP_POINTS = 61
RING_SITES = 24


# Results


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Pointwise ensemble statistics over the frequency grid

    Reflectivities are |r'|^2 (drop channel); mean_t, mean_r and mean_t_prime
    are the mean |t|^2, |r|^2 and |t'|^2 that magnetic disorder leaks into.
    Delays are in units of 1/kappa and nan where r' vanishes.

    """

    family: Family
    omega: np.ndarray
    mean_r_prime: np.ndarray
    std_r_prime: np.ndarray
    mean_delay: np.ndarray
    std_delay: np.ndarray
    mean_t: np.ndarray
    mean_r: np.ndarray
    mean_t_prime: np.ndarray
    seeds: Tuple[int, ...] = ()

    @property
    def n_realizations(self) -> int:
        return len(self.seeds)

    def band_average(self, mask: np.ndarray) -> Dict[str, float]:
        """Mean and std of R' averaged over the grid points selected by `mask`"""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise LatticeSpecException("band mask selects no frequencies")
        return {
            "meanRPrime": float(np.mean(self.mean_r_prime[mask])),
            "stdRPrime": float(np.mean(self.std_r_prime[mask])),
        }

    def to_csv(self, path: Union[str, Path]) -> Path:
        header = ["omega", "meanRPrime", "stdRPrime", "meanDelay", "stdDelay", "meanT", "meanR", "meanTPrime"]
        rows = zip(
            self.omega, self.mean_r_prime, self.std_r_prime, self.mean_delay, self.std_delay,
            self.mean_t, self.mean_r, self.mean_t_prime,
        )
        return write_csv(path, header, ([float(v) for v in row] for row in rows))

    def seeds_to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(path, ["realization", "childSeed"], enumerate(self.seeds))


@dataclass(frozen=True)
class SweepRow:
    family: Family
    size: int
    bandwidth_delay_proxy: int
    mean_t: float
    std_t: float


SWEEP_HEADER = ["family", "size", "bandwidthDelayProxy", "meanT", "stdT"]


def sweep_to_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> Path:
    return write_csv(
        path, SWEEP_HEADER,
        ([r.family.value, r.size, r.bandwidth_delay_proxy, r.mean_t, r.std_t] for r in rows),
    )


@dataclass(frozen=True)
class LossRow:
    size: int
    peak_lossless: float
    peak_lossy: float
    estimate: float

    @property
    def ratio(self) -> float:
        return self.peak_lossy / self.peak_lossless if self.peak_lossless > 0 else float("nan")


def loss_to_csv(rows: Sequence[LossRow], path: Union[str, Path]) -> Path:
    return write_csv(
        path, ["nx", "peakLossless", "peakLossy", "ratio", "estimate"],
        ([r.size, r.peak_lossless, r.peak_lossy, r.ratio, r.estimate] for r in rows),
    )


@dataclass(frozen=True, eq=False)
class EdgeStateReport:
    """Edge-state analysis of an open lattice

    `state` / `defect_state` index the Up-block eigenstates of the clean and
    defected lattice (None when no mid-gap edge state exists); the matching
    current fields are empty in that case.

    """

    spec: LatticeSpec
    energies: np.ndarray
    weights: np.ndarray
    kinds: Tuple[StateKind, ...]
    gap: Optional[Tuple[float, float]]
    state: Optional[int]
    currents: CurrentField
    defect_site: Tuple[int, int]
    defect_state: Optional[int]
    defect_currents: CurrentField
    dispersion: Tuple[DispersionPoint, ...]

    @property
    def edge_count(self) -> int:
        return sum(kind is StateKind.EDGE for kind in self.kinds)

    def defect_throughput(self) -> float:
        """Current into the defect site relative to the mean perimeter bond current"""
        perimeter = np.abs(self.defect_currents.perimeter_currents(self.spec))
        if not perimeter.size or perimeter.mean() == 0:
            return float("nan")
        site = SiteIndex(self.defect_site[0], self.defect_site[1], Spin.UP)
        return self.defect_currents.throughput(site) / float(perimeter.mean())

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        classification = write_csv(
            out_dir / "classification.csv", ["index", "energy", "perimeterWeight", "kind"],
            (
                [k, float(e), float(w), kind.value]
                for k, (e, w, kind) in enumerate(zip(self.energies, self.weights, self.kinds))
            ),
        )
        return {
            "currents": self.currents.to_csv(out_dir / "currents.csv"),
            "defectCurrents": self.defect_currents.to_csv(out_dir / "currents-defect.csv"),
            "dispersion": dispersion_to_csv(self.dispersion, out_dir / "dispersion.csv"),
            "classification": classification,
        }


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    hamiltonian: HamiltonianMatrix
    values: np.ndarray
    clusters: List[int]
    occupation: Optional[List[BandGroup]]

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        files = {
            "eigenvalues": write_csv(
                out_dir / "eigenvalues.csv", ["index", "energy"], ([k, float(v)] for k, v in enumerate(self.values))
            ),
        }
        if self.occupation is not None:
            files["bands"] = write_csv(
                out_dir / "bands.csv", ["lo", "hi", "bands", "count"],
                ([g.lo, g.hi, g.bands, g.count] for g in self.occupation),
            )
        return files


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass(frozen=True, eq=False)
class TMatrixReport:
    checks: Tuple[CheckResult, ...]
    dispersion: Dict[CellVariant, List[List[float]]]
    s_matrix: List[List[float]]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        files = {
            "checks": write_csv(
                out_dir / "checks.csv", ["check", "value", "tolerance", "result"],
                ([c.name, c.value, c.tolerance, "pass" if c.passed else "fail"] for c in self.checks),
            ),
            "sMatrix": write_csv(out_dir / "s-matrix.csv", S_MATRIX_HEADER, self.s_matrix),
        }
        for variant, rows in self.dispersion.items():
            files["dispersion-" + variant.value] = write_csv(
                out_dir / "dispersion-{}.csv".format(variant.value), DISPERSION_HEADER, rows
            )
        return files


# Workers


@dataclass(frozen=True, eq=False)
class _Realization:
    index: int
    child_seed: int
    r_prime: Optional[np.ndarray] = None
    delay: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    t_prime: Optional[np.ndarray] = None
    error: Optional[str] = None


def realization_disorder(
    spec: LatticeSpec, disorder_width: float, magnetic_width: float, loss_rate: float, child_seed: int
) -> DisorderSpec:
    """Disorder of one realization: on-site draws from child_seed, scatterers from a seed split off it"""
    dis = sample_onsite_disorder(spec, disorder_width, child_seed)
    if magnetic_width > 0:
        dis = dis.merged(sample_magnetic_disorder(spec, magnetic_width, split_seed(child_seed, 0, "magnetic")))
    if loss_rate > 0:
        dis = dis.merged(DisorderSpec(loss_rate=loss_rate))
    return dis


def _realization(
    spec: LatticeSpec,
    probe: ProbeSpec,
    omegas: np.ndarray,
    disorder_width: float,
    magnetic_width: float,
    loss_rate: float,
    index: int,
    child_seed: int,
) -> _Realization:
    try:
        dis = realization_disorder(spec, disorder_width, magnetic_width, loss_rate, child_seed)
        h = apply_disorder(build_h0(spec), spec, dis)
        spectrum = transport_spectrum(h, probe, omegas)
        delay = group_delay(spectrum) if len(spectrum) >= 3 else np.full(len(spectrum), np.nan)
    except CrowLatticeException as e:
        return _Realization(index, child_seed, error=str(e))
    return _Realization(
        index, child_seed,
        r_prime=spectrum.reflectivity,
        delay=delay,
        t=np.abs(spectrum.t) ** 2,
        r=np.abs(spectrum.r) ** 2,
        t_prime=np.abs(spectrum.t_prime) ** 2,
    )


def _peak_reflectivity(h: HamiltonianMatrix, probe: ProbeSpec, omegas: np.ndarray) -> float:
    return float(np.max(transport_spectrum(h, probe, omegas).reflectivity))


@lru_cache(maxsize=8)
def _clean_bulk_gap(spec: LatticeSpec, reference: float, threshold: float) -> Optional[Tuple[float, float]]:
    eigs = eigensolve(build_h0(spec).spin_block(Spin.UP))
    return bulk_gap(eigs, spec, reference, threshold)


def _relative_magnitude(value: complex, reference: complex) -> float:
    return abs(abs(value) - abs(reference)) / max(abs(reference), 1e-12)


# Runners


class BaseRunner:

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None):
        """Experiment runner constructor

        :param config: resolved experiment config
        :param workers: optional - joblib worker count, defaults to the
            CROWLATTICE_WORKERS environment variable or 1

        """
        self.config = config
        self.workers = workers if workers is not None else worker_count()
        if self.workers < 1:
            raise LatticeSpecException("worker count must be >= 1, got {}".format(self.workers))

    @property
    def kappa(self) -> float:
        return self.config.lattice.kappa

    def _map(self, func: Callable, tasks: Iterable[Tuple]) -> List:
        return Parallel(n_jobs=self.workers)(delayed(func)(*task) for task in tasks)

    def _crow(self, length: Optional[int] = None) -> Tuple[LatticeSpec, ProbeSpec]:
        """Open 1D chain probed at its two end resonators"""
        n = length if length is not None else self.config.crow.length
        if n < 2:
            raise LatticeSpecException("a CROW chain needs n >= 2 resonators, got {}".format(n))
        spec = LatticeSpec(nx=n, ny=1, alpha=0.0, boundary=Boundary.OPEN, kappa=self.kappa)
        return spec, ProbeSpec((0, 0), (n - 1, 0), self.config.crow.nu)

    def _square(self, size: int, boundary: Boundary = Boundary.OPEN) -> Tuple[LatticeSpec, ProbeSpec]:
        """size x size lattice at the configured flux with the default probe placement"""
        lat = self.config.lattice
        spec = LatticeSpec(nx=size, ny=size, alpha=lat.alpha, boundary=boundary, kappa=lat.kappa)
        in_site, out_site = default_probe_sites(size)
        return spec, ProbeSpec(in_site, out_site, self.config.probe.nu)

    def _ensemble(
        self, spec: LatticeSpec, probe: ProbeSpec, omegas: np.ndarray, salt: str
    ) -> List[_Realization]:
        cfg = self.config
        seeds = [split_seed(cfg.seed, k, salt) for k in range(cfg.n_realizations)]
        log.info(
            "%s: %d realizations on %dx%d, width %s, %d workers",
            salt, cfg.n_realizations, spec.nx, spec.ny, cfg.disorder_width, self.workers,
        )
        results = self._map(_realization, (
            (spec, probe, omegas, cfg.disorder_width, cfg.magnetic_width, cfg.loss_rate, k, seed)
            for k, seed in enumerate(seeds)
        ))
        for result in results:
            if result.error is not None:
                raise RealizationFailedException(result.index, result.child_seed, result.error)
            log.debug("%s realization %d (seed %d) done", salt, result.index, result.child_seed)
        return results

    # Frequency windows

    def harper_gap(self) -> Optional[Tuple[float, float]]:
        """Gap of the infinite lattice around the reference frequency, absolute units"""
        cfg = self.config
        return spectral_gap(
            cfg.lattice.alpha, cfg.edge_states.reference_omega * self.kappa, self.kappa, cfg.degeneracy_window
        )

    def edge_band(self) -> Optional[Tuple[float, float]]:
        """Window of edge-state-only frequencies used for band averages, absolute units

        On an open lattice this is the gap between the clean lattice's own bulk
        states around the reference frequency, narrowed by the disorder width on
        each side so disordered bulk states stay out of it. A torus falls back
        to :meth:`harper_gap`.

        """
        cfg = self.config
        if cfg.lattice.boundary is not Boundary.OPEN:
            return self.harper_gap()
        gap = _clean_bulk_gap(cfg.lattice, cfg.edge_states.reference_omega * self.kappa, cfg.edge_states.edge_threshold)
        if gap is None:
            return None
        shrink = cfg.disorder_width * self.kappa
        if gap[1] - gap[0] > 2 * shrink:
            gap = (gap[0] + shrink, gap[1] - shrink)
        return gap

    def edge_band_mask(self, omegas: Optional[np.ndarray] = None) -> np.ndarray:
        omegas = self.config.omegas if omegas is None else np.asarray(omegas)
        gap = self.edge_band()
        if gap is None:
            return np.zeros(omegas.shape, dtype=bool)
        return (omegas > gap[0]) & (omegas < gap[1])

    def magnetic_band_mask(self, omegas: Optional[np.ndarray] = None) -> np.ndarray:
        """Grid points inside the clean magnetic bands"""
        omegas = self.config.omegas if omegas is None else np.asarray(omegas)
        groups = band_groups(harper_bands(self.config.lattice.alpha, self.kappa), self.config.degeneracy_window)
        mask = np.zeros(omegas.shape, dtype=bool)
        for group in groups:
            mask |= (omegas >= group.lo) & (omegas <= group.hi)
        return mask


class ExperimentRunner(BaseRunner):

    # Spectral experiments

    def run_butterfly(self) -> ButterflyMap:
        """Drop-channel reflectivity over the configured alpha list and frequency grid

        The probe keeps the configured sites with the weak butterfly coupling
        (nu = 0.02 kappa by default) so R' resolves individual eigenvalues.

        :returns: ButterflyMap

        """
        cfg = self.config
        probe = ProbeSpec(cfg.probe.in_site, cfg.probe.out_site, cfg.butterfly.nu)
        return butterfly_scan(
            cfg.lattice, cfg.butterfly.alphas, cfg.omegas, probe, cfg.butterfly.threshold, self.workers
        )

    def run_spectrum(self) -> SpectrumResult:
        """Up-block eigenvalues of the clean lattice

        On a torus the eigenvalues are also counted per magnetic band group.

        """
        cfg = self.config
        h = build_h0(cfg.lattice)
        values = np.real(eigensolve(h.spin_block(Spin.UP)).values)
        occupation = None
        if cfg.lattice.boundary is Boundary.TORUS:
            occupation = band_occupation(values, cfg.lattice.alpha, cfg.degeneracy_window, self.kappa)
        clusters = count_clusters(values, cfg.degeneracy_window * self.kappa)
        log.info("spectrum: %d eigenvalues in %d clusters", len(values), len(clusters))
        return SpectrumResult(h, values, clusters, occupation)

    def _edge_state(self, h: HamiltonianMatrix, gap: Optional[Tuple[float, float]]) -> Tuple[EigenSet, Optional[int], CurrentField]:
        cfg = self.config
        block = h.spin_block(Spin.UP)
        eigs = eigensolve(block)
        state = None
        if gap is not None:
            state = midgap_edge_state(
                eigs, h.spec, gap, cfg.edge_states.edge_threshold, cfg.edge_states.reference_omega * self.kappa
            )
        currents = bond_current(block, eigs.vector(state)) if state is not None else CurrentField(())
        return eigs, state, currents

    def run_edge_state_report(self) -> EdgeStateReport:
        """Currents of the edge state nearest the reference frequency (clean and with a defect), KLambda(E) on both edges, classification

        :raises LatticeSpecException: the lattice is not open

        """
        cfg = self.config
        spec = cfg.lattice
        if spec.boundary is not Boundary.OPEN:
            raise LatticeSpecException("edge-state reports need an open lattice")
        threshold = cfg.edge_states.edge_threshold
        gap = self.harper_gap()
        h = build_h0(spec)
        eigs, state, currents = self._edge_state(h, gap)

        defect_site = cfg.edge_states.defect_site
        defect = DisorderSpec({defect_site: cfg.edge_states.defect_strength})
        _, defect_state, defect_currents = self._edge_state(apply_disorder(h, spec, defect), gap)

        weights = np.array([perimeter_weight(eigs.vector(k), spec) for k in range(len(eigs))])
        kinds = tuple(classify_state(eigs.vector(k), spec, threshold) for k in range(len(eigs)))
        dispersion = tuple(
            edge_dispersion(h, Edge.LOWER, threshold, eigs) + edge_dispersion(h, Edge.UPPER, threshold, eigs)
        )
        if state is None:
            message = "no mid-gap edge state at alpha={} near omega={}".format(spec.alpha, cfg.edge_states.reference_omega)
            log.warning(message)
            warnings.warn(message, RuntimeWarning)
        else:
            log.info("edge state %d at E=%.6f", state, float(np.real(eigs.values[state])))
        return EdgeStateReport(
            spec=spec,
            energies=np.real(eigs.values),
            weights=weights,
            kinds=kinds,
            gap=gap,
            state=state,
            currents=currents,
            defect_site=defect_site,
            defect_state=defect_state,
            defect_currents=defect_currents,
            dispersion=dispersion,
        )

    # Transport experiments

    def run_transport(self) -> TransportSpectrum:
        """Transport spectrum of realization 0 of the configured disorder (the clean lattice at zero widths)"""
        cfg = self.config
        child_seed = split_seed(cfg.seed, 0, Family.LATTICE.value)
        dis = realization_disorder(cfg.lattice, cfg.disorder_width, cfg.magnetic_width, cfg.loss_rate, child_seed)
        h = apply_disorder(build_h0(cfg.lattice), cfg.lattice, dis)
        return transport_spectrum(h, cfg.probe, cfg.omegas)

    def _stats(self, family: Family, omegas: np.ndarray, results: List[_Realization]) -> EnsembleStats:
        def stack(name):
            return np.array([getattr(result, name) for result in results])

        r_prime = stack("r_prime")
        delay = stack("delay")
        return EnsembleStats(
            family=family,
            omega=omegas,
            mean_r_prime=r_prime.mean(axis=0),
            std_r_prime=r_prime.std(axis=0),
            mean_delay=delay.mean(axis=0),
            std_delay=delay.std(axis=0),
            mean_t=stack("t").mean(axis=0),
            mean_r=stack("r").mean(axis=0),
            mean_t_prime=stack("t_prime").mean(axis=0),
            seeds=tuple(result.child_seed for result in results),
        )

    def run_transport_ensemble(self) -> Dict[str, EnsembleStats]:
        """Disorder-averaged transport of the lattice and, when enabled, the CROW baseline

        :returns: EnsembleStats keyed by family ("lattice", "crow")

        :raises RealizationFailedException: a realization's solve failed; carries its child seed

        """
        cfg = self.config
        omegas = cfg.omegas
        stats = {}
        results = self._ensemble(cfg.lattice, cfg.probe, omegas, Family.LATTICE.value)
        stats[Family.LATTICE.value] = self._stats(Family.LATTICE, omegas, results)
        if cfg.crow.enabled:
            spec, probe = self._crow()
            results = self._ensemble(spec, probe, omegas, Family.CROW.value)
            stats[Family.CROW.value] = self._stats(Family.CROW, omegas, results)
        return stats

    def _sweep_row(self, family: Family, size: int, spec: LatticeSpec, probe: ProbeSpec, omega: float, proxy: int) -> SweepRow:
        salt = "{}-{}".format(family.value, size)
        results = self._ensemble(spec, probe, np.array([omega]), salt)
        values = np.array([result.r_prime[0] for result in results])
        return SweepRow(family, size, proxy, float(values.mean()), float(values.std()))

    def run_size_sweep(
        self, crow_sizes: Optional[Sequence[int]] = None, lattice_sizes: Optional[Sequence[int]] = None
    ) -> List[SweepRow]:
        """Mean and std of R' at a fixed frequency versus system size

        CROW chains are evaluated at sweep.crowOmega, square quantum-Hall
        lattices at sweep.latticeOmega. The bandwidth-delay proxy is the number
        of resonators a photon traverses: the chain length, or the perimeter
        2(nx + ny) - 4 of the lattice.

        """
        cfg = self.config
        crow_sizes = cfg.sweep.crow_sizes if crow_sizes is None else crow_sizes
        lattice_sizes = cfg.sweep.lattice_sizes if lattice_sizes is None else lattice_sizes
        rows = []
        if cfg.crow.enabled:
            for n in crow_sizes:
                spec, probe = self._crow(n)
                rows.append(self._sweep_row(Family.CROW, n, spec, probe, cfg.sweep.crow_omega * self.kappa, n))
        for size in lattice_sizes:
            spec, probe = self._square(size)
            proxy = 2 * (spec.nx + spec.ny) - 4
            rows.append(self._sweep_row(Family.LATTICE, size, spec, probe, cfg.sweep.lattice_omega * self.kappa, proxy))
        return rows

    def run_loss_attenuation(
        self, sizes: Optional[Sequence[int]] = None, loss_rate: Optional[float] = None
    ) -> List[LossRow]:
        """Peak edge-band R' with and without intrinsic loss versus lattice size

        :param sizes: optional - square lattice sizes, defaults to sweep.lossSizes
        :param loss_rate: optional - kappa_in/kappa, defaults to lossRate or 0.02 when that is zero

        :raises LatticeSpecException: no bulk gap around the reference frequency

        """
        cfg = self.config
        sizes = cfg.sweep.loss_sizes if sizes is None else sizes
        if loss_rate is None:
            loss_rate = cfg.loss_rate or LOSS_RATE
        gap = self.harper_gap()
        if gap is None:
            raise LatticeSpecException(
                "no bulk gap around omega={} at alpha={}".format(cfg.edge_states.reference_omega, cfg.lattice.alpha)
            )
        omegas = np.linspace(gap[0], gap[1], GAP_POINTS)[1:-1]
        rows = []
        for size in sizes:
            spec, probe = self._square(size)
            h = build_h0(spec)
            lossy = apply_disorder(h, spec, DisorderSpec(loss_rate=loss_rate))
            row = LossRow(
                size, _peak_reflectivity(h, probe, omegas), _peak_reflectivity(lossy, probe, omegas),
                loss_attenuation(size, loss_rate),
            )
            log.info("loss: %dx%d peak R' %.4f -> %.4f", size, size, row.peak_lossless, row.peak_lossy)
            rows.append(row)
        return rows

    # Transfer matrix checks

    def _check(self, name: str, value: float, tolerance: float) -> CheckResult:
        result = CheckResult(name, float(value), float(tolerance), bool(value <= tolerance))
        log.log(logging.INFO if result.passed else logging.WARNING, "%s: %.3e (tolerance %.3e) %s",
                name, result.value, tolerance, "pass" if result.passed else "fail")
        return result

    def run_tmatrix_checks(self) -> TMatrixReport:
        """Cross-validate the transfer-matrix chain against the tight-binding lattice

        Checks: plain, spin-flip and Zeeman dispersions against the lattice
        branches, the closed-form spin-flip eigenvalues, Bloch Hamiltonians of
        1D rings, and the backscattering S-matrix against the lattice-model
        solution (first order and exact).

        """
        tm = self.config.tmatrix
        finesse, epsilon, n, p = tm.finesse, tm.epsilon, tm.n, tm.p
        tolerance = 5 / finesse
        zeeman = zeeman_epsilon(finesse)
        checks = []

        def cell_error(variant, eps, detunings, measure):
            worst = 0.0
            for d in detunings:
                cosines = branch_cosines(unit_cell(ChainParams.from_finesse(finesse, d, n, p), variant, eps))
                worst = max(worst, measure(d, cosines, lattice_branches(variant, d, eps, finesse)))
            return worst

        def relative(d, cosines, expected):
            return float(np.max(np.abs(cosines - expected)) / max(abs(d), 1 / finesse))

        def split(d, cosines, expected):
            target = expected[1] - expected[0]
            return abs((cosines[1] - cosines[0]) - target) / abs(target)

        wide = np.linspace(-0.9, 0.9, 19)
        narrow = np.linspace(-0.6, 0.6, 13)
        checks.append(self._check("plainDispersion", cell_error(CellVariant.PLAIN, 0.0, wide, relative), tolerance))
        checks.append(self._check(
            "waveguideScattererDispersion", cell_error(CellVariant.WAVEGUIDE_SCATTERER, epsilon, wide, relative), tolerance
        ))
        checks.append(self._check(
            "resonatorScattererSplit", cell_error(CellVariant.RESONATOR_SCATTERER, zeeman, narrow, split), 0.1
        ))

        worst = 0.0
        for d in np.linspace(-0.8, 0.8, 9):
            closed = spin_flip_eigenvalues(d, epsilon)
            expected = np.sort([np.real(sum(closed["forward"]) / 2), np.real(sum(closed["backward"]) / 2)])
            numeric = branch_cosines(unit_cell(ChainParams.from_finesse(finesse, d, n, p), CellVariant.WAVEGUIDE_SCATTERER, epsilon))
            worst = max(worst, float(np.max(np.abs(numeric - expected))))
        checks.append(self._check("spinFlipClosedForm", worst, tolerance))

        # Bloch sums are exact only on the ring's own k-grid 2 pi j / RING_SITES
        ring = LatticeSpec(nx=1, ny=RING_SITES, alpha=0.0, boundary=Boundary.TORUS, kappa=1.0)
        ks = 2 * math.pi * np.arange(RING_SITES // 6, RING_SITES // 3 + 1) / RING_SITES
        for name, h, variant, eps in (
            ("plainRing", build_h0(ring), CellVariant.PLAIN, 0.0),
            ("spinFlipRing", build_spin_flip(ring, epsilon), CellVariant.WAVEGUIDE_SCATTERER, epsilon),
            ("zeemanRing", build_zeeman(ring, zeeman, finesse), CellVariant.RESONATOR_SCATTERER, zeeman),
        ):
            checks.append(self._check(name, hamiltonian_cross_check(h, variant, eps, finesse, ks, n, p), tolerance))

        eps = BACKSCATTER_FIRST_ORDER_EPS
        worst = 0.0
        for k in BACKSCATTER_K:
            amp = backscatter_amplitudes(k, eps, finesse, n, p)
            model = model_scattering_solution(k, backscatter_eps_prime(eps, finesse))
            worst = max(worst, _relative_magnitude(amp.t_down, model.t_down), _relative_magnitude(amp.r_down, model.r_down))
        checks.append(self._check("backscatterFirstOrder", worst, backscatter_tolerance(eps)))

        eps = BACKSCATTER_EXACT_EPS
        worst = 0.0
        for k in BACKSCATTER_K:
            amp = backscatter_amplitudes(k, eps, finesse, n, p)
            model = model_scattering_solution(k, backscatter_eps_prime(eps, finesse), exact=True)
            for a, b in ((amp.t_up, model.t_up), (amp.r_up, model.r_up), (amp.t_down, model.t_down), (amp.r_down, model.r_down)):
                worst = max(worst, _relative_magnitude(a, b))
        checks.append(self._check("backscatterExact", worst, backscatter_tolerance(eps)))

        detunings = np.linspace(-1.2, 1.2, 49)
        dispersion = {
            CellVariant.PLAIN: dispersion_rows(CellVariant.PLAIN, detunings, finesse, 0.0, n, p),
            CellVariant.WAVEGUIDE_SCATTERER: dispersion_rows(CellVariant.WAVEGUIDE_SCATTERER, detunings, finesse, epsilon, n, p),
            CellVariant.RESONATOR_SCATTERER: dispersion_rows(CellVariant.RESONATOR_SCATTERER, detunings, finesse, zeeman, n, p),
        }
        ks = np.linspace(0.2, math.pi - 0.2, 25)
        return TMatrixReport(tuple(checks), dispersion, s_matrix_rows(ks, BACKSCATTER_EXACT_EPS, finesse))
