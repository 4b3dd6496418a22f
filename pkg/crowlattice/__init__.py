"""Coupled-resonator optical lattices under synthetic magnetic fields

Tight-binding Hamiltonians of resonator lattices, waveguide probes, spectral
and edge-state analysis, a transfer-matrix model of the resonator chain and
reproducible disorder experiments.

"""

__version__ = '0.1.0'

from crowlattice.config import ExperimentConfig, load_config  # noqa
from crowlattice.experiments import ExperimentRunner  # noqa
from crowlattice.lattice import LatticeSpec, HamiltonianMatrix, DisorderSpec, build_h0, build_spin_flip, build_zeeman, build_crow_chain  # noqa
from crowlattice.probe import ProbeSpec, transport, transport_spectrum  # noqa
