from enum import Enum


class Boundary(str, Enum):
    OPEN = "open"
    TORUS = "torus"


class Spin(int, Enum):
    UP = 1
    DOWN = -1

    @property
    def offset(self) -> int:
        """Block index in the flattened basis, Up block first"""
        return 0 if self is Spin.UP else 1


class Edge(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


class StateKind(str, Enum):
    EDGE = "edge"
    BULK = "bulk"


class CellVariant(str, Enum):
    PLAIN = "plain"
    WAVEGUIDE_SCATTERER = "waveguideScatterer"
    RESONATOR_SCATTERER = "resonatorScatterer"


class ExperimentKind(str, Enum):
    BUTTERFLY = "butterfly"
    SPECTRUM = "spectrum"
    EDGE_STATES = "edgeStates"
    TRANSPORT = "transport"
    TRANSPORT_ENSEMBLE = "transportEnsemble"
    SIZE_SWEEP = "sizeSweep"
    TMATRIX_CHECKS = "tmatrixChecks"


class Family(str, Enum):
    LATTICE = "lattice"
    CROW = "crow"
