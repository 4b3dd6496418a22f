"""Versioned JSON experiment configs

Keys are camelCase, frequencies and rates are in units of kappa and lattice
sites are given 1-based as [x, y]; everything is converted to 0-based
coordinates and absolute frequencies on ingestion. The structure is checked
against the JSON Schema document in ``schemas/config.v1.json``, unknown keys are
rejected at every level and all violations are reported together.

.. code-block:: python

    {
        "version": 1,
        "experiment": "transportEnsemble",
        "seed": 7,
        "lattice": {"nx": 10, "ny": 10, "alpha": 0.25, "boundary": "open", "kappa": 1.0},
        "probe": {"inSite": [2, 1], "outSite": [9, 1], "nu": 6.0},
        "disorderWidth": 0.4,
        "nRealizations": 50,
        "omegaGrid": {"min": -4.0, "max": 4.0, "count": 161},
        "crow": {"length": 40, "nu": 2.0, "enabled": true}
    }

"""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import jsonschema
import numpy as np

from .enums import Boundary, ExperimentKind
from .exceptions import ConfigException, LatticeSpecException
from .lattice import LatticeSpec
from .probe import ProbeSpec
from .utils import canonical_json, sha256_hex

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DEFAULT_BUTTERFLY_ALPHAS = [k / 10 for k in range(10)]

DEFAULTS: Dict[str, Any] = {
    "version": SCHEMA_VERSION,
    "lattice": {"nx": 10, "ny": 10, "alpha": 0.25, "boundary": "open", "kappa": 1.0},
    "probe": {"nu": 6.0},
    "disorderWidth": 0.4,
    "magneticWidth": 0.0,
    "lossRate": 0.0,
    "nRealizations": 50,
    "omegaGrid": {"min": -4.0, "max": 4.0, "count": 161},
    "crow": {"length": 40, "nu": 2.0, "enabled": True},
    "butterfly": {"alphas": DEFAULT_BUTTERFLY_ALPHAS, "threshold": 0.005, "nu": 0.02},
    "edgeStates": {"edgeThreshold": 0.5, "referenceOmega": 1.5, "defectStrength": 5.0},
    "sweep": {
        "crowSizes": [10, 20, 40],
        "latticeSizes": [10, 12, 14],
        "crowOmega": 0.0,
        "latticeOmega": 1.5,
        "lossSizes": [8, 10, 12],
    },
    "tmatrix": {"finesse": 300.0, "epsilon": 0.05, "n": 1, "p": 1},
    "degeneracyWindow": 0.05,
}

SCHEMA_PATH = Path(__file__).parent / "schemas" / "config.v1.json"

_TYPE_NAMES = {
    "integer": "an integer", "number": "a number", "string": "a string",
    "boolean": "a boolean", "array": "a list", "object": "an object",
}


def _is_strict_integer(checker, instance) -> bool:
    return isinstance(instance, int) and not isinstance(instance, bool)


ConfigValidator = jsonschema.validators.extend(
    jsonschema.Draft7Validator,
    type_checker=jsonschema.Draft7Validator.TYPE_CHECKER.redefine("integer", _is_strict_integer),
)


def load_schema() -> Dict[str, Any]:
    """JSON Schema document of the current config version"""
    with open(SCHEMA_PATH) as f:
        return json.load(f)


SCHEMA: Dict[str, Any] = load_schema()


@dataclass(frozen=True)
class OmegaGrid:
    min: float
    max: float
    count: int

    def values(self, kappa: float = 1.0) -> np.ndarray:
        """Absolute frequencies (the config stores units of kappa)"""
        return kappa * np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class CrowSettings:
    length: int = 40
    nu: float = 2.0
    enabled: bool = True


@dataclass(frozen=True)
class ButterflySettings:
    alphas: Tuple[float, ...] = tuple(DEFAULT_BUTTERFLY_ALPHAS)
    threshold: float = 0.005
    nu: float = 0.02


@dataclass(frozen=True)
class EdgeStateSettings:
    edge_threshold: float = 0.5
    reference_omega: float = 1.5
    defect_site: Tuple[int, int] = (5, 0)
    defect_strength: float = 5.0


@dataclass(frozen=True)
class SweepSettings:
    crow_sizes: Tuple[int, ...] = (10, 20, 40)
    lattice_sizes: Tuple[int, ...] = (10, 12, 14)
    crow_omega: float = 0.0
    lattice_omega: float = 1.5
    loss_sizes: Tuple[int, ...] = (8, 10, 12)


@dataclass(frozen=True)
class TMatrixSettings:
    finesse: float = 300.0
    epsilon: float = 0.05
    n: int = 1
    p: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment configuration

    Sites are 0-based; `probe.nu` and every *omega/width/rate field is in units
    of kappa.

    """

    experiment: ExperimentKind
    seed: int
    lattice: LatticeSpec
    probe: ProbeSpec
    disorder_width: float = 0.4
    magnetic_width: float = 0.0
    loss_rate: float = 0.0
    n_realizations: int = 50
    omega_grid: OmegaGrid = OmegaGrid(-4.0, 4.0, 161)
    crow: CrowSettings = field(default_factory=CrowSettings)
    butterfly: ButterflySettings = field(default_factory=ButterflySettings)
    edge_states: EdgeStateSettings = field(default_factory=EdgeStateSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    tmatrix: TMatrixSettings = field(default_factory=TMatrixSettings)
    degeneracy_window: float = 0.05

    @property
    def omegas(self) -> np.ndarray:
        return self.omega_grid.values(self.lattice.kappa)

    def to_dict(self) -> Dict[str, Any]:
        """Canonical camelCase form with 1-based sites; from_dict(to_dict()) is the identity"""
        return {
            "version": SCHEMA_VERSION,
            "experiment": self.experiment.value,
            "seed": self.seed,
            "lattice": {
                "nx": self.lattice.nx,
                "ny": self.lattice.ny,
                "alpha": self.lattice.alpha,
                "boundary": self.lattice.boundary.value,
                "kappa": self.lattice.kappa,
            },
            "probe": {
                "inSite": _one_based(self.probe.in_site),
                "outSite": _one_based(self.probe.out_site),
                "nu": self.probe.nu,
            },
            "disorderWidth": self.disorder_width,
            "magneticWidth": self.magnetic_width,
            "lossRate": self.loss_rate,
            "nRealizations": self.n_realizations,
            "omegaGrid": {"min": self.omega_grid.min, "max": self.omega_grid.max, "count": self.omega_grid.count},
            "crow": {"length": self.crow.length, "nu": self.crow.nu, "enabled": self.crow.enabled},
            "butterfly": {
                "alphas": list(self.butterfly.alphas),
                "threshold": self.butterfly.threshold,
                "nu": self.butterfly.nu,
            },
            "edgeStates": {
                "edgeThreshold": self.edge_states.edge_threshold,
                "referenceOmega": self.edge_states.reference_omega,
                "defectSite": _one_based(self.edge_states.defect_site),
                "defectStrength": self.edge_states.defect_strength,
            },
            "sweep": {
                "crowSizes": list(self.sweep.crow_sizes),
                "latticeSizes": list(self.sweep.lattice_sizes),
                "crowOmega": self.sweep.crow_omega,
                "latticeOmega": self.sweep.lattice_omega,
                "lossSizes": list(self.sweep.loss_sizes),
            },
            "tmatrix": {
                "finesse": self.tmatrix.finesse,
                "epsilon": self.tmatrix.epsilon,
                "n": self.tmatrix.n,
                "p": self.tmatrix.p,
            },
            "degeneracyWindow": self.degeneracy_window,
        }

    @property
    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        return from_dict(data)


def default_probe_sites(nx: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """0-based default probe sites: (2, 1) and (nx - 1, 1) in 1-based coordinates"""
    return (1, 0), (nx - 2, 0)


def default_defect_site(nx: int) -> Tuple[int, int]:
    """0-based default defect site: the middle of the lower edge, (nx // 2 + 1, 1) in 1-based coordinates"""
    return nx // 2, 0


def _one_based(site: Tuple[int, int]) -> List[int]:
    return [site[0] + 1, site[1] + 1]


def _where(error: jsonschema.ValidationError, key: Optional[str] = None) -> str:
    parts = [str(p) for p in error.absolute_path]
    if key is not None:
        parts.append(key)
    return ".".join(parts)


def _messages(error: jsonschema.ValidationError) -> List[str]:
    if error.validator == "additionalProperties":
        known = error.schema.get("properties", {})
        return ["unknown key '{}'".format(_where(error, key)) for key in error.instance if key not in known]
    if error.validator == "required":
        return ["missing key '{}'".format(_where(error, key)) for key in error.validator_value if key not in error.instance]
    if error.validator == "type":
        return ["'{}' must be {}, got {!r}".format(_where(error), _TYPE_NAMES[error.validator_value], error.instance)]
    if error.validator == "not" and _where(error) == "butterfly":
        return ["'butterfly' takes either 'alphas' or 'alphaGrid', not both"]
    return ["'{}' {}".format(_where(error) or "config", error.message)]


def schema_errors(data: Any) -> List[str]:
    """Every violation of the config schema, unknown keys and wrong types at any depth"""
    errors: List[str] = []
    for error in ConfigValidator(SCHEMA).iter_errors(data):
        for message in _messages(error):
            if message not in errors:
                errors.append(message)
    return errors


def _merge(defaults: Dict, data: Dict) -> Dict:
    merged = copy.deepcopy(defaults)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _site(value, name: str, errors: List[str]) -> Optional[Tuple[int, int]]:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        errors.append("'{}' must be a 1-based [x, y] pair of integers, got {!r}".format(name, value))
        return None
    return value[0] - 1, value[1] - 1


def _int_list(value, name: str, errors: List[str], minimum: int) -> Tuple[int, ...]:
    if not value or not all(isinstance(v, int) and not isinstance(v, bool) and v >= minimum for v in value):
        errors.append("'{}' must be a non-empty list of integers >= {}".format(name, minimum))
        return ()
    return tuple(value)


def _in_lattice(site: Optional[Tuple[int, int]], nx: int, ny: int, name: str, errors: List[str]):
    if site is None:
        return
    if not (0 <= site[0] < nx and 0 <= site[1] < ny):
        errors.append("'{}' = {} lies outside the {}x{} lattice".format(name, _one_based(site), nx, ny))


def _butterfly_alphas(section: Dict, errors: List[str]) -> Tuple[float, ...]:
    grid = section.get("alphaGrid")
    if grid is not None:
        if grid["count"] < 1:
            errors.append("'butterfly.alphaGrid.count' must be >= 1")
            return ()
        return tuple(float(a) for a in np.linspace(grid["min"], grid["max"], grid["count"]))
    alphas = section.get("alphas", [])
    if not alphas:
        errors.append("'butterfly.alphas' must be a non-empty list of numbers")
        return ()
    return tuple(float(a) for a in alphas)


def from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a raw config dict and resolve defaults

    :raises ConfigException: with every schema violation in `errors`

    """
    if not isinstance(data, dict):
        raise ConfigException("config must be a JSON object")
    errors = schema_errors(data)
    if errors:
        raise ConfigException(errors)

    raw = _merge(DEFAULTS, data)
    if raw["version"] != SCHEMA_VERSION:
        errors.append("unsupported config version {} (expected {})".format(raw["version"], SCHEMA_VERSION))

    try:
        experiment = ExperimentKind(raw["experiment"])
    except ValueError:
        errors.append("unknown experiment '{}' (one of {})".format(
            raw["experiment"], ", ".join(k.value for k in ExperimentKind)))
        experiment = None

    lat = raw["lattice"]
    if lat["boundary"] not in [b.value for b in Boundary]:
        errors.append("'lattice.boundary' must be 'open' or 'torus', got '{}'".format(lat["boundary"]))
    if lat["nx"] < 1 or lat["ny"] < 1:
        errors.append("'lattice.nx' and 'lattice.ny' must be >= 1")
    if not lat["kappa"] > 0:
        errors.append("'lattice.kappa' must be positive")

    nx, ny = max(lat["nx"], 1), max(lat["ny"], 1)
    default_in, default_out = default_probe_sites(nx)
    probe_raw = raw["probe"]
    in_site = _site(probe_raw["inSite"], "probe.inSite", errors) if "inSite" in probe_raw else default_in
    out_site = _site(probe_raw["outSite"], "probe.outSite", errors) if "outSite" in probe_raw else default_out
    _in_lattice(in_site, nx, ny, "probe.inSite", errors)
    _in_lattice(out_site, nx, ny, "probe.outSite", errors)
    if not probe_raw["nu"] > 0:
        errors.append("'probe.nu' must be positive")
    if in_site is not None and in_site == out_site:
        errors.append("'probe.inSite' and 'probe.outSite' must differ")

    for key in ("disorderWidth", "magneticWidth", "lossRate"):
        if raw[key] < 0:
            errors.append("'{}' must be nonnegative".format(key))
    if raw["nRealizations"] < 1:
        errors.append("'nRealizations' must be >= 1")
    grid = raw["omegaGrid"]
    if grid["count"] < 2:
        errors.append("'omegaGrid.count' must be >= 2")
    if not grid["max"] > grid["min"]:
        errors.append("'omegaGrid.max' must exceed 'omegaGrid.min'")

    crow = raw["crow"]
    if crow["length"] < 2:
        errors.append("'crow.length' must be >= 2")
    if not crow["nu"] > 0:
        errors.append("'crow.nu' must be positive")

    alphas = _butterfly_alphas(raw["butterfly"], errors)
    if not raw["butterfly"]["nu"] > 0:
        errors.append("'butterfly.nu' must be positive")

    edge = raw["edgeStates"]
    if "defectSite" in edge:
        defect_site = _site(edge["defectSite"], "edgeStates.defectSite", errors)
    else:
        defect_site = default_defect_site(nx)
    _in_lattice(defect_site, nx, ny, "edgeStates.defectSite", errors)
    if not 0 < edge["edgeThreshold"] <= 1:
        errors.append("'edgeStates.edgeThreshold' must lie in (0, 1]")

    sweep = raw["sweep"]
    crow_sizes = _int_list(sweep["crowSizes"], "sweep.crowSizes", errors, 2)
    lattice_sizes = _int_list(sweep["latticeSizes"], "sweep.latticeSizes", errors, 4)
    loss_sizes = _int_list(sweep["lossSizes"], "sweep.lossSizes", errors, 4)

    tm = raw["tmatrix"]
    if not tm["finesse"] > 3.1416:
        errors.append("'tmatrix.finesse' must exceed pi")
    if tm["n"] < 1:
        errors.append("'tmatrix.n' must be >= 1")
    if tm["p"] % 2 != 1:
        errors.append("'tmatrix.p' must be odd")
    if not raw["degeneracyWindow"] > 0:
        errors.append("'degeneracyWindow' must be positive")

    if errors:
        raise ConfigException(errors)

    try:
        lattice = LatticeSpec(lat["nx"], lat["ny"], float(lat["alpha"]), Boundary(lat["boundary"]), float(lat["kappa"]))
        probe = ProbeSpec(in_site, out_site, float(probe_raw["nu"]))
    except LatticeSpecException as e:
        raise ConfigException(e.message)

    return ExperimentConfig(
        experiment=experiment,
        seed=raw["seed"],
        lattice=lattice,
        probe=probe,
        disorder_width=float(raw["disorderWidth"]),
        magnetic_width=float(raw["magneticWidth"]),
        loss_rate=float(raw["lossRate"]),
        n_realizations=raw["nRealizations"],
        omega_grid=OmegaGrid(float(grid["min"]), float(grid["max"]), grid["count"]),
        crow=CrowSettings(crow["length"], float(crow["nu"]), crow["enabled"]),
        butterfly=ButterflySettings(alphas, float(raw["butterfly"]["threshold"]), float(raw["butterfly"]["nu"])),
        edge_states=EdgeStateSettings(
            float(edge["edgeThreshold"]), float(edge["referenceOmega"]), defect_site, float(edge["defectStrength"]),
        ),
        sweep=SweepSettings(crow_sizes, lattice_sizes, float(sweep["crowOmega"]), float(sweep["latticeOmega"]), loss_sizes),
        tmatrix=TMatrixSettings(float(tm["finesse"]), float(tm["epsilon"]), tm["n"], tm["p"]),
        degeneracy_window=float(raw["degeneracyWindow"]),
    )


def apply_overrides(
    data: Dict[str, Any],
    experiment: Optional[str] = None,
    alpha: Optional[float] = None,
    size: Optional[int] = None,
    seed: Optional[int] = None,
) -> Dict[str, Any]:
    """Return a copy of a raw config with command line overrides applied

    `size` sets a square nx = ny lattice (and the CROW length); probe and
    defect sites that no longer fit are dropped so the defaults for the new
    size apply.

    """
    data = copy.deepcopy(data)
    if experiment is not None:
        data["experiment"] = experiment
    if seed is not None:
        data["seed"] = seed
    if alpha is not None:
        data.setdefault("lattice", {})["alpha"] = alpha
    if size is not None:
        lattice = data.setdefault("lattice", {})
        lattice["nx"] = size
        lattice["ny"] = size
        data.setdefault("crow", {})["length"] = size
        for section, key in (("probe", "inSite"), ("probe", "outSite"), ("edgeStates", "defectSite")):
            values = data.get(section, {})
            site = values.get(key)
            if isinstance(site, list) and len(site) == 2 and (site[0] > size or site[1] > size):
                log.info("dropping %s.%s=%s: outside the %dx%d override", section, key, site, size, size)
                del values[key]
    return data


def read_config(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ConfigException("cannot read config {}: {}".format(path, e))
    except json.JSONDecodeError as e:
        raise ConfigException("config {} is not valid JSON: {}".format(path, e))


def load_config(path: Union[str, Path], **overrides) -> ExperimentConfig:
    return from_dict(apply_overrides(read_config(path), **overrides))
