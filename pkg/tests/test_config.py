import json

import numpy as np
import pytest

from crowlattice.config import SCHEMA, ExperimentConfig, apply_overrides, from_dict, load_config, read_config, schema_errors
from crowlattice.enums import Boundary, ExperimentKind
from crowlattice.exceptions import ConfigException


def minimal(**extra):
    data = {"experiment": "transportEnsemble", "seed": 7}
    data.update(extra)
    return data


def test_defaults():
    """Test a minimal config resolves every default"""

    config = from_dict(minimal())
    assert config.experiment is ExperimentKind.TRANSPORT_ENSEMBLE
    assert config.seed == 7
    assert (config.lattice.nx, config.lattice.ny) == (10, 10)
    assert config.lattice.alpha == 0.25
    assert config.lattice.boundary is Boundary.OPEN
    assert config.probe.nu == 6.0
    assert config.n_realizations == 50
    assert config.crow.length == 40
    assert config.tmatrix.finesse == 300.0
    assert len(config.omegas) == 161


def test_one_based_sites():
    """Test 1-based sites are converted to 0-based and the defaults follow nx"""

    config = from_dict(minimal(probe={"inSite": [2, 1], "outSite": [9, 3]}, edgeStates={"defectSite": [6, 1]}))
    assert config.probe.in_site == (1, 0)
    assert config.probe.out_site == (8, 2)
    assert config.edge_states.defect_site == (5, 0)
    default = from_dict(minimal(lattice={"nx": 12, "ny": 12}))
    assert default.probe.in_site == (1, 0)
    assert default.probe.out_site == (10, 0)


def test_omegas_scale_with_kappa():
    """Test the frequency grid is stored in units of kappa"""

    config = from_dict(minimal(lattice={"kappa": 2.0}, omegaGrid={"min": -1.0, "max": 1.0, "count": 3}))
    assert np.allclose(config.omegas, [-2.0, 0.0, 2.0])


def test_all_errors_reported():
    """Test unknown keys and wrong types at every level are reported together"""

    with pytest.raises(ConfigException) as excinfo:
        from_dict(minimal(colour="red", lattice={"nx": "10", "depth": 3}, nRealizations=2.5))
    errors = excinfo.value.errors
    assert "unknown key 'colour'" in errors
    assert "unknown key 'lattice.depth'" in errors
    assert any("'lattice.nx' must be an integer" in e for e in errors)
    assert any("'nRealizations'" in e for e in errors)
    assert len(errors) == 4


def test_missing_required_keys():
    """Test experiment and seed are required"""

    with pytest.raises(ConfigException) as excinfo:
        from_dict({})
    assert excinfo.value.errors == ["missing key 'experiment'", "missing key 'seed'"]


def test_boolean_is_not_an_integer():
    """Test seed: true is rejected"""

    with pytest.raises(ConfigException, match="'seed' must be an integer"):
        from_dict({"experiment": "butterfly", "seed": True})


def test_value_errors():
    """Test range checks collect every violation"""

    with pytest.raises(ConfigException) as excinfo:
        from_dict(minimal(
            experiment="phaseDiagram",
            probe={"nu": 0, "inSite": [11, 1]},
            disorderWidth=-0.1,
            omegaGrid={"count": 1},
            tmatrix={"p": 2},
        ))
    errors = excinfo.value.errors
    assert any(e.startswith("unknown experiment 'phaseDiagram'") for e in errors)
    assert "'probe.nu' must be positive" in errors
    assert any("'probe.inSite' = [11, 1] lies outside the 10x10 lattice" in e for e in errors)
    assert "'disorderWidth' must be nonnegative" in errors
    assert "'omegaGrid.count' must be >= 2" in errors
    assert "'tmatrix.p' must be odd" in errors


def test_probe_sites_must_differ():
    """Test coinciding probes are rejected"""

    with pytest.raises(ConfigException, match="must differ"):
        from_dict(minimal(probe={"inSite": [3, 1], "outSite": [3, 1]}))


def test_unsupported_version():
    """Test only schema version 1 is accepted"""

    with pytest.raises(ConfigException, match="unsupported config version 2"):
        from_dict(minimal(version=2))


def test_butterfly_alpha_grid():
    """Test alphaGrid expands to a linspace and excludes alphas"""

    config = from_dict(minimal(butterfly={"alphaGrid": {"min": 0.0, "max": 0.5, "count": 3}}))
    assert config.butterfly.alphas == (0.0, 0.25, 0.5)
    assert from_dict(minimal()).butterfly.alphas == tuple(k / 10 for k in range(10))
    with pytest.raises(ConfigException, match="either 'alphas' or 'alphaGrid'"):
        from_dict(minimal(butterfly={"alphas": [0.1], "alphaGrid": {"min": 0.0, "max": 0.5, "count": 3}}))
    with pytest.raises(ConfigException, match="missing key 'butterfly.alphaGrid.count'"):
        from_dict(minimal(butterfly={"alphaGrid": {"min": 0.0, "max": 0.5}}))


def test_round_trip_and_hash():
    """Test from_dict(to_dict()) is the identity and the hash is stable"""

    config = from_dict(minimal(lattice={"alpha": 0.2, "boundary": "torus"}, probe={"inSite": [2, 2], "outSite": [5, 4]}))
    assert ExperimentConfig.from_dict(config.to_dict()) == config
    assert config.to_dict()["probe"]["inSite"] == [2, 2]
    assert config.config_hash == from_dict(config.to_dict()).config_hash
    assert config.config_hash != from_dict(minimal(seed=8)).config_hash
    assert len(config.config_hash) == 64


def test_overrides():
    """Test command line overrides on the raw config"""

    data = minimal(probe={"inSite": [2, 1], "outSite": [9, 1]})
    overridden = apply_overrides(data, experiment="butterfly", alpha=0.1, size=6, seed=3)
    assert overridden["experiment"] == "butterfly"
    assert overridden["seed"] == 3
    assert overridden["lattice"] == {"alpha": 0.1, "nx": 6, "ny": 6}
    assert overridden["crow"] == {"length": 6}
    assert overridden["probe"] == {"inSite": [2, 1]}
    assert data["probe"]["outSite"] == [9, 1]
    config = from_dict(overridden)
    assert config.probe.out_site == (4, 0)


def test_load_config(tmp_path):
    """Test loading from disk, with overrides and bad files"""

    path = tmp_path / "config.json"
    path.write_text(json.dumps(minimal()))
    assert read_config(path) == minimal()
    assert load_config(path, seed=11).seed == 11
    with pytest.raises(ConfigException, match="cannot read config"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigException, match="not valid JSON"):
        load_config(bad)


def test_defect_site_follows_size():
    """Test the default defect sits mid lower edge and a shrinking override drops an explicit one"""

    assert from_dict(minimal()).edge_states.defect_site == (5, 0)
    assert from_dict(minimal(lattice={"nx": 4, "ny": 4})).edge_states.defect_site == (2, 0)
    data = minimal(edgeStates={"defectSite": [6, 1], "defectStrength": 3.0})
    overridden = apply_overrides(data, size=4)
    assert overridden["edgeStates"] == {"defectStrength": 3.0}
    assert from_dict(overridden).edge_states.defect_site == (2, 0)
    assert apply_overrides(data, size=8)["edgeStates"]["defectSite"] == [6, 1]


def test_schema_closes_every_object():
    """Test the schema document rejects unknown keys in every section"""

    def objects(node):
        if isinstance(node, dict):
            if node.get("type") == "object":
                yield node
            for value in node.values():
                yield from objects(value)

    found = list(objects(SCHEMA))
    assert len(found) >= 10
    assert all(node["additionalProperties"] is False for node in found)
    assert SCHEMA["$schema"].startswith("http://json-schema.org/draft-07/")
    for section in ("crow", "tmatrix", "sweep", "edgeStates"):
        errors = schema_errors(minimal(**{section: {"bogus": 1}}))
        assert errors == ["unknown key '{}.bogus'".format(section)]


def test_schema_integers_are_strict():
    """Test whole floats and booleans are not integers"""

    assert schema_errors(minimal(nRealizations=3.0)) == ["'nRealizations' must be an integer, got 3.0"]
    assert schema_errors(minimal(sweep={"lossSizes": [8, True]})) == ["'sweep.lossSizes.1' must be an integer, got True"]
    assert schema_errors(minimal(lattice={"alpha": 1})) == []
