import json

import numpy as np
import pytest

from ttoption.config import load_config, pipeline_from_dict, pipeline_to_dict, save_config


def test_minimal_config_uses_defaults():
    cfg = pipeline_from_dict({"d": 3})
    assert cfg.vary == "sigma"
    assert cfg.tci_tolerance == 1e-9 and cfg.svd_tolerance == 1e-6
    np.testing.assert_allclose(cfg.params.alpha, 5 / 3)
    assert cfg.params.rho[0, 1] == pytest.approx(1 / 3)


def test_full_config_roundtrip(tmp_path):
    data = {
        "schema_version": 1,
        "d": 2,
        "vary": "s0",
        "model": {"r": 0.02, "T": 0.5, "K": 95.0, "sigma": [0.2, 0.3], "s0": 100.0,
                  "rho_offdiag": 0.5, "alpha": [1.0, 1.5]},
        "grid": {"N": 40, "eta": 0.3},
        "pgrid": {"lower": 80.0, "upper": 110.0, "count": 30},
        "tolerances": {"tci": 1e-8, "svd_phi_vhat": 1e-7, "svd_surface": 1e-5},
        "tci": {"seed": 3, "max_bond": 50, "max_sweeps": 10, "pivots_per_visit": 2},
    }
    cfg = pipeline_from_dict(data)
    assert cfg.params.K == 95.0 and cfg.params.rho[0, 1] == 0.5
    assert cfg.grid.N == 40 and cfg.pgrid.count == 30
    assert (cfg.tci_seed, cfg.tci_max_bond, cfg.pivots_per_visit) == (3, 50, 2)
    path = tmp_path / "c.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back.digest() == cfg.digest()
    assert json.loads(path.read_text())["schema_version"] == 1
    assert pipeline_to_dict(back) == pipeline_to_dict(cfg)


def test_full_rho_takes_precedence():
    cfg = pipeline_from_dict({"d": 2, "model": {"rho": [[1, 0.1], [0.1, 1]], "rho_offdiag": 0.9}})
    assert cfg.params.rho[0, 1] == pytest.approx(0.1)


def test_bad_version():
    with pytest.raises(ValueError):
        pipeline_from_dict({"schema_version": 2, "d": 2})
