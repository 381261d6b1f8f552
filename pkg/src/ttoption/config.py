"""JSON configuration files (schema version 1).

Example::

    {
      "schema_version": 1,
      "d": 5,
      "vary": "sigma",
      "model": {"r": 0.01, "T": 1.0, "K": 100.0, "sigma": 0.2, "s0": 100.0,
                "rho_offdiag": 0.3333333333333333, "alpha": null},
      "grid": {"N": 100, "eta": 0.4},
      "pgrid": {"lower": 0.15, "upper": 0.25, "count": 100},
      "tolerances": {"tci": 1e-9, "svd_phi_vhat": 1e-6, "svd_surface": 1e-6},
      "tci": {"seed": 0, "max_bond": 400, "max_sweeps": 80, "pivots_per_visit": 4}
    }

Every section except ``d`` is optional.  ``model.rho`` (a full matrix) takes
precedence over ``model.rho_offdiag``; ``alpha: null`` means ``5/d``.
Scalars for ``sigma``/``s0``/``alpha`` are broadcast to all assets.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ModelParams, ParamGrid, QuadratureGrid
from .pricer import PipelineConfig

SCHEMA_VERSION = 1


def params_from_section(d: int, model: dict) -> ModelParams:
    model = dict(model or {})
    overrides = {}
    for key in ("r", "T", "K", "sigma", "s0"):
        if key in model:
            overrides[key] = model[key]
    if model.get("alpha") is not None:
        overrides["alpha"] = model["alpha"]
    if model.get("rho") is not None:
        overrides["rho"] = np.asarray(model["rho"], dtype=float)
    elif "rho_offdiag" in model:
        rho = np.full((d, d), float(model["rho_offdiag"]))
        np.fill_diagonal(rho, 1.0)
        overrides["rho"] = rho
    return ModelParams.default(d, **overrides)


def pipeline_from_dict(data: dict) -> PipelineConfig:
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema version {version}")
    d = int(data["d"])
    vary = data.get("vary", "sigma")
    params = params_from_section(d, data.get("model"))
    grid = QuadratureGrid(**data["grid"]) if data.get("grid") else None
    pgrid = ParamGrid(**data["pgrid"]) if data.get("pgrid") else None
    tol = data.get("tolerances", {})
    tci = data.get("tci", {})
    kw = {}
    if "tci" in tol:
        kw["tci_tolerance"] = float(tol["tci"])
    if "svd_phi_vhat" in tol:
        kw["svd_tolerance"] = float(tol["svd_phi_vhat"])
    if "svd_surface" in tol:
        kw["svd_tolerance_surface"] = float(tol["svd_surface"])
    for src, dst in (("seed", "tci_seed"), ("max_bond", "tci_max_bond"),
                     ("max_sweeps", "tci_max_sweeps"), ("pivots_per_visit", "pivots_per_visit")):
        if src in tci:
            kw[dst] = int(tci[src])
    return PipelineConfig(params=params, vary=vary, grid=grid, pgrid=pgrid, **kw)


def pipeline_to_dict(cfg: PipelineConfig) -> dict:
    out = cfg.to_dict()
    tol = out["tolerances"]
    return {
        "schema_version": SCHEMA_VERSION,
        "d": out["d"],
        "vary": out["vary"],
        "model": out["params"],
        "grid": out["grid"],
        "pgrid": out["pgrid"],
        "tolerances": {"tci": tol["tci"], "svd_phi_vhat": tol["svd_phi_vhat"],
                       "svd_surface": tol["svd_surface"]},
        "tci": out["tci"],
    }


def load_config(path) -> PipelineConfig:
    return pipeline_from_dict(json.loads(Path(path).read_text()))


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(pipeline_to_dict(cfg), indent=2))
