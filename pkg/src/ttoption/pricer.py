"""Parameter-dependent price surfaces built from learned tensor trains.

Pipeline:

1. learn ``phi`` over interleaved legs ``(j_1, k_1, ..., j_d, k_d)`` and the
   payoff transform over ``(j_1, ..., j_d)`` by TCI;
2. SVD-compress both;
3. merge each ``(j_m, k_m)`` core pair of ``phi`` into an operator core;
4. contract the operator with the payoff TT over ``j`` and compress again.

The result is a TT over ``k`` whose entries times :func:`price_prefactor`
are option prices.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import io as ttio
from .model import (
    ModelParams,
    ParamGrid,
    QuadratureGrid,
    params_at,
    payoff_oracle,
    phi_oracle,
    price_prefactor,
)
from .tci import TciConfig, TciDiagnostics, tci_learn
from .tt import (
    TensorTrain,
    contract_operator,
    evaluate,
    inner,
    pair_merge,
    truncate_svd,
)

logger = logging.getLogger(__name__)

# relative singular-value floor used while contracting the operator with the payoff TT
CONTRACT_CUTOFF = 1e-14


class BuildError(RuntimeError):
    """TCI did not converge while building a surface."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class PipelineConfig:
    params: ModelParams
    vary: str = "sigma"
    grid: Optional[QuadratureGrid] = None
    pgrid: Optional[ParamGrid] = None
    tci_tolerance: float = 1e-9
    svd_tolerance: float = 1e-6  # for phi and the payoff TT
    svd_tolerance_surface: float = 1e-6
    tci_seed: int = 0
    tci_max_bond: int = 400
    tci_max_sweeps: int = 80
    pivots_per_visit: int = 4
    require_convergence: bool = True
    leg_order: str = "interleaved"

    def __post_init__(self):
        if self.vary not in ("sigma", "s0"):
            raise ValueError(f"vary must be 'sigma' or 's0', got {self.vary!r}")
        if self.grid is None:
            self.grid = QuadratureGrid.for_case(self.params.d, self.vary)
        if self.pgrid is None:
            self.pgrid = ParamGrid.for_axis(self.vary)
        for name in ("tci_tolerance", "svd_tolerance", "svd_tolerance_surface"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.leg_order != "interleaved":
            raise ValueError("the pipeline supports only the interleaved leg order")

    @property
    def d(self) -> int:
        return self.params.d

    def tci_config(self, seed=None) -> TciConfig:
        return TciConfig(
            tolerance=self.tci_tolerance,
            max_bond=self.tci_max_bond,
            max_sweeps=self.tci_max_sweeps,
            rng_seed=self.tci_seed if seed is None else seed,
            pivots_per_visit=self.pivots_per_visit,
        )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "vary": self.vary,
            "params": self.params.to_dict(),
            "grid": {"N": self.grid.N, "eta": self.grid.eta},
            "pgrid": {"lower": self.pgrid.lower, "upper": self.pgrid.upper, "count": self.pgrid.count},
            "tolerances": {
                "tci": self.tci_tolerance,
                "svd_phi_vhat": self.svd_tolerance,
                "svd_surface": self.svd_tolerance_surface,
            },
            "tci": {
                "seed": self.tci_seed,
                "max_bond": self.tci_max_bond,
                "max_sweeps": self.tci_max_sweeps,
                "pivots_per_visit": self.pivots_per_visit,
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class LearnedComponents:
    """Uncompressed TCI output, kept so compression can be redone cheaply."""

    phi: TensorTrain
    vhat: TensorTrain
    phi_diag: TciDiagnostics
    vhat_diag: TciDiagnostics
    seconds: float


@dataclass
class BuildReport:
    chi_phi: int
    chi_vhat: int
    chi_surface: int
    bonds_phi: list[int]
    bonds_vhat: list[int]
    bonds_surface: list[int]
    bonds_phi_tci: list[int]
    bonds_vhat_tci: list[int]
    oracle_calls_phi: int
    oracle_calls_vhat: int
    converged: bool
    svd_error_phi: float
    svd_error_vhat: float
    svd_error_surface: float
    seconds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PriceSurface:
    """Compressed TT over parameter indices plus the pricing prefactor."""

    surface: TensorTrain
    prefactor: float
    pgrid: ParamGrid
    vary: str
    params: ModelParams
    provenance: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.surface)

    def save(self, path) -> None:
        path = Path(path)
        ttio.save(self.surface, path)
        sidecar = {
            "schema_version": 1,
            "prefactor": self.prefactor,
            "vary": self.vary,
            "pgrid": {"lower": self.pgrid.lower, "upper": self.pgrid.upper, "count": self.pgrid.count},
            "params": self.params.to_dict(),
            "provenance": self.provenance,
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path) -> "PriceSurface":
        path = Path(path)
        meta = json.loads(Path(str(path) + ".json").read_text())
        if meta.get("schema_version") != 1:
            raise ValueError(f"unsupported surface sidecar version {meta.get('schema_version')}")
        return cls(
            surface=ttio.load(path),
            prefactor=float(meta["prefactor"]),
            pgrid=ParamGrid(**meta["pgrid"]),
            vary=meta["vary"],
            params=ModelParams.from_dict(meta["params"]),
            provenance=meta.get("provenance", {}),
        )


def learn_components(config: PipelineConfig, seed=None) -> LearnedComponents:
    """Step (1): TCI on the interleaved phi tensor and on the payoff transform."""
    p, g, pg = config.params, config.grid, config.pgrid
    d = config.d
    t0 = time.perf_counter()
    tci_cfg = config.tci_config(seed)
    phi_tt, phi_diag = tci_learn(
        phi_oracle(p, g, pg, config.vary), [g.points, pg.count] * d, tci_cfg
    )
    logger.info("phi TCI: bonds %s, converged %s", phi_tt.bond_dims, phi_diag.converged)
    vhat_tt, vhat_diag = tci_learn(payoff_oracle(p, g), [g.points] * d, tci_cfg)
    logger.info("vhat TCI: bonds %s, converged %s", vhat_tt.bond_dims, vhat_diag.converged)
    if config.require_convergence and not (phi_diag.converged and vhat_diag.converged):
        raise BuildError("TCI did not converge", {"phi": phi_diag, "vhat": vhat_diag})
    return LearnedComponents(phi_tt, vhat_tt, phi_diag, vhat_diag, time.perf_counter() - t0)


def _max_bond(tt: TensorTrain) -> int:
    return max(tt.bond_dims, default=1)


def assemble_surface(config: PipelineConfig, learned: LearnedComponents,
                     svd_tolerance=None, svd_tolerance_surface=None):
    """Steps (2)-(4): compress, pair-merge, contract, compress."""
    eps = config.svd_tolerance if svd_tolerance is None else svd_tolerance
    eps_v = config.svd_tolerance_surface if svd_tolerance_surface is None else svd_tolerance_surface
    t0 = time.perf_counter()
    phi_c, rep_phi = truncate_svd(learned.phi, eps)
    vhat_c, rep_v = truncate_svd(learned.vhat, eps)
    op = pair_merge(phi_c)
    raw = contract_operator(op, vhat_c, cutoff=CONTRACT_CUTOFF)
    surf, rep_s = truncate_svd(raw, eps_v)
    seconds = time.perf_counter() - t0

    report = BuildReport(
        chi_phi=_max_bond(phi_c),
        chi_vhat=_max_bond(vhat_c),
        chi_surface=_max_bond(surf),
        bonds_phi=phi_c.bond_dims,
        bonds_vhat=vhat_c.bond_dims,
        bonds_surface=surf.bond_dims,
        bonds_phi_tci=learned.phi.bond_dims,
        bonds_vhat_tci=learned.vhat.bond_dims,
        oracle_calls_phi=learned.phi_diag.oracle_calls,
        oracle_calls_vhat=learned.vhat_diag.oracle_calls,
        converged=learned.phi_diag.converged and learned.vhat_diag.converged,
        svd_error_phi=rep_phi.relative_error,
        svd_error_vhat=rep_v.relative_error,
        svd_error_surface=rep_s.relative_error,
        seconds={"learn": learned.seconds, "compress": seconds},
    )
    provenance = {
        "config_hash": config.digest(),
        "config": config.to_dict(),
        "svd_tolerance": eps,
        "svd_tolerance_surface": eps_v,
        "phi_tci": {
            "errors": learned.phi_diag.errors,
            "oracle_calls": learned.phi_diag.oracle_calls,
            "converged": learned.phi_diag.converged,
        },
        "vhat_tci": {
            "errors": learned.vhat_diag.errors,
            "oracle_calls": learned.vhat_diag.oracle_calls,
            "converged": learned.vhat_diag.converged,
        },
        "report": report.to_dict(),
    }
    surface = PriceSurface(
        surface=surf,
        prefactor=price_prefactor(config.params, config.grid),
        pgrid=config.pgrid,
        vary=config.vary,
        params=config.params,
        provenance=provenance,
    )
    return surface, report, phi_c


def build_surface(config: PipelineConfig):
    """Run the full pipeline; returns ``(PriceSurface, BuildReport)``."""
    learned = learn_components(config)
    surface, report, _ = assemble_surface(config, learned)
    return surface, report


def query(surface: PriceSurface, k) -> tuple[float, int]:
    """Price at parameter indices ``k`` and the number of multiplications used."""
    k = np.asarray(k, dtype=np.int64).ravel()
    if k.shape[0] != surface.d:
        raise IndexError(f"need {surface.d} parameter indices, got {k.shape[0]}")
    if np.any(k < 0) or np.any(k >= surface.pgrid.count):
        raise IndexError(f"parameter index outside 0..{surface.pgrid.count - 1}")
    value, count = evaluate(surface.surface, k)
    return surface.prefactor * value.real, count


def query_complex(surface: PriceSurface, k) -> complex:
    """Un-projected ``prefactor * surface[k]``, for checking the imaginary residue."""
    value, _ = evaluate(surface.surface, k)
    return surface.prefactor * value


def query_values(surface: PriceSurface, values) -> tuple[float, int]:
    """Price at parameter values, snapped to the nearest grid point (no interpolation)."""
    return query(surface, surface.pgrid.index(values))


def price_fixed(params: ModelParams, grid: QuadratureGrid, tci: Optional[TciConfig] = None,
                return_details: bool = False):
    """Non-parametric TT pricing: learn phi and the payoff transform at fixed
    parameters and contract the two TTs."""
    tci = tci or TciConfig(tolerance=1e-10, max_sweeps=80, pivots_per_visit=4)
    d = params.d
    phi_tt, phi_diag = tci_learn(phi_oracle(params, grid), [grid.points] * d, tci)
    vhat_tt, vhat_diag = tci_learn(payoff_oracle(params, grid), [grid.points] * d, tci)
    price = float((price_prefactor(params, grid) * inner(phi_tt, vhat_tt)).real)
    if return_details:
        return price, {"phi": phi_diag, "vhat": vhat_diag, "phi_tt": phi_tt, "vhat_tt": vhat_tt}
    return price


def direct_price(phi_tt: TensorTrain, vhat_tt: TensorTrain, k, prefactor: float) -> float:
    """Price at ``k`` straight from the interleaved phi TT and the payoff TT.

    Fixes the ``k`` legs of ``phi`` and contracts with the payoff TT over all
    ``j``; costs ``O(d N chi^3)`` and needs no pair-merge or surface TT.
    """
    k = np.asarray(k, dtype=np.int64).ravel()
    cores = []
    for m, km in enumerate(k):
        cj, ck = phi_tt.cores[2 * m], phi_tt.cores[2 * m + 1]
        cores.append(np.tensordot(cj, ck[:, km, :], axes=(2, 0)))
    return float((prefactor * inner(TensorTrain(cores), vhat_tt)).real)


def sample_indices(surface_or_pgrid, d: int, count: int, seed: int) -> np.ndarray:
    pgrid = surface_or_pgrid.pgrid if isinstance(surface_or_pgrid, PriceSurface) else surface_or_pgrid
    rng = np.random.default_rng(seed)
    return rng.integers(0, pgrid.count, size=(count, d))


def surface_error_eval(surface: PriceSurface, sample_count: int, truth: Callable[[ModelParams], float],
                       seed: int = 0, samples=None) -> dict:
    """Mean absolute error of ``query`` against ``truth(params)`` on random grid points."""
    if samples is None:
        samples = sample_indices(surface, surface.d, sample_count, seed)
    samples = np.asarray(samples)
    tt_prices, true_prices = [], []
    for k in samples:
        tt_prices.append(query(surface, k)[0])
        true_prices.append(float(truth(params_at(surface.params, surface.vary, surface.pgrid, k))))
    tt_prices = np.array(tt_prices)
    true_prices = np.array(true_prices)
    errs = np.abs(tt_prices - true_prices)
    return {
        "mean_abs_error": float(errs.mean()),
        "max_abs_error": float(errs.max()),
        "samples": samples.tolist(),
        "tt_prices": tt_prices.tolist(),
        "truth_prices": true_prices.tolist(),
    }
