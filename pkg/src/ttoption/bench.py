"""Experiment harness: complexity/accuracy tables, SVD tolerance sweeps and bond profiles."""

from __future__ import annotations

import csv
import json
import logging
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .mc import McConfig, mc_price
from .model import ModelParams, black_scholes_call, params_at
from .pricer import (
    PipelineConfig,
    PriceSurface,
    assemble_surface,
    direct_price,
    learn_components,
    query,
    sample_indices,
)
from .tt import TensorTrain

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("d", "e_TT", "e_MC", "c_TT", "c_MC", "t_TT", "t_MC", "chi_phi", "chi_vhat", "chi_V")


@dataclass
class ExperimentSpec:
    """Settings for a benchmark run.

    Desk-scale defaults use a 10^7-path truth and 20 parameter samples;
    :meth:`full_scale` restores 5x10^7 paths and 100 samples.
    """

    ds: Sequence[int] = (5,)
    vary: str = "sigma"
    tci_tolerance: float = 1e-9
    svd_tolerance: float = 1e-6
    svd_tolerance_surface: float = 1e-6
    sample_count: int = 20
    truth: str = "mc"  # "mc" or "analytic" (d = 1 only)
    truth_paths: int = 10**7
    mc_paths: int = 10**6
    tci_seed: int = 0
    sample_seed: int = 2024
    truth_seed: int = 777
    mc_seed: int = 1
    timing_reps: int = 100
    pgrid_count: int = 100
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if any(d < 1 for d in self.ds):
            raise ValueError("d must be >= 1")

    def full_scale(self) -> "ExperimentSpec":
        spec = ExperimentSpec(**asdict(self))
        spec.truth_paths = 5 * 10**7
        spec.sample_count = 100
        return spec

    def pipeline(self, d: int) -> PipelineConfig:
        from .model import ParamGrid

        return PipelineConfig(
            params=ModelParams.default(d),
            vary=self.vary,
            pgrid=ParamGrid.for_axis(self.vary, self.pgrid_count),
            tci_tolerance=self.tci_tolerance,
            svd_tolerance=self.svd_tolerance,
            svd_tolerance_surface=self.svd_tolerance_surface,
            tci_seed=self.tci_seed,
            require_convergence=False,  # rows record the flag instead of aborting
        )


@dataclass
class ReportRow:
    d: int
    e_TT: float = math.nan
    e_MC: float = math.nan
    c_TT: int = 0
    c_MC: int = 0
    t_TT: float = math.nan
    t_MC: float = math.nan
    chi_phi: int = 0
    chi_vhat: int = 0
    chi_V: int = 0
    status: str = "ok"
    detail: dict = field(default_factory=dict)

    def table_dict(self) -> dict:
        return {name: getattr(self, name) for name in TABLE_COLUMNS}


def _truth_fn(spec: ExperimentSpec):
    if spec.truth == "analytic":
        def truth(p: ModelParams) -> float:
            if p.d != 1:
                raise ValueError("analytic truth is only available for d = 1")
            return black_scholes_call(float(p.s0[0]), p.K, p.r, float(p.sigma[0]), p.T)
        return truth
    if spec.truth == "mc":
        def truth(p: ModelParams) -> float:
            return mc_price(p, McConfig(n_path=spec.truth_paths, seed=spec.truth_seed)).price
        return truth
    raise ValueError(f"unknown truth {spec.truth!r}")


def time_queries(surface: PriceSurface, samples, reps: int = 100) -> float:
    """Mean seconds per query over ``reps`` timed calls after one warm-up."""
    samples = [np.asarray(k) for k in samples]
    query(surface, samples[0])
    total = 0.0
    for i in range(reps):
        k = samples[i % len(samples)]
        t0 = time.perf_counter()
        query(surface, k)
        total += time.perf_counter() - t0
    return total / reps


def run_row(spec: ExperimentSpec, d: int) -> tuple[ReportRow, dict]:
    cfg = spec.pipeline(d)
    learned = learn_components(cfg)
    surface, report, phi_c = assemble_surface(cfg, learned)
    row = evaluate_row(spec, d, surface, report)
    artifacts = {"surface": surface, "report": report, "phi": phi_c, "learned": learned, "config": cfg}
    return row, artifacts


def evaluate_row(spec: ExperimentSpec, d: int, surface: PriceSurface, report) -> ReportRow:
    """Score a built surface against the truth and a Monte Carlo baseline."""
    samples = sample_indices(surface.pgrid, d, spec.sample_count, spec.sample_seed)
    truth = _truth_fn(spec)

    tt_prices, true_prices, halfwidths, mc_times = [], [], [], []
    c_tt = None
    for k in samples:
        price, count = query(surface, k)
        if c_tt is None:
            c_tt = count
        elif count != c_tt:
            raise RuntimeError("query multiplication count depends on k")
        p = params_at(surface.params, surface.vary, surface.pgrid, k)
        tt_prices.append(price)
        true_prices.append(truth(p))
        t0 = time.perf_counter()
        res = mc_price(p, McConfig(n_path=spec.mc_paths, seed=spec.mc_seed))
        mc_times.append(time.perf_counter() - t0)
        halfwidths.append(res.ci_halfwidth)

    return ReportRow(
        d=d,
        e_TT=float(np.mean(np.abs(np.array(tt_prices) - np.array(true_prices)))),
        e_MC=float(np.mean(halfwidths)),
        c_TT=int(c_tt),
        c_MC=d * spec.mc_paths,
        t_TT=time_queries(surface, samples, spec.timing_reps),
        t_MC=float(np.mean(mc_times)),
        chi_phi=report.chi_phi,
        chi_vhat=report.chi_vhat,
        chi_V=report.chi_surface,
        status="ok" if report.converged else "unconverged",
        detail={
            "samples": samples.tolist(),
            "tt_prices": tt_prices,
            "truth_prices": true_prices,
            "mc_halfwidths": halfwidths,
            "build": report.to_dict(),
        },
    )


def run_table(spec: ExperimentSpec) -> list[ReportRow]:
    """One row per ``d``; a failing build marks its row and the run continues."""
    rows = []
    for d in spec.ds:
        try:
            row, _ = run_row(spec, d)
        except Exception as exc:  # a bad row must not abort the table
            logger.exception("row d=%d failed", d)
            row = ReportRow(d=d, status="failed", detail={"error": repr(exc)})
        rows.append(row)
    return rows


def svd_sweep(spec: ExperimentSpec, tolerances: Sequence[float], d: Optional[int] = None,
              truth: str = "reference", surface_tolerance: float = 1e-9, learned=None) -> list[dict]:
    """Price error versus the phi/payoff SVD tolerance, reusing one TCI learn.

    ``truth="reference"`` measures against prices contracted directly from the
    uncompressed TCI tensors, isolating the compression error; ``"mc"`` uses
    a Monte Carlo truth.  Both mean and max absolute errors are
    reported.
    """
    d = d if d is not None else spec.ds[0]
    cfg = spec.pipeline(d)
    cfg.svd_tolerance_surface = surface_tolerance
    if learned is None:
        learned = learn_components(cfg)
    samples = sample_indices(cfg.pgrid, d, spec.sample_count, spec.sample_seed)
    from .model import price_prefactor

    pref = price_prefactor(cfg.params, cfg.grid)
    if truth == "reference":
        ref = [direct_price(learned.phi, learned.vhat, k, pref) for k in samples]
    else:
        fn = _truth_fn(spec)
        ref = [fn(params_at(cfg.params, cfg.vary, cfg.pgrid, k)) for k in samples]
    ref = np.array(ref)

    curve = []
    for tol in tolerances:
        surface, report, _ = assemble_surface(cfg, learned, svd_tolerance=tol,
                                              svd_tolerance_surface=surface_tolerance)
        prices = np.array([query(surface, k)[0] for k in samples])
        err = np.abs(prices - ref)
        curve.append({
            "svd_tolerance": float(tol),
            "e_TT": float(err.mean()),
            "e_TT_max": float(err.max()),
            "e_TT_max_rel": float((err / np.abs(ref)).max()),
            "chi_phi": report.chi_phi,
            "chi_vhat": report.chi_vhat,
            "chi_V": report.chi_surface,
        })
    return curve


def bond_profile(tt: TensorTrain, paired: bool = True) -> list[dict]:
    """Bond dimensions ``chi_l`` for ``l = 1 .. L-1``.

    For an interleaved ``phi`` TT (``paired=True``) odd ``l`` joins ``j_m`` and
    ``k_m`` of one asset and even ``l`` joins ``k_m`` to ``j_{m+1}``.
    """
    out = []
    for l, chi in enumerate(tt.bond_dims, start=1):
        kind = ("intra" if l % 2 == 1 else "inter") if paired else "inter"
        out.append({"bond": l, "chi": int(chi), "kind": kind})
    return out


def vhat_profile(tt: TensorTrain) -> list[dict]:
    """Payoff-TT bonds placed at the even positions ``l = 2i`` of the phi profile."""
    return [{"bond": 2 * i, "chi": int(chi), "kind": "inter"} for i, chi in enumerate(tt.bond_dims, start=1)]


# -- output ----------------------------------------------------------------

def write_table_csv(rows: Sequence[ReportRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*TABLE_COLUMNS, "status"])
        for row in rows:
            w.writerow([*(repr(v) if isinstance(v, float) else v for v in row.table_dict().values()),
                        row.status])


def read_table_csv(path) -> list[ReportRow]:
    types = {f.name: f.type for f in fields(ReportRow)}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for name in TABLE_COLUMNS:
                kw[name] = int(rec[name]) if types[name] in (int, "int") else float(rec[name])
            kw["status"] = rec["status"]
            rows.append(ReportRow(**kw))
    return rows


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, cwd=Path(__file__).parent, timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_table_json(rows: Sequence[ReportRow], spec: ExperimentSpec, path) -> None:
    payload = {
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
        "git_describe": git_describe(),
        "columns": list(TABLE_COLUMNS),
        "rows": [asdict(r) for r in rows],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def read_table_json(path) -> list[ReportRow]:
    payload = json.loads(Path(path).read_text())
    return [ReportRow(**r) for r in payload["rows"]]


def write_records_csv(records: Sequence[dict], path) -> None:
    if not records:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0]))
        w.writeheader()
        for rec in records:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
