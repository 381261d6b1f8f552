"""Tensor-train pricing of multi-asset min-call options.

The numerical pieces live in submodules: :mod:`.tt` (tensor trains),
:mod:`.tci` (cross interpolation), :mod:`.model` (Black-Scholes Fourier
model), :mod:`.pricer` (surface pipeline), :mod:`.mc` (Monte Carlo
reference) and :mod:`.bench` (experiment harness).
"""

from .exceptions import DecompositionError, DomainError, SizeError, StructureError
from .mc import McConfig, McResult, cholesky, mc_price
from .model import ModelParams, ParamGrid, QuadratureGrid, black_scholes_call
from .pricer import (
    BuildError,
    PipelineConfig,
    PriceSurface,
    build_surface,
    price_fixed,
    query,
)
from .tci import IndexGrid, TciConfig, TciDiagnostics, tci_learn
from .tt import (
    TensorTrain,
    TensorTrainOperator,
    contract_operator,
    evaluate,
    mult_count,
    pair_merge,
    truncate_svd,
)

__version__ = "0.1.0"

__all__ = [
    "BuildError", "DecompositionError", "DomainError", "IndexGrid", "McConfig", "McResult",
    "ModelParams", "ParamGrid", "PipelineConfig", "PriceSurface", "QuadratureGrid", "SizeError",
    "StructureError", "TciConfig", "TciDiagnostics", "TensorTrain", "TensorTrainOperator",
    "black_scholes_call", "build_surface", "cholesky", "contract_operator", "evaluate",
    "mc_price", "mult_count", "pair_merge", "price_fixed", "query", "tci_learn", "truncate_svd",
]
