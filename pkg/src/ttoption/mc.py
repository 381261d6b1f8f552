"""Plain Monte Carlo pricing of the min-call, used as accuracy baseline and truth.

Path ``i`` draws its uniforms from a Philox counter stream at word offset
``i * d``, so the samples do not depend on how paths are chunked.  Reductions
go through fixed 4096-path blocks aligned to the global path index and an
exactly rounded final sum, which keeps results bit-identical for any chunk
size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtri

from .exceptions import DecompositionError
from .model import ModelParams, log_drift

REDUCE_BLOCK = 4096
_U53 = 2.0**-53


@dataclass
class McConfig:
    n_path: int = 10**6
    seed: int = 0
    chunk: int = 2**18

    def __post_init__(self):
        if self.n_path < 1:
            raise ValueError("n_path must be >= 1")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")


@dataclass
class McResult:
    price: float
    std: float
    ci_halfwidth: float
    n_path: int
    op_count: int

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "std": self.std,
            "ci_halfwidth": self.ci_halfwidth,
            "n_path": self.n_path,
            "op_count": self.op_count,
        }


def cholesky(rho) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == rho``.

    Semidefinite inputs are accepted; a zero pivot leaves the remaining column
    zero.  A negative pivot raises :class:`DecompositionError`.
    """
    a = np.array(rho, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("correlation matrix must be square")
    L = np.zeros_like(a)
    scale = max(1.0, float(np.abs(np.diag(a)).max()))
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot < -1e-12 * scale:
            raise DecompositionError(f"matrix is not positive semidefinite (pivot {j})", pivot=j)
        if pivot <= 1e-14 * scale:
            rest = a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]
            if np.any(np.abs(rest) > 1e-10 * scale):
                raise DecompositionError(f"matrix is not positive semidefinite (pivot {j})", pivot=j)
            continue
        L[j, j] = math.sqrt(pivot)
        L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _uniforms(seed: int, start: int, count: int, d: int) -> np.ndarray:
    """Uniforms in (0, 1) for paths ``start .. start+count-1``, shape (count, d)."""
    word = start * d
    nwords = count * d
    bitgen = np.random.Philox(key=seed, counter=[word // 4, 0, 0, 0])
    raw = bitgen.random_raw(nwords + word % 4)[word % 4 :]
    return (((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53).reshape(count, d)


def _chunks(n_path: int, chunk: int):
    start = 0
    while start < n_path:
        stop = min(n_path, start + chunk)
        yield start, stop
        start = stop


def sample_terminal(params: ModelParams, mc: McConfig) -> Iterator[np.ndarray]:
    """Yield arrays of terminal log-price vectors, one array per chunk."""
    d = params.d
    mu = log_drift(params)
    scale = math.sqrt(params.T) * params.sigma
    L = cholesky(params.rho)
    for start, stop in _chunks(mc.n_path, mc.chunk):
        xi = ndtri(_uniforms(mc.seed, start, stop - start, d))
        yield mu + (xi @ L.T) * scale


def _block_sums(values: np.ndarray) -> np.ndarray:
    nfull = values.size // REDUCE_BLOCK
    return values[: nfull * REDUCE_BLOCK].reshape(nfull, REDUCE_BLOCK).sum(axis=1)


def mc_price(params: ModelParams, mc: McConfig | None = None) -> McResult:
    """Discounted mean min-call payoff with its 95% half-width."""
    mc = mc or McConfig()
    disc = math.exp(-params.r * params.T)
    sums, sqsums = [], []
    carry = np.empty(0)
    for x in sample_terminal(params, mc):
        payoff = disc * np.maximum(np.exp(x.min(axis=1)) - params.K, 0.0)
        buf = np.concatenate([carry, payoff])
        nfull = (buf.size // REDUCE_BLOCK) * REDUCE_BLOCK
        sums.extend(_block_sums(buf).tolist())
        sqsums.extend(_block_sums(buf * buf).tolist())
        carry = buf[nfull:]
    sums.append(math.fsum(carry.tolist()))
    sqsums.append(math.fsum((carry * carry).tolist()))
    n = mc.n_path
    mean = math.fsum(sums) / n
    if n > 1:
        var = max(math.fsum(sqsums) - n * mean * mean, 0.0) / (n - 1)
    else:
        var = 0.0
    std = math.sqrt(var)
    return McResult(
        price=mean,
        std=std,
        ci_halfwidth=1.96 * std / math.sqrt(n),
        n_path=n,
        op_count=params.d * n,
    )


def mc_truth(n_path: int = 5 * 10**7, seed: int = 12345, chunk: int = 2**18):
    """Callable ``params -> price`` for use as a reference oracle."""

    def truth(params: ModelParams) -> float:
        return mc_price(params, McConfig(n_path=n_path, seed=seed, chunk=chunk)).price

    return truth
