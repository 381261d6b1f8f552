"""Black-Scholes ingredients for Fourier-space min-call pricing.

Conventions
-----------
* ``phi(z) = E[exp(i z . x)]`` with ``x`` the terminal log-prices.
* The payoff transform is taken along ``Im z_m > 0``, ``sum Im z_m > 1``.
* Quadrature leg index ``idx`` in ``0..N`` maps to ``j = idx - N/2`` and
  ``z = eta * j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import norm as _norm

from .exceptions import DomainError, SizeError

VARY_AXES = ("sigma", "s0", "none")


def _vec(x, d, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(d, float(arr))
    if arr.shape != (d,):
        raise ValueError(f"{name} must have length {d}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Market and contract inputs for a d-asset min-call under Black-Scholes.

    ``alpha`` is the contour shift, one entry per asset.
    """

    r: float
    T: float
    K: float
    sigma: np.ndarray
    s0: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        d = rho.shape[0]
        object.__setattr__(self, "rho", rho)
        for name in ("sigma", "s0", "alpha"):
            object.__setattr__(self, name, _vec(getattr(self, name), d, name))
        if rho.shape != (d, d):
            raise ValueError(f"rho must be square, got {rho.shape}")
        if not np.allclose(rho, rho.T, atol=1e-14):
            raise ValueError("rho must be symmetric")
        if not np.allclose(np.diag(rho), 1.0, atol=1e-14):
            raise ValueError("rho must have unit diagonal")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("rho must be positive semidefinite")
        if not (self.T > 0 and self.K > 0):
            raise ValueError("T and K must be positive")
        if np.any(self.sigma <= 0) or np.any(self.s0 <= 0):
            raise ValueError("sigma and s0 must be positive")
        if np.any(self.alpha <= 0) or self.alpha.sum() <= 1:
            raise ValueError("alpha must be positive with sum > 1")

    @property
    def d(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def default(cls, d: int, **overrides) -> "ModelParams":
        """Benchmark defaults: r=0.01, T=1, K=100, S0=100, sigma=0.2, rho=1/3, alpha=5/d."""
        rho = np.full((d, d), 1.0 / 3.0)
        np.fill_diagonal(rho, 1.0)
        kw = dict(r=0.01, T=1.0, K=100.0, sigma=0.2, s0=100.0, rho=rho, alpha=5.0 / d)
        kw.update(overrides)
        return cls(**kw)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "T": self.T,
            "K": self.K,
            "sigma": self.sigma.tolist(),
            "s0": self.s0.tolist(),
            "rho": self.rho.tolist(),
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(**{k: data[k] for k in ("r", "T", "K", "sigma", "s0", "rho", "alpha")})


def log_drift(params: ModelParams, sigma=None, s0=None) -> np.ndarray:
    """Mean of the terminal log-prices, ``ln s0 + rT - sigma^2 T / 2``.

    ``sigma`` / ``s0`` may override the stored values and broadcast over
    leading axes.
    """
    sigma = params.sigma if sigma is None else np.asarray(sigma, dtype=float)
    s0 = params.s0 if s0 is None else np.asarray(s0, dtype=float)
    return np.log(s0) + params.r * params.T - 0.5 * sigma**2 * params.T


def covariance(params: ModelParams) -> np.ndarray:
    s = params.sigma
    return np.outer(s, s) * params.rho * params.T


def _char_fn(u, mu, sigma, rho, T):
    w = u * sigma
    quad = np.sum((w @ rho) * w, axis=-1)
    return np.exp(1j * np.sum(u * mu, axis=-1) - 0.5 * T * quad)


def char_fn(z, params: ModelParams, sigma=None, s0=None):
    """Characteristic function of the terminal log-prices at complex ``z`` (last axis d)."""
    z = np.asarray(z, dtype=np.complex128)
    sig = params.sigma if sigma is None else np.asarray(sigma, dtype=float)
    mu = log_drift(params, sigma=sig, s0=s0)
    out = _char_fn(z, mu, sig, params.rho, params.T)
    return complex(out) if out.ndim == 0 else out


def payoff_ft_min_call(z, K: float, d: Optional[int] = None):
    """Fourier transform of ``max(min(e^x) - K, 0)`` at complex ``z`` (last axis d)."""
    z = np.asarray(z, dtype=np.complex128)
    if z.ndim == 0:
        z = z.reshape(1)
    if d is not None and z.shape[-1] != d:
        raise ValueError(f"z has {z.shape[-1]} components, expected {d}")
    d = z.shape[-1]
    im = z.imag
    if np.any(im <= 0):
        raise DomainError("payoff transform needs Im z_m > 0 for every asset")
    if np.any(im.sum(axis=-1) <= 1):
        raise DomainError("payoff transform needs sum of Im z_m > 1")
    s = z.sum(axis=-1)
    w = 1.0 + 1j * s
    out = -np.exp(w * math.log(K)) / ((-1) ** d * w * np.prod(1j * z, axis=-1))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform Fourier grid ``z = eta * j`` for ``j = -N/2 .. N/2`` (N+1 points per axis)."""

    N: int = 100
    eta: float = 0.4

    def __post_init__(self):
        if self.N < 2 or self.N % 2:
            raise ValueError(f"N must be a positive even integer, got {self.N}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def points(self) -> int:
        return self.N + 1

    def z(self, idx):
        """Grid coordinate for leg index ``idx`` in ``0..N``."""
        return self.eta * (np.asarray(idx) - self.N // 2)

    def volume(self, d: int) -> float:
        return self.eta**d

    @classmethod
    def for_case(cls, d: int, vary: str) -> "QuadratureGrid":
        """Benchmark grid: (200, 0.3) for d=11 with varying spots, else (100, 0.4)."""
        if d == 11 and vary == "s0":
            return cls(200, 0.3)
        return cls(100, 0.4)


@dataclass(frozen=True)
class ParamGrid:
    """Equally spaced half-open parameter range: ``value(k) = lower + k (upper - lower) / count``."""

    lower: float
    upper: float
    count: int = 100

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower must be below upper")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    @property
    def step(self) -> float:
        return (self.upper - self.lower) / self.count

    def value(self, k):
        k = np.asarray(k)
        if np.any(k < 0) or np.any(k >= self.count):
            raise IndexError(f"parameter index out of range 0..{self.count - 1}")
        return self.lower + k * self.step

    def index(self, value):
        """Nearest grid index for a value inside ``[lower, upper)``."""
        value = np.asarray(value, dtype=float)
        if np.any(value < self.lower) or np.any(value >= self.upper):
            raise IndexError(f"value outside [{self.lower}, {self.upper})")
        k = np.rint((value - self.lower) / self.step).astype(int)
        return np.clip(k, 0, self.count - 1)

    @property
    def center(self) -> int:
        return self.count // 2

    @classmethod
    def for_axis(cls, vary: str, count: int = 100) -> "ParamGrid":
        if vary == "sigma":
            return cls(0.15, 0.25, count)
        if vary == "s0":
            return cls(90.0, 120.0, count)
        raise ValueError(f"no default range for axis {vary!r}")

    @classmethod
    def single(cls, value: float) -> "ParamGrid":
        """One-point grid whose only entry is ``value``."""
        return cls(value, value + 1.0, 1)


def _params_axis(params, vary, values):
    """Per-row sigma and mu arrays with the varied axis overridden."""
    if vary == "sigma":
        sigma = values
        mu = log_drift(params, sigma=sigma)
    elif vary == "s0":
        sigma = np.broadcast_to(params.sigma, values.shape)
        mu = log_drift(params, s0=values)
    else:
        sigma = params.sigma
        mu = log_drift(params)
    return sigma, mu


def phi_oracle(params, grid: QuadratureGrid, pgrid: Optional[ParamGrid] = None, vary="none",
               leg_order="interleaved"):
    """Batched oracle for ``phi(-z_j - i alpha)``.

    With ``vary`` in ``{"sigma", "s0"}`` the legs are ``(j_1, k_1, ..., j_d, k_d)``;
    ``leg_order="separated"`` gives ``(j_1..j_d, k_1..k_d)`` for experiments.
    With ``vary="none"`` the legs are ``(j_1..j_d)``.
    """
    d = params.d
    alpha = params.alpha
    if vary not in VARY_AXES:
        raise ValueError(f"vary must be one of {VARY_AXES}")
    if leg_order not in ("interleaved", "separated"):
        raise ValueError(f"unknown leg order {leg_order!r}")

    def oracle(idx):
        idx = np.asarray(idx)
        if vary == "none":
            j, values = idx, None
        elif leg_order == "interleaved":
            j, values = idx[:, 0::2], pgrid.value(idx[:, 1::2])
        else:
            j, values = idx[:, :d], pgrid.value(idx[:, d:])
        u = -grid.z(j) - 1j * alpha
        sigma, mu = _params_axis(params, vary, values)
        return _char_fn(u, mu, sigma, params.rho, params.T)

    return oracle


def payoff_oracle(params, grid: QuadratureGrid):
    """Batched oracle for ``vhat(z_j + i alpha)`` over ``(j_1..j_d)``."""
    alpha = params.alpha

    def oracle(idx):
        z = grid.z(np.asarray(idx)) + 1j * alpha
        return payoff_ft_min_call(z, params.K, params.d)

    return oracle


def integrand(j, k, grid, pgrid, params, vary="none"):
    """Single quadrature summand ``phi(-z_j - i alpha) * vhat(z_j + i alpha)``.

    ``j`` holds leg indices ``0..N``; ``k`` parameter indices when ``vary`` is
    not ``"none"``.
    """
    j = np.asarray(j, dtype=np.int64).reshape(1, -1)
    if np.any(j < 0) or np.any(j > grid.N):
        raise IndexError("quadrature index out of range")
    if vary == "none":
        idx = j
    else:
        k = np.asarray(k, dtype=np.int64).reshape(1, -1)
        idx = np.empty((1, 2 * params.d), dtype=np.int64)
        idx[:, 0::2], idx[:, 1::2] = j, k
    phi = phi_oracle(params, grid, pgrid, vary)(idx)
    return complex(phi[0] * payoff_oracle(params, grid)(j)[0])


def price_prefactor(params: ModelParams, grid: QuadratureGrid) -> float:
    """Discount times volume element over ``(2 pi)^d`` (inverse d-dim Fourier transform)."""
    d = params.d
    return math.exp(-params.r * params.T) * grid.volume(d) / (2.0 * math.pi) ** d


def quadrature_price(params: ModelParams, grid: QuadratureGrid, cap: int = 10**7) -> float:
    """Brute-force grid sum over all ``(N+1)^d`` points; a test oracle for small d."""
    d = params.d
    size = grid.points**d
    if size > cap:
        raise SizeError(f"dense quadrature needs {size} points (cap {cap})")
    idx = np.indices((grid.points,) * d).reshape(d, -1).T
    vals = phi_oracle(params, grid)(idx) * payoff_oracle(params, grid)(idx)
    return float((price_prefactor(params, grid) * vals.sum()).real)


def black_scholes_call(s0, K, r, sigma, T) -> float:
    """Closed-form European call; the d=1 min-call."""
    vol = sigma * math.sqrt(T)
    d1 = (math.log(s0 / K) + (r + 0.5 * sigma**2) * T) / vol
    d2 = d1 - vol
    return float(s0 * _norm.cdf(d1) - K * math.exp(-r * T) * _norm.cdf(d2))


def params_at(params: ModelParams, vary: str, pgrid: ParamGrid, k) -> ModelParams:
    """Model parameters with the varied axis set to the grid values at ``k``."""
    if vary == "none":
        return params
    values = pgrid.value(np.asarray(k))
    return params.replace(**{vary: values})
