"""Two-site tensor cross interpolation (TCI).

The learner keeps nested left/right multi-index sets for every bond and
represents the tensor as ``T_1 P_1^{-1} T_2 P_2^{-1} ... T_L`` where
``T_s = F[I_{s-1}, :, J_{s+1}]`` and ``P_b = F[I_b, J_{b+1}]``.  Pivots are
added one bond at a time at the largest residual of the local two-site slice,
located by a rook search so that each proposal costs only a few rows and
columns of oracle calls.

Oracles are *batched*: they take an ``(n, L)`` integer array of indices and
return ``n`` complex values.  Wrap scalar callables with :func:`batched`.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .tt import TensorTrain, evaluate_many

COND_LIMIT = 1e15


def batched(fn: Callable) -> Callable:
    """Lift a scalar oracle ``fn(index_tuple) -> complex`` to the batched form."""

    def wrapper(indices):
        return np.array([fn(tuple(int(v) for v in row)) for row in indices], dtype=np.complex128)

    return wrapper


@dataclass(frozen=True)
class IndexGrid:
    local_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "local_dims", tuple(int(n) for n in self.local_dims))
        if len(self.local_dims) == 0 or any(n < 1 for n in self.local_dims):
            raise ValueError(f"local dims must be >= 1, got {self.local_dims}")

    @property
    def d(self) -> int:
        return len(self.local_dims)


@dataclass
class TciConfig:
    tolerance: float = 1e-9
    max_bond: int = 200
    max_sweeps: int = 60
    rng_seed: int = 0
    initial_pivot: Optional[Sequence[int]] = None
    rook_iterations: int = 5
    rook_starts: int = 1
    pivots_per_visit: int = 1
    global_samples: int = 1000
    stall_sweeps: int = 6
    max_global_pivots: int = 5

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.stall_sweeps < 1:
            raise ValueError("stall_sweeps must be >= 1")
        if self.global_samples < 0 or self.max_global_pivots < 0:
            raise ValueError("global search sizes must be >= 0")


@dataclass
class TciDiagnostics:
    """Sweep history of a learn.

    ``errors`` uses the running max of |F| over every evaluated point as the
    normalization; ``errors_pivot_norm`` normalizes by the max over pivots only.
    ``errors_global`` is the normalized max error on the random samples of
    the global pivot search (None for sweeps where it did not run).  ``pivots[b]`` lists the full pivot indices ``I_b + J_{b+1}`` of bond ``b``.
    """

    errors: list[float] = field(default_factory=list)
    errors_global: list[float] = field(default_factory=list)
    errors_pivot_norm: list[float] = field(default_factory=list)
    pivots_added: list[int] = field(default_factory=list)
    oracle_calls: int = 0
    bond_dims: list[int] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False
    rejected_pivots: int = 0
    max_abs: float = 0.0
    initial_pivot: list[int] = field(default_factory=list)
    seconds: float = 0.0
    pivots: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _scaled_cond(P):
    """Condition number after row/column equilibration (scale-invariant)."""
    A = np.abs(P)
    r = A.max(axis=1)
    r[r == 0] = 1.0
    Q = P / r[:, None]
    c = np.abs(Q).max(axis=0)
    c[c == 0] = 1.0
    return np.linalg.cond(Q / c[None, :])


class _Learner:
    def __init__(self, oracle, dims, config: TciConfig):
        self.oracle = oracle
        self.dims = list(dims)
        self.L = len(dims)
        self.cfg = config
        self.rng = np.random.default_rng(config.rng_seed)
        self.calls = 0
        self.fmax = 0.0
        self.rejected = 0

    # -- oracle access ---------------------------------------------------
    def f(self, idx):
        idx = np.ascontiguousarray(idx, dtype=np.int64).reshape(-1, self.L)
        vals = np.asarray(self.oracle(idx), dtype=np.complex128).reshape(-1)
        if vals.shape[0] != idx.shape[0]:
            raise ValueError("oracle returned the wrong number of values")
        self.calls += idx.shape[0]
        if vals.size:
            self.fmax = max(self.fmax, float(np.max(np.abs(vals))))
        return vals

    def _left(self, s):
        """Left multi-indices feeding site s (shape (n, s))."""
        return self.I[s - 1] if s > 0 else np.zeros((1, 0), dtype=np.int64)

    def _right(self, s):
        """Right multi-indices feeding site s (shape (n, L-s-1))."""
        return self.J[s] if s < self.L - 1 else np.zeros((1, 0), dtype=np.int64)

    def _site_block(self, left, s, right):
        """F[left, :, right] with left (a, s), right (c, L-s-1) -> (a, N_s, c)."""
        a, c, n = left.shape[0], right.shape[0], self.dims[s]
        idx = np.empty((a, n, c, self.L), dtype=np.int64)
        idx[..., :s] = left[:, None, None, :]
        idx[..., s] = np.arange(n)[None, :, None]
        idx[..., s + 1 :] = right[None, None, :, :]
        return self.f(idx).reshape(a, n, c)

    # -- initialisation --------------------------------------------------
    def _initial_pivot(self):
        cfg = self.cfg
        if cfg.initial_pivot is not None:
            p = np.array(cfg.initial_pivot, dtype=np.int64)
            if p.shape != (self.L,) or np.any(p < 0) or np.any(p >= self.dims):
                raise IndexError(f"initial pivot {cfg.initial_pivot} outside grid")
            if self.f(p)[0] == 0:
                raise ValueError("oracle vanishes at the initial pivot")
            return p
        for _ in range(100):
            p = np.array([self.rng.integers(n) for n in self.dims], dtype=np.int64)
            if self.f(p)[0] != 0:
                break
        else:
            raise ValueError("oracle is zero at 100 random indices; cannot start TCI")
        # coordinate-wise ascent of |F| from the random start
        best = abs(self.f(p)[0])
        for _ in range(3):
            improved = False
            for s in range(self.L):
                cand = np.repeat(p[None, :], self.dims[s], axis=0)
                cand[:, s] = np.arange(self.dims[s])
                vals = np.abs(self.f(cand))
                i = int(np.argmax(vals))
                if vals[i] > best:
                    best, p[s], improved = vals[i], i, True
            if not improved:
                break
        return p

    def setup(self):
        p = self._initial_pivot()
        self.pivot0 = p.copy()
        L = self.L
        # I[b]: (chi_b, b+1); J[b]: (chi_b, L-b-1)
        self.I = [p[None, : b + 1].copy() for b in range(L - 1)]
        self.J = [p[None, b + 1 :].copy() for b in range(L - 1)]
        # position of each I[b] row inside left(b) x N_b, and of J[b] inside N_{b+1} x right(b+1)
        self.Ipar = [np.array([0]) for _ in range(L - 1)]
        self.Iloc = [np.array([p[b]]) for b in range(L - 1)]
        self.Jpar = [np.array([0]) for _ in range(L - 1)]
        self.Jloc = [np.array([p[b + 1]]) for b in range(L - 1)]
        self.T = [self._site_block(self._left(s), s, self._right(s)) for s in range(L)]

    def P(self, b):
        return self.T[b][self.Ipar[b], self.Iloc[b], :]

    # -- two-site residual --------------------------------------------------
    def _bond_factors(self, b):
        """Left = T_b P_b^{-1} as (R, chi), Right = T_{b+1} as (chi, C)."""
        Tb = self.T[b]
        R = Tb.shape[0] * Tb.shape[1]
        lu = scipy.linalg.lu_factor(self.P(b), check_finite=False)
        left = scipy.linalg.lu_solve(lu, Tb.reshape(R, -1).T, trans=1, check_finite=False).T
        right = self.T[b + 1].reshape(self.T[b + 1].shape[0], -1)
        return left, right

    def _row_indices(self, b, r):
        """Full indices of 2-site row r (a, i_b) over all columns (i_{b+1}, c)."""
        left = self._left(b)
        a, i = divmod(r, self.dims[b])
        right = self._right(b + 1)
        n = self.dims[b + 1]
        idx = np.empty((n, right.shape[0], self.L), dtype=np.int64)
        idx[..., :b] = left[a]
        idx[..., b] = i
        idx[..., b + 1] = np.arange(n)[:, None]
        idx[..., b + 2 :] = right[None, :, :]
        return idx.reshape(-1, self.L)

    def _col_indices(self, b, c):
        left = self._left(b)
        right = self._right(b + 1)
        jn, jc = divmod(c, right.shape[0])
        idx = np.empty((left.shape[0], self.dims[b], self.L), dtype=np.int64)
        idx[..., :b] = left[:, None, :]
        idx[..., b] = np.arange(self.dims[b])[None, :]
        idx[..., b + 1] = jn
        idx[..., b + 2 :] = right[jc]
        return idx.reshape(-1, self.L)

    def _rook(self, b, left, right):
        """Rook search for a large |residual| on the 2-site slice of bond b."""
        ncols = right.shape[1]
        rows, cols = {}, {}
        c = int(self.rng.integers(ncols))
        r = -1
        for _ in range(self.cfg.rook_iterations):
            if c not in cols:
                cols[c] = self.f(self._col_indices(b, c))
            err_col = np.abs(cols[c] - left @ right[:, c])
            r_new = int(np.argmax(err_col))
            if r_new == r:
                break
            r = r_new
            if r not in rows:
                rows[r] = self.f(self._row_indices(b, r))
            err_row = np.abs(rows[r] - left[r] @ right)
            c_new = int(np.argmax(err_row))
            if c_new == c:
                break
            c = c_new
        if c not in cols:
            cols[c] = self.f(self._col_indices(b, c))
        if r not in rows:
            rows[r] = self.f(self._row_indices(b, r))
        err = abs(rows[r][c] - left[r] @ right[:, c])
        return err, r, c, rows[r], cols[c]

    def _add_pivot(self, b, r, c, row_vals, col_vals):
        a, i = divmod(r, self.dims[b])
        right_next = self._right(b + 1)
        jn, jc = divmod(c, right_next.shape[0])
        new_I = np.concatenate([self._left(b)[a], [i]])
        new_J = np.concatenate([[jn], right_next[jc]])

        # tentative P to check conditioning
        Tb_new = np.concatenate([self.T[b], col_vals.reshape(self.T[b].shape[0], -1, 1)], axis=2)
        Tn_new = np.concatenate(
            [self.T[b + 1], row_vals.reshape(1, self.dims[b + 1], -1)], axis=0
        )
        Ipar = np.append(self.Ipar[b], a)
        Iloc = np.append(self.Iloc[b], i)
        P_new = Tb_new[Ipar, Iloc, :]
        if _scaled_cond(P_new) > COND_LIMIT:
            self.rejected += 1
            return False
        self.T[b], self.T[b + 1] = Tb_new, Tn_new
        self.I[b] = np.vstack([self.I[b], new_I])
        self.J[b] = np.vstack([self.J[b], new_J])
        self.Ipar[b], self.Iloc[b] = Ipar, Iloc
        self.Jpar[b] = np.append(self.Jpar[b], jc)
        self.Jloc[b] = np.append(self.Jloc[b], jn)
        return True

    def visit(self, b):
        """Try to add pivots at bond b; return the largest residual seen."""
        worst = 0.0
        for _ in range(self.cfg.pivots_per_visit):
            left, right = self._bond_factors(b)
            best = None
            for _ in range(self.cfg.rook_starts):
                cand = self._rook(b, left, right)
                if best is None or cand[0] > best[0]:
                    best = cand
            err = best[0]
            worst = max(worst, err)
            if err <= self.cfg.tolerance * self.fmax:
                break
            if self.I[b].shape[0] >= self.cfg.max_bond:
                break
            if not self._add_pivot(b, *best[1:]):
                break
        return worst

    # -- global pivots ------------------------------------------------------
    def _find_row(self, rows, row):
        hit = np.nonzero(np.all(rows == row, axis=1))[0]
        return int(hit[0]) if hit.size else -1

    def add_global_pivot(self, x) -> bool:
        """Insert the full index ``x`` into every bond where it is new.

        A prefix of ``x`` already in ``I_b`` implies the same for every bond
        left of ``b`` (nesting), and likewise for suffixes in ``J_b``, so the
        bonds to extend form one contiguous range.  Returns False when ``x``
        is redundant or would make a pivot matrix ill-conditioned.
        """
        x = np.asarray(x, dtype=np.int64)
        nb = self.L - 1
        bonds = [b for b in range(nb)
                 if self._find_row(self.I[b], x[: b + 1]) < 0 and self._find_row(self.J[b], x[b + 1 :]) < 0]
        if not bonds:
            return False
        saved = [list(v) for v in (self.I, self.J, self.Ipar, self.Iloc, self.Jpar, self.Jloc, self.T)]
        for b in bonds:
            self.I[b] = np.vstack([self.I[b], x[: b + 1]])
            self.J[b] = np.vstack([self.J[b], x[b + 1 :]])
        for b in bonds:
            ip = self._find_row(self.I[b - 1], x[:b]) if b > 0 else 0
            jp = self._find_row(self.J[b + 1], x[b + 2 :]) if b < nb - 1 else 0
            self.Ipar[b] = np.append(self.Ipar[b], ip)
            self.Iloc[b] = np.append(self.Iloc[b], x[b])
            self.Jpar[b] = np.append(self.Jpar[b], jp)
            self.Jloc[b] = np.append(self.Jloc[b], x[b + 1])
        # site s uses I[s-1] (rows) and J[s] (columns); extend the blocks incrementally
        for s in range(bonds[0], bonds[-1] + 2):
            Ts = self.T[s]
            if s - 1 in bonds:
                new = self._site_block(self.I[s - 1][-1:], s, self._right(s))
                if s in bonds:
                    new = new[:, :, : Ts.shape[2]]
                Ts = np.concatenate([Ts, new], axis=0)
            if s in bonds:
                new = self._site_block(self._left(s), s, self.J[s][-1:])
                Ts = np.concatenate([Ts, new], axis=2)
            self.T[s] = Ts
        if any(_scaled_cond(self.P(b)) > COND_LIMIT for b in bonds):
            self.I, self.J, self.Ipar, self.Iloc, self.Jpar, self.Jloc, self.T = saved
            self.rejected += 1
            return False
        return True

    def global_search(self):
        """Sample random indices, return (normalized max error, pivots added)."""
        cfg = self.cfg
        if cfg.global_samples == 0:
            return 0.0, 0
        idx = np.stack([self.rng.integers(0, n, cfg.global_samples) for n in self.dims], axis=1)
        err = np.abs(evaluate_many(self.to_tt(), idx) - self.f(idx))
        worst = float(err.max()) / self.fmax if self.fmax > 0 else 0.0
        added = 0
        # only the worst few samples are tried; each attempt costs a row and a column per site
        for i in np.argsort(-err)[: cfg.max_global_pivots]:
            if err[i] <= cfg.tolerance * self.fmax:
                break
            if any(self.I[b].shape[0] >= cfg.max_bond for b in range(self.L - 1)):
                break
            added += self.add_global_pivot(idx[i])
        return worst, added

    def pivot_max(self):
        return max(float(np.max(np.abs(self.P(b)))) for b in range(self.L - 1))

    def to_tt(self) -> TensorTrain:
        cores = []
        for s in range(self.L - 1):
            Ts = self.T[s]
            a, n, c = Ts.shape
            lu = scipy.linalg.lu_factor(self.P(s), check_finite=False)
            core = scipy.linalg.lu_solve(lu, Ts.reshape(a * n, c).T, trans=1, check_finite=False).T
            cores.append(core.reshape(a, n, -1))
        cores.append(self.T[-1])
        return TensorTrain(cores)


def tci_learn(oracle, grid: IndexGrid | Sequence[int], config: TciConfig | None = None):
    """Learn a tensor train from a batched black-box oracle.

    Parameters
    ----------
    oracle : callable
        ``oracle(indices)`` with ``indices`` an ``(n, L)`` int array; returns
        ``n`` complex values.  Must be deterministic.
    grid : IndexGrid or sequence of int
        Local dimension of each leg.
    config : TciConfig

    Returns
    -------
    (TensorTrain, TciDiagnostics)
        ``diagnostics.converged`` is False when the tolerance was not reached
        within ``max_sweeps``; the best TT found is still returned.
    """
    config = config or TciConfig()
    if not isinstance(grid, IndexGrid):
        grid = IndexGrid(tuple(grid))
    start = time.perf_counter()
    lrn = _Learner(oracle, grid.local_dims, config)
    diag = TciDiagnostics()

    if grid.d == 1:
        # a single leg is just the vector of values
        vals = lrn.f(np.arange(grid.local_dims[0])[:, None])
        tt = TensorTrain([vals.reshape(1, -1, 1)])
        diag.errors.append(0.0)
        diag.errors_pivot_norm.append(0.0)
        diag.pivots_added.append(0)
        diag.converged = True
        diag.oracle_calls = lrn.calls
        diag.max_abs = lrn.fmax
        diag.initial_pivot = [int(np.argmax(np.abs(vals)))]
        diag.seconds = time.perf_counter() - start
        return tt, diag

    lrn.setup()
    diag.initial_pivot = [int(v) for v in lrn.pivot0]
    nb = grid.d - 1
    clean_sweeps = 0
    idle = 0
    for _ in range(config.max_sweeps):
        before = sum(lrn.I[b].shape[0] for b in range(nb))
        errs = [0.0] * nb
        for b in list(range(nb)) + list(range(nb - 1, -1, -1)):
            errs[b] = max(errs[b], lrn.visit(b))
        # global search only once the local sweeps have stalled
        local_idle = sum(lrn.I[b].shape[0] for b in range(nb)) == before
        gerr = lrn.global_search()[0] if local_idle else None
        diag.errors_global.append(gerr)
        added = sum(lrn.I[b].shape[0] for b in range(nb)) - before
        worst = max(errs)
        eps = worst / lrn.fmax if lrn.fmax > 0 else 0.0
        pmax = lrn.pivot_max()
        diag.errors.append(eps)
        diag.errors_pivot_norm.append(worst / pmax if pmax > 0 else 0.0)
        diag.pivots_added.append(added)
        clean = local_idle and max(eps, gerr or 0.0) <= config.tolerance and added == 0
        clean_sweeps = clean_sweeps + 1 if clean else 0
        if clean_sweeps >= 2:
            diag.converged = True
            break
        idle = idle + 1 if added == 0 else 0
        if idle >= config.stall_sweeps:
            # no bond accepts new pivots (conditioning or max_bond)
            diag.stalled = True
            break
        if added == 0 and all(lrn.I[b].shape[0] >= config.max_bond for b in range(nb)):
            break

    tt = lrn.to_tt()
    diag.oracle_calls = lrn.calls
    diag.bond_dims = tt.bond_dims
    diag.rejected_pivots = lrn.rejected
    diag.pivots = [np.hstack([lrn.I[b], lrn.J[b]]).tolist() for b in range(nb)]
    diag.max_abs = lrn.fmax
    diag.seconds = time.perf_counter() - start
    return tt, diag


def pivot_residuals(tt: TensorTrain, oracle, indices) -> np.ndarray:
    """|TT - F| at the given indices; used to check the interpolation property."""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    return np.abs(evaluate_many(tt, indices) - np.asarray(oracle(indices)))


def accuracy_fluctuation(learn_and_score: Callable[[int], tuple[float, bool]], seeds: Sequence[int]):
    """Mean and sample standard deviation of a downstream error over seeded learns.

    ``learn_and_score(seed)`` runs one learn and returns ``(error, converged)``.
    Non-converged trials are reported in ``excluded`` and left out of the
    statistics.
    """
    if len(seeds) < 2:
        raise ValueError("need at least two trials")
    errors, excluded = [], []
    for seed in seeds:
        err, ok = learn_and_score(seed)
        (errors if ok else excluded).append((seed, float(err)))
    vals = np.array([e for _, e in errors])
    mean = float(vals.mean()) if vals.size else float("nan")
    std = float(vals.std(ddof=1)) if vals.size > 1 else float("nan")
    return {"mean": mean, "std": std, "errors": errors, "excluded": excluded}
