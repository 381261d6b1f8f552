"""Tensor trains (TT) and tensor train operators (TTO).

A :class:`TensorTrain` stores a chain of complex cores shaped
``(chi_left, n, chi_right)``; a :class:`TensorTrainOperator` stores cores
shaped ``(chi_left, n, m, chi_right)``.  Both are treated as immutable: every
operation returns a new object.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .exceptions import SizeError, StructureError

logger = logging.getLogger(__name__)

DENSE_CAP = 10**7
QR_COND_LIMIT = 1e12


def _check_chain(cores, ndim, kind):
    if len(cores) == 0:
        raise StructureError(f"{kind} needs at least one core")
    for i, c in enumerate(cores):
        if c.ndim != ndim:
            raise StructureError(f"{kind} core {i} has {c.ndim} axes, expected {ndim}")
        if any(n < 1 for n in c.shape[1:-1]):
            raise StructureError(f"{kind} core {i} has an empty physical leg")
    if cores[0].shape[0] != 1 or cores[-1].shape[-1] != 1:
        raise StructureError(f"{kind} boundary bonds must have dimension 1")
    for i in range(len(cores) - 1):
        if cores[i].shape[-1] != cores[i + 1].shape[0]:
            raise StructureError(
                f"bond {i} mismatch: {cores[i].shape[-1]} vs {cores[i + 1].shape[0]}"
            )


class TensorTrain:
    """Chain of 3-way complex cores representing a d-way tensor.

    Parameters
    ----------
    cores : sequence of ndarray
        Core ``i`` has shape ``(chi_{i-1}, N_i, chi_i)`` with ``chi_0 = chi_d = 1``.
    """

    __slots__ = ("_cores",)

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = tuple(np.ascontiguousarray(c, dtype=np.complex128) for c in cores)
        _check_chain(cores, 3, "TensorTrain")
        for c in cores:
            c.setflags(write=False)
        self._cores = cores

    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    def __len__(self):
        return len(self._cores)

    @property
    def local_dims(self) -> list[int]:
        return [c.shape[1] for c in self._cores]

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions ``chi_1 .. chi_{d-1}``."""
        return [c.shape[2] for c in self._cores[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def __repr__(self):
        return f"TensorTrain(local_dims={self.local_dims}, bond_dims={self.bond_dims})"

    def evaluate(self, index):
        return evaluate(self, index)

    def to_dense(self, cap=DENSE_CAP):
        return to_dense(self, cap)


class TensorTrainOperator:
    """Chain of 4-way complex cores ``(chi_left, n, m, chi_right)``."""

    __slots__ = ("_cores",)

    def __init__(self, cores: Sequence[np.ndarray]):
        cores = tuple(np.ascontiguousarray(c, dtype=np.complex128) for c in cores)
        _check_chain(cores, 4, "TensorTrainOperator")
        for c in cores:
            c.setflags(write=False)
        self._cores = cores

    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    def __len__(self):
        return len(self._cores)

    @property
    def in_dims(self) -> list[int]:
        return [c.shape[1] for c in self._cores]

    @property
    def out_dims(self) -> list[int]:
        return [c.shape[2] for c in self._cores]

    @property
    def bond_dims(self) -> list[int]:
        return [c.shape[3] for c in self._cores[:-1]]

    def __repr__(self):
        return (
            f"TensorTrainOperator(in_dims={self.in_dims}, out_dims={self.out_dims}, "
            f"bond_dims={self.bond_dims})"
        )

    def to_dense(self, cap=DENSE_CAP):
        """Dense array with axes ordered ``(j_1, k_1, ..., j_d, k_d)``."""
        size = int(np.prod([c.shape[1] * c.shape[2] for c in self._cores], dtype=float))
        if size > cap:
            raise SizeError(f"dense operator would hold {size} entries (cap {cap})")
        out = np.ones((1, 1), dtype=np.complex128)
        for c in self._cores:
            out = np.tensordot(out, c, axes=(-1, 0))
        return out.reshape(out.shape[1:-1])


@dataclass
class TruncationReport:
    """Outcome of :func:`truncate_svd`.

    ``discarded[b]`` is the squared Frobenius weight dropped at bond ``b``;
    ``relative_error`` is their sum divided by the squared norm of the input.
    """

    kept_ranks: list[int]
    discarded: list[float]
    relative_error: float
    tolerance: float
    norm_squared: float = 0.0
    warnings: list[str] = field(default_factory=list)


def mult_count(bond_dims: Sequence[int]) -> int:
    """Scalar multiplications needed to evaluate one TT entry.

    Starting from the boundary vector ``[1]`` each core slice costs
    ``chi_{i-1} * chi_i``, so the total is ``sum_{i=1..d} chi_{i-1} chi_i``
    with ``chi_0 = chi_d = 1``.
    """
    chis = [1, *bond_dims, 1]
    return int(sum(a * b for a, b in zip(chis[:-1], chis[1:])))


def evaluate(tt: TensorTrain, index) -> tuple[complex, int]:
    """Return ``(value, mult_count)`` for a single multi-index."""
    index = [int(i) for i in np.asarray(index).ravel()]
    if len(index) != len(tt):
        raise IndexError(f"index has length {len(index)}, TT has {len(tt)} cores")
    v = None
    for pos, (i, core) in enumerate(zip(index, tt.cores)):
        if not 0 <= i < core.shape[1]:
            raise IndexError(f"index {i} out of range for leg {pos} of size {core.shape[1]}")
        v = core[0, i, :] if v is None else v @ core[:, i, :]
    return complex(v[0]), mult_count(tt.bond_dims)


def evaluate_many(tt: TensorTrain, indices) -> np.ndarray:
    """Vectorized evaluation at the rows of an ``(n, d)`` integer array."""
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    if indices.shape[1] != len(tt):
        raise IndexError(f"indices have {indices.shape[1]} columns, TT has {len(tt)} cores")
    dims = np.array(tt.local_dims)
    if np.any(indices < 0) or np.any(indices >= dims):
        raise IndexError("index out of range")
    out = np.empty(indices.shape[0], dtype=np.complex128)
    # bound the gathered (chi, batch, chi) slabs
    chi = max([1, *tt.bond_dims])
    step = max(1, 2**22 // (chi * chi))
    for lo in range(0, indices.shape[0], step):
        blk = indices[lo : lo + step]
        v = tt.cores[0][0, blk[:, 0], :]
        for pos in range(1, len(tt)):
            core = tt.cores[pos].transpose(1, 0, 2)[blk[:, pos]]
            v = np.einsum("na,nab->nb", v, core)
        out[lo : lo + step] = v[:, 0]
    return out


def to_dense(tt: TensorTrain, cap: int = DENSE_CAP) -> np.ndarray:
    size = int(np.prod(tt.local_dims, dtype=float))
    if size > cap:
        raise SizeError(f"dense tensor would hold {size} entries (cap {cap})")
    out = tt.cores[0][0]
    for c in tt.cores[1:]:
        out = np.tensordot(out, c, axes=(-1, 0))
    return out[..., 0]


def from_dense(tensor, tolerance: float = 0.0) -> TensorTrain:
    """Exact (or tolerance-truncated) TT-SVD of a dense array."""
    tensor = np.asarray(tensor, dtype=np.complex128)
    dims = tensor.shape
    cores = []
    rest = tensor.reshape(1, -1)
    chi = 1
    for n in dims[:-1]:
        mat = rest.reshape(chi * n, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = max(1, int(np.sum(s > tolerance * (s[0] if s.size else 0.0))))
        cores.append(u[:, :keep].reshape(chi, n, keep))
        rest = s[:keep, None] * vh[:keep]
        chi = keep
    cores.append(rest.reshape(chi, dims[-1], 1))
    return TensorTrain(cores)


def norm(tt: TensorTrain) -> float:
    """Frobenius norm computed by transfer matrices."""
    env = np.ones((1, 1), dtype=np.complex128)
    for c in tt.cores:
        env = np.einsum("ab,aic,bid->cd", env, c.conj(), c, optimize=True)
    return float(np.sqrt(abs(env[0, 0].real)))


def inner(a: TensorTrain, b: TensorTrain) -> complex:
    """Bilinear (not conjugated) full contraction ``sum_x a[x] b[x]``."""
    if a.local_dims != b.local_dims:
        raise StructureError(f"local dims differ: {a.local_dims} vs {b.local_dims}")
    env = np.ones((1, 1), dtype=np.complex128)
    for ca, cb in zip(a.cores, b.cores):
        env = np.einsum("ab,aic,bid->cd", env, ca, cb, optimize=True)
    return complex(env[0, 0])


def _qr(mat):
    q, r = np.linalg.qr(mat)
    diag = np.abs(np.diag(r))
    if diag.size and diag.max() > 0:
        if diag.min() * QR_COND_LIMIT < diag.max():
            cond = diag.max() / max(diag.min(), 1e-300)
            q, r, perm = scipy.linalg.qr(mat, mode="economic", pivoting=True)
            inv = np.empty_like(perm)
            inv[perm] = np.arange(perm.size)
            r = r[:, inv]
            logger.debug("pivoted QR fallback (condition %.2e)", cond)
    return q, r


def _left_canonical(cores):
    cores = [np.array(c) for c in cores]
    for i in range(len(cores) - 1):
        a, n, b = cores[i].shape
        q, r = _qr(cores[i].reshape(a * n, b))
        cores[i] = q.reshape(a, n, q.shape[1])
        cores[i + 1] = np.tensordot(r, cores[i + 1], axes=(1, 0))
    return cores


def _right_canonical(cores):
    cores = [np.array(c) for c in cores]
    for i in range(len(cores) - 1, 0, -1):
        a, n, b = cores[i].shape
        q, r = _qr(cores[i].reshape(a, n * b).T)
        cores[i] = q.T.reshape(q.shape[1], n, b)
        cores[i - 1] = np.tensordot(cores[i - 1], r.T, axes=(2, 0))
    return cores


def canonicalize(tt: TensorTrain, direction: str = "left") -> TensorTrain:
    """QR sweep making all cores but the last (``left``) or first (``right``) isometries."""
    if direction == "left":
        return TensorTrain(_left_canonical(tt.cores))
    if direction == "right":
        return TensorTrain(_right_canonical(tt.cores))
    raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")


def truncate_svd(tt: TensorTrain, tolerance: float) -> tuple[TensorTrain, TruncationReport]:
    """Compress bond dimensions with a global relative squared-Frobenius budget.

    The TT is left-canonicalized, then swept right to left with SVDs.  Each of
    the ``d - 1`` bonds may discard at most ``tolerance / (d - 1)`` of the
    squared norm; because the sweep keeps the untouched part orthonormal the
    discarded weights add up exactly to the squared error.
    """
    if not 0.0 < tolerance < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {tolerance}")
    cores = _left_canonical(tt.cores)
    nsq = float(np.vdot(cores[-1], cores[-1]).real)
    nbonds = len(cores) - 1
    if nbonds == 0 or nsq == 0.0:
        report = TruncationReport(
            kept_ranks=[c.shape[2] for c in cores[:-1]],
            discarded=[0.0] * nbonds,
            relative_error=0.0,
            tolerance=tolerance,
            norm_squared=nsq,
        )
        return TensorTrain(cores), report

    budget = tolerance * nsq / nbonds
    discarded = [0.0] * nbonds
    kept = [0] * nbonds
    for i in range(nbonds, 0, -1):
        a, n, b = cores[i].shape
        u, s, vh = np.linalg.svd(cores[i].reshape(a, n * b), full_matrices=False)
        # tail[k] = weight dropped when keeping k singular values
        tail = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]])
        ok = np.nonzero(tail <= budget)[0]
        keep = max(1, int(ok[0]))
        discarded[i - 1] = float(tail[keep])
        kept[i - 1] = keep
        cores[i] = vh[:keep].reshape(keep, n, b)
        cores[i - 1] = np.tensordot(cores[i - 1], u[:, :keep] * s[:keep], axes=(2, 0))
    report = TruncationReport(
        kept_ranks=kept,
        discarded=discarded,
        relative_error=sum(discarded) / nsq,
        tolerance=tolerance,
        norm_squared=nsq,
    )
    return TensorTrain(cores), report


def pair_merge(tt: TensorTrain, pairing=None) -> TensorTrainOperator:
    """Contract cores ``(2m, 2m+1)`` into operator cores with legs ``(j_m, k_m)``."""
    ncores = len(tt)
    if ncores % 2:
        raise StructureError(f"pair_merge needs an even number of cores, got {ncores}")
    expected = [(2 * m, 2 * m + 1) for m in range(ncores // 2)]
    if pairing is None:
        pairing = expected
    pairing = [tuple(int(x) for x in p) for p in pairing]
    if pairing != expected:
        raise StructureError(f"pairing must group adjacent cores in order, got {pairing}")
    cores = [np.einsum("aib,bjc->aijc", tt.cores[p], tt.cores[q]) for p, q in pairing]
    return TensorTrainOperator(cores)


def contract_operator(tto: TensorTrainOperator, tt: TensorTrain, cutoff: float = 0.0) -> TensorTrain:
    """Sum out the ``j`` legs: ``out[k] = sum_j tto[j, k] * tt[j]``.

    With ``cutoff == 0`` the result bonds are the products of the input bonds;
    truncate afterwards.  A positive ``cutoff`` contracts left to right and
    drops singular values below ``cutoff * s_max`` at each bond on the fly
    (zip-up), which keeps memory bounded when the product bonds are large.
    """
    if len(tto) != len(tt):
        raise StructureError(f"operator has {len(tto)} cores, TT has {len(tt)}")
    if tto.in_dims != tt.local_dims:
        raise StructureError(f"operator in-dims {tto.in_dims} != TT dims {tt.local_dims}")
    if cutoff > 0:
        return _zip_up(tto, tt, cutoff)
    cores = []
    for o, v in zip(tto.cores, tt.cores):
        a, _, k, c = o.shape
        b, _, e = v.shape
        m = np.tensordot(o, v, axes=(1, 1))  # (a, k, c, b, e)
        cores.append(m.transpose(0, 3, 1, 2, 4).reshape(a * b, k, c * e))
    return TensorTrain(cores)


def _zip_up(tto, tt, cutoff):
    carry = np.ones((1, 1, 1), dtype=np.complex128)  # (new bond, tto bond, tt bond)
    cores = []
    last = len(tt) - 1
    for pos, (o, v) in enumerate(zip(tto.cores, tt.cores)):
        t = np.tensordot(carry, v, axes=(2, 0))  # (x, a, j, e)
        m = np.tensordot(t, o, axes=([1, 2], [0, 1])).transpose(0, 2, 3, 1)  # (x, k, c, e)
        x, k, c, e = m.shape
        if pos == last:
            cores.append(m.reshape(x, k, 1))
            break
        u, s, vh = np.linalg.svd(m.reshape(x * k, c * e), full_matrices=False)
        keep = max(1, int(np.sum(s > cutoff * s[0]))) if s[0] > 0 else 1
        cores.append(u[:, :keep].reshape(x, k, keep))
        carry = (s[:keep, None] * vh[:keep]).reshape(keep, c, e)
    return TensorTrain(cores)
