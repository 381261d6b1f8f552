import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_tt
from ttoption.tci import (
    IndexGrid,
    TciConfig,
    accuracy_fluctuation,
    batched,
    pivot_residuals,
    tci_learn,
)
from ttoption.tt import evaluate_many, to_dense


def separable_sum(rng, dims, rank):
    """Batched oracle for sum_k prod_i f_{k,i}(x_i) and its factor tables."""
    tables = [rng.standard_normal((rank, n)) + 0.5 for n in dims]

    def oracle(idx):
        idx = np.asarray(idx)
        out = np.ones((idx.shape[0], rank))
        for i, t in enumerate(tables):
            out *= t[:, idx[:, i]].T
        return out.sum(axis=1).astype(complex)

    return oracle


def dense_of(oracle, dims):
    idx = np.indices(dims).reshape(len(dims), -1).T
    return oracle(idx).reshape(dims)


def max_error(tt, oracle, dims, rng, samples=20_000):
    size = int(np.prod(dims))
    if size <= 10**6:
        ref = dense_of(oracle, dims)
        return np.abs(to_dense(tt) - ref).max() / np.abs(ref).max()
    idx = np.stack([rng.integers(0, n, samples) for n in dims], axis=1)
    ref = oracle(idx)
    return np.abs(evaluate_many(tt, idx) - ref).max() / np.abs(ref).max()


def test_rank_one_exact(rng):
    dims = [7, 4, 9, 5]
    oracle = separable_sum(rng, dims, 1)
    tt, diag = tci_learn(oracle, dims)
    assert diag.converged
    assert tt.bond_dims == [1, 1, 1]
    assert max_error(tt, oracle, dims, rng) <= 1e-12


def test_two_separable_terms_d6():
    rng = np.random.default_rng(6)
    dims = [10] * 6
    oracle = separable_sum(rng, dims, 2)
    tt, diag = tci_learn(oracle, dims)
    assert diag.converged
    assert tt.bond_dims == [2] * 5
    ref = dense_of(oracle, dims)
    assert np.abs(to_dense(tt) - ref).max() <= 1e-10


@settings(max_examples=25, deadline=None)
@given(
    d=st.integers(2, 8),
    n=st.integers(3, 20),
    rank=st.integers(1, 3),
    seed=st.integers(0, 2**16),
)
def test_separable_rank_recovered(d, n, rank, seed):
    rng = np.random.default_rng(seed)
    dims = [n] * d
    oracle = separable_sum(rng, dims, rank)
    tt, diag = tci_learn(oracle, dims, TciConfig(rng_seed=seed))
    assert diag.converged
    assert tt.bond_dims == [rank] * (d - 1)
    assert max_error(tt, oracle, dims, rng) <= 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**16), chi=st.integers(1, 4))
def test_exact_tt_oracle_recovered(seed, chi):
    rng = np.random.default_rng(seed)
    dims = [6, 5, 7, 4, 6]
    target = random_tt(rng, dims, [chi] * 4)
    dense = to_dense(target)

    def oracle(idx):
        return dense[tuple(np.asarray(idx).T)]

    tt, diag = tci_learn(oracle, dims, TciConfig(rng_seed=seed))
    assert diag.converged
    assert max(tt.bond_dims) <= chi
    assert np.abs(to_dense(tt) - dense).max() <= 1e-9 * np.abs(dense).max()


def test_interpolation_property_at_pivots(rng):
    dims = [12] * 4
    x = [np.linspace(0, 1, n) for n in dims]

    def oracle(idx):
        pts = np.stack([x[i][idx[:, i]] for i in range(len(dims))], axis=1)
        return np.exp(-np.sum(pts, axis=1) ** 2) + 0j

    tt, diag = tci_learn(oracle, dims, TciConfig(tolerance=1e-12))
    for pivots in diag.pivots:
        res = pivot_residuals(tt, oracle, pivots)
        assert np.all(res <= 1e-10 * np.abs(oracle(np.array(pivots))))
    assert diag.oracle_calls >= sum(len(p) for p in diag.pivots)


def test_bit_reproducible(rng):
    dims = [9] * 5
    oracle = separable_sum(rng, dims, 3)
    a, da = tci_learn(oracle, dims, TciConfig(rng_seed=3))
    b, db = tci_learn(oracle, dims, TciConfig(rng_seed=3))
    for ca, cb in zip(a.cores, b.cores):
        assert ca.tobytes() == cb.tobytes()
    assert da.errors == db.errors


def test_non_convergence_returns_best_tt():
    dims = [30] * 3
    rng = np.random.default_rng(0)
    dense = rng.standard_normal(dims)  # full rank noise

    def oracle(idx):
        return dense[tuple(np.asarray(idx).T)].astype(complex)

    tt, diag = tci_learn(oracle, dims, TciConfig(max_sweeps=1, max_bond=3))
    assert not diag.converged
    assert max(tt.bond_dims) <= 3
    assert len(diag.errors) == 1


def test_zero_oracle_fails():
    with pytest.raises(ValueError):
        tci_learn(lambda idx: np.zeros(len(idx), dtype=complex), [4, 4])


def test_initial_pivot_checked(rng):
    oracle = separable_sum(rng, [4, 4], 1)
    tt, diag = tci_learn(oracle, [4, 4], TciConfig(initial_pivot=[1, 2]))
    assert diag.initial_pivot == [1, 2]
    with pytest.raises(IndexError):
        tci_learn(oracle, [4, 4], TciConfig(initial_pivot=[4, 0]))


def test_single_leg_returns_vector():
    tt, diag = tci_learn(batched(lambda i: i[0] + 1.0), [5])
    np.testing.assert_allclose(to_dense(tt), np.arange(1, 6))
    assert diag.converged and diag.oracle_calls == 5


def test_diagnostics_json(rng):
    _, diag = tci_learn(separable_sum(rng, [5, 5, 5], 2), [5, 5, 5])
    rec = json.loads(diag.to_json())
    assert rec["converged"] and rec["bond_dims"] == [2, 2]
    assert len(rec["errors"]) == len(rec["errors_pivot_norm"])


def test_accuracy_fluctuation_rank_one():
    rng = np.random.default_rng(1)
    dims = [6] * 4
    oracle = separable_sum(rng, dims, 1)
    ref = dense_of(oracle, dims)

    def score(seed):
        tt, diag = tci_learn(oracle, dims, TciConfig(rng_seed=seed))
        return float(np.abs(to_dense(tt) - ref).max() > 1e-12), diag.converged

    stats = accuracy_fluctuation(score, [0, 1, 2, 3])
    assert stats["std"] == 0.0 and stats["mean"] == 0.0
    same = accuracy_fluctuation(score, [5, 5])
    assert same["errors"][0][1] == same["errors"][1][1]


def test_accuracy_fluctuation_excludes_failures():
    stats = accuracy_fluctuation(lambda s: (float(s), s != 2), [1, 2, 3])
    assert stats["excluded"] == [(2, 2.0)]
    assert stats["mean"] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        accuracy_fluctuation(lambda s: (0.0, True), [1])


@pytest.mark.parametrize("kw", [dict(tolerance=0.0), dict(max_bond=0), dict(max_sweeps=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TciConfig(**kw)


def test_index_grid_validation():
    assert IndexGrid([3, 4]).d == 2
    with pytest.raises(ValueError):
        IndexGrid([3, 0])


def test_unit_legs_do_not_freeze_rank():
    # legs of size 1 block the local two-site search; the global pass must recover rank 2
    rng = np.random.default_rng(8)
    dims = [6, 1, 6, 1]
    a = rng.standard_normal((6, 6))
    a = a[:, :2] @ a[:2, :]

    def oracle(idx):
        return a[idx[:, 0], idx[:, 2]].astype(complex)

    tt, diag = tci_learn(oracle, dims)
    assert diag.converged
    assert max(tt.bond_dims) == 2
    assert np.abs(to_dense(tt)[:, 0, :, 0] - a).max() <= 1e-10 * np.abs(a).max()
