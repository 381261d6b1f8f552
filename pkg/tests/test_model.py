import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ttoption.exceptions import DomainError, SizeError
from ttoption.model import (
    ModelParams,
    ParamGrid,
    QuadratureGrid,
    black_scholes_call,
    char_fn,
    covariance,
    integrand,
    params_at,
    payoff_ft_min_call,
    phi_oracle,
    price_prefactor,
    quadrature_price,
)


def test_char_fn_second_moment():
    # E[S_T^2] = s0^2 exp(2 r T + sigma^2 T)
    p = ModelParams.default(1)
    expected = 100.0**2 * math.exp(2 * 0.01 + 0.04)
    assert char_fn(np.array([-2j]), p) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.061837e4, rel=1e-6)


def test_char_fn_modulus_on_real_axis():
    p = ModelParams.default(1)
    assert abs(char_fn(np.array([1.0]), p)) == pytest.approx(math.exp(-0.02), rel=1e-12)
    assert char_fn(np.array([0.0]), p) == pytest.approx(1.0)


def test_char_fn_matches_gaussian_mgf_in_two_dims():
    p = ModelParams.default(2, sigma=[0.2, 0.3], s0=[90.0, 110.0])
    mu = np.log(p.s0) + (p.r - 0.5 * p.sigma**2) * p.T
    v = np.array([0.7, -1.2])
    # z = -i v gives E[exp(v . x)]
    expected = math.exp(v @ mu + 0.5 * v @ covariance(p) @ v)
    assert char_fn(-1j * v, p) == pytest.approx(expected, rel=1e-12)


def test_covariance_entries():
    p = ModelParams.default(2)
    assert covariance(p)[0, 1] == pytest.approx(0.04 / 3)
    assert covariance(p)[0, 0] == pytest.approx(0.04)


def test_payoff_transform_closed_values():
    assert payoff_ft_min_call(np.array([2j]), 100.0) == pytest.approx(0.005)
    assert payoff_ft_min_call(np.array([1j, 1j]), 100.0) == pytest.approx(0.01)


@pytest.mark.parametrize("z", [[0.5j], [0.3 + 0.8j, 0.1], [1.0 - 0.2j, 0.9j]])
def test_payoff_transform_domain(z):
    with pytest.raises(DomainError):
        payoff_ft_min_call(np.array(z), 100.0)


@pytest.mark.parametrize("z", [2j, 1.5 + 1.7j, -3.0 + 2.5j])
def test_payoff_transform_one_asset_quadrature(z):
    K = 100.0
    lo = math.log(K)

    def f(x, part):
        v = np.exp(1j * z * x) * (math.exp(x) - K)
        return v.real if part == 0 else v.imag

    num = complex(
        integrate.quad(f, lo, lo + 60, args=(0,), limit=400, epsabs=1e-13)[0],
        integrate.quad(f, lo, lo + 60, args=(1,), limit=400, epsabs=1e-13)[0],
    )
    assert payoff_ft_min_call(np.array([z]), K) == pytest.approx(num, abs=1e-6)


def test_payoff_transform_two_asset_quadrature():
    K = 2.0
    z = np.array([0.4 + 1.1j, -0.3 + 1.0j])
    lo, hi = math.log(K), math.log(K) + 40

    # split along the diagonal so each piece is smooth: x is the smaller log-price
    def f(y, x, part, zx, zy):
        v = np.exp(1j * (zx * x + zy * y)) * (math.exp(x) - K)
        return v.real if part == 0 else v.imag

    total = 0j
    for zx, zy in ((z[0], z[1]), (z[1], z[0])):
        for part, unit in ((0, 1.0), (1, 1j)):
            val = integrate.dblquad(f, lo, hi, lambda x: x, hi, args=(part, zx, zy),
                                    epsabs=1e-11, epsrel=1e-11)[0]
            total += unit * val
    assert payoff_ft_min_call(z, K) == pytest.approx(total, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(
    j=st.lists(st.integers(0, 100), min_size=2, max_size=2),
    k=st.lists(st.integers(0, 99), min_size=2, max_size=2),
)
def test_integrand_hermitian_symmetry(j, k):
    # the log-prices are real, so phi(-conj(w)) = conj(phi(w)); same for the payoff transform
    p = ModelParams.default(2)
    g = QuadratureGrid()
    pg = ParamGrid.for_axis("sigma")
    jm = [g.N - x for x in j]
    a = integrand(j, k, g, pg, p, "sigma")
    b = integrand(jm, k, g, pg, p, "sigma")
    assert b == pytest.approx(np.conj(a), rel=1e-12, abs=1e-300)


def test_phi_oracle_leg_orders_agree():
    p = ModelParams.default(3)
    g, pg = QuadratureGrid(), ParamGrid.for_axis("s0")
    j, k = np.array([[3, 50, 97]]), np.array([[0, 42, 99]])
    inter = np.empty((1, 6), dtype=int)
    inter[:, 0::2], inter[:, 1::2] = j, k
    sep = np.hstack([j, k])
    a = phi_oracle(p, g, pg, "s0")(inter)
    b = phi_oracle(p, g, pg, "s0", leg_order="separated")(sep)
    c = phi_oracle(params_at(p, "s0", pg, k[0]), g)(j)
    np.testing.assert_allclose(a, b, rtol=1e-14)
    np.testing.assert_allclose(a, c, rtol=1e-14)


def test_quadrature_price_one_asset_matches_black_scholes():
    p = ModelParams.default(1)
    bs = black_scholes_call(100.0, 100.0, 0.01, 0.2, 1.0)
    assert bs == pytest.approx(8.433318690109608, rel=1e-12)
    assert quadrature_price(p, QuadratureGrid(100, 0.4)) == pytest.approx(bs, abs=1e-3)


def test_quadrature_price_small_vol_on_adapted_grid():
    # with tiny sigma the characteristic function decays slowly: widen the grid
    p = ModelParams.default(1, sigma=0.05)
    bs = black_scholes_call(100.0, 100.0, 0.01, 0.05, 1.0)
    assert quadrature_price(p, QuadratureGrid(1000, 0.1)) == pytest.approx(bs, abs=1e-3)


def test_quadrature_price_size_cap():
    with pytest.raises(SizeError):
        quadrature_price(ModelParams.default(4), QuadratureGrid(), cap=1000)


def test_prefactor_uses_full_inverse_transform():
    p = ModelParams.default(3)
    g = QuadratureGrid(100, 0.4)
    assert price_prefactor(p, g) == pytest.approx(math.exp(-0.01) * 0.4**3 / (2 * math.pi) ** 3)


def test_param_grid_values_and_index():
    pg = ParamGrid.for_axis("sigma")
    assert pg.value(0) == pytest.approx(0.15)
    assert pg.value(99) == pytest.approx(0.249)
    assert int(pg.index(0.2)) == 50
    with pytest.raises(IndexError):
        pg.value(100)
    with pytest.raises(IndexError):
        pg.index(0.25)
    assert ParamGrid.single(0.3).value(0) == pytest.approx(0.3)


@pytest.mark.parametrize(
    "kw",
    [
        dict(rho=[[1.0, 1.5], [1.5, 1.0]]),
        dict(rho=[[1.0, 0.2], [0.3, 1.0]]),
        dict(sigma=-0.1),
        dict(alpha=0.2),
    ],
)
def test_model_params_validation(kw):
    with pytest.raises(ValueError):
        ModelParams.default(2, **kw)


def test_model_params_dict_roundtrip():
    p = ModelParams.default(3, sigma=[0.1, 0.2, 0.3])
    q = ModelParams.from_dict(p.to_dict())
    np.testing.assert_array_equal(q.sigma, p.sigma)
    np.testing.assert_array_equal(q.rho, p.rho)
    assert q.alpha[0] == pytest.approx(5 / 3)
