"""Kernel construction, moments, and product evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from margint import (
    SUPPORTED_ORDERS,
    kernel_moment,
    make_kernel,
    product_kernel,
)


def test_order2_peak_value():
    assert make_kernel(2).evaluate(0.0) == pytest.approx(0.75, abs=1e-15)


def test_order2_second_moment():
    m2 = kernel_moment(make_kernel(2), 2, nodes=16)
    assert m2 == pytest.approx(0.2, abs=1e-12)


def test_order4_peak_value():
    assert make_kernel(4).evaluate(0.0) == pytest.approx(1.40625, abs=1e-12)


def test_order4_second_moment_vanishes():
    m2 = kernel_moment(make_kernel(4), 2, nodes=16)
    assert abs(m2) < 1e-12


def test_normalization_all_orders():
    for order in SUPPORTED_ORDERS:
        m0 = kernel_moment(make_kernel(order), 0, nodes=32)
        assert m0 == pytest.approx(1.0, abs=1e-10)


def test_low_moments_vanish_all_orders():
    for order in SUPPORTED_ORDERS:
        kern = make_kernel(order)
        for j in range(1, order):
            assert abs(kernel_moment(kern, j, nodes=32)) < 1e-8, (order, j)


def test_order_moment_nonzero():
    # A kernel of order k must have a nonvanishing k-th moment, otherwise
    # it would actually be of higher order.
    for order in SUPPORTED_ORDERS:
        assert abs(kernel_moment(make_kernel(order), order, nodes=32)) > 1e-4


def test_odd_moment_exactly_zero_by_symmetry():
    assert kernel_moment(make_kernel(2), 1, nodes=16) == pytest.approx(0.0, abs=1e-15)


def test_unsupported_order_rejected():
    for bad in (0, 1, 3, 5, 8, -2):
        with pytest.raises(ValueError, match="order"):
            make_kernel(bad)


def test_support_radius_one():
    for order in SUPPORTED_ORDERS:
        kern = make_kernel(order)
        assert kern.support_radius == 1.0
        assert kern.evaluate(1.0) == 0.0
        assert kern.evaluate(-1.0) == 0.0
        assert kern.evaluate(1.0000001) == 0.0
        assert kern.evaluate(-3.7) == 0.0


def test_vectorized_evaluation_matches_scalar():
    kern = make_kernel(6)
    u = np.linspace(-1.5, 1.5, 101)
    vec = kern.evaluate(u)
    assert vec.shape == u.shape
    for i in range(0, len(u), 7):
        assert vec[i] == pytest.approx(kern.evaluate(float(u[i])), abs=1e-15)


@given(st.floats(-1.0, 1.0))
def test_symmetry(u):
    for order in SUPPORTED_ORDERS:
        kern = make_kernel(order)
        assert kern.evaluate(u) == pytest.approx(kern.evaluate(-u), abs=1e-12)


@settings(max_examples=200)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_lipschitz_bound(u, v):
    for order in SUPPORTED_ORDERS:
        kern = make_kernel(order)
        gap = abs(kern.evaluate(u) - kern.evaluate(v))
        # Tiny additive slack covers rounding in the polynomial evaluation.
        assert gap <= kern.lipschitz * abs(u - v) + 1e-12


def test_lipschitz_constant_is_tightish():
    # The exposed constant should not be a wild overestimate: the max of
    # |K'| over a fine grid must come within 5% of it.
    for order in SUPPORTED_ORDERS:
        kern = make_kernel(order)
        u = np.linspace(-1, 1, 20001)
        slopes = np.abs(np.diff(kern.evaluate(u)) / np.diff(u))
        assert slopes.max() <= kern.lipschitz * (1 + 1e-9)
        assert slopes.max() >= kern.lipschitz * 0.95


def test_product_kernel_at_origin():
    prod = product_kernel(make_kernel(2), 2)
    assert prod.evaluate((0.0, 0.0)) == pytest.approx(0.5625, abs=1e-15)


def test_product_kernel_dim_one():
    prod = product_kernel(make_kernel(2), 1)
    assert prod.evaluate(0.5) == pytest.approx(0.5625, abs=1e-15)


def test_product_kernel_outside_support():
    prod = product_kernel(make_kernel(2), 3)
    assert prod.evaluate((0.0, 0.0, 2.0)) == 0.0


def test_product_kernel_batch_evaluation():
    prod = product_kernel(make_kernel(4), 2)
    pts = np.array([[0.0, 0.0], [0.3, -0.4], [1.2, 0.0]])
    vals = prod.evaluate(pts)
    assert vals.shape == (3,)
    base = make_kernel(4)
    assert vals[0] == pytest.approx(base.evaluate(0.0) ** 2, abs=1e-12)
    assert vals[1] == pytest.approx(
        base.evaluate(0.3) * base.evaluate(-0.4), abs=1e-12
    )
    assert vals[2] == 0.0


def test_product_kernel_integral_is_one():
    # Tensor quadrature over the product support.
    from margint import gauss_legendre

    prod = product_kernel(make_kernel(2), 2)
    x, w = gauss_legendre(16)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    ww = np.outer(w, w).ravel()
    assert ww @ prod.evaluate(pts) == pytest.approx(1.0, abs=1e-10)


def test_product_kernel_dim_zero_rejected():
    with pytest.raises(ValueError, match="dim"):
        product_kernel(make_kernel(2), 0)


def test_kernel_moment_rejects_negative_j():
    with pytest.raises(ValueError):
        kernel_moment(make_kernel(2), -1, nodes=16)


def test_kernels_are_immutable():
    kern = make_kernel(2)
    with pytest.raises(Exception):
        kern.support_radius = 2.0
