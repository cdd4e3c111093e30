"""Compactly supported polynomial smoothing kernels and tensor products.

All kernels produced here live on [-1, 1] and are even polynomials, stored
as coefficients in the squared argument z = u**2.  A kernel of order k
integrates to one while its moments 1..k-1 vanish, which is what the bias
expansions of the estimators in this package require.  Orders 2, 4 and 6
are built by multiplying the parabolic (Epanechnikov) profile with an even
polynomial whose coefficients are solved from the vanishing-moment
conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (2, 4, 6)

# 0.75 * (1 - z) with z = u**2: the base profile all orders share.
_BASE_POLY_Z = np.array([0.75, -0.75])


def _base_even_moment(r: int) -> float:
    """Moment of u**(2r) against the parabolic profile on [-1, 1]."""
    return 3.0 / ((2 * r + 1) * (2 * r + 3))


@dataclass(frozen=True)
class Kernel1D:
    """One-dimensional even kernel with compact support.

    Attributes
    ----------
    order : int
        First non-vanishing moment index (2, 4 or 6).
    support_radius : float
        Half-width of the support interval, fixed at 1.0.
    poly_z : np.ndarray
        Ascending coefficients of the profile as a polynomial in z = u**2.
    factor_z : np.ndarray
        Ascending coefficients of F with K(u) = F(z) * max(1 - z, 0); the
        parabolic factor doubles as the support indicator, which the hot
        loops exploit to stay branch-free.
    lipschitz : float
        Supremum of |K'| over the support.
    """

    order: int
    support_radius: float
    poly_z: np.ndarray
    factor_z: np.ndarray
    lipschitz: float

    def __call__(self, u):
        return self.evaluate(u)

    def evaluate(self, u):
        """Evaluate the kernel at u (scalar or array).

        Returns exactly 0.0 outside (-support_radius, support_radius).
        """
        arr = np.asarray(u, dtype=float)
        z = (arr / self.support_radius) ** 2
        acc = np.full_like(z, self.poly_z[-1])
        for c in self.poly_z[-2::-1]:
            acc = acc * z + c
        out = np.where(z < 1.0, acc / self.support_radius, 0.0)
        if np.isscalar(u) or arr.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class ProductKernel:
    """Tensor product of one-dimensional kernels, one factor per axis."""

    factors: tuple[Kernel1D, ...]

    @property
    def dim(self) -> int:
        return len(self.factors)

    def __call__(self, v):
        return self.evaluate(v)

    def evaluate(self, v):
        """Evaluate at a point of shape (dim,) or a batch of shape (m, dim)."""
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.shape[-1] != self.dim and not (self.dim == 0 and arr.size == 0):
            raise ValueError(
                f"expected points with {self.dim} coordinates, got shape {arr.shape}"
            )
        if self.dim == 0:
            shape = arr.shape[:-1] if arr.ndim > 1 else ()
            out = np.ones(shape) if shape else 1.0
            return out
        single = arr.ndim == 1
        pts = arr.reshape(-1, self.dim)
        acc = np.ones(pts.shape[0])
        for axis, factor in enumerate(self.factors):
            acc = acc * factor.evaluate(pts[:, axis])
        if single:
            return float(acc[0])
        return acc.reshape(arr.shape[:-1])


def _lipschitz_constant(poly_z: np.ndarray) -> float:
    """Max of |K'| on [-1, 1] for a profile given in z = u**2."""
    # Rewrite as a polynomial in u (even powers only), differentiate twice
    # and inspect critical points of K' inside the support.
    coeffs_u = np.zeros(2 * len(poly_z) - 1)
    coeffs_u[::2] = poly_z
    k = np.polynomial.Polynomial(coeffs_u)
    dk = k.deriv()
    d2k = dk.deriv()
    crit = [0.0, 1.0]
    for r in d2k.roots():
        if abs(r.imag) < 1e-12 and 0.0 <= r.real <= 1.0:
            crit.append(float(r.real))
    return float(max(abs(dk(c)) for c in crit))


def make_kernel(order: int) -> Kernel1D:
    """Build the polynomial kernel of the requested order on [-1, 1].

    Parameters
    ----------
    order : int
        One of 2, 4, 6.  Moments 1..order-1 of the result vanish and the
        kernel integrates to one.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(
            f"unsupported kernel order {order!r}; supported orders are {SUPPORTED_ORDERS}"
        )
    m = order // 2
    moments = np.array(
        [[_base_even_moment(i + j) for j in range(m)] for i in range(m)]
    )
    rhs = np.zeros(m)
    rhs[0] = 1.0
    correction = np.linalg.solve(moments, rhs)
    poly_z = np.convolve(correction, _BASE_POLY_Z)
    return Kernel1D(
        order=order,
        support_radius=1.0,
        poly_z=poly_z,
        factor_z=0.75 * correction,
        lipschitz=_lipschitz_constant(poly_z),
    )


def product_kernel(base: Kernel1D, dim: int) -> ProductKernel:
    """Tensor power of a one-dimensional kernel over `dim` axes."""
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"product kernel dimension must be a positive integer, got {dim!r}")
    return ProductKernel(factors=(base,) * int(dim))


def kernel_moment(kernel: Kernel1D, j: int, nodes: int = 32) -> float:
    """j-th moment of the kernel via Gauss-Legendre quadrature.

    The node count must make the rule exact for the polynomial degree of
    u**j * K(u); 32 nodes cover every kernel this module can build.
    """
    if j < 0:
        raise ValueError(f"moment index must be nonnegative, got {j}")
    from .integration import gauss_legendre, map_to_interval

    x, w = gauss_legendre(nodes)
    r = kernel.support_radius
    x, w = map_to_interval(x, w, -r, r)
    return float(np.sum(w * x**j * kernel.evaluate(x)))
