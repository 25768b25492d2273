"""Tabulated densities on uniform grids, with derivatives.

Everything downstream (scores, divergences, propriety checks) consumes a
``DensityGrid``: the x-axis, the density values and as many derivative
arrays as the construction needs.  Derivatives come from closed forms when
the density has one, otherwise from central finite differences on the
tabulated values.  All quadrature is the trapezoid rule on the uniform
grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError, StencilError

__all__ = [
    "DensityGrid",
    "trapezoid",
    "central_difference",
    "uniform_grid",
    "gaussian_grid",
    "exponential_grid",
    "lomax_grid",
]

# Relative non-uniformity tolerated in the x spacing.
_SPACING_RTOL = 1e-9


def uniform_grid(lo: float, hi: float, num: int) -> np.ndarray:
    """Uniform grid of `num` points on [lo, hi]."""
    if not hi > lo:
        raise DomainError(f"need hi > lo, got [{lo}, {hi}]")
    if num < 2:
        raise DomainError("need at least two grid points")
    return np.linspace(lo, hi, num)


def trapezoid(y: np.ndarray, h: float) -> float:
    """Trapezoid-rule integral of samples `y` with uniform spacing `h`."""
    y = np.asarray(y)
    if y.ndim != 1 or y.size < 2:
        raise GridMismatchError("trapezoid expects a 1-d array of >= 2 samples")
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))


def central_difference(y: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    """Finite-difference derivative of tabulated values.

    Orders 1 and 2 use the classic second-order three-point stencils,
    orders 3 and 4 the five-point stencils.  The outermost points, where
    the stencil does not fit, are filled with the nearest interior value;
    callers that care about edges should trim them.

    Parameters
    ----------
    y : array of samples on a uniform grid
    h : grid spacing
    order : derivative order, 1 to 4
    """
    y = np.asarray(y, dtype=np.result_type(y, float))
    n = y.size
    if order not in (1, 2, 3, 4):
        raise DomainError(f"derivative order must be 1..4, got {order}")
    k = 1 if order <= 2 else 2
    if n < 2 * k + 1:
        raise StencilError(
            f"grid of {n} points too short for the order-{order} stencil"
        )
    out = np.empty_like(y)
    c = slice(k, n - k)
    if order == 1:
        out[c] = (y[2:] - y[:-2]) / (2.0 * h)
    elif order == 2:
        out[c] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
    elif order == 3:
        out[c] = (-0.5 * y[:-4] + y[1:-3] - y[3:-1] + 0.5 * y[4:]) / h**3
    else:
        out[c] = (y[:-4] - 4.0 * y[1:-3] + 6.0 * y[2:-2] - 4.0 * y[3:-1] + y[4:]) / h**4
    out[:k] = out[k]
    out[n - k:] = out[n - k - 1]
    return out


@dataclass(frozen=True)
class DensityGrid:
    """A density tabulated on a uniform ascending grid.

    ``q1`` .. ``q4`` hold the first four derivatives where available;
    ``derivative(j)`` falls back to finite differences of ``q`` for any
    missing order.
    """

    x: np.ndarray
    q: np.ndarray
    q1: np.ndarray | None = None
    q2: np.ndarray | None = None
    q3: np.ndarray | None = None
    q4: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.result_type(self.x, float))
        q = np.asarray(self.q, dtype=x.dtype)
        if x.ndim != 1 or x.size < 5:
            raise GridMismatchError("grid needs a 1-d x axis of >= 5 points")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise DomainError("grid x must be strictly ascending")
        h = dx[0]
        if np.max(np.abs(dx - h)) > _SPACING_RTOL * abs(h):
            raise DomainError("grid x must be uniformly spaced")
        if q.shape != x.shape:
            raise GridMismatchError("q and x must have the same shape")
        if np.any(q < 0):
            raise DomainError("density values must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)
        for name in ("q1", "q2", "q3", "q4"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=x.dtype)
                if arr.shape != x.shape:
                    raise GridMismatchError(f"{name} must match x in shape")
                object.__setattr__(self, name, arr)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n(self) -> int:
        return int(self.x.size)

    def derivative(self, j: int) -> np.ndarray:
        """j-th derivative array; stored if available, else finite differences."""
        if j == 0:
            return self.q
        stored = getattr(self, f"q{j}", None) if 1 <= j <= 4 else None
        if stored is not None:
            return stored
        if not 1 <= j <= 4:
            raise DomainError(f"derivative order must be 0..4, got {j}")
        return central_difference(self.q, self.h, order=j)

    def integral(self, values: np.ndarray | None = None) -> float:
        """Trapezoid integral of `values` (default: the density itself)."""
        return trapezoid(self.q if values is None else values, self.h)

    def edge_density(self) -> float:
        return float(max(self.q[0], self.q[-1]))

    def check_mass(self, tol: float = 1e-3) -> bool:
        """True when the density integrates to 1 within `tol` on this grid."""
        return abs(self.integral() - 1.0) <= tol

    def same_axis(self, other: "DensityGrid") -> bool:
        return self.x.shape == other.x.shape and bool(
            np.allclose(self.x, other.x, rtol=0, atol=_SPACING_RTOL * abs(self.h))
        )

    @classmethod
    def from_callable(
        cls,
        pdf: Callable[[np.ndarray], np.ndarray],
        x: np.ndarray,
        derivs: Sequence[Callable[[np.ndarray], np.ndarray]] = (),
        n_derivs: int = 2,
    ) -> "DensityGrid":
        """Tabulate `pdf` on `x`.

        `derivs` supplies closed-form derivative callables in order; any
        remaining orders up to `n_derivs` are filled by central finite
        differences of the tabulated density.
        """
        x = np.asarray(x, dtype=np.result_type(x, float))
        q = np.asarray(pdf(x), dtype=x.dtype)
        h = float(x[1] - x[0])
        cols: dict[str, np.ndarray] = {}
        for j in range(1, min(n_derivs, 4) + 1):
            if j <= len(derivs):
                cols[f"q{j}"] = np.asarray(derivs[j - 1](x), dtype=x.dtype)
            else:
                cols[f"q{j}"] = central_difference(q, h, order=j)
        return cls(x=x, q=q, **cols)


def _as_grid(x, fns, dtype):
    x = np.asarray(x, dtype=dtype)
    arrays = [np.asarray(f(x), dtype=dtype) for f in fns]
    return DensityGrid(x, *arrays)


def gaussian_grid(mu: float, sigma: float, x: np.ndarray, n_derivs: int = 2,
                  dtype=float) -> DensityGrid:
    """Normal density with analytic derivatives (Hermite recursion)."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    mu = dtype(mu)
    sigma = dtype(sigma)

    def pdf(t):
        z = (t - mu) / sigma
        return np.exp(-0.5 * z * z) / (np.sqrt(dtype(2.0) * np.pi) * sigma)

    def d1(t):
        z = (t - mu) / sigma
        return -z / sigma * pdf(t)

    def d2(t):
        z = (t - mu) / sigma
        return (z * z - 1) / sigma**2 * pdf(t)

    def d3(t):
        z = (t - mu) / sigma
        return -z * (z * z - 3) / sigma**3 * pdf(t)

    def d4(t):
        z = (t - mu) / sigma
        return (z**4 - 6 * z * z + 3) / sigma**4 * pdf(t)

    fns = [pdf, d1, d2, d3, d4][: n_derivs + 1]
    return _as_grid(x, fns, dtype)


def exponential_grid(rate: float, x: np.ndarray, n_derivs: int = 2,
                     dtype=float) -> DensityGrid:
    """Exponential density on x >= 0 with analytic derivatives."""
    if rate <= 0:
        raise DomainError("rate must be positive")
    if np.any(np.asarray(x) < 0):
        raise DomainError("exponential density needs x >= 0")
    lam = dtype(rate)
    fns = [lambda t, j=j: (-lam) ** j * lam * np.exp(-lam * t)
           for j in range(n_derivs + 1)]
    return _as_grid(x, fns, dtype)


def lomax_grid(a: float, x: np.ndarray, n_derivs: int = 2,
               dtype=float) -> DensityGrid:
    """Density a/(a+x)^2 on x >= 0 with analytic derivatives.

    Derivative j is a * (-1)^j * (j+1)! / (a+x)^(j+2).
    """
    if a <= 0:
        raise DomainError("a must be positive")
    if np.any(np.asarray(x) < 0):
        raise DomainError("this density lives on x >= 0")
    a = dtype(a)
    fact = [1, 2, 6, 24, 120]  # fact[j] = (j+1)!
    fns = [lambda t, j=j: a * (-1) ** j * fact[j] / (a + t) ** (j + 2)
           for j in range(n_derivs + 1)]
    return _as_grid(x, fns, dtype)
