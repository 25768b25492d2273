"""Proper local scoring rules built from convex generators.

A scalar convex function alpha lifts to a 1-homogeneous bivariate function
phi(u, v) = u * alpha(v / u).  Feeding density values and derivatives into
phi yields a Bregman divergence between densities, and the divergence in
turn induces a local scoring rule

    S(q, q', q'') = d/dx alpha'(q'/q) - alpha(q'/q) + (q'/q) alpha'(q'/q).

alpha(u) = u^2 recovers the classic gradient-matching score
2 q''/q - (q'/q)^2; alpha(u) = u^-2 on the branch u < 0 produces the score
whose zero set is the heavy-tailed density a/(a+x)^2 implemented in
:mod:`scoreprior.priors`.  Higher-order variants take a chain of
generators, one per derivative ratio.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DomainError,
    GridMismatchError,
    ResolutionError,
    SingularityError,
    StencilError,
)
from .grids import DensityGrid, central_difference, trapezoid

__all__ = [
    "ConvexGenerator",
    "PhiGenerator",
    "ScoreFunction",
    "square_generator",
    "inverse_square_generator",
    "shannon_generator",
    "log_score_generator",
    "score_order2",
    "hyvarinen_score",
    "new_prior_score",
    "log_score",
    "score_order_m",
    "bregman_div_1d",
    "bregman_div_2d",
    "DecompositionResult",
    "decomposition_check",
    "ProprietyResult",
    "propriety_check",
    "euler_lagrange_residual",
    "check_convexity",
    "solve_score_zero",
]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexGenerator:
    """A smooth convex scalar function with its first two derivatives.

    `domain` is the open interval on which the function is registered;
    score evaluation checks the derivative ratio against it.
    """

    alpha: Callable[[np.ndarray], np.ndarray]
    alpha_d1: Callable[[np.ndarray], np.ndarray]
    alpha_d2: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "alpha"

    def contains(self, u) -> np.ndarray:
        lo, hi = self.domain
        u = np.asarray(u)
        return (u > lo) & (u < hi)

    def derivative_residual(self, points: np.ndarray, step: float = 1e-6) -> float:
        """Max relative mismatch of alpha_d1 against central differences."""
        u = np.asarray(points, dtype=float)
        if not np.all(self.contains(u)):
            raise DomainError(f"points leave the domain of {self.name}")
        hloc = step * np.maximum(np.abs(u), 1.0)
        fd = (self.alpha(u + hloc) - self.alpha(u - hloc)) / (2 * hloc)
        d1 = self.alpha_d1(u)
        return float(np.max(np.abs(fd - d1) / np.maximum(np.abs(d1), 1e-8)))

    def convexity_ok(self, points: np.ndarray) -> bool:
        """alpha'' > 0 at every sampled point."""
        return bool(np.all(self.alpha_d2(np.asarray(points)) > 0))


def square_generator() -> ConvexGenerator:
    """alpha(u) = u^2 on the whole line."""
    return ConvexGenerator(
        alpha=lambda u: u * u,
        alpha_d1=lambda u: 2.0 * u,
        alpha_d2=lambda u: 2.0 * np.ones_like(np.asarray(u, dtype=np.result_type(u, float))),
        domain=(-math.inf, math.inf),
        name="u^2",
    )


def inverse_square_generator(branch: int = -1) -> ConvexGenerator:
    """alpha(u) = u^-2 on one sign branch.

    The default branch u < 0 is the one a decreasing density q on (0, inf)
    lives on, since there q'/q is negative everywhere.
    """
    if branch not in (-1, 1):
        raise DomainError("branch must be -1 (u<0) or +1 (u>0)")
    dom = (-math.inf, 0.0) if branch == -1 else (0.0, math.inf)
    return ConvexGenerator(
        alpha=lambda u: u ** -2.0,
        alpha_d1=lambda u: -2.0 * u ** -3.0,
        alpha_d2=lambda u: 6.0 * u ** -4.0,
        domain=dom,
        name="u^-2",
    )


def shannon_generator() -> ConvexGenerator:
    """alpha(t) = t log t on t > 0 (generates the KL Bregman divergence)."""
    return ConvexGenerator(
        alpha=lambda t: t * np.log(t),
        alpha_d1=lambda t: 1.0 + np.log(t),
        alpha_d2=lambda t: 1.0 / t,
        domain=(0.0, math.inf),
        name="t log t",
    )


def log_score_generator() -> ConvexGenerator:
    """alpha(u) = u log u - u on u > 0 (order-0 score generator)."""
    return ConvexGenerator(
        alpha=lambda u: u * np.log(u) - u,
        alpha_d1=lambda u: np.log(u),
        alpha_d2=lambda u: 1.0 / u,
        domain=(0.0, math.inf),
        name="u log u - u",
    )


@dataclass(frozen=True)
class PhiGenerator:
    """Bivariate generator phi(u, v) with partial derivatives.

    Built from a ConvexGenerator as phi(u, v) = u * alpha(v/u), or supplied
    directly.  When partials are omitted they default to central finite
    differences of phi.
    """

    phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
    partial_u: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    partial_v: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    source: ConvexGenerator | None = None
    name: str = "phi"

    def __post_init__(self):
        if self.partial_u is None:
            object.__setattr__(self, "partial_u", self._fd_partial(0))
        if self.partial_v is None:
            object.__setattr__(self, "partial_v", self._fd_partial(1))

    def _fd_partial(self, slot: int, rel: float = 1e-7):
        def fd(u, v):
            u = np.asarray(u, dtype=np.result_type(u, float))
            v = np.asarray(v, dtype=u.dtype)
            if slot == 0:
                d = rel * np.maximum(np.abs(u), 1e-3)
                return (self.phi(u + d, v) - self.phi(u - d, v)) / (2 * d)
            d = rel * np.maximum(np.abs(v), 1e-3)
            return (self.phi(u, v + d) - self.phi(u, v - d)) / (2 * d)
        return fd

    @classmethod
    def from_alpha(cls, gen: ConvexGenerator) -> "PhiGenerator":
        def phi(u, v):
            return u * gen.alpha(v / u)

        def pu(u, v):
            r = v / u
            return gen.alpha(r) - r * gen.alpha_d1(r)

        def pv(u, v):
            return gen.alpha_d1(v / u)

        return cls(phi=phi, partial_u=pu, partial_v=pv, source=gen,
                   name=f"u*({gen.name})(v/u)")

    def locality_residual(self, points: np.ndarray) -> float:
        """Max relative gap in phi = u phi_u + v phi_v over (u, v) pairs."""
        pts = np.asarray(points, dtype=float)
        u, v = pts[:, 0], pts[:, 1]
        lhs = self.phi(u, v)
        rhs = u * self.partial_u(u, v) + v * self.partial_v(u, v)
        return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1e-12)))

    def homogeneity_residual(self, points: np.ndarray,
                             lams: Sequence[float] = (0.5, 2.0, 7.0)) -> float:
        """Max relative gap in phi(lam u, lam v) = lam phi(u, v)."""
        pts = np.asarray(points, dtype=float)
        u, v = pts[:, 0], pts[:, 1]
        base = self.phi(u, v)
        worst = 0.0
        for lam in lams:
            gap = np.abs(self.phi(lam * u, lam * v) - lam * base)
            worst = max(worst, float(np.max(gap / np.maximum(np.abs(lam * base), 1e-12))))
        return worst


# ---------------------------------------------------------------------------
# score functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreFunction:
    """A local scoring rule of some derivative order.

    `pointwise(x, q, q1, ..., q_order)` evaluates the score from local
    values alone when the order permits; `grid_eval` evaluates on a whole
    DensityGrid (required for order > 2 where total x-derivatives of the
    generator partials cannot be formed pointwise).
    """

    order: int
    provenance: str
    pointwise: Callable | None = None
    grid_eval: Callable[[DensityGrid], np.ndarray] | None = None

    def __call__(self, x, *qderivs):
        if self.pointwise is None:
            raise DomainError(
                f"score of order {self.order} has no pointwise form; "
                "evaluate it on a DensityGrid"
            )
        if len(qderivs) != self.order + 1:
            raise DomainError(
                f"expected q and {self.order} derivatives, got {len(qderivs)} arrays"
            )
        return self.pointwise(x, *qderivs)

    def on_grid(self, grid: DensityGrid) -> np.ndarray:
        if self.grid_eval is not None:
            return self.grid_eval(grid)
        args = [grid.derivative(j) for j in range(self.order + 1)]
        return self.pointwise(grid.x, *args)


def _check_positive_density(q):
    q = np.asarray(q)
    if np.any(q <= 0):
        i = int(np.argmax(q <= 0))
        raise DomainError(f"density must be positive; q={q.reshape(-1)[i]} found")


def hyvarinen_score(q, q1, q2):
    """Gradient-matching score 2 q''/q - (q'/q)^2."""
    _check_positive_density(q)
    q = np.asarray(q)
    return 2.0 * q2 / q - (q1 / q) ** 2


def new_prior_score(q, q1, q2):
    """Score 3 (q/q')^2 (2 q q''/(q')^2 - 3); zero exactly at a/(a+x)^2.

    Promotes to the widest dtype of its inputs, so extended-precision
    arrays keep extended precision through the cancellation.
    """
    _check_positive_density(q)
    q = np.asarray(q)
    q1 = np.asarray(q1, dtype=np.result_type(q, q1, q2, float))
    q2 = np.asarray(q2, dtype=q1.dtype)
    if np.any(q1 == 0):
        i = int(np.argmax(np.asarray(q1) == 0))
        raise SingularityError(f"q' vanishes at index {i}; the score needs q' != 0")
    return 3.0 * (q / q1) ** 2 * (2.0 * q * q2 / q1 ** 2 - 3.0)


def log_score() -> ScoreFunction:
    """Order-0 score -log q."""
    def pw(x, q):
        _check_positive_density(q)
        return -np.log(q)
    return ScoreFunction(order=0, provenance="-log q", pointwise=pw)


def score_order2(gen: ConvexGenerator) -> ScoreFunction:
    """Order-2 score induced by a scalar convex generator.

    S = alpha''(r) (q'' q - q'^2)/q^2 - alpha(r) + r alpha'(r), r = q'/q.
    Evaluation raises DomainError when r leaves gen.domain.
    """

    def pw(x, q, q1, q2):
        _check_positive_density(q)
        q = np.asarray(q)
        q1 = np.asarray(q1)
        q2 = np.asarray(q2)
        r = q1 / q
        ok = gen.contains(r)
        if not np.all(ok):
            i = int(np.argmax(~np.asarray(ok)))
            raise DomainError(
                f"ratio q'/q = {np.asarray(r).reshape(-1)[i]} at index {i} "
                f"outside domain {gen.domain} of {gen.name}"
            )
        rdot = (q2 * q - q1 ** 2) / q ** 2
        return gen.alpha_d2(r) * rdot - gen.alpha(r) + r * gen.alpha_d1(r)

    return ScoreFunction(order=2, provenance=f"order-2 from {gen.name}", pointwise=pw)


def score_order_m(alphas: Sequence[ConvexGenerator] | None, m: int) -> ScoreFunction:
    """Score of derivative order 2m from a chain of m generators.

    The generator is phi(u_0 .. u_m) = sum_j u_j alpha_j(u_{j+1}/u_j) and
    the score sum_{j<=m} (-1)^(j+1) d^j/dx^j  dphi/du_j, with the total
    x-derivatives taken by nested central differences on the grid.

    m = 0 is the log score; m = 1 with alpha = u^2 reproduces
    ``hyvarinen_score``.  m > 2 is accepted but experimental.
    """
    if m < 0:
        raise DomainError("order must be >= 0")
    if m == 0:
        return log_score()
    alphas = list(alphas or [])
    if len(alphas) != m:
        raise DomainError(f"need {m} generators for order m={m}, got {len(alphas)}")
    if m > 2:
        warnings.warn("scores with m > 2 are experimental", RuntimeWarning,
                      stacklevel=2)

    def dphi(derivs: list[np.ndarray]) -> list[np.ndarray]:
        # partial of phi w.r.t. each derivative slot
        ratios = [derivs[j + 1] / derivs[j] for j in range(m)]
        parts = []
        for j in range(m + 1):
            total = 0.0
            if j < m:
                r = ratios[j]
                total = alphas[j].alpha(r) - r * alphas[j].alpha_d1(r)
            if j > 0:
                total = total + alphas[j - 1].alpha_d1(ratios[j - 1])
            parts.append(np.asarray(total))
        return parts

    def grid_eval(grid: DensityGrid) -> np.ndarray:
        if grid.n < 2 * m + 5:
            raise StencilError(
                f"grid of {grid.n} points too short for an order-{m} score"
            )
        _check_positive_density(grid.q)
        derivs = [grid.derivative(j) for j in range(m + 1)]
        parts = dphi(derivs)
        out = np.zeros_like(grid.q)
        for j, pj in enumerate(parts):
            term = pj
            for _ in range(j):
                term = np.gradient(term, grid.h, edge_order=2)
            out = out + (-1.0) ** (j + 1) * term
        return out

    pw = None
    if m == 1:
        # S = -dphi/du0 + d/dx dphi/du1, both expressible in local values
        a = alphas[0]

        def pw(x, q, q1, q2):
            _check_positive_density(q)
            r = q1 / q
            rdot = (q2 * q - q1 ** 2) / q ** 2
            term0 = -(a.alpha(r) - r * a.alpha_d1(r))
            term1 = a.alpha_d2(r) * rdot
            return term0 + term1

    names = ",".join(a.name for a in alphas)
    return ScoreFunction(order=2 * m, provenance=f"order-{2 * m} chain [{names}]",
                         pointwise=pw, grid_eval=grid_eval)


# ---------------------------------------------------------------------------
# divergences
# ---------------------------------------------------------------------------

def bregman_div_1d(phi: ConvexGenerator, p: DensityGrid, q: DensityGrid) -> float:
    """Bregman divergence of density values only.

    integral of phi(p) - phi(q) - phi'(q)(p - q) over the shared grid.
    """
    if not p.same_axis(q):
        raise GridMismatchError("p and q must share the same x grid")
    integrand = phi.alpha(p.q) - phi.alpha(q.q) - phi.alpha_d1(q.q) * (p.q - q.q)
    return trapezoid(integrand, p.h)


def bregman_div_2d(phi: PhiGenerator, p: DensityGrid, q: DensityGrid) -> float:
    """Bregman divergence of (density, derivative) pairs."""
    if not p.same_axis(q):
        raise GridMismatchError("p and q must share the same x grid")
    pu, pv = p.q, p.derivative(1)
    qu, qv = q.q, q.derivative(1)
    integrand = (phi.phi(pu, pv) - phi.phi(qu, qv)
                 - phi.partial_u(qu, qv) * (pu - qu)
                 - phi.partial_v(qu, qv) * (pv - qv))
    return trapezoid(integrand, p.h)


class DecompositionResult(NamedTuple):
    div: float
    info: float
    expected_score: float
    residual: float
    boundary_term: float
    boundary_warning: bool


def decomposition_check(phi: PhiGenerator, p: DensityGrid,
                        q: DensityGrid) -> DecompositionResult:
    """Split the divergence into information plus expected score.

    On a finite grid the exact identity is
        D(p, q) = I(p) + E_p S(q) + [p phi_v(q, q')]_{lo}^{hi} * (-1),
    so the returned residual subtracts the explicit boundary term
    p(lo) phi_v(lo) - p(hi) phi_v(hi).  A boundary warning is attached when
    either density exceeds 1e-6 at an edge; for heavy tails the boundary
    term is then genuinely large and only the corrected identity is exact.
    """
    if not p.same_axis(q):
        raise GridMismatchError("p and q must share the same x grid")
    div = bregman_div_2d(phi, p, q)
    pu, pv = p.q, p.derivative(1)
    qu, qv = q.q, q.derivative(1)
    info = trapezoid(phi.phi(pu, pv), p.h)
    if phi.source is not None:
        svals = score_order2(phi.source)(q.x, qu, qv, q.derivative(2))
    else:
        svals = -phi.partial_u(qu, qv) + np.gradient(phi.partial_v(qu, qv),
                                                     q.h, edge_order=2)
    expected = trapezoid(p.q * svals, p.h)
    bt = float(pu[0] * phi.partial_v(qu[0], qv[0])
               - pu[-1] * phi.partial_v(qu[-1], qv[-1]))
    residual = abs(div - info - expected - bt)
    warn = max(p.edge_density(), q.edge_density()) > 1e-6
    return DecompositionResult(div, info, expected, residual, bt, warn)


class ProprietyResult(NamedTuple):
    ok: bool
    violating_index: int | None

    def __bool__(self) -> bool:  # allows `if propriety_check(...)`
        return self.ok


def propriety_check(score: ScoreFunction, p: DensityGrid,
                    perturbations: Sequence[DensityGrid],
                    tol: float = 1e-6) -> ProprietyResult:
    """True when p minimises the expected score over the perturbations.

    Checks integral p S(p) <= integral p S(q) + tol for every q; on
    failure the index of the first violating perturbation is reported.
    """
    base = trapezoid(p.q * score.on_grid(p), p.h)
    for i, q in enumerate(perturbations):
        if not p.same_axis(q):
            raise GridMismatchError(f"perturbation {i} is on a different x grid")
        val = trapezoid(p.q * score.on_grid(q), p.h)
        if not base <= val + tol:
            return ProprietyResult(False, i)
    return ProprietyResult(True, None)


# ---------------------------------------------------------------------------
# variational identity
# ---------------------------------------------------------------------------

def _sliding_max(a: np.ndarray, w: int) -> np.ndarray:
    n = a.size
    out = np.empty(n)
    for i in range(n):
        out[i] = np.max(a[max(0, i - w):min(n, i + w + 1)])
    return out


def _slot_partial(fn, x, args, slot, eps, window=8):
    scale = _sliding_max(np.abs(args[slot]), window)
    d = eps * np.maximum(np.abs(args[slot]), 0.05 * scale) + 1e-300
    hi = list(args)
    lo = list(args)
    hi[slot] = args[slot] + d
    lo[slot] = args[slot] - d
    return (fn(x, *hi) - fn(x, *lo)) / (2.0 * d)


def euler_lagrange_residual(score: ScoreFunction, q: DensityGrid,
                            stride: int = 4, trim: int = 16) -> np.ndarray:
    """Pointwise residual of the stationarity identity a proper order-2
    local score must satisfy:

        q dS/dq - d/dx (q dS/dq') + d2/dx2 (q dS/dq'') = 0.

    Partials of S are slot-wise central differences; the q'' step is large
    because order-2 scores of this family are linear in q'' and the outer
    second x-derivative amplifies evaluation noise by 1/h^2.  The total
    x-derivatives use strided central stencils.  The first and last `trim`
    points are NaN: the sliding scale window and the strided stencils both
    lean on one-sided data there.
    """
    if score.order != 2 or score.pointwise is None:
        raise DomainError("the identity applies to pointwise order-2 scores")
    if q.n < 2 * trim + 8:
        raise StencilError(f"grid of {q.n} points too short; trim={trim}")
    x, h = q.x, q.h
    args = (q.q, q.derivative(1), q.derivative(2))
    fn = score.pointwise
    s_q = _slot_partial(fn, x, args, 0, 1e-6)
    s_q1 = _slot_partial(fn, x, args, 1, 1e-5)
    s_q2 = _slot_partial(fn, x, args, 2, 1e-2)
    A = q.q * s_q1
    B = q.q * s_q2
    m = stride
    dA = np.empty_like(A)
    dA[m:-m] = (A[2 * m:] - A[:-2 * m]) / (2 * m * h)
    d2B = np.empty_like(B)
    d2B[m:-m] = (B[2 * m:] - 2 * B[m:-m] + B[:-2 * m]) / (m * h) ** 2
    out = q.q * s_q
    out[m:-m] = out[m:-m] - dA[m:-m] + d2B[m:-m]
    out[:trim] = np.nan
    out[-trim:] = np.nan
    return out


# ---------------------------------------------------------------------------
# convexity and the score-zero density
# ---------------------------------------------------------------------------

def check_convexity(phi: PhiGenerator, points: np.ndarray,
                    rel_step: float = 1e-3, tol: float = 1e-8) -> bool:
    """Positive semidefiniteness of the finite-difference Hessian of phi.

    1-homogeneous generators have an exactly singular Hessian, so the
    check runs fourth-order stencils in extended precision to keep the
    zero eigenvalue's numerical image above -tol.
    """
    ld = np.longdouble
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GridMismatchError("points must be an (n, 2) array of (u, v) pairs")
    w1 = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
    for u0, v0 in pts:
        u0 = ld(u0)
        v0 = ld(v0)
        hu = ld(rel_step) * max(abs(u0), ld(1.0))
        hv = ld(rel_step) * max(abs(v0), ld(1.0))

        def f(a, b):
            return phi.phi(a, b)

        f0 = f(u0, v0)
        huu = (-f(u0 - 2 * hu, v0) + 16 * f(u0 - hu, v0) - 30 * f0
               + 16 * f(u0 + hu, v0) - f(u0 + 2 * hu, v0)) / (12 * hu * hu)
        hvv = (-f(u0, v0 - 2 * hv) + 16 * f(u0, v0 - hv) - 30 * f0
               + 16 * f(u0, v0 + hv) - f(u0, v0 + 2 * hv)) / (12 * hv * hv)
        s = ld(0.0)
        for i, wi in w1:
            for j, wj in w1:
                s += wi * wj * f(u0 + i * hu, v0 + j * hv)
        huv = s / (144 * hu * hv)
        H = np.array([[huu, huv], [huv, hvv]], dtype=float)
        if np.linalg.eigvalsh(H).min() < -tol:
            return False
    return True


def solve_score_zero(a: float, x_max: float, h: float) -> DensityGrid:
    """Integrate the score-zero equation u' = u^2/2, u = q'/q, u(0) = -2/a,
    and rebuild the density.

    Along the characteristic, exp(integral u) = (u(x)/u(0))^2, and the tail
    mass beyond x_max follows from the closed-form continuation of the same
    equation, so the returned grid is normalised against the full half line.
    Matches a/(a+x)^2 to solver accuracy.
    """
    if a <= 0:
        raise DomainError("a must be positive")
    if h > x_max / 100.0:
        raise ResolutionError(
            f"step {h} too coarse for x_max={x_max}; need h <= x_max/100"
        )
    n = int(round(x_max / h)) + 1
    x = np.linspace(0.0, x_max, n)
    u = np.empty(n)
    u[0] = -2.0 / a

    def rhs(val):
        return 0.5 * val * val

    for i in range(n - 1):
        k1 = rhs(u[i])
        k2 = rhs(u[i] + 0.5 * h * k1)
        k3 = rhs(u[i] + 0.5 * h * k2)
        k4 = rhs(u[i] + h * k3)
        u[i + 1] = u[i] + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    shape = (u / u[0]) ** 2
    # tail of integral shape dx from x_max to infinity: -2 u(x_max) / u(0)^2
    tail = -2.0 * u[-1] / (u[0] * u[0])
    mass = trapezoid(shape, h) + tail
    q = shape / mass
    q1 = u * q
    q2 = 1.5 * u * u * q  # q''/q = u' + u^2 with u' = u^2/2
    return DensityGrid(x=x, q=q, q1=q1, q2=q2)
