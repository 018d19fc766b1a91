# qelab/services/geometry.py

"""
Chart-based numerical Riemannian geometry.

Metrics are supplied by a :class:`MetricProvider` evaluating the component matrix
and, where available, its first and second coordinate derivatives. Missing
derivatives fall back to central finite differences with steps
``h1 = cbrt(eps) * scale`` (first order) and ``h2 = eps**0.25 * scale`` (second
order), ``scale = max(1, |x_k|) * provider.step_scale``.

Curvature sign convention: ``R(X, Y)Z = ∇_X∇_Y Z - ∇_Y∇_X Z - ∇_[X,Y] Z``
and the fully covariant array is stored as
``riemann[c, b, a, d] = <R(e_c, e_b) e_d, e_a>``.
With this layout the 3D decomposition in :func:`riemann_from_ricci_3d` holds
verbatim, contracting ``c`` with ``a`` returns the Ricci tensor and round spheres
have positive scalar curvature. :func:`convention_self_test` checks all three.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from loguru import logger

from qelab.errors import DegenerateMetricError, EvaluationError, InadmissiblePointError
from qelab.schemas.geometry import ChartPoint

EPS = float(np.finfo(float).eps)
H1 = float(np.cbrt(EPS))
H2 = float(EPS**0.25)
H_JET = float(EPS ** (1.0 / 6.0))

PointLike = Union[ChartPoint, Sequence[float], np.ndarray]
Factor = Callable[[float], tuple[float, float, float]]
"""One-variable function returning (value, first derivative, second derivative)."""


def as_coords(p: PointLike, dimension: Optional[int] = None) -> np.ndarray:
    """Return the coordinates of ``p`` as a finite 1D float array."""
    if isinstance(p, ChartPoint):
        x = p.as_array()
    else:
        x = np.atleast_1d(np.asarray(p, dtype=float))
    if x.ndim != 1:
        raise InadmissiblePointError(
            f"expected a coordinate vector, got shape {x.shape}"
        )
    if dimension is not None and x.size != dimension:
        raise InadmissiblePointError(
            f"point has {x.size} coordinates, chart has dimension {dimension}"
        )
    if not np.all(np.isfinite(x)):
        raise InadmissiblePointError("coordinates must be finite")
    return x


def fd_steps(x: np.ndarray, order: int, scale: float = 1.0) -> np.ndarray:
    """Central-difference steps for derivatives of the given order."""
    base = H1 if order == 1 else H2
    h = base * np.maximum(1.0, np.abs(x)) * scale
    h = (x + h) - x
    if np.any(h <= 0.0):
        raise EvaluationError("finite-difference step underflow")
    return h


def _checked(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite {what}")
    return arr


def central_gradient(fn: Callable, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Stack ``∂_k fn(x)`` along a new leading axis."""
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h[k]
        plus = np.asarray(fn(x + e), dtype=float)
        minus = np.asarray(fn(x - e), dtype=float)
        cols.append((plus - minus) / (2.0 * h[k]))
    return np.stack(cols)


def central_second(fn: Callable, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Stack ``∂_l ∂_k fn(x)`` along two new leading axes."""
    n = x.size
    f0 = np.asarray(fn(x), dtype=float)
    out = np.empty((n, n) + f0.shape)
    unit = np.eye(n) * h
    for k in range(n):
        ek = unit[k]
        out[k, k] = (
            np.asarray(fn(x + ek)) - 2.0 * f0 + np.asarray(fn(x - ek))
        ) / h[k] ** 2
        for m in range(k):
            em = unit[m]
            val = (
                np.asarray(fn(x + ek + em))
                - np.asarray(fn(x + ek - em))
                - np.asarray(fn(x - ek + em))
                + np.asarray(fn(x - ek - em))
            ) / (4.0 * h[k] * h[m])
            out[k, m] = val
            out[m, k] = val
    return out


@dataclass(frozen=True)
class MetricProvider:
    """Evaluates metric components and their coordinate derivatives.

    ``d_eval`` returns ``dg[k, i, j] = ∂_k g_ij`` and ``dd_eval`` returns
    ``ddg[l, k, i, j] = ∂_l ∂_k g_ij``. Either may be omitted, in which case
    finite differences are used with ``step_scale`` as the recommended step
    multiplier.
    """

    dimension: int
    eval: Callable[[np.ndarray], np.ndarray]
    d_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dd_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    admissible: Optional[Callable[[np.ndarray], bool]] = None
    step_scale: float = 1.0
    name: str = "metric"

    @property
    def analytic(self) -> bool:
        return self.d_eval is not None and self.dd_eval is not None

    def point(self, p: PointLike) -> np.ndarray:
        """Validate ``p`` against the chart and its admissible domain."""
        x = as_coords(p, self.dimension)
        if self.admissible is not None and not self.admissible(x):
            raise InadmissiblePointError(
                f"{self.name}: point {x.tolist()} is outside the admissible domain"
            )
        return x

    def metric(self, x: np.ndarray) -> np.ndarray:
        g = _checked(self.eval(x), "metric components")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as e:
            raise DegenerateMetricError(
                f"{self.name}: metric not positive definite at {x.tolist()}"
            ) from e
        return g

    def first_derivatives(self, x: np.ndarray) -> np.ndarray:
        if self.d_eval is not None:
            dg = self.d_eval(x)
        else:
            dg = central_gradient(self.eval, x, fd_steps(x, 1, self.step_scale))
        dg = _checked(dg, "metric derivatives")
        return 0.5 * (dg + np.swapaxes(dg, 1, 2))

    def second_derivatives(self, x: np.ndarray) -> np.ndarray:
        if self.dd_eval is not None:
            ddg = self.dd_eval(x)
        elif self.d_eval is not None:
            ddg = central_gradient(self.d_eval, x, fd_steps(x, 1, self.step_scale))
        else:
            ddg = central_second(self.eval, x, fd_steps(x, 2, self.step_scale))
        ddg = _checked(ddg, "metric second derivatives")
        ddg = 0.5 * (ddg + np.swapaxes(ddg, 0, 1))
        return 0.5 * (ddg + np.swapaxes(ddg, 2, 3))


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on a chart with optional analytic derivatives."""

    eval: Callable[[np.ndarray], float]
    d_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dd_eval: Optional[Callable[[np.ndarray], np.ndarray]] = None
    positive: bool = False
    name: str = "u"
    step_scale: float = 1.0

    def value(self, x: np.ndarray) -> float:
        v = float(self.eval(x))
        if not np.isfinite(v):
            raise EvaluationError(
                f"{self.name} is not finite at {np.asarray(x).tolist()}"
            )
        return v

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Coordinate differential ``∂_k u``."""
        if self.d_eval is not None:
            du = self.d_eval(x)
        else:
            du = central_gradient(self.eval, x, fd_steps(x, 1, self.step_scale))
        return _checked(du, f"gradient of {self.name}").reshape(x.size)

    def coordinate_hessian(self, x: np.ndarray) -> np.ndarray:
        """Coordinate second derivatives ``∂_i ∂_j u``."""
        if self.dd_eval is not None:
            ddu = self.dd_eval(x)
        elif self.d_eval is not None:
            ddu = central_gradient(self.d_eval, x, fd_steps(x, 1, self.step_scale))
        else:
            ddu = central_second(self.eval, x, fd_steps(x, 2, self.step_scale))
        ddu = _checked(ddu, f"second derivatives of {self.name}")
        return ddu.reshape(x.size, x.size)

    def scaled(self, c: float) -> "ScalarField":
        return linear_combination([self], [c], name=f"{c:g}*{self.name}")


def linear_combination(
    fields: Sequence[ScalarField], coeffs: Sequence[float], name: str = "combination"
) -> ScalarField:
    """Return ``sum(c_i * u_i)``.

    Analytic derivatives are kept when every field has them.
    """
    fields = list(fields)
    coeffs = [float(c) for c in coeffs]

    def value(x):
        return sum(c * f.value(x) for c, f in zip(coeffs, fields))

    def grad(x):
        return sum(c * f.gradient(x) for c, f in zip(coeffs, fields))

    def hess(x):
        return sum(c * f.coordinate_hessian(x) for c, f in zip(coeffs, fields))

    analytic = all(f.d_eval is not None for f in fields)
    analytic2 = all(f.dd_eval is not None for f in fields)
    return ScalarField(
        eval=value,
        d_eval=grad if analytic else None,
        dd_eval=hess if analytic2 else None,
        name=name,
        step_scale=max(f.step_scale for f in fields),
    )


def quotient_field(numerator: ScalarField, denominator: ScalarField) -> ScalarField:
    """``Z = N / u`` with derivatives from the quotient rule."""

    def value(x):
        return numerator.value(x) / denominator.value(x)

    def grad(x):
        u = denominator.value(x)
        dv = denominator.gradient(x)
        return numerator.gradient(x) / u - numerator.value(x) * dv / u**2

    def hess(x):
        u = denominator.value(x)
        n_val = numerator.value(x)
        du = denominator.gradient(x)
        dn = numerator.gradient(x)
        return (
            numerator.coordinate_hessian(x) / u
            - (np.outer(dn, du) + np.outer(du, dn)) / u**2
            - n_val * denominator.coordinate_hessian(x) / u**2
            + 2.0 * n_val * np.outer(du, du) / u**3
        )

    return ScalarField(
        eval=value,
        d_eval=grad,
        dd_eval=hess,
        name=f"{numerator.name}/{denominator.name}",
        step_scale=max(numerator.step_scale, denominator.step_scale),
    )


# ---------------------------------------------------------------------------
# builders with analytic derivatives
# ---------------------------------------------------------------------------


def _product_derivatives(
    terms: Sequence[tuple[int, Factor]], x: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    n = x.size
    vals = [fn(float(x[j])) for j, fn in terms]
    coords = [j for j, _ in terms]
    h = np.array([v[0] for v in vals], dtype=float)
    d1 = np.array([v[1] for v in vals], dtype=float)
    d2 = np.array([v[2] for v in vals], dtype=float)

    def rest(*skip):
        return float(np.prod([h[c] for c in range(len(terms)) if c not in skip]))

    value = rest()
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    for a, ja in enumerate(coords):
        grad[ja] += d1[a] * rest(a)
        hess[ja, ja] += d2[a] * rest(a)
        for b, jb in enumerate(coords):
            if b != a:
                hess[ja, jb] += d1[a] * d1[b] * rest(a, b)
    return value, grad, hess


def diagonal_product_metric(
    components: Sequence[Sequence[tuple[int, Factor]]],
    name: str,
    admissible: Optional[Callable[[np.ndarray], bool]] = None,
    step_scale: float = 1.0,
) -> MetricProvider:
    """Diagonal metric whose entries are products of one-variable factors.

    ``components[i]`` lists ``(coordinate index, factor)`` pairs whose product is
    ``g_ii``; an empty list means ``g_ii = 1``.
    """
    n = len(components)

    def parts(x):
        return [_product_derivatives(terms, x) for terms in components]

    def g(x):
        return np.diag([p[0] for p in parts(x)])

    def dg(x):
        out = np.zeros((n, n, n))
        for i, (_, grad, _) in enumerate(parts(x)):
            out[:, i, i] = grad
        return out

    def ddg(x):
        out = np.zeros((n, n, n, n))
        for i, (_, _, hess) in enumerate(parts(x)):
            out[:, :, i, i] = hess
        return out

    return MetricProvider(
        dimension=n,
        eval=g,
        d_eval=dg,
        dd_eval=ddg,
        admissible=admissible,
        step_scale=step_scale,
        name=name,
    )


def product_field(
    terms: Sequence[tuple[int, Factor]],
    dimension: int,
    scale: float = 1.0,
    name: str = "u",
    positive: bool = False,
    step_scale: float = 1.0,
) -> ScalarField:
    """``u(x) = scale * prod(factor(x_j))`` with analytic derivatives."""

    def parts(x):
        x = np.asarray(x, dtype=float).reshape(dimension)
        return _product_derivatives(terms, x)

    return ScalarField(
        eval=lambda x: scale * parts(x)[0],
        d_eval=lambda x: scale * parts(x)[1],
        dd_eval=lambda x: scale * parts(x)[2],
        positive=positive,
        name=name,
        step_scale=step_scale,
    )


def radial_field(
    profile: Factor, name: str = "u", positive: bool = False
) -> ScalarField:
    """``u(x) = h(|x|)`` for a radial profile ``h`` (undefined at the origin)."""

    def parts(x):
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        h, h1, h2 = profile(r)
        xhat = x / r
        grad = h1 * xhat
        proj = np.outer(xhat, xhat)
        hess = h2 * proj + (h1 / r) * (np.eye(x.size) - proj)
        return h, grad, hess

    return ScalarField(
        eval=lambda x: parts(x)[0],
        d_eval=lambda x: parts(x)[1],
        dd_eval=lambda x: parts(x)[2],
        positive=positive,
        name=name,
    )


def conformally_flat_metric(
    factor: ScalarField,
    dimension: int,
    name: str,
    admissible: Optional[Callable[[np.ndarray], bool]] = None,
) -> MetricProvider:
    """``g = phi(x) δ`` with derivatives taken from the scalar field ``phi``."""
    eye = np.eye(dimension)

    return MetricProvider(
        dimension=dimension,
        eval=lambda x: factor.value(x) * eye,
        d_eval=lambda x: np.einsum("k,ij->kij", factor.gradient(x), eye),
        dd_eval=lambda x: np.einsum("lk,ij->lkij", factor.coordinate_hessian(x), eye),
        admissible=admissible,
        name=name,
    )


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureBundle:
    """Curvature data at one point."""

    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    ricci: np.ndarray
    scalar: float
    riemann: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TensorEstimate:
    """A finite-difference value together with an error estimate."""

    value: np.ndarray
    error: float


def _christoffel(ginv: np.ndarray, dg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # T[l, i, j] = ∂_i g_jl + ∂_j g_il - ∂_l g_ij
    t = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    gamma = 0.5 * np.einsum("kl,lij->kij", ginv, t)
    return 0.5 * (gamma + np.swapaxes(gamma, 1, 2)), t


def _curvature(provider: MetricProvider, x: np.ndarray, with_riemann: bool = False):
    g = provider.metric(x)
    ginv = np.linalg.inv(g)
    dg = provider.first_derivatives(x)
    ddg = provider.second_derivatives(x)
    gamma, t = _christoffel(ginv, dg)

    dt = (
        np.einsum("mijl->mlij", ddg)
        + np.einsum("mjil->mlij", ddg)
        - ddg
    )
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    # dgamma[m, k, i, j] = ∂_m Γ^k_ij
    dgamma = 0.5 * (
        np.einsum("mkl,lij->mkij", dginv, t) + np.einsum("kl,mlij->mkij", ginv, dt)
    )

    ric = (
        np.einsum("rrns->sn", dgamma)
        - np.einsum("nrrs->sn", dgamma)
        + np.einsum("rrl,lns->sn", gamma, gamma)
        - np.einsum("rnl,lrs->sn", gamma, gamma)
    )
    ric = 0.5 * (ric + ric.T)
    scalar = float(np.einsum("ij,ij->", ginv, ric))

    riemann = None
    if with_riemann:
        # R^ρ_{σμν} with R(∂_μ, ∂_ν)∂_σ = R^ρ_{σμν} ∂_ρ
        r_up = (
            np.einsum("mrns->rsmn", dgamma)
            - np.einsum("nrms->rsmn", dgamma)
            + np.einsum("rml,lns->rsmn", gamma, gamma)
            - np.einsum("rnl,lms->rsmn", gamma, gamma)
        )
        riemann = np.einsum("ar,rdcb->cbad", g, r_up)

    return CurvatureBundle(
        metric=g,
        inverse=ginv,
        christoffel=gamma,
        ricci=ric,
        scalar=scalar,
        riemann=riemann,
    )


def curvature(
    provider: MetricProvider, p: PointLike, with_riemann: bool = False
) -> CurvatureBundle:
    """Christoffel symbols, Ricci tensor, scalar curvature (and Riemann) at ``p``."""
    return _curvature(provider, provider.point(p), with_riemann)


def christoffel(provider: MetricProvider, p: PointLike) -> np.ndarray:
    """Christoffel symbols ``gamma[k, i, j] = Γ^k_ij``."""
    x = provider.point(p)
    g = provider.metric(x)
    gamma, _ = _christoffel(np.linalg.inv(g), provider.first_derivatives(x))
    return gamma


def ricci(provider: MetricProvider, p: PointLike) -> np.ndarray:
    return curvature(provider, p).ricci


def scalar_curvature(provider: MetricProvider, p: PointLike) -> float:
    return curvature(provider, p).scalar


def riemann(provider: MetricProvider, p: PointLike) -> np.ndarray:
    """Fully covariant ``riemann[c, b, a, d]`` from Christoffel derivatives."""
    return curvature(provider, p, with_riemann=True).riemann


def riemann_from_ricci_3d(
    ricci: np.ndarray, scalar: float, metric: np.ndarray
) -> np.ndarray:
    """Rebuild the curvature tensor of a 3-manifold from its Ricci tensor."""
    ricci = np.asarray(ricci, dtype=float)
    g = np.asarray(metric, dtype=float)
    if ricci.shape != (3, 3) or g.shape != (3, 3):
        raise InadmissiblePointError(
            "the Ricci decomposition is only valid in dimension 3"
        )
    return (
        np.einsum("ca,bd->cbad", ricci, g)
        + np.einsum("bd,ca->cbad", ricci, g)
        - np.einsum("cd,ba->cbad", ricci, g)
        - np.einsum("ba,cd->cbad", ricci, g)
        - 0.5
        * scalar
        * (np.einsum("bd,ca->cbad", g, g) - np.einsum("cd,ba->cbad", g, g))
    )


def hessian(
    provider: MetricProvider,
    u: ScalarField,
    p: PointLike,
    bundle: Optional[CurvatureBundle] = None,
) -> np.ndarray:
    """Covariant Hessian ``∂_i∂_j u - Γ^k_ij ∂_k u``.

    The tensor is returned as computed, so its asymmetry measures the error in
    the second derivatives of ``u``.
    """
    x = provider.point(p)
    gamma = bundle.christoffel if bundle is not None else christoffel(provider, x)
    return u.coordinate_hessian(x) - np.einsum("kij,k->ij", gamma, u.gradient(x))


def hessian_asymmetry(hess: np.ndarray, ginv: np.ndarray) -> float:
    """``|H - H^T| / 2`` in the metric norm."""
    return 0.5 * tensor_norm(hess - hess.T, ginv)


def laplacian(
    provider: MetricProvider,
    u: ScalarField,
    p: PointLike,
    bundle: Optional[CurvatureBundle] = None,
) -> float:
    x = provider.point(p)
    ginv = bundle.inverse if bundle is not None else np.linalg.inv(provider.metric(x))
    return float(np.einsum("ij,ij->", ginv, hessian(provider, u, x, bundle)))


def tensor_norm(t: np.ndarray, ginv: np.ndarray) -> float:
    """Metric norm of a covariant 2-tensor."""
    return float(np.sqrt(max(np.einsum("ia,jb,ij,ab->", ginv, ginv, t, t), 0.0)))


def covector_norm(w: np.ndarray, ginv: np.ndarray) -> float:
    return float(np.sqrt(max(np.einsum("ij,i,j->", ginv, w, w), 0.0)))


def gradient_norm(provider: MetricProvider, u: ScalarField, p: PointLike) -> float:
    """``|∇u|_g``."""
    x = provider.point(p)
    return covector_norm(u.gradient(x), np.linalg.inv(provider.metric(x)))


@dataclass(frozen=True)
class ScalarCurvatureJet:
    """``∂_c R`` and ``ΔR`` at one point with Richardson error estimates."""

    gradient: np.ndarray
    laplacian: float
    gradient_error: float
    laplacian_error: float


def scalar_curvature_jet(
    provider: MetricProvider, p: PointLike, bundle: Optional[CurvatureBundle] = None
) -> ScalarCurvatureJet:
    """First derivatives and Laplacian of the scalar curvature.

    ``R`` is already a second-derivative quantity, so both stencils are taken at
    steps ``h`` and ``2h`` and combined to fourth order. The step is sized for a
    fourth-order second difference, which keeps the rounding noise of ``R``
    well below what a plain second difference at the usual step would leave.
    """
    x = provider.point(p)
    bundle = bundle if bundle is not None else _curvature(provider, x)
    h = H_JET * np.maximum(1.0, np.abs(x))
    h = (x + h) - x
    if np.any(h <= 0.0):
        raise EvaluationError("finite-difference step underflow")

    def r_at(y):
        return _curvature(provider, y).scalar

    d_h = central_gradient(r_at, x, h)
    d_2h = central_gradient(r_at, x, 2.0 * h)
    dd_h = central_second(r_at, x, h)
    dd_2h = central_second(r_at, x, 2.0 * h)
    grad = (4.0 * d_h - d_2h) / 3.0
    dd = (4.0 * dd_h - dd_2h) / 3.0

    ginv, gamma = bundle.inverse, bundle.christoffel
    hess = dd - np.einsum("kij,k->ij", gamma, grad)
    lap = float(np.einsum("ij,ij->", ginv, hess))

    noise = 10.0 * EPS * (abs(bundle.scalar) + 1.0)
    hmin = float(h.min())
    weight = float(np.abs(ginv).sum())
    grad_err = float(np.max(np.abs(d_h - d_2h))) / 3.0 + noise / hmin
    lap_err = weight * (
        float(np.max(np.abs(dd_h - dd_2h))) / 3.0
        + noise / hmin**2
        + float(np.max(np.abs(gamma))) * grad_err
    )
    return ScalarCurvatureJet(
        gradient=grad, laplacian=lap, gradient_error=grad_err, laplacian_error=lap_err
    )


def covariant_ricci_derivative(
    provider: MetricProvider, p: PointLike, bundle: Optional[CurvatureBundle] = None
) -> TensorEstimate:
    """``(∇_c Ric)_ab`` as ``value[c, a, b]`` with a Richardson error estimate."""
    x = provider.point(p)
    bundle = bundle if bundle is not None else _curvature(provider, x)
    h = fd_steps(x, 1, provider.step_scale)

    def ric_at(y):
        return _curvature(provider, y).ricci

    d_h = central_gradient(ric_at, x, h)
    d_2h = central_gradient(ric_at, x, 2.0 * h)
    gamma, ric = bundle.christoffel, bundle.ricci
    value = (
        d_h
        - np.einsum("dca,db->cab", gamma, ric)
        - np.einsum("dcb,ad->cab", gamma, ric)
    )
    scale = float(np.max(np.abs(ric))) + 1.0
    error = (
        float(np.max(np.abs(d_h - d_2h))) / 3.0 + 10.0 * EPS * scale / float(h.min())
    )
    return TensorEstimate(value=value, error=error)


def scalar_curvature_gradient(
    provider: MetricProvider, p: PointLike, bundle: Optional[CurvatureBundle] = None
) -> TensorEstimate:
    """``∂_c R`` obtained by tracing the covariant Ricci derivative."""
    x = provider.point(p)
    bundle = bundle if bundle is not None else _curvature(provider, x)
    nabla = covariant_ricci_derivative(provider, x, bundle)
    grad = np.einsum("ab,cab->c", bundle.inverse, nabla.value)
    weight = float(np.abs(bundle.inverse).sum())
    return TensorEstimate(value=grad, error=nabla.error * weight)


def metric_compatibility_defect(provider: MetricProvider, p: PointLike) -> float:
    """``max |∂_k g_ij - Γ^l_ki g_lj - Γ^l_kj g_il|``."""
    x = provider.point(p)
    g = provider.metric(x)
    dg = provider.first_derivatives(x)
    gamma, _ = _christoffel(np.linalg.inv(g), dg)
    defect = (
        dg
        - np.einsum("lki,lj->kij", gamma, g)
        - np.einsum("lkj,il->kij", gamma, g)
    )
    return float(np.max(np.abs(defect)))


def contracted_bianchi_defect(provider: MetricProvider, p: PointLike) -> TensorEstimate:
    """``g^{ik} ∇_k R_ij - ½ ∂_j R`` with its finite-difference error bound."""
    x = provider.point(p)
    bundle = _curvature(provider, x)
    nabla = covariant_ricci_derivative(provider, x, bundle)
    div = np.einsum("ki,kij->j", bundle.inverse, nabla.value)
    grad_r = np.einsum("ab,cab->c", bundle.inverse, nabla.value)
    bound = nabla.error * float(np.abs(bundle.inverse).sum()) * 1.5
    return TensorEstimate(value=div - 0.5 * grad_r, error=bound)


def sectional_curvature(
    riemann_array: np.ndarray, metric: np.ndarray, i: int, j: int
) -> float:
    """Sectional curvature of the coordinate plane spanned by ``∂_i, ∂_j``."""
    area = metric[i, i] * metric[j, j] - metric[i, j] ** 2
    return float(riemann_array[i, j, i, j] / area)


# ---------------------------------------------------------------------------
# elementary factors
# ---------------------------------------------------------------------------


def constant_factor(c: float) -> Factor:
    return lambda t: (c, 0.0, 0.0)


def exp_factor(rate: float = 1.0, scale: float = 1.0) -> Factor:
    """``scale * exp(rate * t)``."""

    def factor(t: float) -> tuple[float, float, float]:
        e = scale * np.exp(rate * t)
        return e, rate * e, rate * rate * e

    return factor


def cosh_factor(scale: float = 1.0) -> Factor:
    def factor(t: float) -> tuple[float, float, float]:
        c = scale * np.cosh(t)
        return c, scale * np.sinh(t), c

    return factor


def squared_trig(kind: str) -> Factor:
    """``sin(t)**2`` or ``sinh(t)**2`` for ``kind`` in {"sin", "sinh"}."""
    sign = -1.0 if kind == "sin" else 1.0

    def factor(t: float) -> tuple[float, float, float]:
        if kind == "sin":
            s, c = np.sin(t), np.cos(t)
        else:
            s, c = np.sinh(t), np.cosh(t)
        return s * s, 2.0 * s * c, 2.0 * (c * c + sign * s * s)

    return factor


# ---------------------------------------------------------------------------
# convention self-test
# ---------------------------------------------------------------------------


def round_sphere_3d() -> MetricProvider:
    """Unit 3-sphere in hyperspherical coordinates ``(psi, theta, phi)``."""
    sin2 = squared_trig("sin")
    return diagonal_product_metric(
        [[], [(0, sin2)], [(0, sin2), (1, sin2)]],
        name="round-s3",
        admissible=lambda x: 0.0 < x[0] < np.pi and 0.0 < x[1] < np.pi,
    )


def convention_self_test(tol: float = 1e-8) -> bool:
    """Check the curvature sign convention on the unit 3-sphere.

    Verifies positive scalar curvature (+6), unit sectional curvature, the Ricci
    contraction of the stored layout and the 3D Ricci decomposition.
    """
    provider = round_sphere_3d()
    x = np.array([1.1, 0.7, 0.3])
    bundle = curvature(provider, x, with_riemann=True)
    rm = bundle.riemann
    checks = {
        "scalar": abs(bundle.scalar - 6.0) <= tol,
        "sectional": abs(sectional_curvature(rm, bundle.metric, 0, 1) - 1.0) <= tol,
        "contraction": np.allclose(
            np.einsum("ca,cbad->bd", bundle.inverse, rm), bundle.ricci, atol=tol
        ),
        "decomposition": np.allclose(
            riemann_from_ricci_3d(bundle.ricci, bundle.scalar, bundle.metric),
            rm,
            atol=tol,
        ),
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        logger.error(f"Curvature convention self-test failed: {failed}")
        return False
    logger.debug("Curvature convention self-test passed")
    return True
