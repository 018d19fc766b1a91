# qelab/services/verifier.py

"""
Pointwise identities of quasi-Einstein structures and grid sweeps over them.

Identities containing ``1/u`` are evaluated multiplied through by ``u``. Every
residual is normalized by ``1 + (largest term magnitude)`` before it is compared
with a tolerance, so tolerances do not depend on the scale of ``u`` or of the
chart.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable, Literal, Optional, Sequence

import numpy as np
import scipy.linalg
from loguru import logger

from qelab.config import settings
from qelab.errors import InadmissiblePointError, ParameterError
from qelab.schemas.reports import ResidualReport
from qelab.schemas.run_config import Tolerances
from qelab.services.geometry import (
    CurvatureBundle,
    MetricProvider,
    PointLike,
    ScalarCurvatureJet,
    ScalarField,
    contracted_bianchi_defect,
    covariant_ricci_derivative,
    covector_norm,
    curvature,
    hessian,
    hessian_asymmetry,
    laplacian,
    metric_compatibility_defect,
    quotient_field,
    riemann_from_ricci_3d,
    scalar_curvature_jet,
    tensor_norm,
)

if TYPE_CHECKING:
    from qelab.services.zoo import QEStructure


@dataclass(frozen=True)
class IdentityResidual:
    """Raw residual of an identity with the size of its largest term.

    ``noise`` estimates the discretization error carried by ``value``.
    """

    value: float
    scale: float
    noise: float = 0.0

    @property
    def normalized(self) -> float:
        return self.value / (1.0 + self.scale)


@dataclass(frozen=True)
class _PointData:
    x: np.ndarray
    bundle: CurvatureBundle
    u: float
    du: np.ndarray
    hess: np.ndarray
    lap: float


def _point_data(
    s: "QEStructure", p: PointLike, u: Optional[ScalarField] = None
) -> _PointData:
    u = u if u is not None else s.u
    x = s.provider.point(p)
    bundle = curvature(s.provider, x)
    hess = hessian(s.provider, u, x, bundle)
    return _PointData(
        x=x,
        bundle=bundle,
        u=u.value(x),
        du=u.gradient(x),
        hess=hess,
        lap=float(np.einsum("ij,ij->", bundle.inverse, hess)),
    )


def integrability_value(
    provider: MetricProvider, u: ScalarField, m: float, lam: float, p: PointLike
) -> float:
    """``u Δu + (m-1)|∇u|^2 + lam u^2`` at ``p``."""
    x = provider.point(p)
    bundle = curvature(provider, x)
    val = u.value(x)
    lap = laplacian(provider, u, x, bundle)
    grad2 = covector_norm(u.gradient(x), bundle.inverse) ** 2
    return float(val * lap + (m - 1.0) * grad2 + lam * val * val)


# ---------------------------------------------------------------------------
# fundamental equation and its consequences
# ---------------------------------------------------------------------------


def _qe_terms(s: "QEStructure", d: _PointData) -> tuple[np.ndarray, np.ndarray]:
    rhs = (d.u / s.m) * (d.bundle.ricci - s.lam * d.bundle.metric)
    return d.hess, rhs


def qe_residual(s: "QEStructure", p: PointLike) -> np.ndarray:
    """``∇²u - (u/m)(Ric - λg)`` as a symmetric matrix."""
    d = _point_data(s, p)
    lhs, rhs = _qe_terms(s, d)
    return lhs - rhs


def qe_residual_norm(s: "QEStructure", p: PointLike) -> IdentityResidual:
    d = _point_data(s, p)
    lhs, rhs = _qe_terms(s, d)
    ginv = d.bundle.inverse
    return IdentityResidual(
        value=tensor_norm(lhs - rhs, ginv),
        scale=max(tensor_norm(lhs, ginv), tensor_norm(rhs, ginv)),
    )


def trace_residual(s: "QEStructure", p: PointLike) -> float:
    """``Δu - (u/m)(R - nλ)``."""
    d = _point_data(s, p)
    n = s.dimension
    return d.lap - (d.u / s.m) * (d.bundle.scalar - n * s.lam)


def traceless_residual(s: "QEStructure", p: PointLike) -> np.ndarray:
    """``u(Ric - (R/n)g) - m(∇²u - (Δu/n)g)``."""
    d = _point_data(s, p)
    n = s.dimension
    g = d.bundle.metric
    ric0 = d.bundle.ricci - (d.bundle.scalar / n) * g
    hess0 = d.hess - (d.lap / n) * g
    return d.u * ric0 - s.m * hess0


def trace_residual_norm(s: "QEStructure", p: PointLike) -> IdentityResidual:
    d = _point_data(s, p)
    rhs = (d.u / s.m) * (d.bundle.scalar - s.dimension * s.lam)
    return IdentityResidual(value=abs(d.lap - rhs), scale=max(abs(d.lap), abs(rhs)))


def traceless_residual_norm(s: "QEStructure", p: PointLike) -> IdentityResidual:
    d = _point_data(s, p)
    n = s.dimension
    g, ginv = d.bundle.metric, d.bundle.inverse
    lhs = d.u * (d.bundle.ricci - (d.bundle.scalar / n) * g)
    rhs = s.m * (d.hess - (d.lap / n) * g)
    return IdentityResidual(
        value=tensor_norm(lhs - rhs, ginv),
        scale=max(tensor_norm(lhs, ginv), tensor_norm(rhs, ginv)),
    )


def mu_field(s: "QEStructure", p: PointLike) -> float:
    """Pointwise integrability value ``u Δu + (m-1)|∇u|² + λu²``."""
    d = _point_data(s, p)
    grad2 = covector_norm(d.du, d.bundle.inverse) ** 2
    return float(d.u * d.lap + (s.m - 1.0) * grad2 + s.lam * d.u * d.u)


def static_residual(s: "QEStructure", p: PointLike) -> float:
    """``Δu + λu``, the extra equation of a static space (``m = 1``)."""
    if abs(s.m - 1.0) > 1e-12:
        raise ParameterError(f"static residual needs m = 1, structure has m = {s.m}")
    d = _point_data(s, p)
    return d.lap + s.lam * d.u


def _require_dimension(s: "QEStructure", least: int, what: str):
    if s.dimension < least:
        raise InadmissiblePointError(
            f"{what} needs dimension >= {least}, got {s.dimension}"
        )


def _scalar_curvature_jet(s: "QEStructure", d: _PointData) -> ScalarCurvatureJet:
    # R is constant on Einstein entries
    if s.einstein:
        return ScalarCurvatureJet(
            gradient=np.zeros(s.dimension),
            laplacian=0.0,
            gradient_error=0.0,
            laplacian_error=0.0,
        )
    return scalar_curvature_jet(s.provider, d.x, d.bundle)


def gradR_identity_residual(s: "QEStructure", p: PointLike) -> IdentityResidual:
    """``½u∇R + (m-1)Ric(∇u,·) + (R-(n-1)λ)du`` as a g-norm."""
    _require_dimension(s, 3, "the scalar curvature gradient identity")
    d = _point_data(s, p)
    n = s.dimension
    jet = _scalar_curvature_jet(s, d)
    ginv = d.bundle.inverse
    t1 = 0.5 * d.u * jet.gradient
    t2 = (s.m - 1.0) * d.bundle.ricci @ (ginv @ d.du)
    t3 = (d.bundle.scalar - (n - 1.0) * s.lam) * d.du
    return IdentityResidual(
        value=covector_norm(t1 + t2 + t3, ginv),
        scale=max(covector_norm(t, ginv) for t in (t1, t2, t3)),
        noise=0.5 * abs(d.u) * jet.gradient_error,
    )


def lapR_identity_residual(s: "QEStructure", p: PointLike) -> IdentityResidual:
    """Scalar curvature Laplacian identity, multiplied through by ``u``."""
    _require_dimension(s, 3, "the scalar curvature Laplacian identity")
    d = _point_data(s, p)
    if d.u <= 0:
        raise InadmissiblePointError("the Laplacian identity needs u > 0")
    n, m, lam = s.dimension, s.m, s.lam
    g, ginv = d.bundle.metric, d.bundle.inverse
    r = d.bundle.scalar
    jet = _scalar_curvature_jet(s, d)
    ric0 = d.bundle.ricci - (r / n) * g
    terms = (
        0.5 * d.u * jet.laplacian,
        0.5 * (m + 2.0) * float(np.einsum("ij,i,j->", ginv, d.du, jet.gradient)),
        d.u * (m - 1.0) / m * tensor_norm(ric0, ginv) ** 2,
        d.u
        * (n + m - 1.0)
        / (m * n)
        * (r - n * lam)
        * (r - n * (n - 1.0) * lam / (m + n - 1.0)),
    )
    noise = (
        0.5 * d.u * jet.laplacian_error
        + 0.5 * (m + 2.0) * covector_norm(d.du, ginv) * jet.gradient_error
    )
    return IdentityResidual(
        value=abs(sum(terms)), scale=max(abs(t) for t in terms), noise=noise
    )


def hessian_symmetry_residual(s: "QEStructure", p: PointLike) -> IdentityResidual:
    """Antisymmetric part of the covariant Hessian of ``u``."""
    x = s.provider.point(p)
    bundle = curvature(s.provider, x)
    hess = hessian(s.provider, s.u, x, bundle)
    return IdentityResidual(
        value=hessian_asymmetry(hess, bundle.inverse),
        scale=tensor_norm(hess, bundle.inverse),
    )


def einstein_scalar_roots(n: int, m: float, lam: float) -> tuple[float, float]:
    """Scalar curvatures allowed for an Einstein quasi-Einstein structure."""
    return n * lam, n * (n - 1.0) * lam / (m + n - 1.0)


def verify_einstein_scalar(s: "QEStructure", p: PointLike) -> IdentityResidual:
    """Distance of ``R`` from the nearest admissible Einstein value."""
    x = s.provider.point(p)
    r = curvature(s.provider, x).scalar
    roots = einstein_scalar_roots(s.dimension, s.m, s.lam)
    return IdentityResidual(value=min(abs(r - v) for v in roots), scale=abs(r))


# ---------------------------------------------------------------------------
# eigenframe and frame identities
# ---------------------------------------------------------------------------

Degeneracy = Literal["distinct", "two-equal", "all-equal"]


@dataclass(frozen=True)
class EigenFrame:
    """Ricci eigenvalues in descending order with a g-orthonormal frame.

    ``frame[:, i]`` holds the coordinate components of ``e_i``.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray
    classification: Degeneracy
    gap_threshold: float
    ill_conditioned: bool

    @property
    def equal_pair(self) -> Optional[tuple[int, int]]:
        """Indices of the coinciding pair when exactly two eigenvalues agree."""
        if self.classification != "two-equal" or self.eigenvalues.size < 3:
            return None
        gaps = np.abs(np.diff(self.eigenvalues))
        i = int(np.argmin(gaps))
        return i, i + 1


def eigenframe_from_ricci(
    ricci: np.ndarray, metric: np.ndarray, gap_tol: Optional[float] = None
) -> EigenFrame:
    gap_tol = settings.EIGEN_GAP_TOL if gap_tol is None else gap_tol
    values, vectors = scipy.linalg.eigh(ricci, metric)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    threshold = gap_tol * (1.0 + float(np.max(np.abs(values))))
    gaps = -np.diff(values)
    equal = gaps <= threshold
    if values.size == 1 or np.all(equal):
        classification = "all-equal"
    elif np.any(equal):
        one_pair = values.size == 3 and np.sum(equal) == 1
        classification = "two-equal" if one_pair else "distinct"
    else:
        classification = "distinct"
    ill = bool(np.any((gaps > threshold) & (gaps <= 1e3 * threshold)))
    return EigenFrame(
        eigenvalues=values,
        frame=vectors,
        classification=classification,
        gap_threshold=threshold,
        ill_conditioned=ill,
    )


def eigenframe(
    s: "QEStructure", p: PointLike, gap_tol: Optional[float] = None
) -> EigenFrame:
    bundle = curvature(s.provider, p)
    return eigenframe_from_ricci(bundle.ricci, bundle.metric, gap_tol)


def _frame_identities(
    m: float, u: float, du: np.ndarray, nabla: np.ndarray, frame: EigenFrame
) -> tuple[np.ndarray, np.ndarray]:
    e = frame.frame
    nf = np.einsum("cab,ci,aj,bk->ijk", nabla, e, e, e)
    duf = du @ e
    lam = frame.eigenvalues
    lhs = np.array(
        [
            u * (nf[1, 1, 0] - nf[0, 1, 1] + nf[0, 2, 2] - nf[2, 2, 0]),
            u * (nf[0, 0, 1] - nf[1, 0, 0] + nf[1, 2, 2] - nf[2, 2, 1]),
            u * (nf[0, 0, 2] - nf[2, 0, 0] + nf[2, 1, 1] - nf[1, 1, 2]),
        ]
    )
    rhs = (m + 1.0) * np.array(
        [
            (lam[1] - lam[2]) * duf[0],
            (lam[0] - lam[2]) * duf[1],
            (lam[0] - lam[1]) * duf[2],
        ]
    )
    return lhs, rhs


def lemma1_residuals(
    s: "QEStructure", p: PointLike, gap_tol: Optional[float] = None
) -> tuple[np.ndarray, EigenFrame]:
    """Normalized residuals of the frame identities relating ``∇Ric`` and ``du``.

    Returns the residuals together with the frame used, whose
    ``ill_conditioned`` flag marks points near an eigenvalue crossing.
    """
    if s.dimension != 3:
        raise InadmissiblePointError("the frame identities are stated in dimension 3")
    d = _point_data(s, p)
    frame = eigenframe_from_ricci(d.bundle.ricci, d.bundle.metric, gap_tol)
    nabla = covariant_ricci_derivative(s.provider, d.x, d.bundle)
    lhs, rhs = _frame_identities(s.m, d.u, d.du, nabla.value, frame)
    scale = 1.0 + np.maximum(np.abs(lhs), np.abs(rhs))
    return np.abs(lhs - rhs) / scale, frame


def two_equal_gradient_residual(
    u: ScalarField,
    N: ScalarField,
    s: "QEStructure",
    p: PointLike,
    gap_tol: Optional[float] = None,
) -> Optional[IdentityResidual]:
    """``max(|∇_{e_i} Z|)`` over the coinciding eigen-directions, ``Z = N/u``.

    Evaluated as ``u² ∇Z = u dN - N du``. Returns ``None`` unless exactly two
    Ricci eigenvalues coincide at ``p``.
    """
    x = s.provider.point(p)
    bundle = curvature(s.provider, x)
    frame = eigenframe_from_ricci(bundle.ricci, bundle.metric, gap_tol)
    pair = frame.equal_pair
    if pair is None:
        return None
    uv, nv = u.value(x), N.value(x)
    du, dn = u.gradient(x), N.gradient(x)
    grad = (uv * dn - nv * du) @ frame.frame
    scale = max(
        abs(uv) * covector_norm(dn, bundle.inverse),
        abs(nv) * covector_norm(du, bundle.inverse),
    )
    return IdentityResidual(value=float(max(abs(grad[i]) for i in pair)), scale=scale)


def quotient_equation_residual(
    u1: ScalarField,
    u2: ScalarField,
    s: "QEStructure",
    p: PointLike,
    v: Sequence[float],
    w: Sequence[float],
) -> IdentityResidual:
    """``u∇²Z(v,w) + <∇u,v><∇Z,w> + <∇u,w><∇Z,v>`` for ``Z = u2/u1``."""
    x = s.provider.point(p)
    u = u1.value(x)
    if u <= 0:
        raise InadmissiblePointError("the quotient equation needs u1 > 0")
    z = quotient_field(u2, u1)
    v, w = np.asarray(v, dtype=float), np.asarray(w, dtype=float)
    hz = hessian(s.provider, z, x)
    du, dz = u1.gradient(x), z.gradient(x)
    terms = (
        u * float(v @ hz @ w),
        float(du @ v) * float(dz @ w),
        float(du @ w) * float(dz @ v),
    )
    return IdentityResidual(value=abs(sum(terms)), scale=max(abs(t) for t in terms))


def convention_residual(s: "QEStructure", p: PointLike) -> IdentityResidual:
    """Difference between the Ricci-based 3D curvature and the direct one."""
    bundle = curvature(s.provider, p, with_riemann=True)
    rebuilt = riemann_from_ricci_3d(bundle.ricci, bundle.scalar, bundle.metric)
    return IdentityResidual(
        value=float(np.max(np.abs(rebuilt - bundle.riemann))),
        scale=float(np.max(np.abs(bundle.riemann))),
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def sweep(
    identity: str,
    s: "QEStructure",
    points: Iterable[np.ndarray],
    fn: Callable[[np.ndarray], float],
    tolerance: float,
    notes: Optional[str] = None,
) -> ResidualReport:
    """Evaluate ``fn`` over ``points`` and aggregate into a report."""
    values = [float(fn(x)) for x in points]
    report = ResidualReport.from_residuals(
        identity, s.name, values, tolerance, notes=notes
    )
    level = "INFO" if report.passed else "WARNING"
    logger.log(
        level,
        f"{s.name}: {identity} max {report.max_residual:.3e} (tol {tolerance:.1e})",
    )
    return report


def _bianchi_normalized(s: "QEStructure", x: np.ndarray) -> float:
    defect = contracted_bianchi_defect(s.provider, x)
    ricci = curvature(s.provider, x).ricci
    return float(np.max(np.abs(defect.value))) / (1.0 + float(np.max(np.abs(ricci))))


def _mu_report(
    s: "QEStructure", points: np.ndarray, tol: Tolerances
) -> list[ResidualReport]:
    values = np.array([mu_field(s, x) for x in points])
    mean = float(np.mean(values))
    spread = float(np.std(values)) / (1.0 + abs(mean))
    reports = [
        ResidualReport.from_residuals(
            "mu-constancy",
            s.name,
            [spread],
            tol.mu_spread,
            notes=f"mean mu = {mean:.12g}",
        )
    ]
    if s.mu_expected is not None:
        deviation = abs(mean - s.mu_expected) / (1.0 + abs(s.mu_expected))
        reports.append(
            ResidualReport.from_residuals(
                "mu-expected",
                s.name,
                [deviation],
                tol.mu_spread,
                notes=f"expected mu = {s.mu_expected:.12g}",
            )
        )
    return reports


def _lemma_report(
    s: "QEStructure", points: np.ndarray, tol: Tolerances
) -> ResidualReport:
    values, flagged = [], 0
    for x in points:
        res, frame = lemma1_residuals(s, x, tol.eigen_gap)
        flagged += int(frame.ill_conditioned)
        values.append(float(np.max(res)))
    notes = f"{flagged} points near an eigenvalue crossing" if flagged else None
    if flagged:
        logger.warning(
            f"{s.name}: {flagged} points have an ill-conditioned Ricci eigenframe"
        )
    return ResidualReport.from_residuals(
        "frame-identities",
        s.name,
        values,
        tol.lemma,
        flagged_points=flagged,
        notes=notes,
    )


def _quotient_reports(
    s: "QEStructure", points: np.ndarray, tol: Tolerances, seed: int
) -> list[ResidualReport]:
    if len(s.solutions) < 2:
        return []
    u1, u2 = s.solutions[0], s.solutions[1]
    if not u1.positive:
        return []
    rng = np.random.default_rng(seed)
    n = s.dimension
    values = []
    for x in points:
        v, w = rng.standard_normal(n), rng.standard_normal(n)
        values.append(quotient_equation_residual(u1, u2, s, x, v, w).normalized)
    reports = [
        ResidualReport.from_residuals(
            "quotient-equation", s.name, values, tol.quotient
        )
    ]
    if n == 3:
        two_equal = [
            two_equal_gradient_residual(u1, u2, s, x, tol.eigen_gap) for x in points
        ]
        hits = [r.normalized for r in two_equal if r is not None]
        if hits:
            reports.append(
                ResidualReport.from_residuals(
                    "two-equal-gradient",
                    s.name,
                    hits,
                    tol.gradr,
                    notes=(
                        f"{len(hits)} of {len(points)} points "
                        "with two equal eigenvalues"
                    ),
                )
            )
    return reports


def _compatibility_normalized(s: "QEStructure", x: np.ndarray) -> float:
    scale = 1.0 + float(np.max(np.abs(s.provider.metric(x))))
    return metric_compatibility_defect(s.provider, x) / scale


def _static_normalized(s: "QEStructure", x: np.ndarray) -> float:
    scale = 1.0 + abs(s.lam * s.u.value(x)) + abs(laplacian(s.provider, s.u, x))
    return abs(static_residual(s, x)) / scale


def verify_structure(
    s: "QEStructure",
    points: Optional[np.ndarray] = None,
    tolerances: Optional[Tolerances] = None,
    seed: int = 0,
) -> list[ResidualReport]:
    """Run every identity applicable to ``s`` over ``points`` (default: its grid)."""
    tol = tolerances or Tolerances()
    if points is None:
        points = s.grid()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = s.dimension
    logger.info(f"Verifying {s.name} on {len(points)} points")
    qe_tol = tol.residual if s.provider.analytic else tol.fd_residual
    hess_tol = tol.residual if s.u.dd_eval is not None else tol.fd_residual

    def normalized(fn):
        return lambda x: fn(s, x).normalized

    reports = [
        sweep("qe", s, points, normalized(qe_residual_norm), qe_tol),
        sweep("trace", s, points, normalized(trace_residual_norm), qe_tol),
        sweep("traceless", s, points, normalized(traceless_residual_norm), qe_tol),
        sweep(
            "hessian-symmetry",
            s,
            points,
            normalized(hessian_symmetry_residual),
            hess_tol,
        ),
    ]
    reports.extend(_mu_report(s, points, tol))
    reports.append(
        sweep(
            "metric-compatibility",
            s,
            points,
            lambda x: _compatibility_normalized(s, x),
            qe_tol,
        )
    )
    if n >= 2:
        reports.append(
            sweep(
                "contracted-bianchi",
                s,
                points,
                lambda x: _bianchi_normalized(s, x),
                tol.gradr,
            )
        )
    if n >= 3:
        reports.append(
            sweep("gradR", s, points, normalized(gradR_identity_residual), tol.gradr)
        )
        reports.append(
            sweep("lapR", s, points, normalized(lapR_identity_residual), tol.lapr)
        )
    if n == 3:
        reports.append(_lemma_report(s, points, tol))
        reports.append(
            sweep(
                "curvature-convention",
                s,
                points,
                normalized(convention_residual),
                tol.convention,
            )
        )
    reports.extend(_quotient_reports(s, points, tol, seed))
    if s.einstein:
        reports.append(
            sweep(
                "einstein-scalar",
                s,
                points,
                normalized(verify_einstein_scalar),
                qe_tol,
            )
        )
    if abs(s.m - 1.0) <= 1e-12:
        reports.append(
            sweep("static", s, points, lambda x: _static_normalized(s, x), qe_tol)
        )
    return reports
