# qelab/services/asymptotics.py

"""
Decay and growth checks on asymptotically flat ends.

Ends are conformally flat charts ``g = phi(|x|) δ`` on ``|x| > rho``. Quantities
are sampled on spheres of geometrically spaced radii; suprema over a sphere are
approximated by maxima over a deterministic set of directions, and exponents
come from least-squares fits of ``log q`` against ``log r``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.stats import norm, qmc

from qelab.config import settings
from qelab.errors import ParameterError
from qelab.schemas.catalog import CatalogEntry, ParameterSpec
from qelab.schemas.reports import (
    DecayChainReport,
    DecayFit,
    GradientReport,
    GrowthReport,
)
from qelab.services.geometry import (
    Factor,
    MetricProvider,
    ScalarField,
    conformally_flat_metric,
    covector_norm,
    curvature,
    product_field,
    radial_field,
)
from qelab.services.verifier import mu_field
from qelab.services.zoo import Box, QEStructure

NOISE_FLOOR = 1e-13
EXPONENT_ATOL = 1e-6
QUANTITIES = ("b", "db", "ddb", "christoffel", "ricci", "u-growth", "u-hessian")
POTENTIALS = ("const", "radial", "log", "power", "inverse", "linear", "static")


@dataclass(frozen=True)
class EndChart:
    """Conformally flat end ``{|x| > rho}`` with an expected decay order."""

    name: str
    provider: MetricProvider
    rho: float
    params: dict = field(default_factory=dict)
    tau_expected: Optional[float] = None

    @property
    def dimension(self) -> int:
        return self.provider.dimension

    def default_radii(self, count: int = 12) -> np.ndarray:
        return np.geomspace(2.0 * self.rho, 64.0 * self.rho, count)

    def dyadic_radii(self, doublings: int = 10) -> np.ndarray:
        """``2^k rho`` for ``k = 1..doublings``."""
        return self.rho * 2.0 ** np.arange(1, doublings + 1)

    def shell_box(self) -> Box:
        """Coordinate box inside the end used for grid checks."""
        n = self.dimension
        lo = (2.0 * self.rho,) + (-self.rho,) * (n - 1)
        hi = (4.0 * self.rho,) + (self.rho,) * (n - 1)
        return Box(lo=lo, hi=hi)

    def structure(
        self, potential: str = "const", m: Optional[float] = None, **params
    ) -> QEStructure:
        """The end as a structure with ``lambda = 0`` and the named potential."""
        u = end_potential(self, potential, **params)
        if m is None:
            m = 1.0 if potential == "static" else 2.0
        return QEStructure(
            name=f"{self.name}:{potential}",
            params=dict(self.params, potential=potential),
            provider=self.provider,
            u=u,
            m=float(m),
            lam=0.0,
            mu_expected=0.0 if potential in ("static", "const") else None,
            box=self.shell_box(),
            solutions=(u,),
            reference="asymptotically flat end",
        )


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------


def _schwarzschild_factor(mass: float) -> Factor:
    def factor(r):
        q = 1.0 + mass / (2.0 * r)
        dq = -mass / (2.0 * r * r)
        ddq = mass / r**3
        return q**4, 4.0 * q**3 * dq, 12.0 * q * q * dq * dq + 4.0 * q**3 * ddq

    return factor


def _power_decay_factor(tau: float, amplitude: float) -> Factor:
    def factor(r):
        a = amplitude * r ** (-tau)
        return 1.0 + a, -tau * a / r, tau * (tau + 1.0) * a / (r * r)

    return factor


def _static_lapse(mass: float) -> Factor:
    def factor(r):
        q = mass / (2.0 * r)
        return (
            (1.0 - q) / (1.0 + q),
            mass / (r * r * (1.0 + q) ** 2),
            -2.0 * mass / (r**3 * (1.0 + q) ** 3),
        )

    return factor


_RADIAL_POTENTIALS: dict[str, Callable[..., Factor]] = {
    "const": lambda c=1.0, **_: (lambda r: (c, 0.0, 0.0)),
    "radial": lambda **_: (lambda r: (r, 1.0, 0.0)),
    "log": lambda **_: (lambda r: (np.log(r), 1.0 / r, -1.0 / (r * r))),
    "power": lambda tau_p=0.8, **_: (
        lambda r: (
            r ** (1.0 - tau_p),
            (1.0 - tau_p) * r ** (-tau_p),
            -tau_p * (1.0 - tau_p) * r ** (-tau_p - 1.0),
        )
    ),
    "inverse": lambda **_: (lambda r: (1.0 + 1.0 / r, -1.0 / (r * r), 2.0 / r**3)),
}


def end_potential(end: EndChart, kind: str, **params) -> ScalarField:
    """Synthetic potentials on an end."""
    n = end.dimension
    if kind == "static":
        if "M" not in end.params:
            raise ParameterError(
                "the static potential is defined on the Schwarzschild end only"
            )
        lapse = _static_lapse(end.params["M"])
        return radial_field(lapse, name="static", positive=True)
    if kind == "linear":
        c = float(params.get("c", 1.0))
        return product_field([(0, lambda t: (c * t, c, 0.0))], n, name="linear")
    if kind not in _RADIAL_POTENTIALS:
        raise ParameterError(
            f"unknown potential {kind!r}; expected one of {POTENTIALS}"
        )
    return radial_field(_RADIAL_POTENTIALS[kind](**params), name=kind, positive=True)


# ---------------------------------------------------------------------------
# end catalog
# ---------------------------------------------------------------------------

END_CATALOG = (
    CatalogEntry(
        name="euclid-end",
        dimension=3,
        parameters=[
            ParameterSpec(name="n", default=3.0),
            ParameterSpec(name="rho", default=10.0),
        ],
        reference="flat end",
        description="delta on |x| > rho",
    ),
    CatalogEntry(
        name="schwarzschild-end",
        dimension=3,
        parameters=[
            ParameterSpec(name="M", default=1.0, constraint="M > 0"),
            ParameterSpec(name="rho", default=10.0),
        ],
        reference="Schwarzschild spatial slice, isotropic chart",
        description="(1 + M/2r)^4 delta, static lapse (1 - M/2r)/(1 + M/2r)",
    ),
    CatalogEntry(
        name="synthetic-end",
        dimension=3,
        parameters=[
            ParameterSpec(name="tau", default=0.8, constraint="tau > 0"),
            ParameterSpec(name="amplitude", default=1.0),
            ParameterSpec(name="n", default=3.0),
            ParameterSpec(name="rho", default=10.0),
        ],
        reference="constructed power-law decay",
        description="(1 + A r^-tau) delta",
    ),
)
END_NAMES = tuple(e.name for e in END_CATALOG)


def list_ends() -> list[CatalogEntry]:
    return list(END_CATALOG)


def build_end(name: str, params: Optional[dict] = None, **kwargs) -> EndChart:
    params = dict(params or {})
    params.update(kwargs)
    if name not in END_NAMES:
        raise ParameterError(f"unknown end {name!r}; expected one of {END_NAMES}")
    entry = next(e for e in END_CATALOG if e.name == name)
    allowed = {p.name for p in entry.parameters}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ParameterError(f"{name} does not accept parameters {unknown}")
    values = {p.name: float(params.get(p.name, p.default)) for p in entry.parameters}
    rho = values["rho"]
    if rho <= 0:
        raise ParameterError("rho must be positive")
    n = int(values.get("n", 3))
    if n < 3 or n > 4:
        raise ParameterError(f"ends are supported in dimensions 3 and 4, got {n}")

    def admissible(x):
        return float(np.linalg.norm(x)) > rho

    if name == "euclid-end":
        phi = radial_field(lambda r: (1.0, 0.0, 0.0), name="phi")
        tau = None
    elif name == "schwarzschild-end":
        if values["M"] <= 0:
            raise ParameterError("mass must be positive")
        phi = radial_field(_schwarzschild_factor(values["M"]), name="phi")
        tau = 1.0
    else:
        if values["tau"] <= 0:
            raise ParameterError("tau must be positive")
        phi = radial_field(
            _power_decay_factor(values["tau"], values["amplitude"]), name="phi"
        )
        tau = values["tau"]
    provider = conformally_flat_metric(phi, n, name=name, admissible=admissible)
    return EndChart(
        name=name, provider=provider, rho=rho, params=values, tau_expected=tau
    )


# ---------------------------------------------------------------------------
# sampling and fitting
# ---------------------------------------------------------------------------


def spiral_directions(count: int = 64) -> np.ndarray:
    """Quasi-uniform unit vectors on the 2-sphere along a golden-angle spiral."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    radius = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), z])


def sphere_directions(n: int, count: Optional[int] = None) -> np.ndarray:
    """Deterministic direction set.

    A spiral for ``n = 3``, Gaussian-mapped Halton points otherwise.
    """
    count = max(count or 64, 64) if n == 3 else (count or 32 * n)
    if n == 3:
        return spiral_directions(count)
    points = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    gauss = norm.ppf(points)
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def _quantity(
    end: EndChart, quantity: str, u: Optional[ScalarField]
) -> Callable[[np.ndarray], float]:
    provider = end.provider
    n = end.dimension
    if quantity == "b":
        return lambda x: float(np.max(np.abs(provider.metric(x) - np.eye(n))))
    if quantity == "db":
        return lambda x: float(np.max(np.abs(provider.first_derivatives(x))))
    if quantity == "ddb":
        return lambda x: float(np.max(np.abs(provider.second_derivatives(x))))
    if quantity == "christoffel":
        return lambda x: float(np.max(np.abs(curvature(provider, x).christoffel)))
    if quantity == "ricci":
        return lambda x: float(np.max(np.abs(curvature(provider, x).ricci)))
    if quantity in ("u-growth", "u-hessian"):
        if u is None:
            raise ParameterError(f"{quantity} needs a potential")
        if quantity == "u-growth":
            return lambda x: u.value(x)
        return lambda x: float(np.max(np.abs(u.coordinate_hessian(x))))
    raise ParameterError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")


def _check_radii(end: EndChart, radii: np.ndarray) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 2:
        raise ParameterError("at least two radii are required")
    if np.any(np.diff(radii) <= 0):
        raise ParameterError("radii must be increasing")
    if radii[0] <= end.rho:
        raise ParameterError(f"radii must exceed the inner radius {end.rho}")
    if radii.size < 8 or radii[-1] / radii[0] < 10.0:
        logger.warning("decay fit over fewer than 8 radii or less than one decade")
    return radii


def _leading_exponent(radii: np.ndarray, log_q: np.ndarray) -> Optional[float]:
    """Local decay orders between neighbouring radii extrapolated to ``r = ∞``.

    The local order of ``c r^-tau (1 + O(1/r))`` is ``tau + O(1/r)``, so a
    quadratic in ``r0/r`` through the local orders removes the leading
    corrections that bias the global slope.
    """
    if radii.size < 4:
        return None
    log_r = np.log(radii)
    local = -np.diff(log_q) / np.diff(log_r)
    x = radii[0] / np.sqrt(radii[1:] * radii[:-1])
    return float(np.polyfit(x, local, min(2, local.size - 2))[-1])


def _fit(
    quantity: str,
    radii: np.ndarray,
    values: np.ndarray,
    reference: Optional[float],
    slack: float,
) -> DecayFit:
    if np.min(values) <= NOISE_FLOOR:
        return DecayFit(
            quantity=quantity,
            flat=True,
            radii=radii.tolist(),
            values=values.tolist(),
            reference_slope=reference,
        )
    log_r, log_q = np.log(radii), np.log(values)
    slope, intercept = np.polyfit(log_r, log_q, 1)
    residual = float(np.sqrt(np.mean((log_q - (slope * log_r + intercept)) ** 2)))
    within = None
    if reference is not None:
        within = bool(abs(slope - reference) <= slack * max(abs(reference), 1e-12))
    return DecayFit(
        quantity=quantity,
        slope=float(slope),
        tau=float(-slope),
        leading_tau=_leading_exponent(radii, log_q),
        constant=float(np.exp(intercept)),
        residual=residual,
        radii=radii.tolist(),
        values=values.tolist(),
        reference_slope=reference,
        within_reference=within,
    )


def sample_sup(
    fn: Callable[[np.ndarray], float], radii: np.ndarray, directions: np.ndarray
) -> np.ndarray:
    """``max`` of ``fn`` over the direction set at each radius."""
    return np.array([max(fn(r * d) for d in directions) for r in radii])


def fit_decay(
    end: EndChart,
    quantity: str,
    radii: Optional[Sequence[float]] = None,
    directions: Optional[np.ndarray] = None,
    u: Optional[ScalarField] = None,
    reference_slope: Optional[float] = None,
    slack: Optional[float] = None,
) -> DecayFit:
    """Least-squares power law for the sphere maximum of ``quantity``.

    Returns a flat fit instead of an exponent when the quantity is below the
    noise floor at some radius.
    """
    slack = settings.EXPONENT_SLACK if slack is None else slack
    radii = _check_radii(end, end.default_radii() if radii is None else radii)
    if directions is None:
        directions = sphere_directions(end.dimension)
    directions = np.asarray(directions, dtype=float)
    values = sample_sup(_quantity(end, quantity, u), radii, directions)
    fit = _fit(quantity, radii, values, reference_slope, slack)
    if fit.flat:
        logger.debug(f"{end.name}: {quantity} is flat")
    else:
        logger.debug(f"{end.name}: {quantity} slope {fit.slope:.4f}")
    return fit


def validate_af_range(fit: DecayFit, n: int, slack: float = 0.0) -> bool:
    """True iff the decay order lies in ``((n-2)/2, n-2]``; flat fits qualify.

    The leading order is used when the fit has one, and the upper end is only
    widened by round-off (``EXPONENT_ATOL``) unless ``slack`` is given.
    """
    if fit.flat:
        return True
    tau = fit.leading_tau if fit.leading_tau is not None else fit.tau
    return bool((n - 2) / 2.0 < tau <= (n - 2) * (1.0 + slack) + EXPONENT_ATOL)


@dataclass(frozen=True)
class DecayRegime:
    name: str
    envelope: str


def classify_decay_regime(tau: float, slack: Optional[float] = None) -> DecayRegime:
    """Regime of the decay order relative to 1, with the potential's growth envelope."""
    slack = settings.EXPONENT_SLACK if slack is None else slack
    if abs(tau - 1.0) <= slack:
        return DecayRegime("CRITICAL", "log r")
    if tau < 1.0:
        return DecayRegime("SUBCRITICAL", "r^(1-tau)")
    return DecayRegime("SUPERCRITICAL", "bounded")


def decay_chain(
    end: EndChart,
    radii: Optional[Sequence[float]] = None,
    directions: Optional[np.ndarray] = None,
    slack: Optional[float] = None,
) -> DecayChainReport:
    """Fits of the metric, Christoffel and Ricci decay, and how they compare."""
    slack = settings.CHAIN_SLACK if slack is None else slack
    ref = -end.tau_expected if end.tau_expected is not None else None
    b = fit_decay(end, "b", radii, directions, reference_slope=ref)
    gamma = fit_decay(end, "christoffel", radii, directions)
    ric = fit_decay(end, "ricci", radii, directions)
    if b.flat:
        chain_ok = gamma.flat and ric.flat
        regime = None
    else:
        chain_ok = (gamma.flat or gamma.slope <= b.slope - 1.0 + slack) and (
            ric.flat or ric.slope <= b.slope - 2.0 + slack
        )
        regime = classify_decay_regime(b.tau).name
    af_ok = validate_af_range(b, end.dimension) and b.passed
    logger.info(
        f"{end.name}: decay chain {'ok' if chain_ok else 'violated'}, "
        f"AF range {'ok' if af_ok else 'violated'}"
    )
    return DecayChainReport(
        end=end.name,
        dimension=end.dimension,
        metric_fit=b,
        christoffel_fit=gamma,
        ricci_fit=ric,
        af_range_ok=af_ok,
        chain_ok=chain_ok,
        regime=regime,
        slack=slack,
    )


# ---------------------------------------------------------------------------
# bounds on the potential
# ---------------------------------------------------------------------------


def _require_flat_lambda(s: QEStructure):
    if s.lam != 0.0:
        raise ParameterError(
            f"the bound needs lambda = 0, structure has lambda = {s.lam}"
        )
    if s.m <= 1:
        raise ParameterError(f"the bound needs m > 1, structure has m = {s.m}")


def growth_bounds_check(
    end: EndChart,
    u: ScalarField,
    m: float,
    radii: Optional[Sequence[float]] = None,
    directions: Optional[np.ndarray] = None,
    slack: Optional[float] = None,
    lam: float = 0.0,
) -> GrowthReport:
    """Compare the growth exponent of ``sup u`` over spheres with the pointwise bounds.

    The lower exponent is ``(m-1)/(m(m+2))`` and the upper one is ``1``.

    The bounds hold for ``lambda = 0`` and ``m > 1``. The exponent is fitted over
    dyadic radii ``2^k rho`` (``k = 1..10`` by default). A potential growing like
    ``log r`` has local exponent ``1/log r``, so the check can only tell it apart
    from ``r^alpha`` once ``log r > 1/alpha`` on the whole fit range; below that
    the report is marked as not resolvable.
    """
    if lam != 0.0:
        raise ParameterError(f"the growth bound needs lambda = 0, got {lam}")
    if m <= 1:
        raise ParameterError(f"the growth bound needs m > 1, got {m}")
    slack = settings.EXPONENT_SLACK if slack is None else slack
    radii = _check_radii(end, end.dyadic_radii() if radii is None else radii)
    directions = sphere_directions(end.dimension) if directions is None else directions
    values = np.array([[u.value(r * d) for d in directions] for r in radii])
    if np.any(values <= 0):
        raise ParameterError("potential must be positive on the end")
    sup = values.max(axis=1)
    exponent = float(np.polyfit(np.log(radii), np.log(sup), 1)[0])
    alpha = (m - 1.0) / (m * (m + 2.0))
    resolvable = bool(np.log(radii[0]) * alpha > 1.0)
    notes = None
    if not resolvable:
        notes = (
            f"log growth reads as exponent 1/log r >= {1.0 / np.log(radii[0]):.3g} "
            f"at r = {radii[0]:g}"
        )
        logger.warning(
            f"{end.name}: {notes}; fit further out to resolve the lower bound"
        )
    report = GrowthReport(
        structure=f"{end.name}:{u.name}",
        m=m,
        radii=radii.tolist(),
        sup_values=sup.tolist(),
        exponent=exponent,
        lower_exponent=alpha,
        lower_ok=exponent >= alpha - slack,
        upper_ok=exponent <= 1.0 + slack,
        slack=slack,
        resolvable=resolvable,
        notes=notes,
    )
    logger.info(
        f"{report.structure}: growth exponent {exponent:.4f} (lower {alpha:.4f})"
    )
    return report


def gradient_bound_check(
    s: QEStructure,
    grid: Optional[np.ndarray] = None,
    mu: Optional[float] = None,
    tol: float = 1e-8,
) -> GradientReport:
    """Check ``sup |∇u| <= sqrt(max(mu, 0)/(m-1))`` over a grid."""
    _require_flat_lambda(s)
    points = s.grid(3) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if mu is None:
        mu = float(np.mean([mu_field(s, x) for x in points]))
    bound = float(np.sqrt(max(mu, 0.0) / (s.m - 1.0)))
    largest = 0.0
    for x in points:
        x = s.provider.point(x)
        ginv = np.linalg.inv(s.provider.metric(x))
        largest = max(largest, covector_norm(s.u.gradient(x), ginv))
    passed = largest <= bound + tol
    logger.log(
        "INFO" if passed else "WARNING",
        f"{s.name}: sup |grad u| = {largest:.6g}, bound {bound:.6g}",
    )
    return GradientReport(
        structure=s.name,
        mu=mu,
        bound=bound,
        max_gradient=largest,
        tolerance=tol,
        passed=passed,
    )


def coordinate_hessian_decay(
    end: EndChart,
    u: ScalarField,
    radii: Optional[Sequence[float]] = None,
    directions: Optional[np.ndarray] = None,
    tau: Optional[float] = None,
    slack: Optional[float] = None,
) -> DecayFit:
    """Fit the coordinate second derivatives of ``u`` and compare with ``-tau-1``."""
    slack = settings.EXPONENT_SLACK if slack is None else slack
    if tau is None:
        tau = end.tau_expected
    if tau is None:
        b = fit_decay(end, "b", radii, directions)
        tau = None if b.flat else b.tau
    fit = fit_decay(end, "u-hessian", radii, directions, u=u)
    if fit.flat or tau is None:
        return fit
    reference = -tau - 1.0
    return fit.model_copy(
        update={
            "reference_slope": reference,
            "within_reference": bool(fit.slope <= reference + slack * abs(reference)),
        }
    )
