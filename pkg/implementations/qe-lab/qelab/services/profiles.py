# qelab/services/profiles.py

"""
Profile functions ``f`` with ``f'^2 = P(f)`` for the Bergery-type surface families.

The first-order relation is integrated through its second-order form
``f'' = P'(f) / 2`` with DOP853; ``f'^2 - P(f)`` is kept as a monitored first
integral. Starts with ``P(f0) = 0`` are bootstrapped by a Taylor series.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from qelab.config import settings
from qelab.errors import InadmissiblePointError, IntegrationError, ParameterError
from qelab.schemas.reports import ProfileSummary
from qelab.services.geometry import (
    Factor,
    ScalarField,
    constant_factor,
    cosh_factor,
    exp_factor,
    product_field,
)

FAMILIES = ("besse-a", "besse-b", "besse-c", "besse-d", "thm1-ii", "thm1-iii")

Terms = Sequence[tuple[float, float]]


def _power_sum(terms: Terms):
    """``P(f) = sum(c * f**e)`` and its first two derivatives."""
    terms = [(float(c), float(e)) for c, e in terms if c != 0.0]

    def p(f):
        return sum(c * f**e for c, e in terms)

    def dp(f):
        return sum(c * e * f ** (e - 1) for c, e in terms if e != 0)

    def d2p(f):
        return sum(c * e * (e - 1) * f ** (e - 2) for c, e in terms if e not in (0, 1))

    return p, dp, d2p


@dataclass(frozen=True)
class ProfileODE:
    """First-order profile problem ``f'^2 = P(f)``, ``f(0) = f0``.

    ``sign0`` is the sign of ``f'(0)``; ``0`` marks a degenerate start
    (``P(f0) = 0``) whose solution is even in ``t``.
    """

    family: str
    P: Callable[[float], float]
    dP: Callable[[float], float]
    d2P: Callable[[float], float]
    f0: float
    sign0: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sign0 not in (-1, 0, 1):
            raise ParameterError("sign0 must be -1, 0 or 1")
        if self.f0 <= 0:
            raise ParameterError("profile must start at a positive value")
        if self.P(self.f0) < -1e-12:
            raise ParameterError(f"P(f0) = {self.P(self.f0):.3g} is negative")

    @property
    def even(self) -> bool:
        return self.sign0 == 0

    @classmethod
    def from_terms(
        cls, family: str, terms: Terms, f0: float, sign0: int, **params
    ) -> "ProfileODE":
        p, dp, d2p = _power_sum(terms)
        return cls(
            family=family, P=p, dP=dp, d2P=d2p, f0=f0, sign0=sign0, params=params
        )


def _require_p(p: float) -> float:
    if p <= 1:
        raise ParameterError(f"quasi-Einstein constant p must exceed 1, got {p}")
    return float(p)


def _require_m(m: float) -> float:
    if m <= 1:
        raise ParameterError(f"m must exceed 1, got {m}")
    return float(m)


def _besse_c_terms(p: float) -> list[tuple[float, float]]:
    coef = 2.0 * (p - 1) ** (p - 1) / (p + 1) ** (p + 1)
    return [(-1.0, 0.0), (1.0, 2.0), (coef, 1.0 - p)]


def _besse_d_terms(p: float, a: float, mu: float) -> list[tuple[float, float]]:
    return [
        (mu / (p - 1), 0.0),
        (1.0, 2.0),
        (-(a ** (p + 1) + mu * a ** (p - 1) / (p - 1)), 1.0 - p),
    ]


def _check_mu(p: float, mu: float) -> float:
    allowed = (1.0 - p, 0.0, p - 1.0)
    if not any(abs(mu - v) <= 1e-12 for v in allowed):
        raise ParameterError(f"mu = {mu} unsupported; choose one of {allowed}")
    return float(mu)


def profile_ode(family: str, **params) -> ProfileODE:
    """Build the profile problem of a named family.

    ``besse-*`` families take the quasi-Einstein constant ``p`` (default 3),
    ``thm1-*`` families take ``m`` and use ``p = m + 1``. ``besse-d`` and
    ``thm1-iii`` additionally take the starting value ``a``; ``besse-d`` takes
    ``mu`` from ``{1 - p, 0, p - 1}``.
    """
    if family == "besse-a":
        p = _require_p(params.get("p", 3.0))
        return ProfileODE.from_terms(family, [(1.0, 0.0), (-1.0, 1.0 - p)], 1.0, 0, p=p)
    if family == "besse-b":
        p = _require_p(params.get("p", 3.0))
        return ProfileODE.from_terms(family, [(1.0, 2.0)], 1.0, 1, p=p)
    if family == "besse-c":
        p = _require_p(params.get("p", 3.0))
        return ProfileODE.from_terms(family, _besse_c_terms(p), 1.0, 1, p=p)
    if family == "thm1-ii":
        m = _require_m(params.get("m", 2.0))
        return ProfileODE.from_terms(
            family, _besse_c_terms(m + 1), 1.0, 1, m=m, p=m + 1
        )
    if family in ("besse-d", "thm1-iii"):
        if family == "thm1-iii":
            m = _require_m(params.get("m", 2.0))
            p, mu = m + 1, -m
            a = float(params.get("a", 1.0))
            if a <= np.sqrt(m / (m + 2)):
                bound = np.sqrt(m / (m + 2))
                raise ParameterError(f"a must exceed sqrt(m/(m+2)) = {bound:.6f}")
            extra = {"m": m}
        else:
            p = _require_p(params.get("p", 3.0))
            mu = _check_mu(p, float(params.get("mu", 1.0 - p)))
            a = float(params.get("a", 1.0))
            extra = {}
        if a <= 0:
            raise ParameterError("a must be positive")
        ode = ProfileODE.from_terms(
            family, _besse_d_terms(p, a, mu), a, 0, p=p, a=a, mu=mu, **extra
        )
        if ode.dP(a) <= 0:
            raise ParameterError(
                f"degenerate start at a = {a} has no escape direction "
                f"(P'(a) = {ode.dP(a):.3g})"
            )
        return ode
    raise ParameterError(
        f"unknown profile family {family!r}; expected one of {FAMILIES}"
    )


def mu_of_family(family: str, params: Optional[dict] = None) -> float:
    """Integrability constant of the surface structure carried by a family."""
    params = params or {}
    if family in ("thm1-ii", "thm1-iii"):
        return -_require_m(params.get("m", 2.0))
    p = _require_p(params.get("p", 3.0))
    if family == "besse-a":
        return p - 1.0
    if family == "besse-b":
        return 0.0
    if family == "besse-c":
        return 1.0 - p
    if family == "besse-d":
        return _check_mu(p, float(params.get("mu", 1.0 - p)))
    raise ParameterError(f"unknown profile family {family!r}")


def lambda_of_family(family: str, params: Optional[dict] = None) -> float:
    params = params or {}
    if family in ("thm1-ii", "thm1-iii"):
        return -(_require_m(params.get("m", 2.0)) + 2.0)
    p = _require_p(params.get("p", 3.0))
    if family == "besse-a":
        return 0.0
    if family in ("besse-b", "besse-c", "besse-d"):
        return -(p + 1.0)
    raise ParameterError(f"unknown profile family {family!r}")


@dataclass(frozen=True)
class ProfileSolution:
    """Integrated profile with dense evaluation on ``[0, t_max]``.

    Families with a degenerate start are even and also evaluate on
    ``[-t_max, 0)`` by reflection.
    """

    ode: ProfileODE
    t_max: float
    tol: float
    grid: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    residual: np.ndarray
    dense: Callable = field(repr=False)
    taylor_until: float = 0.0

    @property
    def first_integral_residual(self) -> float:
        return float(np.max(self.residual))

    @property
    def sign_ok(self) -> bool:
        if self.ode.sign0 > 0:
            return bool(np.all(self.fp[1:] > 0))
        if self.ode.sign0 == 0:
            return bool(np.all(self.fp >= -self.tol))
        return bool(np.all(self.fp[1:] < 0))

    def _taylor(self, t: float) -> tuple[float, float]:
        a1 = self.ode.dP(self.ode.f0)
        a2 = self.ode.d2P(self.ode.f0)
        f = self.ode.f0 + a1 * t**2 / 4.0 + a1 * a2 * t**4 / 96.0
        fp = a1 * t / 2.0 + a1 * a2 * t**3 / 24.0
        return f, fp

    def _state(self, t: float) -> tuple[float, float]:
        if t < self.taylor_until:
            return self._taylor(t)
        f, fp = self.dense(t)
        return float(f), float(fp)

    def derivatives(self, t: float) -> tuple[float, float, float, float]:
        """``(f, f', f'', f''')`` at ``t``."""
        t = float(t)
        if t > self.t_max + 1e-9:
            raise InadmissiblePointError(
                f"t = {t} beyond integrated range {self.t_max}"
            )
        sign = 1.0
        if t < 0:
            if not self.ode.even or -t > self.t_max + 1e-9:
                raise InadmissiblePointError(f"t = {t} outside the integrated range")
            t, sign = -t, -1.0
        f, fp = self._state(min(t, self.t_max))
        fpp = 0.5 * self.ode.dP(f)
        fppp = 0.5 * self.ode.d2P(f) * fp
        return f, sign * fp, fpp, sign * fppp

    def evaluate(self, t: float) -> float:
        return self.derivatives(t)[0]

    def value_factor(self, scale: float = 1.0) -> Factor:
        """``scale * f`` as a one-variable factor."""

        def factor(t):
            f, fp, fpp, _ = self.derivatives(t)
            return scale * f, scale * fp, scale * fpp

        return factor

    def square_factor(self, scale: float = 1.0) -> Factor:
        """``(scale * f)**2`` as a one-variable factor."""
        s2 = scale * scale

        def factor(t):
            f, fp, fpp, _ = self.derivatives(t)
            return s2 * f * f, 2.0 * s2 * f * fp, 2.0 * s2 * (fp * fp + f * fpp)

        return factor

    def derivative_square_factor(self, scale: float = 1.0) -> Factor:
        """``(scale * f')**2`` as a one-variable factor."""
        s2 = scale * scale

        def factor(t):
            _, fp, fpp, fppp = self.derivatives(t)
            return s2 * fp * fp, 2.0 * s2 * fp * fpp, 2.0 * s2 * (fpp * fpp + fp * fppp)

        return factor

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write ``t,f,fp,fpp,residual`` rows on the export grid."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "f", "fp", "fpp", "residual"])
            for row in zip(self.grid, self.f, self.fp, self.fpp, self.residual):
                writer.writerow([f"{v:.15g}" for v in row])
        logger.info(f"Wrote {len(self.grid)} profile rows to {path}")
        return path

    def to_summary(self) -> ProfileSummary:
        f_at_1 = self.evaluate(1.0) if self.t_max >= 1.0 else None
        residual = self.first_integral_residual
        return ProfileSummary(
            family=self.ode.family,
            params={k: float(v) for k, v in self.ode.params.items()},
            t_max=self.t_max,
            points=len(self.grid),
            first_integral_residual=residual,
            tolerance=self.tol,
            sign_ok=self.sign_ok,
            f_at_1=f_at_1,
            passed=residual <= self.tol and self.sign_ok,
        )


def integrate_profile(
    ode: ProfileODE,
    t_max: Optional[float] = None,
    tol: Optional[float] = None,
    grid_step: Optional[float] = None,
) -> ProfileSolution:
    """Integrate ``ode`` on ``[0, t_max]`` keeping ``|f'^2 - P(f)| <= tol``."""
    t_max = settings.PROFILE_T_MAX if t_max is None else float(t_max)
    tol = settings.PROFILE_TOL if tol is None else float(tol)
    grid_step = settings.PROFILE_GRID_STEP if grid_step is None else float(grid_step)
    if t_max <= 0:
        raise ParameterError("t_max must be positive")

    rtol = max(tol * 1e-4, 2.5e-14)
    atol = rtol * 1e-2

    if ode.sign0 == 0:
        slope = ode.dP(ode.f0)
        if slope <= 0:
            logger.error(f"{ode.family}: degenerate start with P'(f0) = {slope}")
            raise IntegrationError("degenerate start without escape direction")
        t0 = min(tol**0.25, 0.5 * t_max)
        a2 = ode.d2P(ode.f0)
        y0 = [
            ode.f0 + slope * t0**2 / 4.0 + slope * a2 * t0**4 / 96.0,
            slope * t0 / 2.0 + slope * a2 * t0**3 / 24.0,
        ]
    else:
        t0 = 0.0
        y0 = [ode.f0, ode.sign0 * np.sqrt(max(ode.P(ode.f0), 0.0))]

    def rhs(_, y):
        return [y[1], 0.5 * ode.dP(y[0])]

    def leaves_positivity(_, y):
        return y[0]

    leaves_positivity.terminal = True
    leaves_positivity.direction = -1

    sol = solve_ivp(
        rhs,
        (t0, t_max),
        y0,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=leaves_positivity,
    )

    if not np.all(np.isfinite(sol.y)):
        logger.error(f"{ode.family}: non-finite state during integration")
        raise IntegrationError("profile integration produced non-finite values")
    if sol.status == 1:
        logger.error(
            f"{ode.family}: profile reached zero at t = {sol.t_events[0][0]:.6g}"
        )
        raise IntegrationError("profile left positivity")
    if sol.status != 0:
        logger.error(f"{ode.family}: integrator failed: {sol.message}")
        raise IntegrationError(f"profile integration failed: {sol.message}")

    count = int(round(t_max / grid_step)) + 1
    grid = np.linspace(0.0, t_max, count)
    partial = ProfileSolution(
        ode=ode,
        t_max=t_max,
        tol=tol,
        grid=grid,
        f=np.empty(0),
        fp=np.empty(0),
        fpp=np.empty(0),
        residual=np.empty(0),
        dense=sol.sol,
        taylor_until=t0,
    )
    states = np.array([partial.derivatives(t)[:3] for t in grid])
    f, fp, fpp = states[:, 0], states[:, 1], states[:, 2]
    residual = np.abs(fp**2 - np.array([ode.P(v) for v in f]))

    solution = ProfileSolution(
        ode=ode,
        t_max=t_max,
        tol=tol,
        grid=grid,
        f=f,
        fp=fp,
        fpp=fpp,
        residual=residual,
        dense=sol.sol,
        taylor_until=t0,
    )
    logger.debug(
        f"{ode.family}: integrated to t={t_max} with {sol.t.size} steps, "
        f"first-integral drift {solution.first_integral_residual:.3e}"
    )
    if solution.first_integral_residual > tol:
        logger.warning(
            f"{ode.family}: first-integral drift "
            f"{solution.first_integral_residual:.3e} exceeds {tol:.1e}"
        )
    return solution


def fiber_solution(kind: str, scale: float = 1.0) -> ScalarField:
    """Positive fiber solutions ``v`` on the line: ``exp``, ``cosh`` or ``const``."""
    if kind == "exp":
        factor = exp_factor(1.0, scale)
    elif kind == "cosh":
        factor = cosh_factor(scale)
    elif kind == "const":
        factor = constant_factor(scale)
    else:
        raise ParameterError(
            f"unknown fiber kind {kind!r}; expected exp, cosh or const"
        )
    return product_field(
        [(0, factor)], dimension=1, name=f"v-{kind}", positive=scale > 0
    )
