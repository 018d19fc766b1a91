# qelab/services/zoo.py

"""
Catalog of closed-form quasi-Einstein structures.

Every entry is built from diagonal product metrics so the metric and the
potential carry analytic first and second derivatives. Profile-based entries
embed an integrated :class:`ProfileSolution`.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from loguru import logger

from qelab.config import settings
from qelab.errors import ParameterError
from qelab.schemas.catalog import CatalogEntry, ParameterSpec
from qelab.schemas.run_config import GridSpec
from qelab.services.geometry import (
    Factor,
    MetricProvider,
    ScalarField,
    constant_factor,
    cosh_factor,
    diagonal_product_metric,
    exp_factor,
    linear_combination,
    product_field,
    squared_trig,
)
from qelab.services.profiles import (
    ProfileSolution,
    integrate_profile,
    lambda_of_family,
    mu_of_family,
    profile_ode,
)
from qelab.services.verifier import integrability_value

ALIASES = {"table1-product": "table1-product-exp"}


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box used for sampling."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def contains(self, x: np.ndarray, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        above = np.all(x >= np.asarray(self.lo) - margin)
        return bool(above and np.all(x <= np.asarray(self.hi) + margin))

    def grid(self, spec: Union[int, GridSpec, None] = None) -> np.ndarray:
        """Tensor grid of points, one row per point, in lexicographic order."""
        if spec is None:
            spec = GridSpec(points=settings.GRID_POINTS)
        elif isinstance(spec, int):
            spec = GridSpec(points=spec)
        if spec.axes is not None:
            if len(spec.axes) != self.dimension:
                raise ParameterError(
                    f"grid has {len(spec.axes)} axes, "
                    f"structure has dimension {self.dimension}"
                )
            axes = [np.linspace(a.lo, a.hi, a.count) for a in spec.axes]
        else:
            count = spec.points or settings.GRID_POINTS
            axes = [
                np.linspace(lo, hi, count) if count > 1 else np.array([0.5 * (lo + hi)])
                for lo, hi in zip(self.lo, self.hi)
            ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.dimension))


@dataclass(frozen=True)
class QEStructure:
    """A candidate quasi-Einstein datum ``(g, u, m, lambda)`` and its constants."""

    name: str
    params: dict
    provider: MetricProvider
    u: ScalarField
    m: float
    lam: float
    mu_expected: Optional[float]
    box: Box
    solutions: tuple[ScalarField, ...] = ()
    expected_dim: Optional[int] = None
    einstein: bool = False
    profile: Optional[ProfileSolution] = field(default=None, repr=False)
    reference: str = ""

    @property
    def dimension(self) -> int:
        return self.provider.dimension

    def admissible(self, x: np.ndarray) -> bool:
        check = self.provider.admissible
        return check is None or bool(check(np.asarray(x)))

    def grid(self, spec: Union[int, GridSpec, None] = None) -> np.ndarray:
        return self.box.grid(spec)

    def with_potential(self, u: ScalarField) -> "QEStructure":
        """Same geometry and constants with a replaced potential."""
        return QEStructure(
            name=f"{self.name}[{u.name}]",
            params=self.params,
            provider=self.provider,
            u=u,
            m=self.m,
            lam=self.lam,
            mu_expected=None,
            box=self.box,
            solutions=self.solutions,
            expected_dim=self.expected_dim,
            einstein=self.einstein,
            profile=self.profile,
            reference=self.reference,
        )


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------


def _sin() -> Factor:
    return lambda t: (np.sin(t), np.cos(t), -np.sin(t))


def _cos() -> Factor:
    return lambda t: (np.cos(t), -np.sin(t), -np.cos(t))


def _sinh() -> Factor:
    return lambda t: (np.sinh(t), np.cosh(t), np.sinh(t))


def _linear(c0: float, c1: float) -> Factor:
    return lambda t: (c0 + c1 * t, c1, 0.0)


def _quadratic() -> Factor:
    return lambda t: (t * t, 2.0 * t, 2.0)


def _fiber_factor(kind: str, scale: float = 1.0) -> Factor:
    if kind == "exp":
        return exp_factor(1.0, scale)
    if kind == "cosh":
        return cosh_factor(scale)
    raise ParameterError(f"fiber must be 'exp' or 'cosh', got {kind!r}")


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _spec(name, default=None, choices=None, constraint=None) -> ParameterSpec:
    return ParameterSpec(
        name=name, default=default, choices=choices, constraint=constraint
    )


def _require(condition: bool, message: str):
    if not condition:
        logger.error(message)
        raise ParameterError(message)


def _resolve(entry: CatalogEntry, params: Optional[dict]) -> dict:
    params = dict(params or {})
    known = {p.name: p for p in entry.parameters}
    unknown = sorted(set(params) - set(known))
    if unknown:
        raise ParameterError(f"{entry.name} does not accept parameters {unknown}")
    resolved = {}
    for name, spec in known.items():
        value = params.get(name, spec.default)
        if spec.choices is not None:
            if value not in spec.choices:
                raise ParameterError(
                    f"{entry.name}: {name} must be one of {spec.choices}, "
                    f"got {value!r}"
                )
            resolved[name] = value
        else:
            try:
                resolved[name] = float(value)
            except (TypeError, ValueError) as e:
                raise ParameterError(
                    f"{entry.name}: {name} must be a number, got {value!r}"
                ) from e
    return resolved


@lru_cache(maxsize=32)
def _profile(family: str, items: tuple) -> ProfileSolution:
    logger.debug(f"Integrating profile {family} {dict(items)}")
    return integrate_profile(profile_ode(family, **dict(items)))


def _box(*ranges: tuple[float, float]) -> Box:
    return Box(lo=tuple(r[0] for r in ranges), hi=tuple(r[1] for r in ranges))


def _sym(n: int) -> Box:
    w = settings.BOX_HALF_WIDTH
    return _box(*[(-w, w)] * n)


def _frozen_mu(
    provider: MetricProvider, u: ScalarField, m: float, lam: float, box: Box
) -> float:
    """Integrability constant evaluated once at the box center."""
    return float(integrability_value(provider, u, m, lam, box.center))


# ---------------------------------------------------------------------------
# einstein base
# ---------------------------------------------------------------------------


def einstein_base(kind: str = "hyperbolic", lam: float = -1.0) -> MetricProvider:
    """Simply connected surface with ``Ric = lam * g``.

    Realized as ``dx^2 + e^{2kx} dy^2``.
    """
    if kind not in ("hyperbolic", "hyperbolic-plane-scaled"):
        raise ParameterError(f"unknown Einstein base kind {kind!r}")
    _require(lam < 0, f"Einstein base needs lambda < 0, got {lam}")
    k = float(np.sqrt(-lam))
    return diagonal_product_metric(
        [[], [(0, exp_factor(2.0 * k))]], name=f"hyperbolic({lam:g})"
    )


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _build_euclid3(p: dict) -> QEStructure:
    _require(p["lambda"] == 0.0, "euclid3 only supports lambda = 0")
    provider = diagonal_product_metric([[], [], []], name="euclid3")
    one = product_field([], 3, name="1", positive=True)
    affine = linear_combination(
        [
            one,
            product_field([(0, _linear(0.0, 1.0))], 3),
            product_field([(1, _linear(0.0, 1.0))], 3),
        ],
        [1.0, 0.5, -0.3],
        name="affine",
    )
    return QEStructure(
        name="euclid3",
        params=p,
        provider=provider,
        u=one,
        m=p["m"],
        lam=0.0,
        mu_expected=0.0,
        box=_sym(3),
        solutions=(one, affine),
        expected_dim=4,
        einstein=True,
    )


def _build_line(kind: str):
    def build(p: dict) -> QEStructure:
        m = p["m"]
        _require(m > 0, f"m must be positive, got {m}")
        provider = diagonal_product_metric([[]], name=f"line-{kind}")
        u = product_field(
            [(0, _fiber_factor(kind))], 1, name=f"u-{kind}", positive=True
        )
        other = "cosh" if kind == "exp" else "exp"
        decaying = product_field(
            [(0, exp_factor(-1.0))], 1, name="exp(-r)", positive=True
        )
        second = product_field([(0, _fiber_factor(other))], 1, name=f"u-{other}")
        return QEStructure(
            name=f"table1-line-{kind}",
            params=p,
            provider=provider,
            u=u,
            m=m,
            lam=-m,
            mu_expected=0.0 if kind == "exp" else -(m - 1.0),
            box=_sym(1),
            solutions=(u, second, decaying),
            expected_dim=2,
        )

    return build


def _product_structure(
    name: str, m: float, c: float, fiber: str, p: dict
) -> QEStructure:
    k = float(np.sqrt(m)) / c
    provider = diagonal_product_metric(
        [[], [(0, exp_factor(2.0 * k))], [(2, constant_factor(c * c))]], name=name
    )
    u = product_field(
        [(2, _fiber_factor(fiber, c))], 3, name=f"u-{fiber}", positive=True
    )
    solutions = tuple(
        product_field([(2, _fiber_factor(kind, c))], 3, name=f"u-{kind}", positive=True)
        for kind in ("exp", "cosh")
    )
    return QEStructure(
        name=name,
        params=p,
        provider=provider,
        u=u,
        m=m,
        lam=-m / (c * c),
        mu_expected=0.0 if fiber == "exp" else -(m - 1.0),
        box=_sym(3),
        solutions=solutions,
        expected_dim=2,
    )


def _build_product(fiber: str):
    def build(p: dict) -> QEStructure:
        _require(p["m"] > 0, f"m must be positive, got {p['m']}")
        return _product_structure(f"table1-product-{fiber}", p["m"], 1.0, fiber, p)

    return build


def _build_thm1_i(p: dict) -> QEStructure:
    _require(p["m"] > 1, f"thm1-i requires m > 1, got {p['m']}")
    _require(p["c"] > 0, f"thm1-i requires c > 0, got {p['c']}")
    return _product_structure("thm1-i", p["m"], p["c"], p["fiber"], p)


def _profile_box(n_extra: int, t_lo: float = 0.1, t_hi: float = 3.0) -> Box:
    w = settings.BOX_HALF_WIDTH
    return _box((t_lo, t_hi), *[(-w, w)] * n_extra)


def _in_profile_range(prof: ProfileSolution) -> Callable[[np.ndarray], bool]:
    return lambda x: 0.0 < x[0] < prof.t_max


def _build_thm1_warped(family: str):
    def build(p: dict) -> QEStructure:
        m = p["m"]
        _require(m > 1, f"{family} requires m > 1, got {m}")
        items = {"m": m}
        if family == "thm1-iii":
            a = p["a"]
            _require(
                a > np.sqrt(m / (m + 2)),
                f"thm1-iii requires a > sqrt(m/(m+2)), got {a}",
            )
            items["a"] = a
        prof = _profile(family, tuple(sorted(items.items())))
        b = 1.0
        if family == "thm1-iii":
            b = 2.0 / prof.ode.dP(prof.ode.f0)
        provider = diagonal_product_metric(
            [[], [(0, prof.derivative_square_factor(b))], [(0, prof.square_factor())]],
            name=family,
            admissible=_in_profile_range(prof),
            step_scale=10.0,
        )
        solutions = tuple(
            product_field(
                [(0, prof.value_factor()), (2, _fiber_factor(kind))],
                3,
                name=f"f*{kind}",
                positive=True,
                step_scale=10.0,
            )
            for kind in ("exp", "cosh")
        )
        u = solutions[0] if p["fiber"] == "exp" else solutions[1]
        lam = lambda_of_family(family, items)
        box = _profile_box(2)
        einstein = family == "thm1-iii" and abs(p["a"] - 1.0) < 1e-12
        return QEStructure(
            name=family,
            params=dict(p, b=b) if family == "thm1-iii" else p,
            provider=provider,
            u=u,
            m=m,
            lam=lam,
            mu_expected=_frozen_mu(provider, u, m, lam, box),
            box=box,
            solutions=solutions,
            expected_dim=4 if einstein else 2,
            einstein=einstein,
            profile=prof,
        )

    return build


def _build_case2_a(p: dict) -> QEStructure:
    m = p["m"]
    _require(m > 0, f"m must be positive, got {m}")
    e2 = exp_factor(2.0)
    provider = diagonal_product_metric([[], [(0, e2)], [(0, e2)]], name="case2-a")
    u = product_field([(0, exp_factor(1.0))], 3, name="e^r", positive=True)
    x_er = product_field(
        [(0, exp_factor(1.0)), (1, _linear(0.0, 1.0))], 3, name="x e^r"
    )
    y_er = product_field(
        [(0, exp_factor(1.0)), (2, _linear(0.0, 1.0))], 3, name="y e^r"
    )
    quad = linear_combination(
        [
            product_field([(0, exp_factor(-1.0))], 3),
            product_field([(0, exp_factor(1.0)), (1, _quadratic())], 3),
            product_field([(0, exp_factor(1.0)), (2, _quadratic())], 3),
        ],
        [1.0, 1.0, 1.0],
        name="e^-r+(x^2+y^2)e^r",
    )
    return QEStructure(
        name="case2-a",
        params=p,
        provider=provider,
        u=u,
        m=m,
        lam=-(m + 2.0),
        mu_expected=0.0,
        box=_sym(3),
        solutions=(u, x_er, y_er, quad),
        expected_dim=4,
        einstein=True,
    )


def _build_case2_b(p: dict) -> QEStructure:
    m = p["m"]
    _require(m > 0, f"m must be positive, got {m}")
    sinh2 = squared_trig("sinh")
    provider = diagonal_product_metric(
        [[], [(0, sinh2)], [(0, sinh2), (1, squared_trig("sin"))]],
        name="case2-b",
        admissible=lambda x: x[0] > 0.0 and 0.0 < x[1] < np.pi,
    )
    u = product_field([(0, cosh_factor())], 3, name="cosh r", positive=True)
    solutions = (
        u,
        product_field([(0, _sinh()), (1, _cos())], 3, name="sinh r cos th"),
        product_field(
            [(0, _sinh()), (1, _sin()), (2, _cos())], 3, name="sinh r sin th cos ph"
        ),
        product_field(
            [(0, _sinh()), (1, _sin()), (2, _sin())], 3, name="sinh r sin th sin ph"
        ),
    )
    w = settings.BOX_HALF_WIDTH
    return QEStructure(
        name="case2-b",
        params=p,
        provider=provider,
        u=u,
        m=m,
        lam=-(m + 2.0),
        mu_expected=-(m - 1.0),
        box=_box((0.2, w), (0.2, np.pi - 0.2), (-w, w)),
        solutions=solutions,
        expected_dim=4,
        einstein=True,
    )


def _build_besse(letter: str):
    family = f"besse-{letter}"

    def build(p: dict) -> QEStructure:
        items = {k: v for k, v in p.items()}
        q = items["p"]
        _require(q > 1, f"{family} requires p > 1, got {q}")
        lam = lambda_of_family(family, items)
        mu = mu_of_family(family, items)
        if letter == "b":
            provider = diagonal_product_metric(
                [[], [(0, exp_factor(2.0))]], name=family
            )
            u = product_field([(0, exp_factor(1.0))], 2, name="f", positive=True)
            return QEStructure(
                name=f"besse-9118-{letter}",
                params=p,
                provider=provider,
                u=u,
                m=q,
                lam=lam,
                mu_expected=mu,
                box=_sym(2),
                solutions=(u,),
            )
        prof = _profile(family, tuple(sorted(items.items())))
        if letter == "a":
            scale = 2.0 / (q - 1.0)
        elif letter == "d":
            scale = 2.0 / prof.ode.dP(prof.ode.f0)
        else:
            scale = 1.0
        provider = diagonal_product_metric(
            [[], [(0, prof.derivative_square_factor(scale))]],
            name=family,
            admissible=_in_profile_range(prof),
            step_scale=10.0,
        )
        u = product_field(
            [(0, prof.value_factor())], 2, name="f", positive=True, step_scale=10.0
        )
        return QEStructure(
            name=f"besse-9118-{letter}",
            params=p,
            provider=provider,
            u=u,
            m=q,
            lam=lam,
            mu_expected=mu,
            box=_profile_box(1),
            solutions=(u,),
            profile=prof,
        )

    return build


def _build_fiber_const(p: dict) -> QEStructure:
    C = p["C"]
    _require(C > 0, f"constant fiber must be positive, got {C}")
    provider = diagonal_product_metric([[]], name="fiber-const")
    u = product_field([(0, constant_factor(C))], 1, name="C", positive=True)
    affine = product_field([(0, _linear(1.0, 0.5))], 1, name="1+r/2")
    return QEStructure(
        name="fiber-const",
        params=p,
        provider=provider,
        u=u,
        m=p["m"],
        lam=0.0,
        mu_expected=0.0,
        box=_sym(1),
        solutions=(u, affine),
        expected_dim=2,
    )


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

_M = _spec("m", 2.0, constraint="m > 0")
_M1 = _spec("m", 2.0, constraint="m > 1")
_FIBER = _spec("fiber", "exp", choices=["exp", "cosh"])
_P = _spec("p", 3.0, constraint="p > 1")

_REGISTRY: dict[str, tuple[CatalogEntry, Callable[[dict], QEStructure]]] = {}


def _register(entry: CatalogEntry, builder: Callable[[dict], QEStructure]):
    _REGISTRY[entry.name] = (entry, builder)


_register(
    CatalogEntry(
        name="euclid3",
        dimension=3,
        parameters=[_M, _spec("lambda", 0.0, constraint="lambda = 0")],
        reference="flat space, affine potentials",
        description="Euclidean R^3 with u = 1",
    ),
    _build_euclid3,
)
for _kind in ("exp", "cosh"):
    _register(
        CatalogEntry(
            name=f"table1-line-{_kind}",
            dimension=1,
            parameters=[_M],
            reference=f"line with two independent solutions ({_kind} potential)",
            description=f"(R, dr^2, u = {_kind} r, lambda = -m)",
        ),
        _build_line(_kind),
    )
for _kind in ("exp", "cosh"):
    _register(
        CatalogEntry(
            name=f"table1-product-{_kind}",
            dimension=3,
            parameters=[_M],
            reference=f"hyperbolic plane times line ({_kind} potential)",
            description=f"(H^2(-m) x R, u = {_kind} r, lambda = -m)",
        ),
        _build_product(_kind),
    )
_register(
    CatalogEntry(
        name="thm1-i",
        dimension=3,
        parameters=[_M1, _spec("c", 1.0, constraint="c > 0"), _FIBER],
        reference="Einstein surface times line",
        description="g_B + c^2 dr^2 with K_B = -m/c^2, u = c v(r)",
    ),
    _build_thm1_i,
)
_register(
    CatalogEntry(
        name="thm1-ii",
        dimension=3,
        parameters=[_M1, _FIBER],
        reference="warped profile with f(0) = 1, f' > 0",
        description="dx^2 + f'^2 dy^2 + f^2 dr^2, u = f v(r), lambda = -(m+2)",
    ),
    _build_thm1_warped("thm1-ii"),
)
_register(
    CatalogEntry(
        name="thm1-iii",
        dimension=3,
        parameters=[_M1, _spec("a", 1.0, constraint="a > sqrt(m/(m+2))"), _FIBER],
        reference="rotationally symmetric profile with f(0) = a, f' >= 0",
        description="dt^2 + b^2 f'^2 dth^2 + f^2 dr^2, u = f v(r), lambda = -(m+2)",
    ),
    _build_thm1_warped("thm1-iii"),
)
_register(
    CatalogEntry(
        name="case2-a",
        dimension=3,
        parameters=[_M],
        reference="Einstein, hyperbolic horospherical chart",
        description="dr^2 + e^{2r}(dx^2 + dy^2), u = e^r, lambda = -(m+2)",
    ),
    _build_case2_a,
)
_register(
    CatalogEntry(
        name="case2-b",
        dimension=3,
        parameters=[_M],
        reference="Einstein, hyperbolic polar chart",
        description="dr^2 + sinh^2 r g_S2, u = cosh r, lambda = -(m+2)",
    ),
    _build_case2_b,
)
for _letter, _params in (
    ("a", [_P]),
    ("b", [_P]),
    ("c", [_P]),
    (
        "d",
        [
            _P,
            _spec("a", 1.0, constraint="a > 0, P'(a) > 0"),
            _spec("mu", -2.0, constraint="mu in {1-p, 0, p-1}"),
        ],
    ),
):
    _register(
        CatalogEntry(
            name=f"besse-9118-{_letter}",
            dimension=2,
            parameters=_params,
            reference=f"Besse, Einstein Manifolds, 9.118({_letter})",
            description="Bergery surface with quasi-Einstein constant p",
        ),
        _build_besse(_letter),
    )
_register(
    CatalogEntry(
        name="fiber-const",
        dimension=1,
        parameters=[_M, _spec("C", 1.0, constraint="C > 0")],
        reference="constant fiber solution",
        description="(R, dr^2, v = C, lambda = 0)",
    ),
    _build_fiber_const,
)


def list_catalog(dimension: Optional[int] = None) -> list[CatalogEntry]:
    """Catalog entries in registration order, optionally filtered by dimension."""
    entries = [entry for entry, _ in _REGISTRY.values()]
    if dimension is not None:
        entries = [e for e in entries if e.dimension == dimension]
    return entries


def resolve_name(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in _REGISTRY:
        raise ParameterError(f"unknown catalog entry {name!r}")
    return name


def build(name: str, params: Optional[dict] = None, **kwargs) -> QEStructure:
    """Build a catalog entry. ``params`` and keyword arguments are merged."""
    name = resolve_name(name)
    entry, builder = _REGISTRY[name]
    merged = dict(params or {})
    merged.update(kwargs)
    if name == "besse-9118-d" and "mu" not in merged:
        merged["mu"] = 1.0 - float(merged.get("p", 3.0))
    resolved = _resolve(entry, merged)
    logger.debug(f"Building {name} with {resolved}")
    return builder(resolved)


def build_many(
    names: Sequence[str], params: Optional[dict] = None
) -> list[QEStructure]:
    return [build(n, params) for n in names]
