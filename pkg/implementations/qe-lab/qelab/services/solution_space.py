# qelab/services/solution_space.py

"""
Numerical estimate of the space of potential functions.

A solution of the quasi-Einstein equation is determined along any curve by its
prolonged state ``(u, du)``: restricted to the curve the equation becomes the
linear system

    du/dt   = <p, x'>
    dp_j/dt = Γ^k_ij x'^i p_k + (u/m)(Ric - λg)_ij x'^i

Transport operators are the fundamental matrices of this system. Around a closed
loop every true solution returns to its initial state, so the common null space
of the holonomy defects ``T_loop - I`` over many loops estimates the space of
solutions at the base point.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from loguru import logger
from scipy.integrate import solve_ivp

from qelab.config import settings
from qelab.errors import (
    InadmissiblePointError,
    IntegrationError,
    ParameterError,
    PathError,
)
from qelab.schemas.reports import DichotomyReport, SolutionSpaceEstimate, TransportCheck
from qelab.services.geometry import (
    MetricProvider,
    PointLike,
    ScalarField,
    as_coords,
    covector_norm,
    curvature,
    quotient_field,
)

if TYPE_CHECKING:
    from qelab.services.zoo import QEStructure


@dataclass(frozen=True)
class ProlongedState:
    """Value and differential of a potential at a point."""

    u: float
    p: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.u], np.asarray(self.p, dtype=float)])

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "ProlongedState":
        v = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ParameterError("prolonged state must be finite")
        return cls(u=float(v[0]), p=v[1:].copy())

    @classmethod
    def from_field(cls, u: ScalarField, x: PointLike) -> "ProlongedState":
        x = as_coords(x)
        return cls(u=u.value(x), p=u.gradient(x))


@dataclass(frozen=True)
class Polyline:
    """Piecewise straight coordinate path through ``vertices``."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] < 2:
            raise PathError("a path needs at least two vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))

    def closed(self, atol: float = 1e-12) -> bool:
        scale = 1.0 + float(np.max(np.abs(self.start)))
        return bool(np.max(np.abs(self.end - self.start)) <= atol * scale)

    def then(self, other: "Polyline") -> "Polyline":
        gap = np.max(np.abs(self.end - other.start))
        if gap > 1e-12 * (1.0 + np.max(np.abs(self.end))):
            raise PathError("paths do not connect")
        return Polyline(np.vstack([self.vertices, other.vertices[1:]]))

    def describe(self) -> str:
        return f"polyline({len(self.vertices) - 1} segments, length {self.length:.3g})"


@dataclass(frozen=True)
class GeodesicPath:
    """Geodesic from ``start`` with coordinate velocity ``velocity``.

    The geodesic is followed for time ``duration``.
    """

    start: np.ndarray
    velocity: np.ndarray
    duration: float = 1.0

    def describe(self) -> str:
        v = np.round(np.asarray(self.velocity), 6).tolist()
        return f"geodesic(v={v}, t={self.duration:g})"


TransportPath = Union[Polyline, GeodesicPath]


@dataclass(frozen=True)
class TransportOperator:
    """Linear map carrying the prolonged state from the start to the end of a path."""

    matrix: np.ndarray
    path: TransportPath = field(repr=False)
    error: float
    endpoint: np.ndarray

    def apply(self, state: Union[ProlongedState, np.ndarray]) -> ProlongedState:
        if isinstance(state, ProlongedState):
            v = state.as_vector()
        else:
            v = np.asarray(state, dtype=float)
        return ProlongedState.from_vector(self.matrix @ v)

    def then(self, other: "TransportOperator") -> "TransportOperator":
        """Transport along this path followed by ``other``."""
        norm_a = float(np.linalg.norm(self.matrix, 2))
        norm_b = float(np.linalg.norm(other.matrix, 2))
        path = other.path
        if isinstance(self.path, Polyline) and isinstance(other.path, Polyline):
            path = self.path.then(other.path)
        return TransportOperator(
            matrix=other.matrix @ self.matrix,
            path=path,
            error=self.error * norm_b + other.error * norm_a,
            endpoint=other.endpoint,
        )


def _generator(
    provider: MetricProvider, m: float, lam: float, x: np.ndarray, xdot: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    try:
        bundle = curvature(provider, x)
    except InadmissiblePointError as e:
        raise PathError(
            f"path leaves the admissible domain at {np.round(x, 6).tolist()}"
        ) from e
    n = x.size
    a = np.zeros((n + 1, n + 1))
    a[0, 1:] = xdot
    a[1:, 0] = (bundle.ricci - lam * bundle.metric) @ xdot / m
    a[1:, 1:] = np.einsum("kij,i->jk", bundle.christoffel, xdot)
    return a, bundle.christoffel


def _solve(rhs, y0, span, rtol, what) -> tuple[np.ndarray, int]:
    sol = solve_ivp(rhs, span, y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3)
    if sol.status != 0:
        logger.error(f"Transport along {what} failed: {sol.message}")
        raise IntegrationError(f"transport along {what} failed: {sol.message}")
    if not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationError(f"transport along {what} produced non-finite values")
    return sol.y[:, -1], sol.t.size


def _check_segment(
    provider: MetricProvider, a: np.ndarray, b: np.ndarray, samples: int = 8
):
    for t in np.linspace(0.0, 1.0, samples + 1):
        x = a + t * (b - a)
        try:
            provider.point(x)
        except InadmissiblePointError as e:
            raise PathError(
                "segment leaves the admissible domain near "
                f"{np.round(x, 6).tolist()}"
            ) from e


def transport(
    provider: MetricProvider,
    m: float,
    lam: float,
    path: TransportPath,
    tol: Optional[float] = None,
) -> TransportOperator:
    """Fundamental matrix of the prolonged system along ``path``."""
    rtol = settings.TRANSPORT_RTOL if tol is None else float(tol)
    if m <= 0:
        raise ParameterError(f"m must be positive, got {m}")
    n = provider.dimension
    size = n + 1

    if isinstance(path, Polyline):
        if path.vertices.shape[1] != n:
            raise PathError(
                f"path lives in dimension {path.vertices.shape[1]}, metric in {n}"
            )
        total = np.eye(size)
        steps = 0
        for a, b in zip(path.vertices[:-1], path.vertices[1:]):
            _check_segment(provider, a, b)
            xdot = b - a

            def rhs(t, y, a=a, xdot=xdot):
                gen, _ = _generator(provider, m, lam, a + t * xdot, xdot)
                return (gen @ y.reshape(size, size)).ravel()

            y, count = _solve(
                rhs, np.eye(size).ravel(), (0.0, 1.0), rtol, path.describe()
            )
            total = y.reshape(size, size) @ total
            steps += count
        endpoint = path.end.copy()
    elif isinstance(path, GeodesicPath):
        x0 = as_coords(path.start, n)
        v0 = np.asarray(path.velocity, dtype=float).reshape(n)
        provider.point(x0)

        def rhs(_, y):
            x, v = y[:n], y[n : 2 * n]
            gen, gamma = _generator(provider, m, lam, x, v)
            acc = -np.einsum("kij,i,j->k", gamma, v, v)
            mat = gen @ y[2 * n :].reshape(size, size)
            return np.concatenate([v, acc, mat.ravel()])

        y0 = np.concatenate([x0, v0, np.eye(size).ravel()])
        y, steps = _solve(rhs, y0, (0.0, float(path.duration)), rtol, path.describe())
        total = y[2 * n :].reshape(size, size)
        endpoint = y[:n].copy()
    else:
        raise PathError(f"unsupported path type {type(path).__name__}")

    error = rtol * float(np.max(np.abs(total))) * steps
    return TransportOperator(matrix=total, path=path, error=error, endpoint=endpoint)


def _unpack(
    target, m: Optional[float], lam: Optional[float]
) -> tuple[MetricProvider, float, float]:
    if isinstance(target, MetricProvider):
        if m is None or lam is None:
            raise ParameterError(
                "m and lambda are required with a bare metric provider"
            )
        return target, float(m), float(lam)
    m = target.m if m is None else m
    lam = target.lam if lam is None else lam
    return target.provider, float(m), float(lam)


def holonomy_defects(
    target: Union["QEStructure", MetricProvider],
    base: PointLike,
    loops: Sequence[Polyline],
    tol: Optional[float] = None,
    m: Optional[float] = None,
    lam: Optional[float] = None,
) -> tuple[np.ndarray, list[TransportOperator]]:
    """Stack of ``T_loop - I`` blocks and the loop transports."""
    provider, m, lam = _unpack(target, m, lam)
    base = as_coords(base, provider.dimension)
    size = provider.dimension + 1
    blocks, operators = [], []
    for loop in loops:
        offset = np.max(np.abs(loop.start - base))
        if not loop.closed() or offset > 1e-12 * (1.0 + np.max(np.abs(base))):
            raise PathError("loop does not start and end at the base point")
        op = transport(provider, m, lam, loop, tol)
        operators.append(op)
        blocks.append(op.matrix - np.eye(size))
    if not blocks:
        return np.zeros((0, size)), operators
    return np.vstack(blocks), operators


def _fit_in_box(box, base: np.ndarray, axis: int, step: float) -> float:
    hi, lo = np.asarray(box.hi), np.asarray(box.lo)
    if base[axis] + step <= hi[axis]:
        return step
    if base[axis] - step >= lo[axis]:
        return -step
    sign = 1 if base[axis] <= 0.5 * (hi[axis] + lo[axis]) else -1
    return 0.5 * (hi[axis] - lo[axis]) * sign


def default_loops(
    s: "QEStructure",
    base: np.ndarray,
    loop_budget: int,
    rng: np.random.Generator,
    scales: Sequence[float] = (0.2, 0.5, 1.0),
) -> list[Polyline]:
    """Coordinate rectangles in every coordinate plane plus random closed polygons."""
    n = s.dimension
    loops: list[Polyline] = []
    if n < 2:
        return loops
    for scale in scales:
        for i in range(n):
            for j in range(i + 1, n):
                di = _fit_in_box(s.box, base, i, scale)
                dj = _fit_in_box(s.box, base, j, scale)
                ei, ej = np.zeros(n), np.zeros(n)
                ei[i], ej[j] = di, dj
                corners = [base, base + ei, base + ei + ej, base + ej, base]
                loops.append(Polyline(np.array(corners)))
    wanted = max(loop_budget, 2 * (n + 1) - len(loops), 0)
    attempts = 0
    while wanted > 0 and attempts < 100 * (wanted + 1):
        attempts += 1
        corners = int(rng.integers(2, 5))
        pts = base + rng.uniform(-1.0, 1.0, size=(corners, n))
        if not all(s.box.contains(p) and s.admissible(p) for p in pts):
            continue
        loops.append(Polyline(np.vstack([base, pts, base])))
        wanted -= 1
    return loops


def _normalized_defects(
    defects: np.ndarray, operators: Sequence[TransportOperator]
) -> np.ndarray:
    """Divide each loop block by ``max(1, |T_loop|)``.

    Every block then has norm at most 2 and the null-space threshold is a fixed
    multiple of ``tol``. Appending rows never lowers a singular value, so adding
    loops can only lower the estimate.
    """
    if not operators:
        return defects
    size = defects.shape[1]
    norms = [max(1.0, float(np.linalg.norm(op.matrix, 2))) for op in operators]
    scales = np.repeat(norms, size)
    return defects / scales[:, None]


def _gap_ratio(singular_values: np.ndarray, threshold: float) -> float:
    above = singular_values[singular_values >= threshold]
    below = singular_values[singular_values < threshold]
    upper = float(above.min()) if above.size else threshold
    lower = float(below.max()) if below.size else threshold
    return upper / max(lower, 1e-300)


def killing_coordinates(
    provider: MetricProvider, points: np.ndarray, rtol: float = 1e-12
) -> list[int]:
    """Coordinates the metric does not depend on at any of ``points``."""
    keep = []
    for k in range(provider.dimension):
        flat = True
        for x in points:
            x = np.asarray(x, dtype=float)
            dg = provider.first_derivatives(x)
            scale = 1.0 + float(np.max(np.abs(provider.metric(x))))
            if np.max(np.abs(dg[k])) > rtol * scale:
                flat = False
                break
        if flat:
            keep.append(k)
    return keep


def _mode_basis(
    s: "QEStructure", base: np.ndarray, null: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Joint eigenmodes of the coordinate translations acting on the null space."""
    dim = null.shape[1]
    killing = killing_coordinates(s.provider, [base, *s.box.sample(rng, 3)])
    if not killing or dim == 0:
        return null
    n = s.dimension
    restricted = []
    for k in killing:
        e = np.zeros(n)
        e[k] = 1.0
        gen, _ = _generator(s.provider, s.m, s.lam, base, e)
        restricted.append(null.T @ gen @ null)
    scale = 1.0 + max(float(np.max(np.abs(r))) for r in restricted)
    kernel = scipy.linalg.null_space(np.vstack(restricted), rcond=1e-8)
    weights = rng.uniform(0.5, 1.5, len(restricted))
    combo = sum(c * r for c, r in zip(weights, restricted))
    values, vectors = scipy.linalg.eig(combo)
    modes = [kernel[:, i] for i in range(kernel.shape[1])]
    for val, vec in zip(values, vectors.T):
        if abs(val) <= 1e-6 * scale or abs(val.imag) > 1e-9 * scale:
            continue
        vec = vec * np.exp(-1j * np.angle(vec[np.argmax(np.abs(vec))]))
        if np.max(np.abs(vec.imag)) > 1e-6:
            continue
        modes.append(vec.real / np.linalg.norm(vec.real))
    if not modes:
        return null
    return null @ np.column_stack(modes)


def _count_positive(
    s: "QEStructure", base: np.ndarray, modes: np.ndarray, grid_points: int, tol: float
) -> int:
    if modes.shape[1] == 0:
        return 0
    grid = s.box.grid(grid_points)
    values = [modes[0, :]]
    for x in grid:
        if np.allclose(x, base):
            continue
        op = transport(s.provider, s.m, s.lam, Polyline(np.array([base, x])), tol)
        values.append((op.matrix @ modes)[0, :])
    values = np.array(values)
    positive = np.all(values > 0, axis=0) | np.all(values < 0, axis=0)
    return int(np.sum(positive))


def estimate_dimension(
    s: "QEStructure",
    base: Optional[PointLike] = None,
    loop_budget: Optional[int] = None,
    tol: Optional[float] = None,
    seed: int = 0,
    transport_tol: Optional[float] = None,
    loops: Optional[Sequence[Polyline]] = None,
    positive_grid: int = 3,
) -> SolutionSpaceEstimate:
    """Estimate ``dim W`` from the common null space of holonomy defects."""
    tol = settings.SINGULAR_TOL if tol is None else float(tol)
    n = s.dimension
    rng = np.random.default_rng(seed)
    base = s.box.center if base is None else as_coords(base, n)
    s.provider.point(base)
    if loop_budget is None:
        loop_budget = 2 * (n + 1)
    if loop_budget < 0:
        raise ParameterError("loop budget must be non-negative")
    if loops is None:
        loops = default_loops(s, base, loop_budget, rng)
    logger.info(
        f"Estimating dim W for {s.name} with {len(loops)} loops "
        f"at {np.round(base, 6).tolist()}"
    )

    defects, operators = holonomy_defects(s, base, loops, transport_tol)
    notes = None
    if defects.shape[0]:
        _, singular_values, vt = np.linalg.svd(_normalized_defects(defects, operators))
    else:
        singular_values, vt = np.zeros(n + 1), np.eye(n + 1)
        notes = (
            f"no closed loops in dimension {n}; "
            f"dim W = {n + 1} is assumed, not measured"
        )
        logger.warning(f"{s.name}: {notes}")
    threshold = tol
    dim = int(np.sum(singular_values < threshold))
    gap = _gap_ratio(singular_values, threshold)
    low_confidence = gap < 10.0
    if low_confidence:
        logger.warning(
            f"{s.name}: singular spectrum poorly separated (gap ratio {gap:.3g})"
        )

    null = vt[n + 1 - dim :].T if dim else np.zeros((n + 1, 0))
    modes = _mode_basis(s, base, null, rng)
    positive = _count_positive(s, base, modes, positive_grid, transport_tol)

    logger.info(
        f"{s.name}: dim W = {dim}, positive modes = {positive}, gap ratio {gap:.3g}"
    )
    return SolutionSpaceEstimate(
        structure=s.name,
        dim_estimate=dim,
        singular_values=[float(v) for v in singular_values],
        tol=tol,
        threshold=threshold,
        gap_ratio=float(min(gap, 1e300)),
        low_confidence=low_confidence,
        basis=[[float(c) for c in col] for col in null.T],
        base_point=[float(c) for c in base],
        positive_count=min(positive, dim),
        loops_used=len(loops),
        measured=notes is None,
        notes=notes,
    )


def quotient_dichotomy_scan(
    u1: ScalarField,
    u2: ScalarField,
    s: "QEStructure",
    grid: Optional[np.ndarray] = None,
) -> DichotomyReport:
    """Classify ``Z = u2/u1`` as constant, nowhere critical, or neither."""
    points = s.grid() if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    z = quotient_field(u2, u1)
    norms, scales = [], []
    for x in points:
        x = s.provider.point(x)
        u = u1.value(x)
        if u <= 0:
            raise InadmissiblePointError("the dichotomy scan needs u1 > 0 on the grid")
        ginv = np.linalg.inv(s.provider.metric(x))
        norms.append(covector_norm(z.gradient(x), ginv))
        scales.append(
            (
                covector_norm(u2.gradient(x), ginv)
                + abs(u2.value(x)) * covector_norm(u1.gradient(x), ginv) / abs(u)
            )
            / abs(u)
        )
    eps = 1e-10 * max(max(scales), 1e-300)
    lo, hi = min(norms), max(norms)
    if hi <= eps:
        classification = "CONSTANT"
    elif lo > eps:
        classification = "NOWHERE_ZERO"
    else:
        classification = "VIOLATION"
        logger.warning(
            f"{s.name}: quotient gradient vanishes somewhere "
            "without vanishing everywhere"
        )
    return DichotomyReport(
        structure=s.name,
        classification=classification,
        min_gradient=lo,
        max_gradient=hi,
        eps=eps,
    )


def random_paths(
    s: "QEStructure",
    count: int,
    max_length: float,
    rng: np.random.Generator,
    max_segments: int = 3,
) -> list[Polyline]:
    """Random polylines of length at most ``max_length`` inside the sampling box."""
    paths = []
    while len(paths) < count:
        start = s.box.sample(rng, 1)[0]
        if not s.admissible(start):
            continue
        segments = int(rng.integers(1, max_segments + 1))
        budget = rng.uniform(0.1, max_length)
        vertices = [start]
        for _ in range(segments):
            step = budget / segments
            for _ in range(20):
                d = rng.standard_normal(s.dimension)
                nxt = vertices[-1] + step * d / np.linalg.norm(d)
                if s.box.contains(nxt) and s.admissible(nxt):
                    vertices.append(nxt)
                    break
                step *= 0.5
        if len(vertices) > 1:
            paths.append(Polyline(np.array(vertices)))
    return paths


def known_solution_transport_check(
    s: "QEStructure",
    paths: int = 100,
    max_length: float = 2.0,
    tol: float = 1e-7,
    seed: int = 0,
    transport_tol: Optional[float] = None,
) -> TransportCheck:
    """Transport closed-form solution states and compare with their endpoint values.

    The error of one path is ``|T start - end| / |end|`` with ``end`` the
    prolonged state of the solution itself at the endpoint.
    """
    rng = np.random.default_rng(seed)
    solutions = s.solutions or (s.u,)
    worst = 0.0
    for path in random_paths(s, paths, max_length, rng):
        op = transport(s.provider, s.m, s.lam, path, transport_tol)
        for u in solutions:
            start = ProlongedState.from_field(u, path.start).as_vector()
            end = ProlongedState.from_field(u, path.end).as_vector()
            moved = op.matrix @ start
            error = float(np.linalg.norm(moved - end))
            worst = max(worst, error / max(float(np.linalg.norm(end)), 1e-300))
    passed = worst <= tol
    logger.log(
        "INFO" if passed else "WARNING",
        f"{s.name}: known-solution transport error {worst:.3e}",
    )
    return TransportCheck(
        structure=s.name,
        paths=paths,
        max_relative_error=worst,
        tolerance=tol,
        passed=passed,
    )
