# qelab/services/reporting.py

"""Run orchestration for the command-line surface and report serialization."""

import json
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

from loguru import logger

from qelab import __version__
from qelab.errors import ConfigError, ParameterError
from qelab.schemas.reports import Report
from qelab.schemas.run_config import RunConfig
from qelab.services import asymptotics, zoo
from qelab.services.profiles import integrate_profile, profile_ode
from qelab.services.solution_space import estimate_dimension, quotient_dichotomy_scan
from qelab.services.verifier import verify_structure


def _require_example(config: RunConfig) -> str:
    if not config.example:
        raise ConfigError(f"the {config.command} command needs an example name")
    return config.example


def _numeric(params: dict, key: str, default: float) -> float:
    try:
        return float(params.get(key, default))
    except (TypeError, ValueError) as e:
        raise ParameterError(f"{key} must be a number, got {params[key]!r}") from e


def _split_end_params(name: str, params: dict) -> tuple[dict, dict]:
    """Separate end-chart parameters from potential parameters."""
    entry = next(e for e in asymptotics.list_ends() if e.name == name)
    own = {p.name for p in entry.parameters}
    end_params = {k: v for k, v in params.items() if k in own}
    return end_params, {k: v for k, v in params.items() if k not in own}


def structure_for(config: RunConfig) -> zoo.QEStructure:
    """The structure a verify or dim run operates on.

    Either a zoo entry or an end carrying a potential.
    """
    name = _require_example(config)
    if name in asymptotics.END_NAMES:
        end_params, rest = _split_end_params(name, config.params)
        end = asymptotics.build_end(name, end_params)
        default = "static" if name == "schwarzschild-end" else "const"
        m = rest.pop("m", None)
        return end.structure(
            config.potential or default, m=None if m is None else float(m), **rest
        )
    return zoo.build(name, config.params)


def run_zoo(config: RunConfig) -> Report:
    entries = zoo.list_catalog(config.dim_filter)
    entries += [
        e
        for e in asymptotics.list_ends()
        if config.dim_filter in (None, e.dimension)
    ]
    logger.info(f"Catalog has {len(entries)} entries")
    return _report(config, [], catalog=[e.model_dump(mode="json") for e in entries])


def run_verify(config: RunConfig) -> Report:
    s = structure_for(config)
    points = s.grid(config.grid)
    checks = list(verify_structure(s, points, config.tolerances, config.seed))
    if len(s.solutions) >= 2 and s.solutions[0].positive:
        first, second = s.solutions[0], s.solutions[1]
        checks.append(quotient_dichotomy_scan(first, second, s, points))
    if s.profile is not None:
        checks.append(s.profile.to_summary())
    return _report(config, checks)


def run_dim(config: RunConfig) -> Report:
    s = structure_for(config)
    estimate = estimate_dimension(
        s,
        loop_budget=config.loop_budget,
        tol=config.tolerances.singular,
        seed=config.seed,
    )
    if s.expected_dim is not None and estimate.dim_estimate != s.expected_dim:
        logger.warning(
            f"{s.name}: estimated dim W = {estimate.dim_estimate}, "
            f"known value {s.expected_dim}"
        )
    return _report(config, [estimate])


def run_profile(config: RunConfig) -> Report:
    family = _require_example(config)
    params = dict(config.params)
    t_max = params.pop("t_max", None)
    ode = profile_ode(family, **{k: _numeric(params, k, 0.0) for k in params})
    solution = integrate_profile(ode, t_max=t_max, tol=config.tolerances.profile)
    if config.output.path:
        solution.to_csv(config.output.path)
    return _report(config, [solution.to_summary()])


def run_asympt(config: RunConfig) -> Report:
    name = _require_example(config)
    if name not in asymptotics.END_NAMES:
        raise ParameterError(
            f"unknown end {name!r}; expected one of {asymptotics.END_NAMES}"
        )
    end_params, rest = _split_end_params(name, config.params)
    end = asymptotics.build_end(name, end_params)
    checks = [asymptotics.decay_chain(end)]
    if config.potential:
        m = _numeric(rest, "m", 2.0)
        mu = rest.get("mu")
        potential_params = {
            k: _numeric(rest, k, 0.0) for k in rest if k not in ("m", "mu")
        }
        u = asymptotics.end_potential(end, config.potential, **potential_params)
        checks.append(asymptotics.growth_bounds_check(end, u, m, lam=0.0))
        checks.append(asymptotics.coordinate_hessian_decay(end, u))
        if mu is not None:
            s = end.structure(config.potential, m=m, **potential_params)
            checks.append(
                asymptotics.gradient_bound_check(s, s.grid(3), mu=float(mu))
            )
    return _report(config, checks)


RUNNERS: dict[str, Callable[[RunConfig], Report]] = {
    "zoo": run_zoo,
    "verify": run_verify,
    "dim": run_dim,
    "profile": run_profile,
    "asympt": run_asympt,
}


def execute(config: RunConfig) -> Report:
    """Dispatch ``config`` to its runner and time it."""
    logger.info("=" * 70)
    logger.info(
        f"qe-lab {__version__}: {config.command} {config.example or ''}".rstrip()
    )
    logger.info("=" * 70)
    started = time.perf_counter()
    report = RUNNERS[config.command](config)
    report.wall_time = time.perf_counter() - started
    verdict = "PASS" if report.passed else "FAIL"
    logger.info(f"Finished {config.command} in {report.wall_time:.2f}s: {verdict}")
    return report


def _report(
    config: RunConfig, checks: Sequence, catalog: Optional[list] = None
) -> Report:
    return Report(
        tool_version=__version__,
        command=config.command,
        config=config.model_dump(mode="json"),
        seed=config.seed,
        checks=list(checks),
        catalog=catalog,
        passed=all(c.passed for c in checks),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def to_json(report: Report, include_wall_time: bool = True) -> str:
    """Sorted-key JSON; without wall time the output is byte-stable."""
    exclude = None if include_wall_time else {"wall_time"}
    return json.dumps(
        report.model_dump(mode="json", exclude=exclude), sort_keys=True, indent=2
    )


def write_report(report: Report, path: str) -> Path:
    path = Path(path)
    path.write_text(to_json(report) + "\n")
    logger.info(f"Report written to {path}")
    return path


def _describe(check) -> tuple[str, str]:
    kind = check.kind
    if kind == "residual":
        return (
            check.identity,
            f"max {check.max_residual:.3e} (tol {check.tolerance:.1e})",
        )
    if kind == "dimension":
        summary = (
            f"{check.dim_estimate} (positive {check.positive_count}, "
            f"gap ratio {check.gap_ratio:.3g})"
        )
        if not check.measured:
            summary += f" [{check.notes}]"
        return "dim W", summary
    if kind == "decay-chain":
        fit = check.metric_fit
        if fit.flat:
            tau = "FLAT"
        else:
            tau = f"tau {fit.tau:.4f}"
            if fit.leading_tau is not None:
                tau += f", leading {fit.leading_tau:.4f}"
        return "decay chain", f"{tau}, regime {check.regime or '-'}"
    if kind == "decay":
        return check.quantity, "FLAT" if check.flat else f"slope {check.slope:.4f}"
    if kind == "growth":
        summary = f"exponent {check.exponent:.4f} (lower {check.lower_exponent:.4f})"
        if not check.resolvable:
            summary += f" [{check.notes}]"
        return "growth", summary
    if kind == "gradient":
        return "gradient", f"sup {check.max_gradient:.6g} (bound {check.bound:.6g})"
    if kind == "profile":
        return (
            check.family,
            f"drift {check.first_integral_residual:.3e}, f(1) = {check.f_at_1}",
        )
    if kind == "transport":
        return "transport", f"error {check.max_relative_error:.3e}"
    if kind == "dichotomy":
        return "quotient", check.classification
    return kind, ""


def to_text(report: Report) -> str:
    """Human-readable summary."""
    lines = []
    if report.catalog is not None:
        for entry in report.catalog:
            lines.append(
                f"{entry['name']:<22} dim {entry['dimension']}  {entry['reference']}"
            )
    for check in report.checks:
        name, summary = _describe(check)
        lines.append(f"{'PASS' if check.passed else 'FAIL'}  {name:<22} {summary}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines)
