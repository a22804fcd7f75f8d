"""Command-line front end: scenario runs, figure presets, engine comparison.

Subcommands: ``run`` (one scenario to CSV), ``preset <name>`` (frozen
parameter sets, one CSV per curve), ``compare`` (closed-form vs numerical
overlap deviation report) and ``list-presets``.  Scenarios are fully
deterministic: identical configuration yields byte-identical CSV; wall
times and other environment facts go to the ``.meta.json`` sidecar only.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (norm
drift or comparison tolerance breach).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .evolver import NormDriftError, evolve
from .field_states import FieldSpec, FieldSpecError, superposed_distribution
from .phases import (
    PhaseTimeSeries,
    series_from_closed_form,
    series_from_trajectory,
    unwrap_with_gaps,
)
from .system import Motion, SystemConfig, default_dt_internal, initial_state

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "RunResult",
    "run_scenario",
    "compare_engines",
    "list_presets",
    "main",
    "CSV_COLUMNS",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CSV_COLUMNS = (
    "tau",
    "x",
    "y",
    "phi_pancharatnam",
    "phi_dynamical",
    "phi_geometric",
    "phi_eq5",
    "rho11",
    "rho22",
    "rho33",
    "norm_error",
)

_ENGINES = ("analytic", "numeric", "both")
_MOTIONS = ("moving", "neglected")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class ToleranceBreach(RuntimeError):
    """Engine comparison exceeded the requested tolerance."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One scenario: physics, grid, engine choice and output location."""

    alpha: float = 5.0
    delta: float = 0.0
    theta: float = math.pi / 4.0
    r: float = 0.0
    p: int = 1
    motion: str = "moving"
    tau_max: float = 8.0 * math.pi
    steps: int = 2000
    dt: float | None = None
    engine: str = "numeric"
    out: str | None = None
    emit_unwrapped: bool = False
    preset: str | None = None
    curve: str | None = None

    def system_config(self) -> SystemConfig:
        try:
            field = FieldSpec(alpha=self.alpha, r=self.r)
            return SystemConfig(
                field=field,
                delta=self.delta,
                theta=self.theta,
                p=self.p,
                motion=Motion(self.motion),
                tau_max=self.tau_max,
                n_steps=self.steps,
                dt_internal=self.dt,
            )
        except (FieldSpecError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self) -> None:
        if self.engine not in _ENGINES:
            raise ConfigError(f"engine must be one of {_ENGINES}, got {self.engine!r}")
        if self.motion not in _MOTIONS:
            raise ConfigError(f"motion must be one of {_MOTIONS}, got {self.motion!r}")
        if self.engine == "analytic" and self.delta != 0.0:
            raise ConfigError(
                "engine=analytic requires delta=0 (the closed form is resonant "
                "only); use engine=numeric for detuned runs"
            )
        self.system_config()


@dataclass(frozen=True)
class RunResult:
    """Series per engine plus the files written."""

    series: dict[str, PhaseTimeSeries]
    paths: tuple[Path, ...]
    metadata: dict


# ---------------------------------------------------------------------------
# presets (frozen parameter sets behind the published figure panels)

_PI4 = math.pi / 4.0
_RESONANT = dict(alpha=5.0, delta=0.0, r=0.0, motion="moving",
                 tau_max=8.0 * math.pi, steps=2000)
_DETUNED = dict(alpha=5.0, delta=20.0, theta=_PI4, tau_max=25.0, steps=2000)

PRESETS: dict[str, tuple[tuple[str, dict], ...]] = {
    "fig1a": (("", dict(_RESONANT, theta=0.0, p=1)),),
    "fig1b": (("", dict(_RESONANT, theta=_PI4, p=1)),),
    "fig2a": (("", dict(_RESONANT, theta=0.0, p=2)),),
    "fig2b": (("", dict(_RESONANT, theta=_PI4, p=2)),),
    "fig3a": (
        ("theta0", dict(_RESONANT, theta=0.0, p=1)),
        ("theta-pi4", dict(_RESONANT, theta=_PI4, p=1)),
    ),
    "fig3b": (
        ("theta0", dict(_RESONANT, theta=0.0, p=2)),
        ("theta-pi4", dict(_RESONANT, theta=_PI4, p=2)),
    ),
    "fig4a": (
        ("r0", dict(_DETUNED, r=0.0, motion="neglected", p=1)),
        ("r1", dict(_DETUNED, r=1.0, motion="neglected", p=1)),
    ),
    "fig4b": (
        ("r0", dict(_DETUNED, r=0.0, motion="moving", p=1)),
        ("r1", dict(_DETUNED, r=1.0, motion="moving", p=1)),
    ),
    "fig4c": (
        ("r0", dict(_DETUNED, r=0.0, motion="moving", p=2)),
        ("r1", dict(_DETUNED, r=1.0, motion="moving", p=2)),
    ),
    "fig5a": (("", dict(_RESONANT, theta=0.0, p=1)),),
    "fig5b": (("", dict(_RESONANT, theta=_PI4, p=1)),),
}


def list_presets() -> dict[str, tuple[tuple[str, dict], ...]]:
    """Preset names and their frozen parameter sets."""
    return PRESETS


# ---------------------------------------------------------------------------
# CSV / metadata emission

def _fmt(value: float) -> str:
    if math.isnan(value):
        return ""
    return format(value + 0.0, ".17g")  # +0.0 folds negative zero


def _series_columns(series: PhaseTimeSeries) -> list[np.ndarray]:
    return [
        series.tau,
        series.x,
        series.y,
        series.phi_pancharatnam,
        series.phi_dynamical,
        series.phi_geometric,
        series.phi_arcsin,
        series.rho11,
        series.rho22,
        series.rho33,
        series.norm_error,
    ]


def write_series_csv(
    path: Path, series: PhaseTimeSeries, emit_unwrapped: bool = False
) -> None:
    """Write one series with the fixed schema, 17 significant digits."""
    header = list(CSV_COLUMNS)
    cols = _series_columns(series)
    if emit_unwrapped:
        header += ["phi_pancharatnam_unwrapped", "phi_geometric_unwrapped"]
        cols += [
            unwrap_with_gaps(series.phi_pancharatnam),
            unwrap_with_gaps(series.phi_geometric),
        ]
    lines = [",".join(header)]
    for i in range(len(series.tau)):
        lines.append(",".join(_fmt(float(col[i])) for col in cols))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_meta(path: Path, payload: dict) -> None:
    meta_path = Path(str(path) + ".meta.json")
    meta_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _derived_path(out: Path, tag: str) -> Path:
    return out.with_name(out.stem + "." + tag + out.suffix)


def run_scenario(scenario: ScenarioConfig) -> RunResult:
    """Run one scenario and write CSV plus metadata sidecar.

    ``engine=both`` writes one CSV per engine plus a per-point deviation
    file ``<stem>.compare.csv``.
    """
    scenario.validate()
    if scenario.out is None:
        raise ConfigError("an output path is required (--out)")
    out = Path(scenario.out)
    config = scenario.system_config()
    t_start = time.perf_counter()
    dist = superposed_distribution(config.field)

    series: dict[str, PhaseTimeSeries] = {}
    if scenario.engine in ("numeric", "both"):
        trajectory = evolve(initial_state(config, dist), config)
        series["numeric"] = series_from_trajectory(trajectory)
        substeps = len(trajectory.fine_taus) - 1
    else:
        substeps = 0
    if scenario.engine in ("analytic", "both"):
        series["analytic"] = series_from_closed_form(config, dist)

    paths: list[Path] = []
    deviation: dict[str, float] = {}
    if scenario.engine == "both":
        num_path = _derived_path(out, "numeric")
        ana_path = _derived_path(out, "analytic")
        write_series_csv(num_path, series["numeric"], scenario.emit_unwrapped)
        write_series_csv(ana_path, series["analytic"], scenario.emit_unwrapped)
        cmp_path = _derived_path(out, "compare")
        dev_x = series["numeric"].x - series["analytic"].x
        dev_y = series["numeric"].y - series["analytic"].y
        lines = ["tau,dev_x,dev_y"]
        for i in range(len(series["numeric"].tau)):
            lines.append(
                ",".join(
                    _fmt(v)
                    for v in (float(series["numeric"].tau[i]), float(dev_x[i]), float(dev_y[i]))
                )
            )
        cmp_path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        deviation = {
            "max_abs_dev_x": float(np.max(np.abs(dev_x))),
            "max_abs_dev_y": float(np.max(np.abs(dev_y))),
        }
        paths += [num_path, ana_path, cmp_path]
    else:
        only = series[scenario.engine]
        write_series_csv(out, only, scenario.emit_unwrapped)
        paths.append(out)

    wall = time.perf_counter() - t_start
    effective_dt = config.dt_internal
    if effective_dt is None:
        effective_dt = default_dt_internal(
            config.delta, dist.n_max, config.p if config.motion is Motion.MOVING else 1
        )
    metadata = {
        "version": __version__,
        "parameters": {
            k: v
            for k, v in asdict(scenario).items()
            if k not in ("out",)
        },
        "truncation": {
            "n_max": dist.n_max,
            "dropped_tail": dist.dropped_tail,
            "epsilon_tail": config.field.epsilon_tail,
            "norm_constant": dist.norm_constant,
        },
        "integrator": {
            "dt_internal": effective_dt,
            "substeps_total": substeps,
        },
        "deviation": deviation,
        "files": [str(p) for p in paths],
        "wall_time_s": wall,
    }
    for p in paths:
        if p.suffix == ".csv" and not p.name.endswith(".compare.csv"):
            _write_meta(p, metadata)
    return RunResult(series=series, paths=tuple(paths), metadata=metadata)


def compare_engines(scenario: ScenarioConfig, tolerance: float = 1e-6) -> dict:
    """Max-abs deviation between closed-form and numerical overlap.

    Raises ToleranceBreach when the deviation exceeds ``tolerance``.
    """
    if scenario.delta != 0.0:
        raise ConfigError("engine comparison requires delta=0")
    config = scenario.system_config()
    dist = superposed_distribution(config.field)
    trajectory = evolve(initial_state(config, dist), config)
    numeric = series_from_trajectory(trajectory)
    analytic = series_from_closed_form(config, dist)
    dev_x = float(np.max(np.abs(numeric.x - analytic.x)))
    dev_y = float(np.max(np.abs(numeric.y - analytic.y)))
    report = {
        "max_abs_dev_x": dev_x,
        "max_abs_dev_y": dev_y,
        "max_abs_dev": max(dev_x, dev_y),
        "tolerance": tolerance,
        "within_tolerance": max(dev_x, dev_y) <= tolerance,
        "grid_points": int(len(numeric.tau)),
        "tau_max": scenario.tau_max,
    }
    if not report["within_tolerance"]:
        raise ToleranceBreach(json.dumps(report, sort_keys=True))
    return report


# ---------------------------------------------------------------------------
# argument parsing

def _add_scenario_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--alpha", type=float, default=None, help="field amplitude (>= 0)")
    sub.add_argument("--delta", type=float, default=None, help="detuning in units of g")
    sub.add_argument("--theta", type=float, default=None, help="atomic superposition angle (rad)")
    sub.add_argument("--r", type=float, default=None, help="superposition constant (0, +1, -1, ...)")
    sub.add_argument("--p", type=int, default=None, help="half-wavelength count of the mode")
    sub.add_argument("--motion", choices=_MOTIONS, default=None, help="atomic motion model")
    sub.add_argument("--tau-max", type=float, default=None, help="end of the scaled-time grid")
    sub.add_argument("--steps", type=int, default=None, help="output grid size")
    sub.add_argument("--dt", type=float, default=None, help="integrator substep (scaled time)")
    sub.add_argument("--engine", choices=_ENGINES, default=None, help="computation route")
    sub.add_argument("--out", type=str, default=None, help="output CSV path")
    sub.add_argument("--config", type=str, default=None, help="JSON config file (flags override it)")
    sub.add_argument("--emit-unwrapped", action="store_true", default=None,
                     help="append unwrapped phase columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-qed",
        description="Moving three-level cascade atom in a quantized cavity mode: "
        "overlap, phase and population time series as CSV.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    run_p = subs.add_parser("run", help="run one scenario and write CSV")
    _add_scenario_flags(run_p)

    preset_p = subs.add_parser("preset", help="run a frozen figure preset")
    preset_p.add_argument("name", choices=sorted(PRESETS))
    preset_p.add_argument("--out", type=str, default=None,
                          help="output CSV path (default: <name>.csv)")
    preset_p.add_argument("--emit-unwrapped", action="store_true", default=False)

    cmp_p = subs.add_parser("compare", help="closed-form vs numerical deviation report")
    _add_scenario_flags(cmp_p)
    cmp_p.add_argument("--tolerance", type=float, default=1e-6,
                       help="max allowed |deviation| before exit code 3")

    subs.add_parser("list-presets", help="print preset names and frozen parameters")
    return parser


_SCENARIO_KEYS = (
    "alpha", "delta", "theta", "r", "p", "motion", "tau_max", "steps",
    "dt", "engine", "out", "emit_unwrapped",
)


def _scenario_from_args(args: argparse.Namespace) -> ScenarioConfig:
    """Defaults, then config-file values, then explicit CLI flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise ConfigError(f"config file not found: {cfg_path}")
        try:
            loaded = json.loads(cfg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object of flat keys")
        unknown = set(loaded) - set(_SCENARIO_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in _SCENARIO_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        return ScenarioConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _scenario_from_args(args)
    result = run_scenario(scenario)
    for p in result.paths:
        print(p)
    return EXIT_OK


def _cmd_preset(args: argparse.Namespace) -> int:
    curves = PRESETS[args.name]
    out = Path(args.out) if args.out else Path(f"{args.name}.csv")
    written: list[Path] = []
    for label, params in curves:
        curve_out = out if label == "" else out.with_name(
            f"{out.stem}_{label}{out.suffix}"
        )
        scenario = ScenarioConfig(
            **params,
            engine="numeric",
            out=str(curve_out),
            emit_unwrapped=bool(args.emit_unwrapped),
            preset=args.name,
            curve=label or None,
        )
        result = run_scenario(scenario)
        written.extend(result.paths)
    for p in written:
        print(p)
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    scenario = _scenario_from_args(args)
    report = compare_engines(scenario, tolerance=args.tolerance)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_list_presets(_args: argparse.Namespace) -> int:
    for name in sorted(PRESETS):
        for label, params in PRESETS[name]:
            suffix = f" [{label}]" if label else ""
            print(f"{name}{suffix}  {json.dumps(params, sort_keys=True)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "preset": _cmd_preset,
        "compare": _cmd_compare,
        "list-presets": _cmd_list_presets,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FieldSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceBreach as exc:
        print(f"tolerance breach: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NormDriftError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
