"""Experiment specifications, desk/paper presets, and YAML config parsing."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import yaml

from .datagen import LinkKind, ModelKind, ModelSpec
from .estimators import EstimatorKind, EstimatorSpec

__all__ = [
    "Scenario",
    "GridPoint",
    "ExperimentSpec",
    "ConfigError",
    "load_experiment_config",
    "desk_preset",
    "paper_preset",
]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


class Scenario(Enum):
    TAIL_SWEEP = "tail-sweep"
    PARETO_SERVERS = "pareto-servers"
    T_COMPARISON = "t-comparison"
    OUTLIER_SWEEP = "outlier-sweep"
    STEIN_SWEEP = "stein-sweep"


@dataclass(frozen=True)
class GridPoint:
    """One sweep point. ``nu`` doubles as the generic tail parameter:
    t degrees of freedom, single-index noise dof, or Pareto shape."""

    d: int
    m: int
    n: int
    lam: float | None = None
    nu: float | None = None
    c: float | None = None

    def __post_init__(self) -> None:
        if self.d < 1 or self.m < 1 or self.n < 1:
            raise ConfigError(f"grid point needs positive d, m, n: {self}")


@dataclass(frozen=True)
class ExperimentSpec:
    """A full Monte-Carlo scenario.

    ``model`` holds the base sampling model; its d / lam / nu / c fields are
    overridden point-by-point from the grid. ``n_outliers`` only applies to
    the outlier scenario.
    """

    scenario: Scenario
    model: ModelSpec
    grid: tuple[GridPoint, ...]
    k_target: int
    reps: int
    estimators: tuple[EstimatorSpec, ...]
    master_seed: int = 0
    n_outliers: int = 100

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not self.grid:
            raise ConfigError("grid must be non-empty")
        if self.k_target < 1:
            raise ConfigError(f"k_target must be >= 1, got {self.k_target}")
        if not self.estimators:
            raise ConfigError("need at least one estimator")

    def point_model(self, point: GridPoint) -> ModelSpec:
        """Base model with this grid point's parameters substituted in."""
        updates: dict = {"d": point.d}
        if point.lam is not None:
            updates["lam"] = point.lam
        if point.nu is not None:
            if self.model.kind is ModelKind.PARETO:
                updates["shape_k"] = point.nu
            else:
                updates["nu"] = point.nu
        if point.c is not None:
            updates["c"] = point.c
        return replace(self.model, **updates)


# --- desk and paper scale presets -------------------------------------------

_TRUNC = EstimatorSpec(kind=EstimatorKind.TRUNCATION)
_SHRINK = EstimatorSpec(kind=EstimatorKind.SHRINKAGE)
_SAMPLE = EstimatorSpec(kind=EstimatorKind.SAMPLE)


def _tail_grid(d_list, n_list, m_list, lam_list, fixed) -> list[GridPoint]:
    """Four marginal panels: sweep one axis per panel, others held fixed."""
    points = [GridPoint(d=d, m=fixed["m"], n=fixed["n"], lam=fixed["lam"]) for d in d_list]
    points += [GridPoint(d=fixed["d"], m=m, n=fixed["n"], lam=fixed["lam"]) for m in m_list]
    points += [GridPoint(d=fixed["d"], m=fixed["m2"], n=n, lam=fixed["lam"]) for n in n_list]
    points += [GridPoint(d=fixed["d_gap"], m=fixed["m"], n=fixed["n_gap"], lam=lam) for lam in lam_list]
    return points


def desk_preset(scenario: Scenario, seed: int = 0, model_kind: ModelKind | None = None) -> ExperimentSpec:
    """Down-scaled scenario presets that reproduce slope behavior in minutes."""
    if scenario is Scenario.TAIL_SWEEP:
        kind = model_kind or ModelKind.SPIKED_T
        if kind not in (ModelKind.SPIKED_T, ModelKind.SPIKED_LAPLACE):
            raise ConfigError(f"tail-sweep model must be spiked-t or spiked-laplace, got {kind}")
        grid = _tail_grid(
            d_list=[50, 100, 200],
            n_list=[250, 500, 1000],
            m_list=[5, 10, 20, 50],
            lam_list=[20.0, 80.0],
            fixed={"d": 100, "m": 10, "m2": 20, "n": 1000, "n_gap": 500, "lam": 50.0, "d_gap": 100},
        )
        return ExperimentSpec(
            scenario=scenario,
            model=ModelSpec(kind=kind, d=100, lam=50.0, nu=5.0),
            grid=tuple(grid),
            k_target=3,
            reps=20,
            estimators=(_TRUNC,),
            master_seed=seed,
        )
    if scenario is Scenario.PARETO_SERVERS:
        total = 5000
        grid = [
            GridPoint(d=100, m=m, n=total // m, lam=50.0, nu=shape)
            for shape in (4.1, 5.1)
            for m in (5, 10, 25, 50)
        ]
        return ExperimentSpec(
            scenario=scenario,
            model=ModelSpec(kind=ModelKind.PARETO, d=100, lam=50.0),
            grid=tuple(grid),
            k_target=3,
            reps=10,
            estimators=(_TRUNC, _SAMPLE),
            master_seed=seed,
        )
    if scenario is Scenario.T_COMPARISON:
        grid = [GridPoint(d=200, m=20, n=400, lam=50.0, nu=4.1)]
        return ExperimentSpec(
            scenario=scenario,
            model=ModelSpec(kind=ModelKind.SPIKED_T, d=200, lam=50.0, nu=4.1),
            grid=tuple(grid),
            k_target=3,
            reps=20,
            estimators=(_TRUNC, _SAMPLE),
            master_seed=seed,
        )
    if scenario is Scenario.OUTLIER_SWEEP:
        grid = [GridPoint(d=200, m=10, n=1000, c=c) for c in (2.0, 3.0, 4.0, 5.0)]
        return ExperimentSpec(
            scenario=scenario,
            model=ModelSpec(kind=ModelKind.GAUSSIAN_OUTLIER, d=200),
            grid=tuple(grid),
            k_target=4,
            reps=10,
            estimators=(_TRUNC, _SHRINK, _SAMPLE),
            master_seed=seed,
            n_outliers=20,
        )
    if scenario is Scenario.STEIN_SWEEP:
        grid = [GridPoint(d=50, m=10, n=500, nu=nu) for nu in (2.1, 3.0, 4.0)]
        return ExperimentSpec(
            scenario=scenario,
            model=ModelSpec(kind=ModelKind.SINGLE_INDEX, d=50, link=LinkKind.QUARTIC_HALF),
            grid=tuple(grid),
            k_target=1,
            reps=20,
            estimators=(_TRUNC, _SAMPLE),
            master_seed=seed,
        )
    raise ConfigError(f"no desk preset for scenario {scenario}")


def paper_preset(scenario: Scenario, seed: int = 0, model_kind: ModelKind | None = None) -> ExperimentSpec:
    """Presets at the published experiment scale. Expect hours, not minutes."""
    if scenario is Scenario.TAIL_SWEEP:
        kind = model_kind or ModelKind.SPIKED_T
        grid = _tail_grid(
            d_list=[100, 200, 400, 600],
            n_list=[500, 1000, 1500, 2000],
            m_list=[5, 10, 20, 50, 100],
            lam_list=[10.0, 20.0, 40.0, 80.0],
            fixed={"d": 200, "m": 20, "m2": 50, "n": 1000, "n_gap": 1000, "lam": 50.0, "d_gap": 200},
        )
        base = desk_preset(scenario, seed, kind)
        return replace(base, grid=tuple(grid), reps=50)
    if scenario is Scenario.PARETO_SERVERS:
        total = 5000
        grid = [
            GridPoint(d=600, m=m, n=total // m, lam=50.0, nu=shape)
            for shape in (4.1, 5.1)
            for m in (1, 2, 4, 5, 8, 10, 20, 25, 40, 50, 100, 125)
        ]
        base = desk_preset(scenario, seed)
        return replace(base, model=replace(base.model, d=600), grid=tuple(grid), reps=50)
    if scenario is Scenario.T_COMPARISON:
        grid = [
            GridPoint(d=d, m=20, n=n, lam=50.0, nu=nu)
            for nu in (4.1, 4.5, 5.0, 5.5, 6.0)
            for d in (100, 200, 300, 400)
            for n in (200, 400, 800, 1600, 2000)
        ]
        base = desk_preset(scenario, seed)
        return replace(base, grid=tuple(grid), reps=50)
    if scenario is Scenario.OUTLIER_SWEEP:
        grid = [GridPoint(d=1000, m=20, n=5000, c=c) for c in (2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)]
        base = desk_preset(scenario, seed)
        return replace(
            base,
            model=replace(base.model, d=1000),
            grid=tuple(grid),
            reps=50,
            n_outliers=100,
        )
    if scenario is Scenario.STEIN_SWEEP:
        grid = [GridPoint(d=100, m=20, n=800, nu=round(2.1 + 0.1 * i, 1)) for i in range(20)]
        base = desk_preset(scenario, seed)
        return replace(base, model=replace(base.model, d=100), grid=tuple(grid), reps=50)
    raise ConfigError(f"no paper preset for scenario {scenario}")


# --- YAML config -------------------------------------------------------------


def _parse_enum(cls, value, what: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in cls)
        raise ConfigError(f"bad {what} {value!r}; choose one of: {choices}") from None


def _parse_estimator(entry: dict) -> EstimatorSpec:
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"estimator entries need a 'kind': {entry!r}")
    kind = _parse_enum(EstimatorKind, entry["kind"], "estimator kind")
    kwargs: dict = {"kind": kind}
    for key in ("alpha", "theta", "tau", "delta", "theta_scale"):
        if key in entry and entry[key] is not None:
            value = entry[key]
            if isinstance(value, str) and value.lower() == "auto":
                value = None
            kwargs[key] = value
    try:
        return EstimatorSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad estimator entry {entry!r}: {exc}") from exc


def _parse_point(entry: dict) -> GridPoint:
    if not isinstance(entry, dict):
        raise ConfigError(f"grid entries must be mappings: {entry!r}")
    allowed = {"d", "m", "n", "lam", "nu", "c"}
    unknown = set(entry) - allowed
    if unknown:
        raise ConfigError(f"unknown grid keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    try:
        return GridPoint(**entry)
    except TypeError as exc:
        raise ConfigError(f"bad grid entry {entry!r}: {exc}") from exc


def load_experiment_config(path) -> ExperimentSpec:
    """Parse a YAML experiment config into an ExperimentSpec.

    Schema (see configs/ for a worked example per scenario)::

        scenario: tail-sweep | pareto-servers | t-comparison | outlier-sweep | stein-sweep
        k_target: 3
        reps: 20
        master_seed: 7
        n_outliers: 20            # outlier-sweep only
        model:
          kind: spiked-t | spiked-laplace | pareto | gaussian-outlier | single-index
          lam: 50.0               # spike scale
          nu: 5.0                 # t dof / noise dof
          shape_k: 4.1            # pareto shape
          link: square | quartic-half
        estimators:
          - {kind: truncation, tau: auto}
          - {kind: sample}
        grid:
          - {d: 100, m: 10, n: 1000, lam: 50.0}
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")

    missing = {"scenario", "model", "grid"} - set(raw)
    if missing:
        raise ConfigError(f"config is missing required keys: {sorted(missing)}")

    scenario = _parse_enum(Scenario, raw["scenario"], "scenario")
    if not isinstance(raw["grid"], list) or not raw["grid"]:
        raise ConfigError("grid must be a non-empty list of sweep points")
    grid = tuple(_parse_point(p) for p in raw["grid"])

    model_raw = raw["model"]
    if not isinstance(model_raw, dict) or "kind" not in model_raw:
        raise ConfigError("model section needs at least a 'kind'")
    model_kwargs: dict = {
        "kind": _parse_enum(ModelKind, model_raw["kind"], "model kind"),
        "d": int(model_raw.get("d", grid[0].d)),
    }
    for key in ("lam", "nu", "shape_k", "c", "seed"):
        if key in model_raw:
            model_kwargs[key] = model_raw[key]
    if "link" in model_raw:
        model_kwargs["link"] = _parse_enum(LinkKind, model_raw["link"], "link")
    try:
        model = ModelSpec(**model_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model section: {exc}") from exc

    estimators = tuple(_parse_estimator(e) for e in raw.get("estimators", [{"kind": "truncation"}]))

    try:
        return ExperimentSpec(
            scenario=scenario,
            model=model,
            grid=grid,
            k_target=int(raw.get("k_target", 3)),
            reps=int(raw.get("reps", 20)),
            estimators=estimators,
            master_seed=int(raw.get("master_seed", 0)),
            n_outliers=int(raw.get("n_outliers", 100)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc
