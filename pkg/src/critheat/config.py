"""Run configuration: a JSON-compatible tree, validated with no silent defaults.

`parse_config` fills every default and records it, so serializing the result
and parsing it again yields an identical value. The content hash of the
materialized configuration identifies a run in its output manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from . import families
from .radial import RadialGrid, make_grid


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message names the field."""


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    r_max: float
    n_nodes: int
    stretch: float
    family: str
    family_params: tuple
    tol: float = 1e-5
    dt_init: float = 1e-5
    dt_min: float = 1e-12
    t_max: float = 1e4
    snapshot_first: float = 1e-3
    snapshot_factor: float = 1.3
    checkpoint_every: int = 4
    forced_times: tuple = ()
    eps_dissip_rel: float = 1e-6
    kq_streak: int = 5
    blowup_factor: float = 10.0
    amp_cap: float = 1e8
    nonlinearity: str = "focusing"
    q: float | None = None
    fit_t_lo: float = 2.0
    seed: int = 0
    out_dir: str | None = None

    @property
    def params(self) -> dict:
        return dict(self.family_params)

    def make_grid(self) -> RadialGrid:
        return make_grid(self.dimension, self.r_max, self.n_nodes, self.stretch)

    def to_json(self) -> str:
        tree = {
            "dimension": self.dimension,
            "grid": {"R": self.r_max, "n": self.n_nodes, "stretch": self.stretch},
            "family": {"name": self.family, **self.params},
            "integrator": {
                "tol": self.tol,
                "dt_init": self.dt_init,
                "dt_min": self.dt_min,
                "t_max": self.t_max,
                "nonlinearity": self.nonlinearity,
            },
            "snapshots": {
                "first": self.snapshot_first,
                "factor": self.snapshot_factor,
                "checkpoint_every": self.checkpoint_every,
                "forced_times": list(self.forced_times),
            },
            "verdict": {
                "eps_dissip_rel": self.eps_dissip_rel,
                "kq_streak": self.kq_streak,
                "blowup_factor": self.blowup_factor,
                "amp_cap": self.amp_cap,
            },
            "diagnostics": {"q": self.q, "fit_t_lo": self.fit_t_lo},
            "seed": self.seed,
            "out_dir": self.out_dir,
        }
        return json.dumps(tree, indent=2, sort_keys=True)

    def content_hash(self) -> str:
        payload = replace(self, out_dir=None).to_json()
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _require(tree: dict, key: str, kind, where: str):
    if key not in tree:
        raise ConfigError(f"{where}: missing required field {key!r}")
    value = tree[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _optional(tree: dict, key: str, default, where: str):
    if key not in tree or tree[key] is None:
        return default
    value = tree[key]
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if default is not None and not isinstance(value, type(default)):
        raise ConfigError(
            f"{where}.{key}: expected {type(default).__name__}, got {type(value).__name__}"
        )
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration, materializing every default."""
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(tree, dict):
        raise ConfigError("top level must be an object")

    dimension = _require(tree, "dimension", int, "config")
    if dimension < 3:
        raise ConfigError(f"dimension: must be >= 3, got {dimension}")

    grid = _require(tree, "grid", dict, "config")
    r_max = _require(grid, "R", float, "grid")
    n_nodes = _require(grid, "n", int, "grid")
    stretch = _optional(grid, "stretch", 1.0, "grid")
    if r_max <= 0:
        raise ConfigError(f"grid.R: must be positive, got {r_max}")
    if n_nodes < 16:
        raise ConfigError(f"grid.n: must be >= 16, got {n_nodes}")
    if not 1.0 <= stretch <= 1.2:
        raise ConfigError(f"grid.stretch: must lie in [1, 1.2], got {stretch}")

    fam = _require(tree, "family", dict, "config")
    name = _require(fam, "name", str, "family")
    if name not in families.FAMILIES:
        raise ConfigError(
            f"family.name: unknown family {name!r}; registered: {sorted(families.FAMILIES)}"
        )
    params = {k: v for k, v in fam.items() if k != "name"}

    integ = _optional(tree, "integrator", {}, "config")
    snaps = _optional(tree, "snapshots", {}, "config")
    verdict = _optional(tree, "verdict", {}, "config")
    diag = _optional(tree, "diagnostics", {}, "config")

    nonlinearity = _optional(integ, "nonlinearity", "focusing", "integrator")
    if nonlinearity not in ("focusing", "defocusing", "off"):
        raise ConfigError(f"integrator.nonlinearity: unknown mode {nonlinearity!r}")

    cfg = RunConfig(
        dimension=dimension,
        r_max=r_max,
        n_nodes=n_nodes,
        stretch=stretch,
        family=name,
        family_params=tuple(sorted(params.items())),
        tol=_optional(integ, "tol", 1e-5, "integrator"),
        dt_init=_optional(integ, "dt_init", 1e-5, "integrator"),
        dt_min=_optional(integ, "dt_min", 1e-12, "integrator"),
        t_max=_optional(integ, "t_max", 1e4, "integrator"),
        nonlinearity=nonlinearity,
        snapshot_first=_optional(snaps, "first", 1e-3, "snapshots"),
        snapshot_factor=_optional(snaps, "factor", 1.3, "snapshots"),
        checkpoint_every=_optional(snaps, "checkpoint_every", 4, "snapshots"),
        forced_times=tuple(_optional(snaps, "forced_times", [], "snapshots")),
        eps_dissip_rel=_optional(verdict, "eps_dissip_rel", 1e-6, "verdict"),
        kq_streak=_optional(verdict, "kq_streak", 5, "verdict"),
        blowup_factor=_optional(verdict, "blowup_factor", 10.0, "verdict"),
        amp_cap=_optional(verdict, "amp_cap", 1e8, "verdict"),
        q=diag.get("q"),
        fit_t_lo=_optional(diag, "fit_t_lo", 2.0, "diagnostics"),
        seed=_optional(tree, "seed", 0, "config"),
        out_dir=tree.get("out_dir"),
    )
    for field_name in ("tol", "dt_init", "dt_min", "t_max", "snapshot_first",
                       "eps_dissip_rel", "blowup_factor", "amp_cap"):
        if not getattr(cfg, field_name) > 0:
            raise ConfigError(f"{field_name}: must be positive")
    if cfg.snapshot_factor <= 1.0:
        raise ConfigError(f"snapshots.factor: must exceed 1, got {cfg.snapshot_factor}")
    if any(t <= 0 for t in cfg.forced_times):
        raise ConfigError("snapshots.forced_times: entries must be positive")
    return cfg
