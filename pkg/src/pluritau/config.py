"""Run configuration: seeds, tolerances, iteration budgets, output options."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field


@dataclass
class Tolerances:
    feas_margin: float = 1e-6      # interiority buffer for feasibility constraints
    root_tol: float = 1e-12       # relative tolerance of ray/level root solves
    frame_tol: float = 1e-9       # orthogonality / residual tolerance of frames
    stab_tol: float = 0.02        # relative successive-difference threshold
    cert_tol: float = 1e-9        # max constraint violation for certified bounds
    levi_pos_tol: float = 1e-12   # positivity threshold for Hermitian-block eigenvalues

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"tolerance {f.name} must be positive")


@dataclass
class Budgets:
    nm_starts: int = 64            # multi-starts for direction optimization
    nm_maxiter: int = 400          # Nelder-Mead iteration cap per start
    cert_per_dim: int = 200        # certification sweep resolution per angular dim
    cert_budget: int = 64000       # total certification grid cap (>= 3 angular dims)
    ray_coarse: int = 256          # coarse bracketing steps along rays
    ray_bisect: int = 80           # bisection iterations after bracketing
    penalty_stages: tuple = (1e2, 1e4, 1e7)
    # final stage gets lbfgs_maxiter iterations, earlier stages half
    lbfgs_maxiter: int = 120
    volume_starts: int = 2         # multi-starts per degree in the map optimizer
    max_degree: int = 8            # ansatz degree escalation cap (1..max_degree)
    stall_rtol: float = 5e-4       # stop escalating when log-det gains fall below this
    sphere_points: int = 4096      # feasibility directions (n = 2 default)
    shell_radii: tuple = (0.35, 0.65, 0.85, 0.95)
    gap_grid_per_dim: int = 9      # grid resolution per real dim for sup-norm gaps


@dataclass
class RunConfig:
    seed: int = 20230817
    tolerances: Tolerances = field(default_factory=Tolerances)
    budgets: Budgets = field(default_factory=Budgets)
    threads: int = 0               # 0: leave numba's default alone
    output: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        self.tolerances.validate()
        env_threads = os.environ.get("PLURITAU_THREADS")
        if env_threads and self.threads == 0:
            self.threads = int(env_threads)
        if self.threads > 0:
            try:
                import numba
                numba.set_num_threads(self.threads)
            except (ImportError, ValueError):
                pass

    def sphere_count(self, n: int) -> int:
        if n <= 1:
            return max(512, self.budgets.sphere_points // 8)
        if n == 2:
            return self.budgets.sphere_points
        return 4 * self.budgets.sphere_points


_SECTION_FIELDS = {
    "tolerances": {f.name for f in dataclasses.fields(Tolerances)},
    "budgets": {f.name for f in dataclasses.fields(Budgets)},
}


def apply_overrides(cfg: RunConfig, pairs: dict) -> RunConfig:
    """Apply flat key=value overrides (from --config files or flags)."""
    for key, raw in pairs.items():
        key = key.strip()
        target = None
        for section, names in _SECTION_FIELDS.items():
            if key in names:
                target = getattr(cfg, section)
                break
        if target is None:
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            target = cfg
        current = getattr(target, key)
        if isinstance(current, bool):
            value = str(raw).strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        elif isinstance(current, tuple):
            value = tuple(float(x) for x in str(raw).split(","))
        else:
            value = raw
        setattr(target, key, value)
    return cfg


def load_config_file(path: str) -> dict:
    """Parse a toml-style key = value file (strings, numbers, booleans)."""
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {line!r}")
            key, val = line.split("=", 1)
            pairs[key.strip()] = val.strip().strip('"').strip("'")
    return pairs
