"""Experiment configuration: flat key=value files, presets, overrides.

A config file holds one ``key = value`` pair per line; ``#`` starts a comment.
Keys beginning with ``result_`` are ignored on parse, so an emitted experiment
report is itself a valid config and re-runs the experiment that produced it.
Float values are written with ``repr`` and round-trip exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

PI = math.pi


@dataclass
class ExperimentConfig:
    """All knobs of one identification experiment.

    Defaults reproduce the reference setup: 1200 particles, dt = 2 over 5000
    steps, regularization (1e-5, 1e-3) around (0.5*pi, 1.0), stopping ratio
    0.05, anisotropy 0.2 and admissible scaling [0.9, 1.1].
    """

    # problem size and time grid
    n_particles: int = 1200
    dt: float = 2.0
    steps: int = 5000
    # force law
    alpha: float = 270.0
    beta: float = 0.1
    gamma: float = 35.0
    e_r: float = 100.0
    e_a: float = 95.0
    chi: float = 0.2
    eta_min: float = 0.9
    eta_max: float = 1.1
    # cost functional
    lambda1: float = 1e-5
    lambda2: float = 1e-3
    theta_ref: float = 0.5 * PI
    eta_ref: float = 1.0
    # optimizer
    eps_stop: float = 0.05
    max_iterations: int = 50
    tau0: float = 1.0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    adjoint_scheme: str = "discrete"
    orientation: str = "transposed"
    # data generation and initialization
    seed_data: int = 20210
    seed_init: int = 20211
    theta0: float = 0.3 * PI
    eta0: float = 0.98
    theta_data: float = 0.7 * PI
    eta_data: float = 1.0
    # output
    output_dir: str = "out"
    export_stride: int = 250

    def force_params(self):
        from .params import ForceParams
        return ForceParams(self.alpha, self.beta, self.gamma, self.e_r, self.e_a,
                           self.chi, self.eta_min, self.eta_max)

    def optimizer_options(self):
        from .optimize import OptimizerOptions
        return OptimizerOptions(self.lambda1, self.lambda2, self.theta_ref, self.eta_ref,
                                self.eps_stop, self.max_iterations, self.tau0,
                                self.armijo_c, self.backtrack_factor, self.max_backtracks,
                                self.adjoint_scheme, self.orientation)

    def to_text(self) -> str:
        lines = ["# patternfit experiment configuration"]
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def to_file(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cfg = cls()
        apply_overrides(cfg, parse_keyvalue(text))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_keyvalue(text: str) -> dict:
    """Parse ``key = value`` lines; result_* keys and comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key.startswith("result_"):
            continue
        out[key] = value.strip()
    return out


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Set config fields from a ``{name: string}`` mapping, coercing types."""
    fields = {f.name: f for f in dataclasses.fields(cfg)}
    for key, raw in overrides.items():
        if key not in fields:
            raise KeyError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, bool):
            value = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        else:
            value = raw
        setattr(cfg, key, value)
    return cfg


def desk_preset(case: str = "p1") -> ExperimentConfig:
    """Desk-scale presets (N=200, 2500 steps): minutes instead of hours.

    The time step is the rescaled ``dt = 2 * N`` (see ``full_preset``) and
    the costate sweep defaults to the damping implicit scheme, which the
    strong per-step coupling of this regime requires.
    """
    cfg = full_preset(case)
    cfg.n_particles = 200
    cfg.steps = 2500
    cfg.dt = 2.0 * cfg.n_particles
    return cfg


def full_preset(case: str = "p1") -> ExperimentConfig:
    """Full-scale presets for the three bundled identification experiments.

    With the mean-field (1/N)-normalized velocity implemented here, the
    nominal step ``dt = 2`` moves particles by far less than one
    interparticle distance over the whole run, so nothing can organize.
    These presets use the rescaled step ``dt = 2 * N`` (the update
    ``x + dt*mean_j F`` then equals ``x + 2*sum_j F`` exactly): the regime
    where stripe patterns form within the step budget and the costate system
    is genuinely stiff, hence the implicit sweep.
    """
    cfg = ExperimentConfig()
    cfg.dt = 2.0 * cfg.n_particles
    cfg.adjoint_scheme = "implicit"
    case = case.lower()
    if case == "p1":
        cfg.theta0, cfg.theta_data = 0.3 * PI, 0.7 * PI
        cfg.eta0, cfg.eta_data = 0.98, 1.0
    elif case == "p2":
        cfg.theta0, cfg.theta_data = 0.8 * PI, 0.3 * PI
        cfg.eta0, cfg.eta_data = 0.98, 0.9
    elif case == "p3":
        cfg.theta0, cfg.theta_data = 0.0, 0.5 * PI
        cfg.eta0, cfg.eta_data = 0.98, 0.95
    else:
        raise ValueError(f"unknown preset case {case!r} (expected p1, p2 or p3)")
    return cfg


def gradcheck_preset() -> ExperimentConfig:
    """Small configuration for finite-difference gradient validation."""
    cfg = ExperimentConfig()
    cfg.n_particles = 20
    cfg.dt = 0.5
    cfg.steps = 50
    cfg.seed_data = 501
    cfg.seed_init = 502
    return cfg


PRESETS = {
    "desk-p1": lambda: desk_preset("p1"),
    "desk-p2": lambda: desk_preset("p2"),
    "desk-p3": lambda: desk_preset("p3"),
    "full-p1": lambda: full_preset("p1"),
    "full-p2": lambda: full_preset("p2"),
    "full-p3": lambda: full_preset("p3"),
    "gradcheck": gradcheck_preset,
}
