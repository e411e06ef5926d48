"""Forward integration of the interacting-particle system on the torus.

The particle velocities are the mean of the pairwise periodic forces,

    v_i = (1/N) * sum_j F(wrap(x_i - x_j), u),

integrated with the explicit Euler scheme; positions are wrapped back into
[0, 1) after every step.  The full trajectory is kept in memory because the
costate sweep revisits every snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, forces
from .params import Control, ForceParams
from .validation import check_positions

# Refuse to allocate trajectories beyond this many bytes unless overridden.
DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3


@dataclass(frozen=True)
class ParticleState:
    """Immutable snapshot of N particle positions on the unit torus."""

    positions: np.ndarray

    def __post_init__(self):
        arr = check_positions(self.positions)
        arr.setflags(write=False)
        object.__setattr__(self, "positions", arr)

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed position history on a uniform grid t_k = k*dt.

    ``positions`` has shape (steps+1, N, 2); ``states[0]`` is the initial
    condition.
    """

    positions: np.ndarray
    dt: float

    def __post_init__(self):
        arr = np.asarray(self.positions, dtype=float)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError(f"trajectory positions must have shape (K+1, N, 2), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "positions", arr)

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def n_particles(self) -> int:
        return self.positions.shape[1]

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps

    def state(self, k: int) -> ParticleState:
        return ParticleState(self.positions[k])

    @property
    def final_state(self) -> ParticleState:
        return self.state(self.n_steps)

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.positions.shape[0])


def velocity_field(positions, u: Control, p: ForceParams) -> np.ndarray:
    """Velocities (N, 2) of all particles for the homogeneous control ``u``.

    The j = i self term is included: it is exactly zero.  The inner sum runs
    in fixed index order (parallelism only over the outer particle index), so
    results are reproducible bit-for-bit.
    """
    x = np.asarray(positions, dtype=float)
    if _kernels.enabled():
        return _kernels.velocity_kernel(x, u.theta, u.eta, p.alpha, p.beta,
                                        p.gamma, p.e_r, p.e_a, p.chi)
    disp = forces.pair_displacements(x)
    pair_forces = forces.total_force(disp, u, p)
    return pair_forces.sum(axis=1) / x.shape[0]


def step_forward(positions, u: Control, p: ForceParams, dt: float) -> np.ndarray:
    """One explicit Euler step; positions wrapped back into [0, 1)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    x = np.asarray(positions, dtype=float)
    return forces.wrap_position(x + dt * velocity_field(x, u, p))


def simulate(initial, u: Control, p: ForceParams, dt: float, steps: int,
             memory_budget: int = DEFAULT_MEMORY_BUDGET) -> Trajectory:
    """Integrate ``steps`` Euler steps from ``initial`` and record every state.

    Parameters
    ----------
    initial : ParticleState or array (N, 2)
        Initial positions in [0, 1)^2.
    u, p : Control, ForceParams
        Homogeneous control pair and force coefficients.
    dt, steps : float, int
        Time step (> 0) and number of steps (>= 1).
    memory_budget : int
        Upper bound in bytes for the stored trajectory; exceeding it raises
        ``MemoryError`` before any allocation.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    x0 = initial.positions if isinstance(initial, ParticleState) else check_positions(initial)
    n = x0.shape[0]
    nbytes = (steps + 1) * n * 2 * 8
    if nbytes > memory_budget:
        raise MemoryError(
            f"trajectory storage needs {nbytes} bytes, exceeding the budget of {memory_budget}")
    out = np.empty((steps + 1, n, 2))
    out[0] = x0
    x = x0
    for k in range(steps):
        x = step_forward(x, u, p, dt)
        out[k + 1] = x
    return Trajectory(out, dt)


def max_speed(positions, u: Control, p: ForceParams) -> float:
    """Largest particle speed; used as a stationarity diagnostic at final time."""
    v = velocity_field(positions, u, p)
    return float(np.max(np.linalg.norm(v, axis=-1)))


def export_positions_csv(path, trajectory: Trajectory, stride: int = 1):
    """Write ``step,time,particle_id,x,y`` rows for every stride-th snapshot.

    The final snapshot is always included.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ks = list(range(0, trajectory.n_steps + 1, stride))
    if ks[-1] != trajectory.n_steps:
        ks.append(trajectory.n_steps)
    with open(path, "w") as fh:
        fh.write("step,time,particle_id,x,y\n")
        for k in ks:
            t = float(k * trajectory.dt)
            for i, (x, y) in enumerate(trajectory.positions[k]):
                fh.write(f"{k},{t!r},{i},{float(x)!r},{float(y)!r}\n")


def read_positions_csv(path, step=None) -> np.ndarray:
    """Read one snapshot from a ``step,time,particle_id,x,y`` file.

    With ``step=None`` the last step present in the file is used.  Rows may
    also be bare ``x,y`` pairs (no header), for ad-hoc point lists.
    """
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        plain = header and not header.startswith("step")
        if plain:
            parts = header.split(",")
            rows.append((0, 0, float(parts[-2]), float(parts[-1])))
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if plain:
                rows.append((0, 0, float(parts[-2]), float(parts[-1])))
            else:
                rows.append((int(parts[0]), int(parts[2]), float(parts[3]), float(parts[4])))
    if not rows:
        raise ValueError(f"no position rows found in {path}")
    want = max(r[0] for r in rows) if step is None else step
    snap = [(pid, x, y) for (k, pid, x, y) in rows if k == want]
    if not snap:
        raise ValueError(f"step {want} not present in {path}")
    snap.sort(key=lambda r: r[0])
    return np.array([[x, y] for (_, x, y) in snap])
