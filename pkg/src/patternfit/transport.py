"""Exact optimal transport between uniform N-point empirical measures on the torus.

Because both marginals carry weight 1/N, Kantorovich's problem always admits a
permutation among its optimal plans, so the solve reduces to a linear
assignment problem with the squared minimum-image distance as ground cost.
The solver below is a dense shortest-augmenting-path method (Jonker-Volgenant
class, O(N^3) worst case): rows are inserted in ascending index and the first
optimal augmenting path is accepted, which fixes the permutation
deterministically on cost ties.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forces import wrap_displacement
from .validation import check_positions, check_square_cost


@dataclass(frozen=True)
class TransportPlan:
    """Optimal assignment sigma with its unnormalized cost and W2^2 value.

    ``total_cost`` is ``sum_i M[i, sigma(i)]``; ``w2_squared`` divides by N,
    which is the squared Wasserstein-2 distance of the two empirical measures.
    """

    assignment: np.ndarray
    total_cost: float
    w2_squared: float

    def __post_init__(self):
        sigma = np.asarray(self.assignment, dtype=int)
        sigma.setflags(write=False)
        object.__setattr__(self, "assignment", sigma)


def periodic_sq_distance(x, y):
    """Squared minimum-image distance between points of the unit torus."""
    d = wrap_displacement(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.sum(d * d, axis=-1)


def ground_cost(source, target) -> np.ndarray:
    """Ground matrix M[i, j] = squared periodic distance from source i to target j."""
    src = check_positions(source, "source")
    tgt = check_positions(target, "target")
    if src.shape[0] != tgt.shape[0]:
        raise ValueError("source and target must have the same particle count")
    diff = wrap_displacement(src[:, None, :] - tgt[None, :, :])
    return np.sum(diff * diff, axis=-1)


def solve_assignment(cost) -> TransportPlan:
    """Exact minimum-cost assignment for a square cost matrix.

    Shortest augmenting path over reduced costs with dual updates; among
    columns at equal tentative distance the smallest index is scanned first,
    making the returned permutation deterministic.
    """
    c = check_square_cost(cost)
    n = c.shape[0]
    u = np.zeros(n)            # row potentials
    v = np.zeros(n)            # column potentials
    col_of_row = np.full(n, -1, dtype=int)
    row_of_col = np.full(n, -1, dtype=int)

    for cur in range(n):
        # Dijkstra from row `cur` over columns in the reduced-cost graph.
        min_to = np.full(n, np.inf)    # tentative distance to each column
        prev_row = np.full(n, cur, dtype=int)
        scanned = np.zeros(n, dtype=bool)
        remaining = np.arange(n)
        i = cur
        dist_i = 0.0
        sink = -1
        while sink < 0:
            reduced = dist_i + c[i, remaining] - u[i] - v[remaining]
            better = reduced < min_to[remaining]
            cols = remaining[better]
            min_to[cols] = reduced[better]
            prev_row[cols] = i
            k = int(np.argmin(min_to[remaining]))
            j = int(remaining[k])
            dist_i = min_to[j]
            if not np.isfinite(dist_i):
                raise ValueError("assignment infeasible (non-finite costs)")
            scanned[j] = True
            remaining = np.delete(remaining, k)
            if row_of_col[j] < 0:
                sink = j
            else:
                i = row_of_col[j]
        # Dual update keeps reduced costs nonnegative for scanned nodes.
        u[cur] += dist_i
        rows_hit = row_of_col[scanned & (row_of_col >= 0)]
        u[rows_hit] += dist_i - min_to[col_of_row[rows_hit]]
        v[scanned] -= dist_i - min_to[scanned]
        # Augment along the alternating path back to `cur`.
        j = sink
        while True:
            i = prev_row[j]
            row_of_col[j] = i
            col_of_row[i], j = j, col_of_row[i]
            if i == cur:
                break

    total = float(np.sum(c[np.arange(n), col_of_row]))
    return TransportPlan(col_of_row, total, total / n)


def transport_plan(source, target) -> TransportPlan:
    """Optimal plan between the uniform empirical measures of two point sets."""
    return solve_assignment(ground_cost(source, target))


def w2_squared(source, target) -> float:
    """Squared Wasserstein-2 distance between two uniform empirical measures."""
    return transport_plan(source, target).w2_squared


def transport_displacements(source, target, plan: TransportPlan) -> np.ndarray:
    """Minimum-image connectors t(x_i) - x_i to the assigned target points."""
    src = check_positions(source, "source")
    tgt = check_positions(target, "target")
    return wrap_displacement(tgt[plan.assignment] - src)
