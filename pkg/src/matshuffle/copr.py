"""Communication-optimal process relabeling.

The relabeling maximizing the total gain is a linear assignment problem
on the gain matrix.  Three solvers are provided:

* ``exact``  -- Hungarian method, O(n^3).
* ``greedy`` -- heaviest-pair-first matching; 1/2-approximation for
  nonnegative gains, never worse than no relabeling.
* ``brute``  -- exhaustive search, used as a test oracle (n <= 10).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .cost import CommGraph, CostModel, GainMatrix, gain_matrix, total_gain
from .errors import ResourceGuardError
from .overlay import PackageSet

SOLVERS = ("greedy", "exact", "brute")
BRUTE_FORCE_MAX_N = 10


@dataclass(frozen=True)
class Relabeling:
    """Destination process ``j`` becomes process ``sigma[j]``."""

    sigma: tuple[int, ...]
    total_gain: int
    solver: str

    @classmethod
    def identity(cls, n: int) -> Relabeling:
        return cls(tuple(range(n)), 0, "identity")

    @property
    def n_procs(self) -> int:
        return len(self.sigma)

    @property
    def is_identity(self) -> bool:
        return all(s == j for j, s in enumerate(self.sigma))

    def inverse(self) -> tuple[int, ...]:
        inv = [0] * len(self.sigma)
        for j, s in enumerate(self.sigma):
            inv[s] = j
        return tuple(inv)


def _as_matrix(gm) -> np.ndarray:
    d = gm.delta if isinstance(gm, GainMatrix) else np.asarray(gm)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"gain matrix must be square, got shape {d.shape}")
    return d


def _relabeling(d: np.ndarray, sigma, solver: str) -> Relabeling:
    sigma = tuple(int(s) for s in sigma)
    gain = int(sum(int(d[j, s]) for j, s in enumerate(sigma)))
    return Relabeling(sigma, gain, solver)


def _hungarian_min(cost: list[list[int]]) -> list[int]:
    """Row -> column assignment minimizing total cost (shortest augmenting paths)."""
    n = len(cost)
    inf = float("inf")
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    match = [0] * (n + 1)  # match[col] = row, 1-based, 0 = free
    way = [0] * (n + 1)
    for row in range(1, n + 1):
        match[0] = row
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            ci = cost[i0 - 1]
            ui = u[i0]
            step, j1 = inf, 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = ci[j - 1] - ui - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < step:
                    step, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += step
                    v[j] -= step
                else:
                    minv[j] -= step
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        assign[match[j] - 1] = j - 1
    return assign


def solve_lap_exact(gm) -> Relabeling:
    """Maximum-gain relabeling by the Hungarian method.

    Gains are turned into nonnegative costs ``max(delta) - delta``; the
    uniform shift moves every perfect matching by the same amount.  If the
    identity already attains the optimum it is returned.
    """
    d = _as_matrix(gm)
    n = d.shape[0]
    if n == 0:
        return Relabeling((), 0, "exact")
    top = int(d.max())
    cost = [[top - int(x) for x in row] for row in d.tolist()]
    best = _relabeling(d, _hungarian_min(cost), "exact")
    if int(np.trace(d)) >= best.total_gain:
        return _relabeling(d, range(n), "exact")
    return best


def solve_lap_greedy(gm) -> Relabeling:
    """Greedy matching on the positive gains, completed in index order.

    Pairs are taken by decreasing gain (ties: smallest ``(x, y)``) while
    both endpoints are free.  Unmatched rows are then paired with unmatched
    columns in index order.  Falls back to the identity when that does
    better (for a gain matrix the identity is worth exactly 0).
    """
    d = _as_matrix(gm)
    n = d.shape[0]
    xs, ys = np.nonzero(d > 0)
    order = np.lexsort((ys, xs, -d[xs, ys]))
    sigma = [-1] * n
    taken = [False] * n
    for k in order.tolist():
        x, y = int(xs[k]), int(ys[k])
        if sigma[x] < 0 and not taken[y]:
            sigma[x] = y
            taken[y] = True
    free_cols = iter(y for y in range(n) if not taken[y])
    for x in range(n):
        if sigma[x] < 0:
            sigma[x] = next(free_cols)
    res = _relabeling(d, sigma, "greedy")
    if res.total_gain < int(np.trace(d)):
        return _relabeling(d, range(n), "greedy")
    return res


def solve_lap_bruteforce(gm) -> Relabeling:
    """Exhaustive maximum; ties go to the lexicographically smallest sigma."""
    d = _as_matrix(gm)
    n = d.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ResourceGuardError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    rows = np.arange(n)
    best_gain, best = None, None
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 50_000)), dtype=np.int64).reshape(-1, n)
        if len(chunk) == 0:
            break
        gains = d[rows, chunk].sum(axis=1)
        k = int(np.argmax(gains))
        if best_gain is None or gains[k] > best_gain:
            best_gain, best = int(gains[k]), chunk[k]
    return _relabeling(d, best, "brute")


_DISPATCH = {
    "exact": solve_lap_exact,
    "greedy": solve_lap_greedy,
    "brute": solve_lap_bruteforce,
}


def solve_lap(gm, solver: str = "greedy") -> Relabeling:
    try:
        fn = _DISPATCH[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}") from None
    return fn(gm)


def find_copr(packages: PackageSet | CommGraph, model: CostModel | None = None,
              solver: str = "greedy") -> Relabeling:
    """Build the gain matrix of a package set and solve the assignment on it."""
    g = packages if isinstance(packages, CommGraph) else CommGraph.from_packages(packages)
    gm = gain_matrix(model or CostModel.locally_free(), g)
    res = solve_lap(gm, solver)
    assert res.total_gain == total_gain(gm, res.sigma)
    return res
