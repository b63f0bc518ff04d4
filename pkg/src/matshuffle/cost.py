"""Communication costs, the communication graph and relabeling gains.

All quantities are exact integers (bytes, element counts and integer
coefficients), so ``total_gain == total_cost - relabeled_cost`` holds with
equality rather than up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .overlay import Package, PackageSet

LOCALLY_FREE = "locally-free-volume"
LATENCY_BANDWIDTH = "latency-bandwidth"
TRANSFORM_AWARE = "transform-aware"


def _int_matrix(values, name):
    a = np.asarray(values)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(np.mod(a, 1) == 0):
            raise ValueError(f"{name} entries must be integers")
    a = a.astype(np.int64)
    if np.any(a < 0):
        raise ValueError(f"{name} entries must be nonnegative")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CostModel:
    """Cost ``w(i, j, s)`` of sending package ``s`` from process i to j.

    Use the ``locally_free``, ``latency_bandwidth`` and ``transform_aware``
    constructors rather than filling the fields by hand.
    """

    kind: str = LOCALLY_FREE
    latency: np.ndarray | None = None
    bandwidth: np.ndarray | None = None
    transform_coeff: int = 0

    @classmethod
    def locally_free(cls) -> CostModel:
        return cls(LOCALLY_FREE)

    @classmethod
    def latency_bandwidth(cls, latency, bandwidth) -> CostModel:
        lat = _int_matrix(latency, "latency")
        bw = _int_matrix(bandwidth, "bandwidth")
        if lat.shape != bw.shape:
            raise ValueError("latency and bandwidth matrices differ in size")
        return cls(LATENCY_BANDWIDTH, lat, bw)

    @classmethod
    def transform_aware(cls, coeff: int) -> CostModel:
        if int(coeff) != coeff or coeff < 0:
            raise ValueError("transform coefficient must be a nonnegative integer")
        return cls(TRANSFORM_AWARE, transform_coeff=int(coeff))

    def check_procs(self, n_procs: int) -> None:
        if self.kind == LATENCY_BANDWIDTH and self.latency.shape[0] < n_procs:
            raise ValueError(
                f"topology covers {self.latency.shape[0]} processes, graph has {n_procs}")

    def weights(self, i, j, volume, transform_elems=0) -> np.ndarray:
        """Vectorized ``w``; zero wherever the package is empty."""
        i, j = np.asarray(i), np.asarray(j)
        vol = np.asarray(volume, dtype=np.int64)
        if self.kind == LATENCY_BANDWIDTH:
            w = self.latency[i, j] + self.bandwidth[i, j] * vol
        else:
            w = np.where(i != j, vol, 0)
            if self.kind == TRANSFORM_AWARE:
                w = w + self.transform_coeff * np.asarray(transform_elems, dtype=np.int64)
        return np.where(vol > 0, w, 0).astype(np.int64)


def edge_cost(model: CostModel, i: int, j: int, s: Package | int) -> int:
    """Cost of one package; ``s`` may be a Package or a bare byte volume."""
    if isinstance(s, Package):
        vol, telems = s.volume, s.transform_elems
    else:
        vol, telems = int(s), 0
    return int(model.weights(i, j, vol, telems))


@dataclass(frozen=True, eq=False)
class CommGraph:
    """Bipartite process graph whose edges are the nonempty packages."""

    n_procs: int
    volumes: np.ndarray
    transform_elems: np.ndarray = None
    packages: PackageSet | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.volumes, dtype=np.int64)
        if v.shape != (self.n_procs, self.n_procs) or np.any(v < 0):
            raise ValueError("volumes must be a nonnegative n_procs x n_procs matrix")
        t = np.zeros_like(v) if self.transform_elems is None else np.asarray(self.transform_elems, np.int64)
        object.__setattr__(self, "volumes", v)
        object.__setattr__(self, "transform_elems", t)

    @classmethod
    def from_packages(cls, ps: PackageSet) -> CommGraph:
        return cls(ps.n_procs, ps.volumes, ps.transform_elems, ps)

    @classmethod
    def from_volumes(cls, volumes, transform_elems=None) -> CommGraph:
        v = np.asarray(volumes, dtype=np.int64)
        return cls(v.shape[0], v, transform_elems)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.volumes > 0)]

    def __add__(self, other: CommGraph) -> CommGraph:
        """Union of two rounds' traffic (batched planning)."""
        n = max(self.n_procs, other.n_procs)

        def pad(a):
            out = np.zeros((n, n), dtype=np.int64)
            out[: a.shape[0], : a.shape[1]] = a
            return out

        return CommGraph(n, pad(self.volumes) + pad(other.volumes),
                         pad(self.transform_elems) + pad(other.transform_elems))


def check_permutation(sigma: Sequence[int], n: int) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.int64)
    if s.shape != (n,) or not np.array_equal(np.sort(s), np.arange(n)):
        raise ValueError(f"sigma is not a bijection on [{n}]: {list(map(int, s))}")
    return s


def _edge_weights(model: CostModel, g: CommGraph, receivers: np.ndarray) -> int:
    model.check_procs(g.n_procs)
    i, j = np.nonzero(g.volumes > 0)
    w = model.weights(i, receivers[j], g.volumes[i, j], g.transform_elems[i, j])
    return int(w.sum())


def total_cost(model: CostModel, g: CommGraph) -> int:
    """``W(G)``: sum of edge weights."""
    return _edge_weights(model, g, np.arange(g.n_procs))


def relabeled_cost(model: CostModel, g: CommGraph, sigma: Sequence[int]) -> int:
    """``W(G_sigma)`` without building ``G_sigma``: edge (i, j) becomes (i, sigma[j])."""
    s = check_permutation(sigma, g.n_procs)
    return _edge_weights(model, g, s)


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """``delta[x, y]``: cost saved by relabeling destination x as y."""

    n_procs: int
    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("gain matrix must be square")
        object.__setattr__(self, "n_procs", d.shape[0])
        object.__setattr__(self, "delta", d)


def gain_matrix(model: CostModel, g: CommGraph, closed_form: bool = True) -> GainMatrix:
    """Relabeling gains for every (x, y).

    For the locally-free and transform-aware models the gain reduces to
    ``V[y, x] - V[x, x]`` (transform costs do not depend on the receiver and
    cancel).  ``closed_form=False`` forces the general per-neighbor sum.
    """
    model.check_procs(g.n_procs)
    n = g.n_procs
    V = g.volumes
    if closed_form and model.kind in (LOCALLY_FREE, TRANSFORM_AWARE):
        return GainMatrix(n, V.T - np.diag(V)[:, None])
    delta = np.zeros((n, n), dtype=np.int64)
    ys = np.arange(n)
    for x in range(n):
        nbrs = np.flatnonzero(V[:, x] > 0)
        if len(nbrs) == 0:
            continue
        vol = V[nbrs, x][:, None]
        tel = g.transform_elems[nbrs, x][:, None]
        before = model.weights(nbrs, x, vol[:, 0], tel[:, 0]).sum()
        after = model.weights(nbrs[:, None], ys[None, :], vol, tel).sum(axis=0)
        delta[x] = before - after
    return GainMatrix(n, delta)


def total_gain(gm: GainMatrix, sigma: Sequence[int]) -> int:
    """``Delta_sigma = sum_j delta[j, sigma[j]]``."""
    s = check_permutation(sigma, gm.n_procs)
    return int(gm.delta[np.arange(gm.n_procs), s].sum())
