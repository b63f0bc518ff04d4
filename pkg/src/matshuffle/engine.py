"""Shuffle-and-transpose ``A = alpha * op(B) + beta * A`` on simulated processes.

Each process is a :class:`ProcessState` holding named element buffers.
A round works as follows:

1. every sender packs all blocks bound for one receiver into a single
   contiguous byte payload (blocks ordered by job, then row range, then
   column range; each block serialized row-major in source coordinates);
2. the mailbox delivers messages, by default in ``(sender, receiver)``
   order; any other order gives bit-identical results;
3. the receiver unpacks each block and applies ``op``, ``alpha`` and
   ``beta`` while writing it into its destination buffer.

Blocks whose sender and (relabeled) receiver coincide skip packing and
are transformed straight from the source buffer.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .copr import Relabeling, find_copr
from .cost import CommGraph, CostModel, check_permutation, relabeled_cost
from .errors import ExtentMismatchError, LayoutError
from .layout import Layout, block_view
from .overlay import PackageSet, build_package_set, transposed_package_set

IDENTITY = "identity"
TRANSPOSE = "transpose"
CONJ_TRANSPOSE = "conj-transpose"
OPS = (IDENTITY, TRANSPOSE, CONJ_TRANSPOSE)
_OP_ALIASES = {
    "n": IDENTITY, "none": IDENTITY, IDENTITY: IDENTITY,
    "t": TRANSPOSE, TRANSPOSE: TRANSPOSE,
    "c": CONJ_TRANSPOSE, "h": CONJ_TRANSPOSE, "conjugate-transpose": CONJ_TRANSPOSE,
    CONJ_TRANSPOSE: CONJ_TRANSPOSE,
}
DTYPES = {"int64": np.int64, "float64": np.float64, "complex128": np.complex128}


def normalize_op(op: str) -> str:
    try:
        return _OP_ALIASES[str(op).lower()]
    except KeyError:
        raise ValueError(f"unknown op {op!r}; choose from {OPS}") from None


@dataclass
class ProcessState:
    """One simulated rank: named local buffers plus per-round staging areas."""

    rank: int
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    send_staging: list = field(default_factory=list, repr=False)
    recv_staging: list = field(default_factory=list, repr=False)


def make_processes(n_procs: int) -> list[ProcessState]:
    return [ProcessState(r) for r in range(n_procs)]


@dataclass(frozen=True)
class TransformJob:
    """One instance of ``A = alpha * op(B) + beta * A``.

    ``src_buffer`` / ``dst_buffer`` name the per-process buffers holding B
    and A.  Jobs in one batch must write distinct destination buffers.
    """

    src_layout: Layout
    dst_layout: Layout
    alpha: complex = 1
    beta: complex = 0
    op: str = IDENTITY
    src_buffer: str = "B"
    dst_buffer: str = "A"

    def __post_init__(self):
        object.__setattr__(self, "op", normalize_op(self.op))
        m, n = self.src_layout.extent
        want = (m, n) if self.op == IDENTITY else (n, m)
        if self.dst_layout.extent != want:
            raise ExtentMismatchError(
                f"{self.op}: destination extent {self.dst_layout.extent} incompatible with "
                f"source extent {(m, n)}")
        if self.src_buffer == self.dst_buffer:
            raise ValueError("source and destination buffers must differ")

    @property
    def n_procs(self) -> int:
        return max(self.src_layout.n_procs, self.dst_layout.n_procs)

    @property
    def transforms(self) -> bool:
        """Blocks are modified in flight (transposed or scaled)."""
        return self.op != IDENTITY or self.alpha != 1

    def package_set(self) -> PackageSet:
        if self.op == IDENTITY:
            return build_package_set(self.dst_layout, self.src_layout, self.transforms)
        return transposed_package_set(self.dst_layout, self.src_layout, self.transforms)

    def comm_graph(self) -> CommGraph:
        return CommGraph.from_packages(self.package_set())

    def effective_dst(self, relabel: Relabeling | Sequence[int] | None = None,
                      n_procs: int | None = None) -> Layout:
        """Destination layout after relabeling (where A actually lives)."""
        dst = self.dst_layout.with_n_procs(n_procs or self.n_procs)
        if relabel is None:
            return dst
        sigma = relabel.sigma if isinstance(relabel, Relabeling) else relabel
        return dst.relabel(sigma)


@dataclass
class ExchangeReport:
    """Traffic accounting of one communication round."""

    n_procs: int
    messages: dict[tuple[int, int], int] = field(default_factory=dict)
    pair_bytes: dict[tuple[int, int], int] = field(default_factory=dict)
    local_bytes: int = 0
    relabelings: list[tuple[int, ...]] = field(default_factory=list)
    predicted_cost: int | None = None

    @property
    def n_messages(self) -> int:
        return sum(self.messages.values())

    @property
    def remote_bytes(self) -> int:
        return sum(self.pair_bytes.values())

    @property
    def sigma(self) -> tuple[int, ...]:
        return self.relabelings[0] if self.relabelings else tuple(range(self.n_procs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sender", "receiver", "messages", "bytes"])
        for pair in sorted(self.messages):
            w.writerow([pair[0], pair[1], self.messages[pair], self.pair_bytes[pair]])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "messages": self.n_messages,
            "remote_bytes": self.remote_bytes,
            "local_bytes": self.local_bytes,
            "predicted_cost": self.predicted_cost,
            "sigma": [list(s) for s in self.relabelings],
        }


@dataclass(frozen=True)
class BlockHeader:
    job: int
    flat: int          # overlay block index of the job's package set
    offset: int        # byte offset inside the payload
    nbytes: int


@dataclass
class Message:
    sender: int
    receiver: int
    headers: list[BlockHeader]
    payload: bytes


# --------------------------------------------------------------------------
# dense helpers

def allocate(layout: Layout, procs: list[ProcessState], name: str, dtype) -> None:
    for p in procs:
        p.buffers[name] = np.zeros(layout.local_size(p.rank) if p.rank < layout.n_procs else 0,
                                   dtype=dtype)


def scatter(layout: Layout, matrix: np.ndarray, procs: list[ProcessState], name: str) -> None:
    """Distribute a dense global matrix into per-process buffers."""
    matrix = np.asarray(matrix)
    if matrix.shape != layout.extent:
        raise ExtentMismatchError(f"matrix shape {matrix.shape} != layout extent {layout.extent}")
    _check_itemsize(layout, matrix.dtype)
    allocate(layout, procs, name, matrix.dtype)
    for (i, j), b in layout.grid.blocks():
        view = block_view(procs[layout.owner(i, j)].buffers[name], layout, i, j)
        view[...] = matrix[b.row_range[0]:b.row_range[1], b.col_range[0]:b.col_range[1]]


def gather(layout: Layout, procs: list[ProcessState], name: str) -> np.ndarray:
    """Reassemble the dense global matrix from per-process buffers."""
    dtype = next(p.buffers[name].dtype for p in procs if name in p.buffers)
    out = np.zeros(layout.extent, dtype=dtype)
    for (i, j), b in layout.grid.blocks():
        view = block_view(procs[layout.owner(i, j)].buffers[name], layout, i, j)
        out[b.row_range[0]:b.row_range[1], b.col_range[0]:b.col_range[1]] = view
    return out


def apply_op(x: np.ndarray, op: str) -> np.ndarray:
    op = normalize_op(op)
    if op == IDENTITY:
        return x
    if op == CONJ_TRANSPOSE and np.iscomplexobj(x):
        return x.conj().T
    return x.T


def reference(b: np.ndarray, a_old: np.ndarray | None, alpha, beta, op: str) -> np.ndarray:
    """Dense ``alpha * op(B) + beta * A``; ``beta == 0`` ignores ``a_old``."""
    res = alpha * apply_op(np.asarray(b), op)
    if beta != 0:
        res = res + beta * np.asarray(a_old)
    return res.astype(np.result_type(b, a_old) if a_old is not None else np.asarray(b).dtype)


def _check_itemsize(layout: Layout, dtype) -> None:
    if np.dtype(dtype).itemsize != layout.elem_size:
        raise LayoutError(
            f"element size {np.dtype(dtype).itemsize} of {np.dtype(dtype)} data does not "
            f"match layout elem_size {layout.elem_size}")


def _check_scalars(job: TransformJob, dtype) -> None:
    dt = np.dtype(dtype)
    for name in ("alpha", "beta"):
        v = getattr(job, name)
        if dt.kind in "iu" and (complex(v).imag != 0 or complex(v).real != int(complex(v).real)):
            raise ValueError(f"{name}={v!r} is not representable in {dt}")
        if dt.kind == "f" and complex(v).imag != 0:
            raise ValueError(f"complex {name} with real data")


def _scalar(v, dtype):
    dt = np.dtype(dtype)
    if dt.kind in "iu":
        return int(complex(v).real)
    if dt.kind == "f":
        return float(complex(v).real)
    return complex(v)


# --------------------------------------------------------------------------
# planning

def plan_relabelings(jobs: Sequence[TransformJob], model: CostModel | None = None,
                     solver: str = "greedy", joint: bool = True) -> list[Relabeling]:
    """One relabeling per job: shared (``joint``) or found job by job."""
    model = model or CostModel.locally_free()
    if not joint:
        return [find_copr(j.comm_graph(), model, solver) for j in jobs]
    n = _common_n_procs(jobs)
    total = CommGraph.from_volumes(np.zeros((n, n), dtype=np.int64))
    for j in jobs:
        total = total + j.comm_graph()
    r = find_copr(total, model, solver)
    return [r] * len(jobs)


def predict_cost(job: TransformJob, model: CostModel | None = None,
                 relabel: Relabeling | Sequence[int] | None = None) -> int:
    """``W(G_sigma)`` of a job, computed from layouts alone."""
    g = job.comm_graph()
    if relabel is None:
        sigma = range(g.n_procs)
    else:
        sigma = relabel.sigma if isinstance(relabel, Relabeling) else relabel
    return relabeled_cost(model or CostModel.locally_free(), g, list(sigma))


def _common_n_procs(jobs: Sequence[TransformJob]) -> int:
    ns = {j.n_procs for j in jobs}
    if len(ns) != 1:
        raise ValueError(f"batched jobs must share a process count, got {sorted(ns)}")
    return ns.pop()


# --------------------------------------------------------------------------
# execution

class _Plan:
    """Per-job precomputed geometry."""

    def __init__(self, job: TransformJob, sigma: np.ndarray, n: int):
        self.job = job
        self.ps = job.package_set()
        self.sigma = sigma
        self.src = job.src_layout
        self.dst = job.effective_dst(sigma.tolist(), n)
        ov = self.ps.overlay
        self.rows, self.cols = ov.row_splits, ov.col_splits
        self.ncols = len(self.cols) - 1

    def dst_region(self, flat: int):
        i, j = divmod(flat, self.ncols)
        ov = self.ps.overlay
        ai, aj = int(ov.row_cover_a[i]), int(ov.col_cover_a[j])
        rs = self.dst.grid.row_splits
        cs = self.dst.grid.col_splits
        r0, r1 = int(self.rows[i]) - int(rs[ai]), int(self.rows[i + 1]) - int(rs[ai])
        c0, c1 = int(self.cols[j]) - int(cs[aj]), int(self.cols[j + 1]) - int(cs[aj])
        return self.dst.owner(ai, aj), ai, aj, (slice(r0, r1), slice(c0, c1))

    def src_region(self, flat: int):
        """Owner, source block and slice inside it, in source coordinates."""
        i, j = divmod(flat, self.ncols)
        ov = self.ps.overlay
        rows = (int(self.rows[i]), int(self.rows[i + 1]))
        cols = (int(self.cols[j]), int(self.cols[j + 1]))
        if self.ps.transposed:
            bi, bj = int(ov.col_cover_b[j]), int(ov.row_cover_b[i])
            rows, cols = cols, rows
        else:
            bi, bj = int(ov.row_cover_b[i]), int(ov.col_cover_b[j])
        r0 = int(self.src.grid.row_splits[bi])
        c0 = int(self.src.grid.col_splits[bj])
        sl = (slice(rows[0] - r0, rows[1] - r0), slice(cols[0] - c0, cols[1] - c0))
        return self.src.owner(bi, bj), bi, bj, sl, (rows[1] - rows[0], cols[1] - cols[0])

    def read(self, procs, flat: int) -> np.ndarray:
        owner, bi, bj, sl, _ = self.src_region(flat)
        return block_view(procs[owner].buffers[self.job.src_buffer], self.src, bi, bj)[sl]

    def write(self, procs, flat: int, data: np.ndarray) -> None:
        owner, ai, aj, sl = self.dst_region(flat)
        buf = procs[owner].buffers[self.job.dst_buffer]
        view = block_view(buf, self.dst, ai, aj)[sl]
        job = self.job
        x = apply_op(data, job.op)
        alpha, beta = _scalar(job.alpha, buf.dtype), _scalar(job.beta, buf.dtype)
        if beta == 0:
            view[...] = alpha * x
        else:
            view[...] = alpha * x + beta * view


def _resolve_relabel(relabel, jobs, n) -> list[np.ndarray]:
    if relabel is None:
        sigmas = [list(range(n))] * len(jobs)
    elif isinstance(relabel, Relabeling) or (
            len(relabel) and not isinstance(relabel[0], (Relabeling, list, tuple, np.ndarray))):
        s = relabel.sigma if isinstance(relabel, Relabeling) else relabel
        sigmas = [s] * len(jobs)
    else:
        if len(relabel) != len(jobs):
            raise ValueError("need one relabeling per job")
        sigmas = [r.sigma if isinstance(r, Relabeling) else r for r in relabel]
    return [check_permutation(s, n) for s in sigmas]


def _prepare_buffers(plans: list[_Plan], procs: list[ProcessState]) -> None:
    seen = set()
    for pl in plans:
        job = pl.job
        if job.dst_buffer in seen:
            raise ValueError(f"destination buffer {job.dst_buffer!r} written by two jobs")
        seen.add(job.dst_buffer)
    srcs = {pl.job.src_buffer for pl in plans}
    if srcs & seen:
        raise ValueError("a batched job reads a buffer another job writes")
    for pl in plans:
        job = pl.job
        dtype = None
        for rank in range(pl.src.n_procs):
            if len(pl.src.blocks_of(rank)) == 0:
                continue
            buf = procs[rank].buffers.get(job.src_buffer)
            if buf is None or len(buf) < pl.src.local_size(rank):
                raise LayoutError(f"process {rank}: buffer {job.src_buffer!r} missing or too small")
            dtype = buf.dtype
        _check_itemsize(pl.src, dtype)
        _check_scalars(job, dtype)
        for p in procs:
            need = pl.dst.local_size(p.rank)
            buf = p.buffers.get(job.dst_buffer)
            if buf is None:
                if job.beta != 0 and need > 0:
                    raise LayoutError(
                        f"process {p.rank}: beta != 0 but destination buffer "
                        f"{job.dst_buffer!r} is uninitialized")
                p.buffers[job.dst_buffer] = np.zeros(need, dtype=dtype)
            elif len(buf) < need or buf.dtype != dtype:
                raise LayoutError(
                    f"process {p.rank}: destination buffer {job.dst_buffer!r} does not match "
                    f"its layout ({len(buf)} {buf.dtype}, need {need} {dtype})")


def execute_batched(jobs: Sequence[TransformJob], relabel=None, procs: list[ProcessState] = None,
                    *, model: CostModel | None = None,
                    delivery_seed: int | None = None) -> ExchangeReport:
    """Run several jobs in one communication round.

    Parameters
    ----------
    jobs : sequence of TransformJob
    relabel : Relabeling, permutation, sequence of those, or None
        A single relabeling is shared by all jobs; a sequence gives one per
        job.  Destination buffers are read and written under the relabeled
        destination layout (``job.effective_dst(sigma)``).
    procs : list of ProcessState
        One per process, ranks ``0 .. n_procs - 1``.
    model : CostModel, optional
        Model for ``ExchangeReport.predicted_cost`` (locally-free default).
    delivery_seed : int, optional
        Shuffle message delivery with this seed instead of delivering in
        ``(sender, receiver)`` order.

    Returns
    -------
    ExchangeReport
        At most one message per ``(sender, receiver)`` pair.
    """
    if not jobs:
        raise ValueError("no jobs")
    n = _common_n_procs(jobs)
    if procs is None or len(procs) != n or any(p.rank != r for r, p in enumerate(procs)):
        raise LayoutError(f"need exactly {n} processes with ranks 0..{n - 1}")
    sigmas = _resolve_relabel(relabel, jobs, n)
    plans = [_Plan(job, s, n) for job, s in zip(jobs, sigmas)]
    _prepare_buffers(plans, procs)

    report = ExchangeReport(n, relabelings=[tuple(int(x) for x in s) for s in sigmas])
    model = model or CostModel.locally_free()
    report.predicted_cost = sum(relabeled_cost(model, CommGraph.from_packages(pl.ps), pl.sigma)
                                for pl in plans)

    # Route every block: sender i -> relabeled receiver sigma[j].
    outgoing: dict[tuple[int, int], list[tuple[int, int]]] = {}
    local: list[tuple[int, int]] = []
    for k, pl in enumerate(plans):
        for (i, j), flats in pl.ps.index_groups.items():
            r = int(pl.sigma[j])
            if r == i:
                local.extend((k, int(f)) for f in flats)
            else:
                outgoing.setdefault((i, r), []).extend((k, int(f)) for f in flats)

    # Pack: one contiguous payload per (sender, receiver).
    mailbox: list[Message] = []
    for p in procs:
        p.send_staging.clear()
        p.recv_staging.clear()
    for (i, r) in sorted(outgoing):
        entries = sorted(outgoing[(i, r)])
        headers, chunks, offset = [], [], 0
        for k, flat in entries:
            data = np.ascontiguousarray(plans[k].read(procs, flat)).tobytes()
            headers.append(BlockHeader(k, flat, offset, len(data)))
            chunks.append(data)
            offset += len(data)
        msg = Message(i, r, headers, b"".join(chunks))
        procs[i].send_staging.append(msg)
        mailbox.append(msg)
        report.messages[(i, r)] = 1
        report.pair_bytes[(i, r)] = len(msg.payload)

    # Local blocks: no staging, transform straight from the source buffer.
    for k, flat in local:
        pl = plans[k]
        data = pl.read(procs, flat)
        report.local_bytes += data.size * data.itemsize
        pl.write(procs, flat, data)

    if delivery_seed is not None:
        order = np.random.default_rng(delivery_seed).permutation(len(mailbox))
        mailbox = [mailbox[t] for t in order]
    for msg in mailbox:
        procs[msg.receiver].recv_staging.append(msg)
        for h in msg.headers:
            pl = plans[h.job]
            _, _, _, _, shape = pl.src_region(h.flat)
            dtype = procs[msg.receiver].buffers[pl.job.dst_buffer].dtype
            data = np.frombuffer(msg.payload, dtype=dtype, count=shape[0] * shape[1],
                                 offset=h.offset).reshape(shape)
            pl.write(procs, h.flat, data)
    for p in procs:
        p.send_staging.clear()
        p.recv_staging.clear()
    return report


def execute(job: TransformJob, relabel=None, procs: list[ProcessState] = None, *,
            model: CostModel | None = None, delivery_seed: int | None = None) -> ExchangeReport:
    """Run a single job; see :func:`execute_batched`."""
    return execute_batched([job], relabel, procs, model=model, delivery_seed=delivery_seed)
