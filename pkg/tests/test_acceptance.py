"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import io
import time
from contextlib import contextmanager

import numpy as np
import pytest

from matshuffle.cli import main
from matshuffle.copr import find_copr, solve_lap_bruteforce, solve_lap_exact, solve_lap_greedy
from matshuffle.cost import CommGraph, CostModel, gain_matrix, relabeled_cost, total_cost, total_gain
from matshuffle.engine import TransformJob, predict_cost
from matshuffle.layout import make_block_cyclic
from matshuffle.overlay import build_package_set
from matshuffle.sweep import CyclicSpec, cyclic_volume_matrix, volume_sweep
from cases import OPS, SCALARS, make_jobs, random_case, run_jobs
from oracles import brute_force_assignment, cyclic_element_volumes

pytestmark = pytest.mark.acceptance

SWEEP_BLOCKS = [1, 2, 4, 5, 8, 10, 20, 25, 50, 100]


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def check(name, limit=None):
        t0 = time.perf_counter()
        status, detail = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - t0
            if limit is not None and elapsed >= limit:
                detail = f"{elapsed:.2f} s exceeds {limit} s"
                raise AssertionError(f"{name}: {detail}")
            status, detail = "PASS", f"{elapsed:.2f} s"
        except Exception as exc:
            detail = detail or f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
            raise
        finally:
            with capsys.disabled():
                print(f"\n[{status}] {name} ({detail})")
    return check


def _random_model(rng, n):
    kind = int(rng.integers(3))
    if kind == 0:
        return CostModel.locally_free()
    if kind == 1:
        return CostModel.latency_bandwidth(rng.integers(0, 100, (n, n)), rng.integers(0, 10, (n, n)))
    return CostModel.transform_aware(int(rng.integers(0, 5)))


def test_lemma_gain_identity(criterion):
    with criterion("Gain identity: 1000 instances, exact equality", limit=10):
        rng = np.random.default_rng(20240601)
        for _ in range(1000):
            n = int(rng.integers(1, 17))
            v = rng.integers(0, 10**6 + 1, size=(n, n)) * (rng.random((n, n)) < 0.6)
            t = rng.integers(0, 10**6 + 1, size=(n, n)) * (v > 0) * (rng.random() < 0.5)
            g = CommGraph.from_volumes(v, np.minimum(t, v))
            model = _random_model(rng, n)
            sigma = rng.permutation(n)
            gain = total_gain(gain_matrix(model, g), sigma)
            assert gain == total_cost(model, g) - relabeled_cost(model, g, sigma)


def test_lap_optimality(criterion):
    with criterion("LAP optimality: 500 matrices, exact = brute, greedy bounds", limit=30):
        rng = np.random.default_rng(7)
        n_nonneg = 0
        for k in range(500):
            n = int(rng.integers(1, 8))
            d = rng.integers(-50, 51, size=(n, n))
            if k % 3 == 0:
                d = np.abs(d)
            np.fill_diagonal(d, 0)  # gain matrices vanish on the diagonal
            best = brute_force_assignment(d)
            assert solve_lap_exact(d).total_gain == best
            assert solve_lap_bruteforce(d).total_gain == best
            greedy = solve_lap_greedy(d).total_gain
            assert greedy >= 0
            if d.min() >= 0:
                n_nonneg += 1
                assert 2 * greedy >= best
            # exact also on unconstrained matrices
            raw = rng.integers(-50, 51, size=(n, n))
            assert solve_lap_exact(raw).total_gain == brute_force_assignment(raw)
        assert n_nonneg >= 150


def test_shuffle_correctness_and_relabeling(criterion):
    """Covers the correctness criterion and the relabeling-never-hurts criterion."""
    solvers = ("greedy", "exact", "brute")
    stats = {"runs": 0, "relabeled": 0}
    hurt = []
    with criterion("Shuffle correctness: 200 layout pairs, exact results", limit=60):
        for k in range(200):
            rng = np.random.default_rng(1000 + k)
            dtype = ("int64", "float64")[k % 2]
            scalars = (SCALARS[k % 4], SCALARS[(k // 4) % 4])
            src, dst, op, alpha, beta = random_case(rng, 64, 8, dtype, OPS[k % 3], scalars)
            for batched in (False, True):
                jobs = make_jobs(src, dst, op, alpha, beta, 3 if batched else 1)
                remote = {}
                for relabel in (None, solvers[k % 3]):
                    res, exp, reps, _ = run_jobs(rng, jobs, dtype, relabel, batched)
                    for r, e in zip(res, exp):
                        assert r.dtype == e.dtype
                        np.testing.assert_array_equal(r, e)
                    remote[relabel] = sum(rep.remote_bytes for rep in reps)
                    for rep in reps:
                        if rep.remote_bytes != rep.predicted_cost:
                            hurt.append((k, "remote bytes != W(G_sigma)"))
                    stats["runs"] += 1
                if remote[solvers[k % 3]] > remote[None]:
                    hurt.append((k, "relabeling increased traffic"))
                stats["relabeled"] += 1
    with criterion("Relabeling never hurts; remote bytes = W(G_sigma)"):
        assert stats["runs"] == 800
        assert not hurt, hurt[:5]


def test_sweep_endpoint(criterion):
    with criterion("Sweep endpoint: 10^3 matrix, 10x10 grid, 0 volume after relabel"):
        src = make_block_cyclic(1000, 1000, 100, 100, 10, 10, "row-major")
        dst = make_block_cyclic(1000, 1000, 100, 100, 10, 10, "col-major")
        job = TransformJob(src, dst)
        before = predict_cost(job)
        for solver in ("greedy", "exact"):
            r = find_copr(job.package_set(), solver=solver)
            assert predict_cost(job, relabel=r) == 0
        assert before > 0
        (row,) = volume_sweep(1000, 1000, 10, 10, 100, [100])
        assert row.volume_after == 0 and row.reduction_pct == 100.0


def test_volume_sweep_consistency(criterion):
    with criterion("Volume sweep at 10^3: analytic = materialized = element-wise", limit=60):
        m = n = 1000
        rows = volume_sweep(m, n, 10, 10, 100, SWEEP_BLOCKS)
        dst_spec = CyclicSpec(100, 10, 10, "col-major")
        dst = make_block_cyclic(m, n, 100, 100, 10, 10, "col-major")
        for row in rows:
            bs = row.block_size
            analytic = cyclic_volume_matrix(m, n, CyclicSpec(bs, 10, 10, "row-major"), dst_spec)
            src = make_block_cyclic(m, n, bs, bs, 10, 10, "row-major")
            np.testing.assert_array_equal(analytic, build_package_set(dst, src).volumes)
            np.testing.assert_array_equal(analytic, cyclic_element_volumes(m, n, bs, 100, 10, 10))
            assert row.volume_before == int(analytic.sum() - np.trace(analytic))
            assert 0.0 <= row.reduction_pct <= 100.0


def _cli(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    return code, out.getvalue()


def test_determinism(criterion, tmp_path):
    with criterion("Determinism: same seed, same CSV and sigma; delivery order irrelevant"):
        for seed in range(3):
            d = tmp_path / f"g{seed}"
            assert _cli("gen", d, "--seed", seed, "--procs", 8, "--m", 40, "--n", 30)[0] == 0
            files = (d / "layout_a.json", d / "layout_b.json")
            outs = []
            for t in range(2):
                code, text = _cli("run", *files, "--seed", seed, "--relabel", "--batch", 3,
                                  "--beta", 1, "--csv", tmp_path / f"r{t}.csv")
                assert code == 0
                outs.append(((tmp_path / f"r{t}.csv").read_bytes(), text))
            assert outs[0] == outs[1]

        for k in range(20):
            rng = np.random.default_rng(k)
            src, dst, op, alpha, beta = random_case(rng, 40, 8, ("int64", "float64")[k % 2])
            jobs = make_jobs(src, dst, op, alpha, beta, 3)
            dtype = ("int64", "float64")[k % 2]
            base = run_jobs(np.random.default_rng(k), jobs, dtype, "greedy")
            for delivery in range(3):
                other = run_jobs(np.random.default_rng(k), jobs, dtype, "greedy",
                                 delivery_seed=delivery)
                assert other[2][0].to_csv() == base[2][0].to_csv()
                for p, q in zip(base[3], other[3]):
                    assert p.buffers.keys() == q.buffers.keys()
                    for name in p.buffers:
                        assert p.buffers[name].tobytes() == q.buffers[name].tobytes()
