"""The twelve acceptance criteria at their stated sizes, tolerances and runtimes."""

import itertools
import time

import numpy as np
import pytest

from shadowlab.harness import load_config, report_json, run_experiment
from shadowlab.methods import RandomBounded
from shadowlab.shadowing import hyperbolic_trace, trace_residual
from shadowlab.space import circle, dist, pairwise_dist, torus
from shadowlab.systems import CATALOG, Rotation, ToralAutomorphism
from shadowlab.transport import dirac, empirical_measure, invariance_residual, pushforward, uniform_measure, w1

pytestmark = pytest.mark.slow

S1, T2 = circle(), torus(2)
REPORTS: dict[str, bytes] = {}


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def experiment(name):
    """Run ``name`` with its default config, keeping the report for the determinism check."""
    report, elapsed = timed(lambda: run_experiment(load_config(name, {}), timestamp=False)[0])
    REPORTS.setdefault(name, report_json(report).encode())
    return report, elapsed


def verdict_line(report):
    return " ".join(f"{v['id']}={v['status']}" for v in report["verdicts"])


def test_ac01_w1_brute_force(record_criterion):
    rng = np.random.default_rng(1)

    def run():
        worst = 0.0
        for i in range(500):
            space = (S1, T2)[i % 2]
            n = int(rng.integers(1, 8))
            a, b = rng.random((n, space.dim)), rng.random((n, space.dim))
            C = pairwise_dist(space, a, b)
            brute = min(C[np.arange(n), list(p)].sum() for p in itertools.permutations(range(n))) / n
            worst = max(worst, abs(w1(uniform_measure(space, a), uniform_measure(space, b)) - brute))
        return worst

    worst, elapsed = timed(run)
    ok = worst <= 1e-9 and elapsed < 30
    record_criterion("AC01", ok, f"w1 vs n! brute force on 500 pairs: max err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_ac02_metric_axioms(record_criterion):
    rng = np.random.default_rng(2)

    def run():
        sym = tri = 0.0
        for i in range(1000):
            space = (S1, T2)[i % 2]
            mu, nu, la = (uniform_measure(space, rng.random((int(rng.integers(1, 7)), space.dim))) for _ in range(3))
            ab, ba = w1(mu, nu), w1(nu, mu)
            sym = max(sym, abs(ab - ba))
            tri = max(tri, w1(mu, la) - ab - w1(nu, la))
            assert w1(mu, mu) == 0.0 and ab >= 0
            p, q, r = rng.random((3, space.dim))
            dpq = dist(space, p, q)
            sym = max(sym, abs(dpq - dist(space, q, p)))
            tri = max(tri, dist(space, p, r) - dpq - dist(space, q, r))
            assert dist(space, p, p) == 0.0 and 0 <= dpq <= space.diameter + 1e-15
        return sym, tri

    (sym, tri), elapsed = timed(run)
    ok = sym <= 1e-12 and tri <= 1e-9 and elapsed < 10
    record_criterion("AC02", ok, f"1000 triples: symmetry {sym:.1e}, triangle excess {tri:.1e}, {elapsed:.1f}s")
    assert ok


def test_ac03_dirac_pushforward(record_criterion):
    rng = np.random.default_rng(3)
    failures = 0
    for name, cls in CATALOG.items():
        f = cls()
        lo = np.array([b[0] for b in f.space.bounds]) if f.space.bounds else np.zeros(f.space.dim)
        hi = np.array([b[1] for b in f.space.bounds]) if f.space.bounds else np.ones(f.space.dim)
        for p in lo + (hi - lo) * rng.random((100, f.space.dim)):
            image = pushforward(f, dirac(f.space, p))
            expect = dirac(f.space, f.eval(p))
            failures += not (np.array_equal(image.atoms, expect.atoms) and image.weights.tolist() == [1.0])
    record_criterion("AC03", failures == 0, f"f#delta(x) == delta(f(x)) for {len(CATALOG)} maps x 100 points, {failures} failures")
    assert failures == 0


def test_ac04_hyperbolic_tracer(record_criterion):
    f = ToralAutomorphism()
    d, horizon = 1e-3, 200
    C = f.hyperbolic_data.constant
    lam_u = max(abs(np.linalg.eigvals(f.matrix)))
    assert C == pytest.approx(1 / (1 - 1 / lam_u) + 1 / (lam_u - 1))
    rng = np.random.default_rng(4)

    def run():
        res = sup = 0.0
        for seed in range(16):
            x_traj = f.orbit(rng.random(2), 0, horizon)
            y = hyperbolic_trace(f, RandomBounded(f, d, seed), x_traj, (0, horizon))
            res = max(res, trace_residual(RandomBounded(f, d, seed), y))
            sup = max(sup, y.sup_distance(x_traj, 0, horizon))
        return res, sup

    (res, sup), elapsed = timed(run)
    ok = res <= 1e-10 and sup <= C * d and elapsed < 20
    record_criterion("AC04", ok, f"16 seeds: residual {res:.1e}, sup {sup:.2e} <= C*d {C * d:.2e}, {elapsed:.1f}s")
    assert ok


def test_ac05_eis_certificate(record_criterion):
    report, elapsed = experiment("hyperbolic_eis")
    r = report["results"]
    ok = report["all_pass"] and r["n_samples"] == 16 and elapsed < 60
    record_criterion("AC05", ok, f"max gap {r['max_eis_gap']:.2e} at eps 0.05, {verdict_line(report)}, {elapsed:.1f}s")
    assert ok


def test_ac06_escape_law(record_criterion):
    report, elapsed = experiment("escape")
    exits = [lv["mean_exit_time"] for lv in report["results"]["levels"]]
    ok = report["all_pass"] and elapsed < 10
    record_criterion("AC06", ok, f"mean exit times {exits}, {verdict_line(report)}, {elapsed:.1f}s")
    assert ok


def test_ac07_invariance_telescoping(record_criterion):
    rng = np.random.default_rng(7)

    def run():
        worst = -np.inf
        for f in (Rotation(), ToralAutomorphism()):
            for N in (100, 1000, 10000):
                mu = empirical_measure(f.orbit(rng.random(f.space.dim), 0, N), 0, N)
                worst = max(worst, invariance_residual(f, mu, max_atoms=N) - f.space.diameter / N)
        return worst

    worst, elapsed = timed(run)
    ok = worst <= 0 and elapsed < 30
    record_criterion("AC07", ok, f"max residual - diam/N = {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_ac08_weak_continuity(record_criterion):
    report, elapsed = experiment("weak_continuity")
    gap = report["results"]["inclusion_gap"]
    ok = report["all_pass"] and elapsed < 300
    record_criterion("AC08", ok, f"inclusion gap {gap:.4f} <= 0.05, {elapsed:.1f}s")
    assert ok


def test_ac09_usc_ladder(record_criterion):
    report, elapsed = experiment("usc")
    gaps = [round(g, 4) for g in report["results"]["gaps"]]
    ok = report["all_pass"] and elapsed < 300
    record_criterion("AC09", ok, f"gaps down the ladder {gaps}, {verdict_line(report)}, {elapsed:.1f}s")
    assert ok


def test_ac10_fixed_segment(record_criterion):
    report, elapsed = experiment("fixed_segment")
    ok = report["all_pass"] and elapsed < 60
    record_criterion("AC10", ok, f"{verdict_line(report)}, {elapsed:.1f}s")
    assert ok


def test_ac11_poisson(record_criterion):
    report, elapsed = experiment("poisson")
    times = sorted({w["time"] for w in report["results"]["witnesses"] if w})
    ok = report["all_pass"] and elapsed < 30
    record_criterion("AC11", ok, f"return times {times}, {verdict_line(report)}, {elapsed:.1f}s")
    assert ok


def test_ac12_determinism(record_criterion):
    names = ["hyperbolic_eis", "weak_continuity", "usc", "escape", "fixed_segment", "poisson"]
    same = []
    for name in names:
        if name not in REPORTS:
            experiment(name)
        again = report_json(run_experiment(load_config(name, {}), timestamp=False)[0]).encode()
        same.append(again == REPORTS[name])
    ok = all(same)
    record_criterion("AC12", ok, f"byte-identical reports: {dict(zip(names, same))}")
    assert ok
