"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from hemilearn.bench import random_grid_log, replay
from hemilearn.instances import (
    YELP_M1,
    YELP_M2,
    gen_attribute_instance,
    gen_clustered,
    gen_quantized_clustered,
    gen_synthetic_restaurants,
    subsample,
    uniform_instance,
)
from hemilearn.learner import (
    LearnerOptions,
    SideInformation,
    extend_online,
    ind_greedy,
    ind_greedy_sit,
    learn_hm,
    predicted_bounds,
    start_online,
)
from hemilearn.projection import brute_force_bounds, certificate_check
from hemilearn.response import GAUSSIAN, NoiseModel, UserOracle, compute_gamma

TOL = 1e-9


class ValidityMonitor:
    """Checks ``L <= D* <= U`` after every learner iteration."""

    def __init__(self, truth):
        self.D = truth.entries
        self.ok = True
        self.steps = 0

    def __call__(self, t, bounds):
        self.steps += 1
        if self.ok and not bounds.contains(self.D, TOL):
            self.ok = False


def run(fn, D, *args, **opt_kwargs):
    mon = ValidityMonitor(D)
    if "quantization" not in opt_kwargs:
        opt_kwargs.setdefault("epsilon", 0.01)
    opts = LearnerOptions(**opt_kwargs)
    D_hat, stats = fn(UserOracle(D), *args, opts=opts, monitor=mon)
    return {
        "queries": stats.user_queries,
        "valid": mon.ok,
        "err": D.linf(D_hat),
        "eps": opts.epsilon,
        "D_hat": D_hat,
    }


# -- cached criterion runs (criterion 6 reuses all of them) ---------------------

@lru_cache(maxsize=None)
def c1_runs():
    out = []
    for seed in range(3):
        D, _ = gen_clustered(10, 3, 1.0, 0.1, seed)
        out.append(run(ind_greedy, D))
    out.append(run(ind_greedy, uniform_instance(10, 0.5)))
    return out


@lru_cache(maxsize=None)
def c2_runs():
    out = []
    for n in (10, 30):
        D = uniform_instance(n, 0.5)
        out.append((n, run(learn_hm, D), run(ind_greedy, D)))
    return out


@lru_cache(maxsize=None)
def c3_runs():
    out = []
    for seed in range(10):
        D, _ = gen_quantized_clustered(50, 5, 1.0, 1 / 64, seed)
        res = run(learn_hm, D, quantization=1 / 64)
        res["exact"] = bool(np.array_equal(res["D_hat"].entries, D.entries))
        out.append(res)
    return out


@lru_cache(maxsize=None)
def c4_runs():
    out = []
    for seed in range(5):
        D, _ = gen_clustered(100, 5, 1.0, 0.1, seed)
        out.append(run(learn_hm, D))
    return out


@lru_cache(maxsize=None)
def c5_runs():
    grid = 1 / 8
    results = []
    for t in range(200):
        rng = np.random.default_rng([2024, t])
        n = (3, 4, 5)[t % 3]
        D, data = random_grid_log(rng, n, grid)
        state = {"cert": True, "valid": True}

        def step(Lt, Ut, L, U):
            state["cert"] &= certificate_check(Lt, Ut, L, U, 1.0).passed
            state["valid"] &= bool(np.all(L <= D + TOL) and np.all(D <= U + TOL))

        B = replay(data, n, 1.0, on_step=step)
        L_min, U_max = brute_force_bounds(data, n, 1.0, grid)
        inside = bool(np.all(L_min >= B.lower - TOL) and np.all(U_max <= B.upper + TOL))
        within = bool(np.all(L_min - B.lower <= grid + TOL) and np.all(B.upper - U_max <= grid + TOL))
        results.append({**state, "sandwich": inside and within})
    return results


# -- criteria -------------------------------------------------------------------

def test_criterion_1_indgreedy_exact_count(criterion_report):
    t0 = time.perf_counter()
    runs = c1_runs()
    elapsed = (time.perf_counter() - t0) / len(runs)
    counts = [r["queries"] for r in runs]
    ok = all(c == 630 for c in counts) and elapsed < 1.0
    criterion_report(1, ok, f"counts={counts}, expected 630 each, {elapsed:.2f}s per run")
    assert ok


def test_criterion_2_hardest_instance_equality(criterion_report):
    t0 = time.perf_counter()
    runs = c2_runs()
    elapsed = time.perf_counter() - t0
    pairs = [(n, a["queries"], b["queries"]) for n, a, b in runs]
    ok = all(a == b for _, a, b in pairs) and elapsed < 5
    criterion_report(2, ok, f"(n, learnhm, indgreedy)={pairs}, {elapsed:.2f}s")
    assert ok


def test_criterion_3_quantized_exact_recovery(criterion_report):
    t0 = time.perf_counter()
    runs = c3_runs()
    elapsed = time.perf_counter() - t0
    bound = predicted_bounds(50, 5, 1.0, quantum=1 / 64)
    worst = max(r["queries"] for r in runs)
    ok = bound == 3000 and worst <= bound and all(r["exact"] for r in runs) and elapsed < 10
    criterion_report(3, ok, f"max queries {worst} <= {bound}, exact on all 10 seeds: "
                            f"{all(r['exact'] for r in runs)}, {elapsed:.2f}s")
    assert ok


def test_criterion_4_clustered_bound(criterion_report):
    t0 = time.perf_counter()
    runs = c4_runs()
    elapsed = time.perf_counter() - t0
    bound = predicted_bounds(100, 5, 1.0, eps=0.01, r_in=0.1)
    counts = [r["queries"] for r in runs]
    ok = bound == 57000 and max(counts) <= bound and elapsed < 60
    criterion_report(4, ok, f"counts={counts} <= {bound}, {elapsed:.2f}s")
    assert ok


def test_criterion_5_projection_optimality(criterion_report):
    t0 = time.perf_counter()
    res = c5_runs()
    elapsed = time.perf_counter() - t0
    cert = sum(r["cert"] for r in res)
    sand = sum(r["sandwich"] for r in res)
    ok = cert == sand == len(res) and elapsed < 300
    criterion_report(5, ok, f"certificate {cert}/{len(res)}, grid sandwich {sand}/{len(res)}, {elapsed:.1f}s")
    assert ok


def test_criterion_6_validity_invariant(criterion_report):
    runs = list(c1_runs()) + [r for _, a, b in c2_runs() for r in (a, b)] + list(c3_runs()) + list(c4_runs())
    valid = all(r["valid"] for r in runs)
    precise = all(r["err"] <= r["eps"] + TOL for r in runs)
    proj_valid = all(r["valid"] for r in c5_runs())
    ok = valid and precise and proj_valid
    worst = max(r["err"] - r["eps"] for r in runs)
    criterion_report(6, ok, f"{len(runs)} learner runs bracket D* every iteration: {valid}; "
                            f"final error within eps: {precise} (max err-eps {worst:.2e}); "
                            f"projection replays bracket D*: {proj_valid}")
    assert ok


def test_criterion_7_attribute_models(criterion_report):
    t0 = time.perf_counter()
    items = subsample(gen_synthetic_restaurants(0), 100, seed=0)
    ratios, sit_total, m1_learn = {}, None, None
    for name, w in (("M1", YELP_M1), ("M2", YELP_M2)):
        D = gen_attribute_instance(items, w, 1.0, seed=0)
        a = run(learn_hm, D)["queries"]
        b = run(ind_greedy, D)["queries"]
        ratios[name] = a / b
        if name == "M1":
            m1_learn = a
            sit_total = run(ind_greedy_sit, D, SideInformation(D))["queries"]
    elapsed = time.perf_counter() - t0
    ok = ratios["M1"] <= 0.3 and ratios["M2"] <= 0.7 and sit_total > m1_learn and elapsed < 300
    criterion_report(7, ok, f"M1 ratio {ratios['M1']:.3f} (<=0.3), M2 ratio {ratios['M2']:.3f} (<=0.7), "
                            f"SIT total {sit_total} > LearnHM {m1_learn}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_8_noisy_pac(criterion_report):
    t0 = time.perf_counter()
    n, eps, delta, sigma = 20, 0.05, 0.1, 0.05
    bound = predicted_bounds(n, 5, 1.0, eps=eps, r_in=0.1, delta=delta, sigma_max=sigma)
    opts = LearnerOptions(epsilon=eps, delta=delta, noise_handling="unbounded-robust")
    failures, worst = 0, 0
    for seed in range(20):
        D, _ = gen_clustered(n, 5, 1.0, 0.1, seed)
        oracle = UserOracle(D, NoiseModel(GAUSSIAN, sigma), seed=seed)
        D_hat, stats = learn_hm(oracle, opts=opts)
        failures += D.linf(D_hat) > eps
        worst = max(worst, stats.user_queries)
    elapsed = time.perf_counter() - t0
    _, gamma = compute_gamma(n, delta, sigma, eps)
    ok = failures <= 4 and worst <= bound and elapsed < 1800
    criterion_report(8, ok, f"{failures}/20 runs beyond eps (<=4), max queries {worst} <= "
                            f"bound {bound:.0f} (gamma {gamma:.1f}), {elapsed:.0f}s")
    assert ok


def test_criterion_9_online_equivalence(criterion_report):
    t0 = time.perf_counter()
    D, _ = gen_clustered(10, 3, 1.0, 0.1, seed=9)
    opts = LearnerOptions(epsilon=0.01)
    state = start_online(UserOracle(D), 0, opts=opts)
    for item in range(1, 10):
        state = extend_online(state, item)
    _, batch = learn_hm(UserOracle(D), opts=opts)
    elapsed = time.perf_counter() - t0
    ok = state.stats.user_queries == batch.user_queries and elapsed < 5
    criterion_report(9, ok, f"online {state.stats.user_queries} vs batch {batch.user_queries}, {elapsed:.2f}s")
    assert ok


@pytest.mark.slow
def test_criterion_10_speedup_scaling(criterion_report):
    t0 = time.perf_counter()
    times, within = {}, True
    for n in (100, 200):
        D, _ = gen_clustered(n, 5, 1.0, 0.1, seed=0)
        best = np.inf
        for _ in range(2):
            s = time.perf_counter()
            _, stats = learn_hm(UserOracle(D), opts=LearnerOptions(epsilon=0.01))
            best = min(best, time.perf_counter() - s)
        times[n] = best
        within &= stats.user_queries <= predicted_bounds(n, 5, 1.0, eps=0.01, r_in=0.1)
    ratio = times[200] / times[100]
    elapsed = time.perf_counter() - t0
    ok = ratio <= 10 and within and all(r["queries"] <= 57000 for r in c4_runs()) and elapsed < 600
    criterion_report(10, ok, f"time ratio {ratio:.2f} (<=10), counts within clustered bound: {within}, "
                             f"{elapsed:.1f}s")
    assert ok
