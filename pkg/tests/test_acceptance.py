"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime limits are the contract values.  Criteria that the
implementation cannot meet are left failing; see the decision ledger.
"""

import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from idemconc import constants as C
from idemconc.construct import WeylRecipe, build_simple, build_weyl, weyl_theta_l2
from idemconc.kernel import FrequencySet, dirichlet_magnitude
from idemconc.quadrature import IntervalUnion, concentration_ratio, norm_p_period
from idemconc.search import SearchConfig, run_search, tie_tolerance

GOLDEN = (math.sqrt(5) - 1) / 2


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


def test_c01_gamma2(report):
    t0 = time.perf_counter()
    g = C.gamma2()
    dt = time.perf_counter() - t0
    report("1 gamma2", abs(g - 0.4802) <= 5e-4 and dt < 1.0, f"gamma2={g:.10f} in {dt:.3f}s")


def test_c02_delta(report):
    d2, d4 = C.delta_p(2), C.delta_p(4)
    ok = abs(d2 - 1) <= 1e-8 and abs(d4 - 2 / 3) <= 1e-6
    report("2 delta_p", ok, f"delta_2-1={d2 - 1:.2e}, delta_4-2/3={d4 - 2 / 3:.2e}")


def test_c03_cp_star(report):
    vals = [C.c_p_star(p).value for p in (2, 5, 10, 40)]
    v100 = C.c_p_star(100).value
    gap = abs(vals[0] - C.gamma2())
    ok = gap <= 1e-6 and all(a < b for a, b in zip(vals, vals[1:])) and v100 > 0.9
    detail = f"|c2*-gamma2|={gap:.1e}, p=2,5,10,40 -> {[round(v, 5) for v in vals]}, p=100 -> {v100:.5f}"
    report("3 c_p_star", ok, detail)


def test_c04_giratio_and_cp(report):
    g = C.giratio_bound(0.34, 2)
    c50 = C.c_p_lower(50).value
    ok = 0.125 <= g <= 0.135 and c50 > 0.4
    report("4 giratio(0.34,2) in [0.125,0.135], c_50>0.4", ok, f"giratio={g:.6f}, c_50={c50:.5f}")


def test_c05_parseval(report):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(1, 200))
        s = np.unique(np.concatenate([[0], rng.integers(0, 4097, size)]))
        got = norm_p_period(FrequencySet.from_array(s), 2.0, exact=False)
        worst = max(worst, abs(got - s.size) / s.size)
    dt = time.perf_counter() - t0
    report("5 Parseval suite", worst <= 1e-8 and dt < 30, f"max rel err={worst:.2e} in {dt:.1f}s")


def test_c06_exact_identity(report):
    s = build_simple(5, 5, 2)
    exact = norm_p_period(s, 2.0)
    quad = norm_p_period(s, 2.0, exact=False)
    ok = abs(exact - 50) <= 1e-8 * 50 and abs(quad - 50) <= 1e-8 * 50
    report("6 exact L2 identity", ok, f"exact={exact!r}, quadrature={quad!r}")


def test_c07_dirichlet_asymptotics(report):
    t0 = time.perf_counter()
    ok, parts = True, []
    for p in (1.5, 2.5, 4.0):
        d = C.delta_p(p)
        dev = [abs(norm_p_period(FrequencySet.block(n), p) / (d * n ** (p - 1)) - 1) for n in (64, 128, 256, 512)]
        ok &= all(a > b for a, b in zip(dev, dev[1:])) and dev[-1] < 0.05
        parts.append(f"p={p}: " + ", ".join(f"{v:.2e}" for v in dev))
    dt = time.perf_counter() - t0
    report("7 Dirichlet L^p asymptotics", ok and dt < 60, "; ".join(parts) + f" in {dt:.1f}s")


def test_c08_l2_inequality(report):
    omega, n = 0.25, 50
    xs = np.random.default_rng(8).random(100)
    t0 = time.perf_counter()
    margin = min(
        weyl_theta_l2(GOLDEN, omega, n, x)
        - (math.sin(math.pi * omega) / math.pi) ** 2 * dirichlet_magnitude(n, x - GOLDEN) ** 2
        for x in xs
    )
    dt = time.perf_counter() - t0
    report("8 theta-averaged L2 inequality", margin >= -1e-9 and dt < 10, f"min(LHS-RHS)={margin:.4f} in {dt:.2f}s")


def test_c09_weyl_cardinality(report):
    n = 10**5
    dens = [len(build_weyl(WeylRecipe(GOLDEN, 0.3, n, th))) / n for th in (0.0, 0.37)]
    ok = all(abs(d - 0.3) <= 0.01 for d in dens)
    report("9 Weyl cardinality", ok, f"|S|/N at theta=0, 0.37: {dens}")


def test_c10_construction_trend(report):
    t0 = time.perf_counter()
    ratios = []
    for q in (101, 401, 1009):
        s = build_simple(q, q, round(0.34 * q))
        j = IntervalUnion.arc(Fraction(1, q), Fraction(1, q * q))
        ratios.append(concentration_ratio(s, j, 2.0).ratio)
    dt = time.perf_counter() - t0
    ok = all(a <= b for a, b in zip(ratios, ratios[1:])) and ratios[-1] >= 0.12 and dt < 120
    report("10 construction trend", ok, f"q=101,401,1009 -> {[round(r, 6) for r in ratios]} in {dt:.1f}s")


def test_c11a_table_q6(report):
    t0 = time.perf_counter()
    rep = run_search(SearchConfig(q=6, n=13, m=37, p=1.0, tol=1e-7))
    dt = time.perf_counter() - t0
    want = (0, 1, 5, 6, 7, 12)
    ok = rep.best.freqs == want and abs(rep.c_estimate - 0.98) <= 0.02 and dt < 300
    detail = (f"best={list(rep.best.freqs)} ({rep.best_ratio:.7f}), best special={list(rep.best_special.freqs)} "
              f"({rep.best_special_ratio:.7f}), c={rep.c_estimate:.6f} in {dt:.1f}s")
    report("11 table row q=6", ok, detail)


@pytest.mark.parametrize("q,n_max", [(2, 14), (3, 15)])
def test_c11b_table_c_equals_one(report, q, n_max):
    off = []
    for n in range(3, n_max + 1):
        rep = run_search(SearchConfig(q=q, n=n))
        if rep.c_estimate != 1.0:
            off.append(f"n={n}: c={rep.c_estimate:.6f} best={list(rep.best.freqs)}")
    detail = "c=1 for every n" if not off else "; ".join(off)
    report(f"11 table row q={q} (n<={n_max}, m=q^2+1)", not off, detail)


def test_c12_oracle_equivalence(report):
    cfg = SearchConfig(q=3, n=10, tol=1e-10)
    t0 = time.perf_counter()
    rep = run_search(cfg)
    scored = []
    for r in range(cfg.n):
        for combo in itertools.combinations(range(1, cfg.n), r):
            s = (0,) + combo
            scored.append((s, concentration_ratio(FrequencySet(s), cfg.target, cfg.p, 1e-12).ratio))
    top = max(r for _, r in scored)
    best, ratio = min((s, r) for s, r in scored if r >= top * (1 - tie_tolerance(cfg)))
    dt = time.perf_counter() - t0
    ok = rep.best.freqs == best and abs(rep.best_ratio - ratio) <= 1e-9 and dt < 60
    detail = f"search {list(rep.best.freqs)} {rep.best_ratio:.12f}, oracle {list(best)} {ratio:.12f} in {dt:.1f}s"
    report("12 oracle equivalence", ok, detail)


def test_c13_determinism(report):
    cfg = SearchConfig(q=3, n=16)
    one = json.dumps(run_search(cfg, threads=1).to_dict(), sort_keys=True)
    eight = json.dumps(run_search(cfg, threads=8).to_dict(), sort_keys=True)
    report("13 determinism 1 vs 8 workers", one == eight, f"{len(one)} bytes, identical={one == eight}")
