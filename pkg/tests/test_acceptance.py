"""Acceptance criteria. Each test records one PASS/FAIL line; the lines are printed
in the terminal summary (see conftest.py) and when this file is run as a script."""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from artifact import banach as bn
from artifact import classify as cl
from artifact import coding as cd
from artifact import mazur as mz
from artifact import reductions as rd
from artifact import relations as rl
from artifact import seqcore as sc

RESULTS: dict = {}


def record(key, ok, detail):
    RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def test_c1_type_ratio_l1_unit_basis():
    start = time.perf_counter()
    worst = max(abs(bn.type_ratio_exact(2, bn.unit_basis(1, n)) - math.sqrt(n)) for n in range(2, 11))
    elapsed = time.perf_counter() - start
    record("C1 type ratio of l1^n unit basis = sqrt(n)", worst <= 1e-12 and elapsed < 5,
           f"max error {worst:.2e}, {elapsed:.2f}s")


def test_c2_mazur_isometry_and_round_trip():
    rng = np.random.default_rng(2024)
    exps = [1, 1.5, 2, 2.5, 3]
    iso = rt = 0.0
    for _ in range(10 ** 4):
        p, q = rng.choice(exps), rng.choice(exps)
        v = rng.standard_normal(int(rng.integers(1, 65))) * rng.uniform(0.1, 10)
        w = mz.mazur(p, q, v)
        iso = max(iso, abs(bn.lp_norm(w, q) - bn.lp_norm(v, p)))
        rt = max(rt, bn.lp_norm(mz.mazur_inverse(p, q, w) - v, p))
    record("C2 Mazur isometry and round trip", iso < 1e-9 and rt < 1e-9,
           f"isometry error {iso:.2e}, round-trip error {rt:.2e}")


def _endpoints_exact():
    rng = np.random.default_rng(3)
    u, v, w = (rng.standard_normal(64) for _ in range(3))
    trip = (u, v, w)
    eq = lambda outs, want: all(mz.same(a, b) for a, b in zip(outs, want))
    rows = mz._triple_rows(u, v, w)
    # A_1/4 = J + J, so both branch formulas swap every consecutive pair of rows
    swapped = np.zeros((-(-len(rows) // 4) * 4, rows.shape[1]))
    swapped[:len(rows)] = rows
    swapped = swapped.reshape(-1, 2, rows.shape[1])[:, ::-1].reshape(swapped.shape)
    high = np.zeros((2 + -(-(len(rows) - 2) // 4) * 4, rows.shape[1]))
    high[:len(rows)] = rows
    high[:2] = mz.J2 @ high[:2]
    a = mz.block_A(0.25)
    high[2:] = np.einsum("ij,bjm->bim", a, high[2:].reshape(-1, 4, rows.shape[1])).reshape(len(high) - 2, -1)
    low = mz.apply_V_rows(0.25, rows)
    k = max(len(high), len(swapped), len(low))
    high, swapped, low = (np.vstack([m, np.zeros((k - len(m), m.shape[1]))]) for m in (high, swapped, low))
    checks = {
        "V_0": eq(mz.path_V(0, trip), trip),
        "V_1/4": np.array_equal(low, swapped) and np.array_equal(high, swapped),
        "V_1/2": eq(mz.path_V(0.5, trip), (u, w, v)),
        "h_0": eq(mz.path_h(0, 2.5, trip), (mz.interleave(u, v), w)),
        "h_1": eq(mz.path_h(1, 2.5, trip), (v, mz.interleave(u, w))),
    }
    return checks


def test_c3_operator_paths():
    checks = _endpoints_exact()
    sup = 0.0
    for tau in np.linspace(0, 0.5, 1000):
        for q in (1, 2, 3):
            sup = max(sup, mz.V_norm_sampled(tau, q, 64, samples=4, seed=0).sampled)
    ks = {}
    for q in (2.1, 2.5, 2.9):
        small = mz.h_lipschitz_estimate(q, samples=10 ** 3).K
        big = mz.h_lipschitz_estimate(q, samples=10 ** 4).K
        ks[q] = (small, big)
    stable = all(math.isfinite(b) and abs(b - a) <= 0.1 * a for a, b in ks.values())
    ok = all(checks.values()) and sup <= 2 + 1e-6 and stable
    detail = (f"endpoints {'exact' if all(checks.values()) else checks}, sampled sup {sup:.7f}, "
              + ", ".join(f"K(q={q}) {a:.3f}->{b:.3f}" for q, (a, b) in ks.items()))
    record("C3 operator paths V, h and the constant K", ok, detail)


def test_c4_seams():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        x = mz.random_element(2, 6, 4, rng)
        # with N = 6 both branches exist at alpha_1 .. alpha_4
        for n in range(1, 5):
            worst = max(worst, mz.seam_discrepancy(x, n))
    record("C4 g~ seam agreement at alpha_n, N=6", worst <= 1e-9, f"max discrepancy {worst:.2e}")


def test_c5_reduction_families():
    bad, caught = [], 0
    names = rd.reduction_names()
    for name in names:
        rep = rd.verify_reduction(name, 200, seed=7)
        if not rep.ok or rep.disagree:
            bad.append(name)
        for mut in (("value", 5), ("shift",)):
            if not rd.verify_reduction(name, 20, seed=7, mutation=mut).ok:
                caught += 1
    fams = {n.split("_")[0] if n.startswith(("thm62", "thm65")) else n for n in names}
    ok = not bad and caught == 2 * len(names) and fams == set(rd.FAMILIES)
    record("C5 reductions verify with zero disagreements, mutations caught", ok,
           f"{len(names)} maps over {len(fams)} families, failing {bad}, mutations caught {caught}/{2 * len(names)}")


def test_c6_classifier_canon():
    et = [sc.Constant(1), sc.Linear(1, 0), sc.ResidueInterleave((sc.Constant(0), sc.identity())),
          sc.FiberedByUnpairFirst(sc.identity())]
    eb = [rl.TwoPoint(sc.Constant(1)), rl.TwoPoint(sc.Geometric(1, 2)),
          rl.TwoPoint(sc.FiberedByUnpairFirst(sc.Geometric(1, 2))), rl.ArithmeticGrid(sc.Constant(1), sc.identity())]
    got_et = [cl.classify_Et(t) for t in et]
    got_eb = [cl.classify_EB(B) for B in eb]
    certs = all(cl.check_certificate(d, c) for d, c in zip(et + eb, got_et + got_eb))
    ok = ([c.cls for c in got_et] == [cl.SMOOTH, cl.E0_CLASS, cl.E0_CLASS, cl.E1_CLASS]
          and [c.cls for c in got_eb] == [cl.SMOOTH, cl.E0_CLASS, cl.E1_CLASS, cl.LINF_CLASS] and certs)
    record("C6 classifier canon", ok,
           f"Et {[c.cls for c in got_et]}, EB {[c.cls for c in got_eb]}, certificates {'ok' if certs else 'FAIL'}")


def test_c7_dimension_schedule_and_criterion():
    b = sc.Linear(1, 1)
    prm = bn.build_thm52(b)
    growth = all((1 << prm.log2_n(i)) ** 2 <= (1 << prm.log2_n(i + 1)) for i in range(12)) and \
        all(2 * prm.log2_n(i) <= prm.log2_n(i + 1) for i in range(21))
    ratio = all(Fraction(prm.log2_n(i), (i + 1) * 2 ** i) == 1 for i in range(21))
    rel = rl.LInfRestricted(b)
    rng = random.Random(7)
    agree = total = 0
    outcomes = set()
    while total < 50:
        x, y = rd.random_box_pair(rng)
        v = rl.decide(rel, x, y)
        if not v.definite:
            continue
        u = bn.uh_criterion(prm.space(x), prm.space(y))
        total += 1
        agree += (u.status == bn.HOLDS) == v.equivalent
        outcomes.add(v.outcome)
    ok = growth and ratio and agree == total and len(outcomes) == 2
    record("C7 dimension schedule and criterion", ok,
           f"n_i^2 <= n_(i+1): {growth}, log2 ratio 1: {ratio}, criterion agrees {agree}/{total}")


def test_c8_codes():
    valid = {}
    tags_ok = True
    for name, norm in (("l1", cd.lp_oracle(1)), ("l1.5", cd.lp_oracle(1.5)), ("l2", cd.lp_oracle(2))):
        code = cd.generate_code(norm, 500)
        valid[name] = cd.validate_code(code) == []
        for tag in cd.TAGS:
            bad, n = cd.mutate_code(code, tag)
            tags_ok &= any(v.tag == tag and n in v.indices for v in cd.validate_code(bad))
    record("C8 codes validate and mutations are tagged", all(valid.values()) and tags_ok,
           f"valid {valid}, mutation tags {'ok' if tags_ok else 'FAIL'}")


def test_c9_bm_witness():
    reps = [bn.bm_witness_check(1, 2, n, 0.05) for n in range(2, 7)]
    record("C9 Banach-Mazur witness l1^n vs l2^n", all(r.passed for r in reps),
           "rel errors " + ", ".join(f"{r.rel_error:.1e}" for r in reps))


def summary_lines():
    out = []
    for key in sorted(RESULTS):
        ok, detail = RESULTS[key]
        out.append(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
    return out


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
