import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact import banach as bn
from artifact import coding as cd
from artifact import seqcore as sc


@pytest.fixture(scope="module")
def l2_code():
    return cd.generate_code(cd.lp_oracle(2), 300)


def test_oracle_examples():
    assert cd.lp_oracle(1)((1, -1)) == 2
    blocks = [(1, 2), (2, 2)]
    coords = (1, 1, 3, 4)
    assert cd.sum_oracle(blocks)(coords) == pytest.approx(bn.sum_norm([(1, (1, 1)), (2, (3, 4))]), abs=1e-15)


def test_code_entries_are_norms_of_enumerated_tuples(l2_code):
    for n in range(300):
        t = sc.rational_tuple(n)
        assert l2_code.r[n] == pytest.approx(math.sqrt(sum(float(a) ** 2 for a in t)), abs=1e-15)


def test_generated_l2_code_is_valid(l2_code):
    assert cd.validate_code(l2_code) == []


@pytest.mark.parametrize("tag", cd.TAGS)
def test_each_mutation_reports_its_tag(l2_code, tag):
    bad, n = cd.mutate_code(l2_code, tag)
    found = cd.validate_code(bad)
    assert found
    assert any(v.tag == tag and n in v.indices for v in found)


def test_unit_vector_example(l2_code):
    bad, n = cd.mutate_code(l2_code, "i")
    assert bad.r[n] == 0.9
    assert [v.tag for v in cd.validate_code(bad) if v.indices == (n,)] == ["i"]


def test_triangle_example():
    code = cd.generate_code(cd.lp_oracle(1), 200)
    bad, l = cd.mutate_code(code, "iii")
    assert any(v.tag == "iii" and v.indices[2] == l for v in cd.validate_code(bad))


def test_unknown_tag_rejected(l2_code):
    with pytest.raises(ValueError):
        cd.mutate_code(l2_code, "v")


def test_sum_space_code_is_valid():
    code = cd.generate_code(cd.sum_oracle([(1, 1), (F(3, 2), 2), (2, 1)]), 300)
    assert cd.validate_code(code) == []


def test_csv_layout(l2_code):
    lines = l2_code.to_csv().splitlines()
    assert lines[0] == "index,tuple,r"
    assert len(lines) == 301


def test_rho_examples():
    l1, l2 = cd.lp_space(1, 2), cd.lp_space(2, 2)
    assert cd.rho_metric(l1, l1) == 0
    assert cd.rho_metric(l1, l2) == pytest.approx(0.5 * math.log(2), abs=1e-12)
    assert cd.rho_metric(l1, cd.lp_space(2, 3)) == 1
    assert cd.rho_metric(cd.lp_space(1, 40), cd.lp_space(2, 40)) == 1


def test_rho_general_basis_is_a_lower_bound_search():
    X = cd.FinDimSpace(((2, 2),), ((1, 1), (1, -1)))
    rep = cd.rho_report(X, cd.lp_space(2, 2))
    assert not rep["exact"]
    assert rep["rho"] == pytest.approx(0.5 * math.log(2), abs=1e-6)


spaces = st.tuples(st.sampled_from([1, 1.25, 1.5, 2, 3]), st.sampled_from([2, 3]))


@settings(max_examples=50, deadline=None)
@given(spaces, spaces, spaces)
def test_rho_symmetry_and_submultiplicativity(a, b, c):
    k = a[1]
    X, Y, Z = (cd.lp_space(p, k) for p, _ in (a, b, c))
    assert cd.rho_metric(X, Y) == pytest.approx(cd.rho_metric(Y, X), abs=1e-6)
    xy, _ = cd.basis_map_norm(X, Y)
    yz, _ = cd.basis_map_norm(Y, Z)
    xz, _ = cd.basis_map_norm(X, Z)
    assert xz <= xy * yz * (1 + 1e-12)


def test_witness_identity_matches_everything():
    blocks = [(1.5, 2), (2, 3)]
    rep = cd.local_equiv_witness(blocks, blocks, 1.0)
    assert rep.matched and not rep.unmatched and not rep.budget_exhausted


def test_coordinate_distance_tracks_bm_distance():
    for n in range(1, 6):
        d, exact = cd.coordinate_distance([(1, n)], range(n), [(2, n)], range(n))
        assert exact and d == pytest.approx(bn.bm_distance_lp(1, 2, n), rel=1e-12)


def test_witness_on_nearby_exponents():
    xb, yb = [(1.5, 2), (1.6, 4)], [(1.55, 2), (1.62, 4)]
    C = max(bn.bm_distance_lp(p, q, k) for (p, k), (q, _) in zip(xb, yb))
    rep = cd.local_equiv_witness(xb, yb, C, max_dim=4, budget=10 ** 5)
    assert not rep.unmatched and not rep.budget_exhausted
    assert all(m["distance_bound"] <= C * (1 + 1e-9) for m in rep.matched)
