import math

import numpy as np
import pytest

from graphwiener.beurling import BeurlingParams, FusionMatrix
from graphwiener.graph import (
    build_cycle,
    build_path,
    covering_multiplicity,
    fit_growth,
    maximal_disjoint_set,
)
from graphwiener.matrices import diagonal, identity, kappa_matrix, random_decay
from graphwiener.report import PreconditionError
from graphwiener.stability import (
    Problem,
    admissible_n,
    commutator,
    default_batch,
    domination_check,
    h_matrix,
    lemma32_check,
    psi0,
    run_chain,
    sharp_truncation,
    smooth_partition,
    smooth_truncation,
    theorem31_verify,
    w_series,
)
from graphwiener.weights import polynomial_weight, trivial_weight


def problem(n=128, kappa=0.5, p=2.0, theta=0.0, r=1, alpha=2.0):
    g = build_cycle(n)
    st = fit_growth(g)
    w = trivial_weight(g) if theta == 0 else polynomial_weight(g, 0, theta)
    return Problem(kappa_matrix(g, kappa), p, w, BeurlingParams(r, alpha, st.dimension), st)


# ---------------------------------------------------------------------------
# truncation operators


def test_trapezoid_values():
    t = np.array([0.0, 1.0, 1.25, 1.5, 2.0, -1.25])
    assert psi0(t).tolist() == [1.0, 1.0, 0.5, 0.0, 0.0, 0.5]


def test_sharp_and_smooth_truncations():
    g = build_path(9)
    assert sharp_truncation(g, 4, 2).diagonal.tolist() == [0, 0, 1, 1, 1, 1, 1, 0, 0]
    s = smooth_truncation(build_path(13), 6, 4).diagonal
    assert s[6] == 1 and s[2] == 1 and s[1] == 0.5 and s[0] == 0


def test_partition_on_path():
    g = build_path(9)
    vn = maximal_disjoint_set(g, 1)
    phi = smooth_partition(vn)
    top = covering_multiplicity(vn, 3)[1]
    assert np.all(phi <= 1) and np.all(phi >= 1 / top - 1e-15)


def test_partition_covers_cycle():
    vn = maximal_disjoint_set(build_cycle(12), 1)
    rows = np.array([smooth_truncation(vn.graph, m, 2).diagonal for m in vn.members])
    assert np.all(rows.sum(axis=0) >= 1)
    assert np.allclose(1 / smooth_partition(vn), rows.sum(axis=0))


def test_commutator_vanishes():
    g = build_cycle(20)
    psi = smooth_truncation(g, 0, 2)
    assert not commutator(psi, diagonal(g, np.arange(1, 21))).entries.any()
    wide = smooth_truncation(g, 0, g.diam)
    assert not commutator(wide, kappa_matrix(g, 0.5)).entries.any()


def test_commutator_entries():
    g = build_cycle(20)
    psi = smooth_truncation(g, 0, 2)
    A = kappa_matrix(g, 0.5)
    C = commutator(psi, A).entries
    expect = psi.matrix() @ A.entries - A.entries @ psi.matrix()
    assert np.allclose(C, expect, atol=1e-15)
    d = psi.diagonal
    i, j = np.nonzero(C)
    assert np.all(d[i] != d[j])


# ---------------------------------------------------------------------------
# localized estimate


def test_lemma_zero_vector():
    prob = problem()
    vn = maximal_disjoint_set(prob.A.graph, 4)
    rep = lemma32_check(prob, vn, np.zeros((prob.A.n, 1)), strict=False)
    assert rep.lhs == 0 and rep.extracted_constant == 2.0


def test_lemma_support_outside_ball():
    prob = problem()
    g = prob.A.graph
    N = 4
    vn = maximal_disjoint_set(g, N)
    c = np.where(g.dist[vn.members[0]] > 3 * N, 1.0, 0.0)[:, None]
    # the localized piece at the first fusion vertex vanishes
    assert not smooth_truncation(g, int(vn.members[0]), 2 * N).apply(c[:, 0]).any()
    rep = lemma32_check(prob, vn, c, strict=False)
    assert math.isfinite(rep.extracted_constant)


def test_lemma_strict_rejects_small_n():
    prob = problem()
    with pytest.raises(PreconditionError) as err:
        lemma32_check(prob, maximal_disjoint_set(prob.A.graph, 2))
    assert err.value.minimal == prob.minimal_n()


def test_lemma_constant_stable_across_sizes():
    vals = []
    for n in (128, 256, 512):
        prob = problem(n=n)
        rep = lemma32_check(prob, maximal_disjoint_set(prob.A.graph, 8), strict=False)
        vals.append(rep.extracted_constant)
    assert all(math.isfinite(v) for v in vals)
    assert max(vals) / min(vals) <= 1.2


# ---------------------------------------------------------------------------
# series, lift and domination


@pytest.fixture(scope="module")
def chain256():
    g = build_cycle(256)
    st = fit_growth(g)
    prob = Problem(kappa_matrix(g, 0.5), 2.0, trivial_weight(g), BeurlingParams(1, 2.0, st.dimension), st)
    return prob, run_chain(prob)


def test_series_norm_bounded(chain256):
    _, out = chain256
    assert out["w_norm"].passed
    assert out["W_info"]["norm"] <= 4


def test_series_cutoff_converged(chain256):
    prob, out = chain256
    ch = out["chain"]
    W64, _ = w_series(prob, ch.vn, ch.c2, max_terms=64)
    W128, _ = w_series(prob, ch.vn, ch.c2, max_terms=128)
    assert np.max(np.abs(W64.entries - W128.entries)) < 1e-12


def test_series_single_member_closed_form():
    g = build_cycle(64)
    st = fit_growth(g)
    prob = Problem(identity(g), 2.0, trivial_weight(g), BeurlingParams(1, 2.0), st)
    vn = maximal_disjoint_set(g, 64)
    assert len(vn) == 1
    # S is the scalar h(0)/N, theta = C2 / beta = 2, so W = 2 / (1 - 2/N)
    W, info = w_series(prob, vn, 2.0)
    assert W.entries[0, 0] == pytest.approx(2 / (1 - 2 / 64), rel=1e-12)
    assert info["norm"] < 4


def test_lift_of_2i():
    g = build_cycle(40)
    vn = maximal_disjoint_set(g, 2)
    H = h_matrix(FusionMatrix(2 * np.eye(len(vn)), vn, "W")).entries
    for i in range(g.n):
        for j in range(0, g.n, 5):
            count = sum(1 for m in vn.members if g.dist[i, m] <= 4 and g.dist[j, m] <= 8)
            assert H[i, j] == 2 * count


def test_domination_and_chain(chain256):
    prob, out = chain256
    for key in ("localized", "h_norm", "domination"):
        assert out[key].passed, key
    zero = domination_check(prob, out["H"], out["chain"].N, np.zeros((prob.A.n, 2)))
    assert zero.extracted_constant == 0.0


def test_admissible_scan_satisfies_condition():
    prob = problem(n=128, kappa=0.8)
    ch = admissible_n(prob)
    assert ch.condition_rhs <= ch.condition_lhs
    assert ch.N >= prob.minimal_n()


def test_default_batch_deterministic():
    A = random_decay(build_cycle(30), seed=0)
    assert np.array_equal(default_batch(A, 5), default_batch(A, 5))


# ---------------------------------------------------------------------------
# comparison of stability bounds


def test_stability_ratio_identity():
    g = build_cycle(64)
    st = fit_growth(g)
    w = trivial_weight(g)
    rep = theorem31_verify(identity(g), 2, w, 1, w, BeurlingParams(1, 2.0), st)
    assert rep.lhs == pytest.approx(1.0)
    assert rep.lhs <= rep.rhs and rep.passed


def test_stability_ratio_weighted_pair():
    g = build_cycle(128)
    st = fit_growth(g)
    A = kappa_matrix(g, 0.7)
    rep = theorem31_verify(A, 2, polynomial_weight(g, 0, 0.3), 1.5, polynomial_weight(g, 0, 0.2),
                           BeurlingParams(2, 2.0), st)
    assert rep.passed and math.isfinite(rep.extracted_constant)
    assert all(math.isfinite(x) and x > 0 for x in rep.detail["beta_p"] + rep.detail["beta_q"])


def test_stability_constant_bidiagonal_family():
    g = build_cycle(512)
    st = fit_growth(g, n_values=(0,))
    w = trivial_weight(g)
    Cs = [theorem31_verify(kappa_matrix(g, k), 2, w, 1, w, BeurlingParams(1, 2.0), st).extracted_constant
          for k in (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)]
    assert all(math.isfinite(c) for c in Cs)
    assert max(Cs) < 10
