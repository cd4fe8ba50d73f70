import math

import numpy as np
import pytest

from graphwiener.beurling import BeurlingParams, LocalizedMatrix, beurling_norm
from graphwiener.graph import build_cycle, fit_growth
from graphwiener.inversion import (
    InversionError,
    entrywise_inverse_check,
    example43_asymptotics,
    example43_sweep,
    invert,
    minimal_cycle_length,
    theorem41_verify,
)
from graphwiener.matrices import diagonal, identity, kappa_matrix
from graphwiener.report import PreconditionError
from graphwiener.stability import Problem
from graphwiener.weights import polynomial_weight, trivial_weight


def test_invert_identity_and_diagonal():
    g = build_cycle(10)
    assert np.array_equal(invert(identity(g)).entries, np.eye(10))
    assert np.allclose(invert(identity(g, 2.0)).entries, 0.5 * np.eye(10), rtol=0, atol=0)


def test_invert_kappa_closed_form():
    n, k = 64, 0.5
    g = build_cycle(n)
    inv = invert(kappa_matrix(g, k)).entries
    i = np.arange(n)
    # row i holds kappa^m / (1 - kappa^n) at column i - m (mod n)
    expect = np.zeros((n, n))
    for m in range(n):
        expect[i, (i - m) % n] = k ** m / (1 - k ** n)
    assert np.allclose(inv, expect, rtol=1e-12, atol=1e-300)


def test_invert_singular():
    g = build_cycle(6)
    with pytest.raises(InversionError):
        invert(diagonal(g, [1, 1, 0, 1, 1, 1]))


def test_inversion_bound_scaled_identity():
    g = build_cycle(64)
    st = fit_growth(g)
    rep = theorem41_verify(identity(g, 2.0), 2, trivial_weight(g), BeurlingParams(1, 2.0), st)
    assert rep.beurling_norm_of_inverse == pytest.approx(0.5)
    assert math.isfinite(rep.extracted_C)
    assert rep.remark42_rhs is not None


def test_inversion_bound_weighted():
    g = build_cycle(128)
    st = fit_growth(g)
    rep = theorem41_verify(kappa_matrix(g, 0.8), 1.5, polynomial_weight(g, 0, 0.3), BeurlingParams(1, 2.0), st)
    assert rep.remark42_rhs is None
    assert all(math.isfinite(x) for x in (rep.beurling_norm_of_inverse, rep.rhs_bound, rep.extracted_C))
    assert rep.to_report().passed


def test_inversion_constant_bidiagonal_family():
    g = build_cycle(1024)
    st = fit_growth(g, n_values=(0,))
    w = trivial_weight(g)
    Cs = [theorem41_verify(kappa_matrix(g, k), 2, w, BeurlingParams(1, 2.0), st).extracted_C
          for k in (0.5, 0.7, 0.9, 0.95)]
    # the bound over-estimates the growth, so the constant only shrinks as kappa -> 1
    assert all(0 < c < 1 for c in Cs)
    assert all(a >= b for a, b in zip(Cs, Cs[1:]))


def _problem(A):
    st = fit_growth(A.graph)
    return Problem(A, 2.0, trivial_weight(A.graph), BeurlingParams(1, 2.0, st.dimension), st)


def test_entrywise_identity():
    g = build_cycle(64)
    rep = entrywise_inverse_check(_problem(identity(g)))
    assert rep.passed and math.isfinite(rep.extracted_constant)


def test_entrywise_kappa():
    rep = entrywise_inverse_check(_problem(kappa_matrix(build_cycle(128), 0.5)))
    assert rep.passed and rep.extracted_constant > 0


def test_entrywise_permuted_diagonal():
    g = build_cycle(32)
    perm = (np.arange(32) + 1) % 32
    a = np.zeros((32, 32))
    a[np.arange(32), perm] = np.linspace(1, 2, 32)
    rep = entrywise_inverse_check(_problem(LocalizedMatrix(a, g, "perm")))
    assert rep.passed


def test_minimal_cycle_length():
    n = minimal_cycle_length(0.95)
    assert 0.95 ** n < 1e-8 <= 0.95 ** (n - 1)


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        example43_asymptotics([0.0, 0.5], n=512)
    with pytest.raises(PreconditionError) as err:
        example43_asymptotics([0.8, 0.95], n=100)
    assert err.value.minimal == minimal_cycle_length(0.95)


def test_sweep_columns_and_identities():
    rep = example43_sweep([0.5, 0.6, 0.7], [(1, 2.0), (2, 2.0)], n=256)
    assert len(rep) == 2
    r1 = rep[0]
    g = build_cycle(256)
    for row in r1.rows:
        A = kappa_matrix(g, row["kappa"])
        assert row["norm_A"] == pytest.approx(beurling_norm(A, BeurlingParams(1, 2.0)), rel=1e-14)
        # r = 1, alpha = 2: |A| = 1 + kappa 2^2 exactly
        assert row["norm_A"] == pytest.approx(1 + 4 * row["kappa"], rel=1e-14)
        assert row["opnorm_Ainv_pw"] <= row["opnorm_Ainv_pw_upper"]
        assert row["witness_Ainv_c0"] / row["witness_c0"] <= row["opnorm_Ainv_pw_upper"] * (1 + 1e-12)
    header = r1.to_csv().splitlines()[0].split(",")
    assert header[:6] == ["kappa", "norm_A", "norm_Ainv_beurling", "opnorm_Ainv_pw", "rhs_bound", "extracted_C"]
    assert rep[1].rows[0]["opnorm_Ainv_pw"] == r1.rows[0]["opnorm_Ainv_pw"]
