import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gfrk.tableau import (
    ButcherTableau,
    TableauKind,
    check_order_conditions,
    dirk4,
    gauss4,
    get_tableau,
    jacobi_eigenvalues,
    load_tableau,
    parse_tableau,
    stability_report,
)

SIGMA = math.cos(math.pi / 18) / math.sqrt(3) + 0.5
MU = 1 / (6 * (2 * SIGMA - 1) ** 2)


def test_gauss4_coefficients():
    t = gauss4()
    r = math.sqrt(3) / 6
    assert t.s == 2
    assert t.kind is TableauKind.FULLY_IMPLICIT
    np.testing.assert_array_equal(t.b, [0.5, 0.5])
    np.testing.assert_allclose(t.a, [[0.25, 0.25 - r], [0.25 + r, 0.25]], rtol=0, atol=1e-16)
    np.testing.assert_allclose(t.c, [0.5 - r, 0.5 + r], rtol=0, atol=1e-16)
    assert t.c[0] + t.c[1] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(t.a.sum(axis=1), t.c, rtol=0, atol=1e-15)


def test_dirk4_coefficients():
    t = dirk4()
    assert t.kind is TableauKind.DIAGONALLY_IMPLICIT
    assert t.a[0][0] == pytest.approx(1.0685790213016289, abs=1e-15)
    assert t.a[0][0] == pytest.approx(SIGMA, abs=1e-15)
    np.testing.assert_allclose(np.diag(t.a), [SIGMA] * 3, atol=1e-15)
    assert t.a[1, 0] == pytest.approx(0.5 - SIGMA, abs=1e-15)
    assert t.a[2, 0] == pytest.approx(2 * SIGMA, abs=1e-15)
    assert t.a[2, 1] == pytest.approx(1 - 4 * SIGMA, abs=1e-15)
    assert np.all(np.triu(t.a, 1) == 0)
    np.testing.assert_allclose(t.b, [MU, 1 - 2 * MU, MU], atol=1e-15)
    assert t.b.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(t.c, [SIGMA, 0.5, 1 - SIGMA], atol=1e-15)


def test_dirk4_weights_positive():
    b = dirk4().b
    assert b[0] == b[2] == pytest.approx(0.1288864005157204, abs=1e-13)
    assert b[0] > 0 and b[1] > 0


def test_gauss4_m_vanishes():
    rep = stability_report(gauss4(), 1e-12)
    assert np.abs(rep.m).max() < 1e-14
    assert rep.algebraically_stable and rep.a_psd and rep.diag_positive


def test_dirk4_algebraically_stable():
    rep = stability_report(dirk4(), 1e-12)
    assert rep.algebraically_stable
    assert rep.diag_positive
    # M for this method is rank one: v v^T with v proportional to (1, -2, 1)
    v = np.array([1.0, -2.0, 1.0])
    expected = rep.m[0, 0] * np.outer(v, v)
    np.testing.assert_allclose(rep.m, expected, atol=1e-14)
    np.testing.assert_allclose(rep.eigenvalues, np.linalg.eigvalsh(rep.m), atol=1e-13)


def test_explicit_euler_not_stable():
    t = ButcherTableau("euler", [[0.0]], [1.0])
    rep = stability_report(t, 1e-12)
    np.testing.assert_array_equal(rep.m, [[-1.0]])
    assert not rep.algebraically_stable
    assert not rep.diag_positive


def test_order_conditions():
    assert check_order_conditions(gauss4(), 4)
    assert check_order_conditions(dirk4(), 4)
    midpoint = ButcherTableau("midpoint", [[0.5]], [1.0])
    assert check_order_conditions(midpoint, 2)
    assert not check_order_conditions(midpoint, 3)
    with pytest.raises(ValueError):
        check_order_conditions(gauss4(), 5)
    with pytest.raises(ValueError):
        check_order_conditions(gauss4(), 0)


def test_tableau_validation():
    with pytest.raises(ValueError):
        ButcherTableau("bad", [[1.0, 0.0]], [1.0])
    with pytest.raises(ValueError):
        ButcherTableau("bad", [[1.0]], [1.0, 0.0])
    t = gauss4()
    with pytest.raises(ValueError):
        t.a[0, 0] = 1.0


def test_get_tableau():
    assert get_tableau("GAUSS4").name == "gauss4"
    with pytest.raises(ValueError):
        get_tableau("rk4")


def test_parse_tableau_roundtrip(tmp_path):
    t = dirk4()
    lines = [str(t.s)] + [" ".join(repr(float(v)) for v in row) for row in t.a] + [" ".join(repr(float(v)) for v in t.b)]
    path = tmp_path / "mine.txt"
    path.write_text("\n".join(lines) + "\n")
    loaded = load_tableau(str(path))
    np.testing.assert_array_equal(loaded.a, t.a)
    np.testing.assert_array_equal(loaded.b, t.b)
    assert loaded.name == "mine"
    assert loaded.is_diagonally_implicit


@pytest.mark.parametrize(
    "text",
    ["", "x\n1\n1\n", "2\n1 0\n0 1\n", "2\n1 0\n0\n1 0\n", "0\n"],
)
def test_parse_tableau_rejects(text):
    with pytest.raises(ValueError):
        parse_tableau(text)


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=(4, 4))
        sym = a + a.T
        np.testing.assert_allclose(jacobi_eigenvalues(sym), np.linalg.eigvalsh(sym), atol=1e-12)


coef = st.floats(-2.0, 2.0, allow_nan=False)


@given(
    a=st.lists(coef, min_size=9, max_size=9),
    b=st.lists(coef, min_size=3, max_size=3),
    perm=st.permutations([0, 1, 2]),
)
def test_m_permutes_conjugately(a, b, perm):
    t = ButcherTableau("rand", np.reshape(a, (3, 3)), b)
    p = np.asarray(perm)
    m = stability_report(t).m
    mp = stability_report(t.permuted(p)).m
    np.testing.assert_allclose(mp, m[np.ix_(p, p)], atol=1e-14)
    np.testing.assert_allclose(m, m.T, atol=1e-14)
    np.testing.assert_allclose(t.a.sum(axis=1), t.c, atol=1e-14)


@given(
    a=st.lists(coef, min_size=9, max_size=9),
    b=st.lists(st.floats(0.0, 2.0), min_size=3, max_size=3),
)
def test_stability_flag_matches_definition(a, b):
    t = ButcherTableau("rand", np.reshape(a, (3, 3)), b)
    rep = stability_report(t, 1e-12)
    radius = np.abs(rep.eigenvalues).max()
    expected = rep.weights_nonneg and rep.m_min_eigenvalue >= -1e-12 * (1 + radius)
    assert rep.algebraically_stable == expected
