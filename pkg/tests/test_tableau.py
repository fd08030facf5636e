import math

import numpy as np
import pytest

from savrrk.tableau import (BUILTIN_TABLEAUX, DoubleButcherTableau,
                            TableauFormatError, TableauLookupError,
                            TableauStructureError, builtin_tableau,
                            dissipation_matrices, load_tableau, validate)

ALL_NAMES = sorted(BUILTIN_TABLEAUX)


def test_builtin_three_two_values():
    t = builtin_tableau("imex-rrk-3-2")
    assert t.s == 3 and t.p == 2
    third = 2.0 / 3.0
    assert t.b.tolist() == [1.0 / 6.0, 1.0 / 6.0, third]
    assert t.bbar.tolist() == t.b.tolist()
    assert t.A[0, 0] == 1.0 - math.sqrt(2.0) / 2.0
    # implicit row 2: (sqrt2 - 1) + (1 - sqrt2/2) = sqrt2/2 = c2
    assert abs(t.A[1].sum() - math.sqrt(2.0) / 2.0) < 1e-15
    assert abs(t.A[1].sum() - t.c[1]) < 1e-15
    assert t.Abar[1, 0] == 1.0 and t.Abar[2, 0] == 0.25


def test_builtin_four_three_parameters():
    t = builtin_tableau("imex-rrk-4-3")
    assert t.s == 4 and t.p == 3
    alpha = 0.24169426078821
    beta = 0.06042356519705
    eta = 0.12915286960590
    assert t.A[0, 0] == alpha
    assert t.A[3, 0] == beta and t.A[3, 1] == eta
    assert abs(t.A[3, 2] - (0.5 - alpha - beta - eta)) < 1e-16
    assert t.b[0] == 0.0


def test_builtin_six_four_structure():
    t = builtin_tableau("imex-rrk-6-4")
    assert t.s == 6 and t.p == 4
    assert t.A[0, 0] == 0.0
    for i in range(1, 6):
        assert t.A[i, i] == 0.25
    # published weights include one negative entry
    assert t.b[4] == -2260.0 / 8211.0
    assert not t.weights_nonnegative
    assert builtin_tableau("imex-rrk-3-2").weights_nonnegative
    assert builtin_tableau("imex-rrk-4-3").weights_nonnegative


def test_unknown_builtin_lists_available():
    with pytest.raises(TableauLookupError) as err:
        builtin_tableau("imex-rrk-5-9")
    message = str(err.value)
    for name in ALL_NAMES:
        assert name in message


@pytest.mark.parametrize("name", ALL_NAMES)
def test_validate_builtins(name):
    report = validate(builtin_tableau(name))
    assert report.passed
    assert report.row_sum_implicit <= 1e-12
    assert report.row_sum_explicit <= 1e-12
    assert report.weight_sum_implicit <= 1e-12
    assert report.weight_sum_explicit <= 1e-12
    assert report.weight_mismatch <= 1e-12
    assert len(report.order2_residuals) == 8
    assert report.max_order2_residual <= 1e-12


def test_validate_flags_weight_mismatch():
    t = DoubleButcherTableau(
        name="mismatch", p=2,
        A=np.zeros((3, 3)), b=[1.0, 0.0, 0.0], c=np.zeros(3),
        Abar=np.zeros((3, 3)), bbar=[1 / 6, 1 / 6, 2 / 3], cbar=np.zeros(3))
    report = validate(t)
    assert not report.passed
    assert report.weight_mismatch > 1e-12


def test_validate_reports_negative_weights():
    report = validate(builtin_tableau("imex-rrk-6-4"))
    assert report.has_negative_weights
    assert report.min_weight == pytest.approx(-2260.0 / 8211.0)
    assert "negative" in report.summary()


@pytest.mark.parametrize("bad", [
    dict(A=np.triu(np.ones((3, 3)))),                # implicit upper entries
    dict(Abar=np.eye(3)),                            # explicit diagonal
    dict(b=np.ones(2)),                              # wrong vector length
    dict(A=np.full((2, 2), 0.5)),                    # shape mismatch with s=3
])
def test_structural_errors(bad):
    base = dict(name="x", p=2, A=np.zeros((3, 3)), b=np.full(3, 1 / 3),
                c=np.zeros(3), Abar=np.zeros((3, 3)), bbar=np.full(3, 1 / 3),
                cbar=np.zeros(3))
    base.update(bad)
    with pytest.raises(TableauStructureError):
        DoubleButcherTableau(**base)


def test_order_below_two_rejected():
    with pytest.raises(TableauStructureError):
        DoubleButcherTableau(name="x", p=1, A=np.zeros((1, 1)), b=[1.0],
                             c=[0.0], Abar=np.zeros((1, 1)), bbar=[1.0],
                             cbar=[0.0])


def test_dissipation_matrices_single_stage():
    t = DoubleButcherTableau(name="one", p=2, A=np.zeros((1, 1)), b=[1.0],
                             c=[0.0], Abar=np.zeros((1, 1)), bbar=[1.0],
                             cbar=[0.0])
    d = dissipation_matrices(t)
    assert np.array_equal(d.M, -np.ones((2, 2)))
    assert np.array_equal(d.Stilde, -np.ones((1, 1)))
    assert d.min_eig_Stilde == pytest.approx(-1.0)


def test_dissipation_matrices_builtin_not_symplectic():
    d = dissipation_matrices(builtin_tableau("imex-rrk-3-2"))
    assert np.abs(d.M - d.M.T).max() <= 1e-14
    assert np.abs(d.M).max() > 1e-3  # M != 0: the pair is not symplectic
    assert d.M.shape == (6, 6) and d.Stilde.shape == (3, 3)


def test_dissipation_matrix_symmetry_random_tableaux():
    rng = np.random.default_rng(7)
    for _ in range(25):
        s = int(rng.integers(2, 6))
        A = np.tril(rng.standard_normal((s, s)))
        Abar = np.tril(rng.standard_normal((s, s)), k=-1)
        b = rng.standard_normal(s)
        b /= b.sum() if abs(b.sum()) > 0.1 else 1.0
        bbar = rng.standard_normal(s)
        bbar /= bbar.sum() if abs(bbar.sum()) > 0.1 else 1.0
        t = DoubleButcherTableau(name="rand", p=2, A=A, b=b, c=A.sum(axis=1),
                                 Abar=Abar, bbar=bbar, cbar=Abar.sum(axis=1))
        d = dissipation_matrices(t)
        assert np.abs(d.M - d.M.T).max() <= 1e-14 * max(1.0, np.abs(d.M).max())


TABLEAU_FILE = """\
# two-stage IMEX pair for parser tests
name file-pair
order 2

implicit-A
1/2 0
1/2 1/2

implicit-b
1/2 1/2

explicit-A
0 0
1 0

explicit-b
1/2 1/2

explicit-c
0 1
"""


def test_load_tableau_roundtrip(tmp_path):
    path = tmp_path / "pair.tab"
    path.write_text(TABLEAU_FILE)
    t = load_tableau(path)
    assert t.name == "file-pair" and t.p == 2 and t.s == 2
    assert t.A[0, 0] == 0.5 and t.A[1, 1] == 0.5
    # implicit c defaults to row sums, explicit c taken from the file
    assert t.c.tolist() == [0.5, 1.0]
    assert t.cbar.tolist() == [0.0, 1.0]
    assert validate(t).weight_mismatch == 0.0


@pytest.mark.parametrize("mutation,fragment", [
    (lambda s: s.replace("name file-pair\n", ""), "missing 'name'"),
    (lambda s: s.replace("order 2\n", ""), "missing 'order'"),
    (lambda s: s.replace("order 2", "order two"), "integer"),
    (lambda s: s.replace("1/2 0\n", "1/2\n"), "square"),
    (lambda s: s.replace("1/2 0\n", "1/0 0\n"), "bad rational"),
    (lambda s: s.replace("1/2 0\n", "oops 0\n"), "bad numeric"),
])
def test_load_tableau_errors(tmp_path, mutation, fragment):
    path = tmp_path / "bad.tab"
    path.write_text(mutation(TABLEAU_FILE))
    with pytest.raises(TableauFormatError) as err:
        load_tableau(path)
    assert fragment in str(err.value)


def test_load_tableau_rejects_stray_line(tmp_path):
    path = tmp_path / "stray.tab"
    path.write_text("stray words\n" + TABLEAU_FILE)
    with pytest.raises(TableauFormatError) as err:
        load_tableau(path)
    assert "stray.tab:1" in str(err.value)


def test_load_tableau_rejects_duplicate_block(tmp_path):
    path = tmp_path / "dup.tab"
    path.write_text(TABLEAU_FILE + "\nimplicit-b\n1/2 1/2\n")
    with pytest.raises(TableauFormatError) as err:
        load_tableau(path)
    assert "duplicate" in str(err.value)
