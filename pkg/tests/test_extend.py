import numpy as np
import pytest

from srl import extend as ex
from srl import opshift as op
from srl.jsr import InvariantViolation, MatrixSet
from srl.linalg import ValidationError

from conftest import GOLDEN

ALPHA = ex.AlphaSequence()


def word(mats, w, alpha=ALPHA):
    return ex.ExtendedWord(MatrixSet(tuple(np.asarray(m, dtype=float) for m in mats)), tuple(w), alpha)


# -- the weight sequence ------------------------------------------------------


def test_alpha_sequence():
    a = ALPHA.values(50)
    assert np.all(np.diff(a) < 0) and np.all((a > 0) & (a <= 1))
    assert a[0] == pytest.approx(np.exp(-2.0))
    s = ALPHA.partial_log_sums(50)
    assert s[0] == 0.0
    np.testing.assert_allclose(s[1:], np.cumsum(ALPHA.log_values(50)), rtol=1e-14)
    np.testing.assert_allclose(ex.AlphaSequence(0.3).partial_log_sums(4), [0, -0.6, -1.5, -2.7, -4.2])
    with pytest.raises(ValidationError):
        ex.AlphaSequence(0.0)


@pytest.mark.parametrize(
    "seq",
    [
        ex.SubadditiveSequence.linear(0.7),
        ex.SubadditiveSequence.linear(-1.0),
        ex.SubadditiveSequence.linear(0.0),
        ex.SubadditiveSequence.linear(-0.2, 3.0),
        ex.SubadditiveSequence.min_linear(1.0, 0.0, -0.5, 4.0),
    ],
    ids=lambda s: s.label(),
)
def test_verify_alpha_property_linear(seq):
    chk = ex.verify_alpha_property(seq, 10_000)
    assert chk.passed and abs(chk.difference) <= 0.01 and not chk.divergent
    assert chk.alpha_formula >= chk.direct - 1e-12  # k = 0 is always a candidate


def test_verify_alpha_property_divergent():
    chk = ex.verify_alpha_property(ex.SubadditiveSequence.neg_square(), 10_000)
    assert chk.divergent and chk.passed
    assert chk.direct < -1e3 and chk.alpha_formula < -1e3


def test_subadditive_validation():
    with pytest.raises(ValidationError):
        ex.SubadditiveSequence.custom(lambda n: n * n, "square").validate()
    with pytest.raises(ValidationError):
        ex.verify_alpha_property(ex.SubadditiveSequence.custom(lambda n: np.sqrt(n) * n), 100)
    with pytest.raises(ValidationError):
        ex.SubadditiveSequence.linear(1.0, -1.0)
    ex.SubadditiveSequence.custom(lambda n: np.sqrt(n)).validate()


# -- extended products --------------------------------------------------------


def test_extended_norm_examples():
    assert ex.extended_norm(word([np.zeros((2, 2))], (0,))) == pytest.approx(np.exp(-2.0), rel=1e-14)
    assert ex.extended_norm(word([np.eye(2)], (0,) * 7)) == pytest.approx(1.0)
    # max(||L^2||, ||L|| a_1, a_1 a_2) = max(0, e^-2, e^-5)
    assert ex.extended_norm(word([[[0, 1], [0, 0]]], (0, 0))) == pytest.approx(np.exp(-2.0), rel=1e-14)


def test_extended_norm_on_operator_family():
    fam = op.OperatorFamily((op.ShiftFinRankOperator.shift(), op.ShiftFinRankOperator(finite=[[3.0]])))
    ew = ex.ExtendedWord(fam, (0, 1))
    # prefixes: ||S|| = 1, ||F S|| = 0 (F sees only e_0, S e_0 = e_1)
    assert ex.extended_norm(ew) == pytest.approx(max(0.0, 1.0 * np.exp(-2.0), np.exp(-5.0)))
    with pytest.raises(ValidationError):
        ex.ExtendedWord(fam, (0, 2))
    with pytest.raises(ValidationError):
        ex.ExtendedWord("nope", (0,))


def test_extended_seminorm_examples():
    fam = op.OperatorFamily((op.ShiftFinRankOperator.shift(), op.ShiftFinRankOperator(finite=[[3.0]])))
    assert ex.extended_seminorm_f(ex.ExtendedWord(fam, (0,))) == 1.0
    assert ex.extended_seminorm_f(ex.ExtendedWord(fam, (1,))) == pytest.approx(np.exp(-2.0))
    w = word(GOLDEN, (0, 1, 1, 0))
    assert ex.extended_seminorm_f(w) == pytest.approx(np.exp(ALPHA.partial_log_sums(4)[-1]))


def test_oracle_agreement(rng):
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        mats = rng.uniform(-2, 2, size=(k, 2, 2))
        w = tuple(int(i) for i in rng.integers(0, k, size=int(rng.integers(1, 9))))
        ew = word(mats, w)
        a = ex.extended_norm(ew)
        b = ex.truncated_extension_norm(ew, len(w) + 1 + int(rng.integers(0, 3)))
        worst = max(worst, abs(a - b) / max(a, b))
    assert worst <= 1e-12


def test_oracle_examples():
    assert ex.truncated_extension_norm(word([np.eye(2)], (0, 0, 0)), 8) == pytest.approx(1.0)
    single = word([[[0.5, 3.0], [0.0, -1.0]]], (0,))
    assert ex.truncated_extension_norm(single, 2) == pytest.approx(ex.extended_norm(single), rel=1e-12)
    with pytest.raises(ValidationError):
        ex.truncated_extension_norm(word([np.eye(2)], (0, 0, 0)), 3)


def test_block_sup_norm_rejects_mixed_rows():
    with pytest.raises(ValidationError):
        ex.block_sup_norm(np.ones((4, 4)), 2, 2)


def test_extension_is_injective():
    for mat in (np.zeros((2, 2)), np.array([[0.0, 1.0], [0.0, 0.0]])):
        levels = 6
        e = ex.truncated_extension(mat, ALPHA, levels)
        # columns of the last block fall off the truncation; the rest is injective
        s = np.linalg.svd(e[:, : 2 * (levels - 1)], compute_uv=False)
        assert s.min() >= ALPHA.values(levels - 1).min() * (1 - 1e-12)


def test_extended_power_rate(rng):
    for _ in range(20):
        m = rng.normal(size=(2, 2))
        rho = np.max(np.abs(np.linalg.eigvals(m)))
        assert abs(ex.extended_power_rate(m, 1000) - np.log(rho)) <= 0.02


# -- radii --------------------------------------------------------------------


def test_extended_radii_golden():
    base, ext = ex.extended_radii(MatrixSet(GOLDEN), 10)
    np.testing.assert_array_equal(ext.gelfand_max, base.gelfand_max)
    assert ext.notes["rho_columns_equal"]
    assert np.all(ext.norm_sup >= base.norm_sup - 1e-12)


def test_extended_radii_zero():
    _, ext = ex.extended_radii(MatrixSet.of(np.zeros((2, 2))), 8)
    n = np.arange(1, 9)
    np.testing.assert_allclose(ext.norm_sup, np.exp(-n * (n + 3) / 2 / n), rtol=1e-12)


def test_extended_radii_diag():
    base, ext = ex.extended_radii(MatrixSet.of(np.diag([2.0, 1.0])), 8)
    np.testing.assert_allclose(ext.norm_sup, 2.0, rtol=1e-12)
    np.testing.assert_allclose(base.upper, 2.0, rtol=1e-12)
    assert ext.notes["norm_limit_gap"] <= 1e-12


def test_extended_radii_detects_inconsistent_bounds(monkeypatch):
    real = ex.bw_report

    def broken(*args, **kwargs):
        rep = real(*args, **kwargs)
        rep.lower = rep.lower + 10.0
        return rep

    monkeypatch.setattr(ex, "bw_report", broken)
    with pytest.raises(InvariantViolation):
        ex.extended_radii(MatrixSet(GOLDEN), 4)
