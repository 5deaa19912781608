"""Volume polynomials against classical closed forms, the sinh ratio bound,
exact genus-ratio tables, and the systole-moment dichotomy."""

import math
from fractions import Fraction

import pytest
from scipy import integrate

from hypdet import (
    BudgetExceeded,
    DomainError,
    FitUnstable,
    divergence_probe,
    evaluate_volume,
    mirzakhani_volume,
    ratio_table,
    sinh_bound_check,
    systole_moment,
)
from hypdet.wpvol import DEFAULT_BUDGET


# ---------------------------------------------------------------------------
# closed forms; all coefficients are exact rationals times powers of pi^2


def test_thrice_punctured_sphere_is_trivial():
    v = mirzakhani_volume(0, 3)
    assert dict(v.coeffs) == {((0, 0, 0), 0): Fraction(1)}
    assert evaluate_volume(v, (1.0, 2.0, 3.0)) == 1.0


def test_one_handle_one_boundary():
    # (L^2 + 4 pi^2) / 48, in the convention carrying the elliptic
    # involution's half factor
    v = mirzakhani_volume(1, 1)
    assert dict(v.coeffs) == {
        ((1,), 0): Fraction(1, 48),
        ((0,), 1): Fraction(1, 12),
    }


def test_four_boundary_sphere():
    v = mirzakhani_volume(0, 4)
    assert v.coeffs[((0, 0, 0, 0), 1)] == Fraction(2)
    for k in range(4):
        degs = tuple(1 if i == k else 0 for i in range(4))
        assert v.coeffs[(degs, 0)] == Fraction(1, 2)
    L = (0.9, 1.7, 0.4, 2.2)
    closed = (4.0 * math.pi ** 2 + sum(x * x for x in L)) / 2.0
    assert abs(evaluate_volume(v, L) - closed) < 1e-12 * closed


def test_closed_genus_two_constant():
    c, p = mirzakhani_volume(2, 0).constant()
    assert c == Fraction(43, 2160) and p == 3  # 43 pi^6 / 2160


def test_two_handles_against_closed_forms():
    v12 = mirzakhani_volume(1, 2)
    for L in [(0.7, 1.9), (2.5, 0.3), (0.0, 0.0)]:
        s = L[0] ** 2 + L[1] ** 2
        closed = (4 * math.pi ** 2 + s) * (12 * math.pi ** 2 + s) / 192.0
        assert abs(evaluate_volume(v12, L) - closed) < 1e-12 * closed
    v21 = mirzakhani_volume(2, 1)
    for (l,) in [(1.1,), (3.0,), (0.0,)]:
        x = l * l
        closed = (
            (4 * math.pi ** 2 + x)
            * (12 * math.pi ** 2 + x)
            * (6960 * math.pi ** 4 + 384 * math.pi ** 2 * x + 5 * x * x)
            / 2211840.0
        )
        assert abs(evaluate_volume(v21, (l,)) - closed) < 1e-12 * closed
    assert v21.coeffs[((0,), 4)] == Fraction(29, 192)


def test_polynomial_structure_invariants():
    for g, n in [(1, 2), (2, 1), (2, 2), (0, 5), (3, 1)]:
        poly = mirzakhani_volume(g, n)
        dim = 3 * g - 3 + n
        for (degs, p), c in poly.coeffs.items():
            assert len(degs) == n
            assert sum(degs) + p == dim  # homogeneous of moduli dimension
            assert c > 0
        # symmetric under boundary permutation
        L = [0.5 + 0.3 * i for i in range(n)]
        ref = evaluate_volume(poly, L)
        assert abs(evaluate_volume(poly, L[::-1]) - ref) < 1e-12 * ref


def test_volumes_are_deterministic():
    a = mirzakhani_volume(3, 1)
    b = mirzakhani_volume(3, 1)
    assert dict(a.coeffs) == dict(b.coeffs)


def test_budget_refusal_names_the_dimension():
    with pytest.raises(BudgetExceeded) as exc:
        mirzakhani_volume(8, 1)
    assert exc.value.predicted == 22
    assert exc.value.budget == DEFAULT_BUDGET
    # a raised budget admits the same request
    assert mirzakhani_volume(8, 1, budget=22) is not None


# ---------------------------------------------------------------------------
# sinh ratio bound


def test_sinh_bound_on_small_family():
    for g, n in [(1, 1), (1, 2), (2, 1), (2, 2), (0, 4), (3, 1)]:
        res = sinh_bound_check(g, n, (0.5, 1.0, 2.0, 4.0))
        assert res.passed
        assert 0.0 < res.value <= 1.0
        for row in res.details["rows"]:
            assert row["ratio"] <= row["sinh_power"] * (1 + 1e-12)
            assert row["sinh_power"] <= math.exp(n * row["t"] / 2.0) * (1 + 1e-12)


def test_sinh_bound_pinned_ratio():
    # V_{2,1}(1)/V_{2,1}(0) against sinh(1/2)/(1/2); frozen from a validated run
    res = sinh_bound_check(2, 1, (1.0,))
    row = res.details["rows"][0]
    assert abs(row["ratio"] - 1.0397753577) < 1e-9
    assert row["ratio"] <= math.sinh(0.5) / 0.5 <= 1.0421906110
    assert res.passed


def test_sinh_bound_rejects_negative_times():
    with pytest.raises(DomainError):
        sinh_bound_check(2, 1, (-1.0,))


# ---------------------------------------------------------------------------
# genus ratio table


def test_ratio_table_bands_and_trend():
    rows = ratio_table(8)
    assert [r["g"] for r in rows] == list(range(2, 9))
    for row in rows:
        assert 0.1 <= row["combined"] <= 10.0
        assert isinstance(row["pair_ratio_rational"], Fraction)
        assert isinstance(row["split_ratio_rational"], Fraction)
        assert abs(float(row["pair_ratio_rational"]) / math.pi ** 2 - row["pair_ratio"]) < 1e-15
    # the pair ratio drifts toward 1 as genus grows
    gaps = [abs(r["pair_ratio"] - 1.0) for r in rows]
    assert gaps[-1] < gaps[0]


def test_ratio_table_is_exact_and_repeatable():
    a = ratio_table(6)
    b = ratio_table(6)
    assert [r["pair_ratio_rational"] for r in a] == [r["pair_ratio_rational"] for r in b]
    assert [r["combined"] for r in a] == [r["combined"] for r in b]


def test_ratio_table_needs_two_handles():
    with pytest.raises(DomainError):
        ratio_table(1)


# ---------------------------------------------------------------------------
# systole moments


def numerator_value(g, t):
    """Moment integrand numerator via direct polynomial evaluation; an
    independent route from the collapsed closed-form coefficients."""
    total = evaluate_volume(mirzakhani_volume(g - 1, 2), (t, t))
    for i in range(1, g // 2 + 1):
        total += evaluate_volume(mirzakhani_volume(i, 1), (t,)) * evaluate_volume(
            mirzakhani_volume(g - i, 1), (t,)
        )
    return total


@pytest.mark.parametrize("g", [2, 3, 4])
@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 1.9])
def test_finite_moments_match_direct_quadrature(g, beta):
    res = systole_moment(g, beta)
    assert math.isfinite(res.value) and res.value > 0.0
    vg_c, vg_p = mirzakhani_volume(g, 0).constant()
    vg = float(vg_c) * math.pi ** (2 * vg_p)
    oracle, err = integrate.quad(
        lambda t: numerator_value(g, t) * t ** (1.0 - beta) / vg,
        0.0,
        1.0,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    assert abs(res.value - oracle) <= 1e-8 * max(1.0, abs(oracle))


def test_moment_scales_linearly_in_the_constant():
    full = systole_moment(3, 1.0, c_gamma=1.0)
    half = systole_moment(3, 1.0, c_gamma=0.5)
    assert abs(half.value - 0.5 * full.value) < 1e-14


def test_moment_dichotomy_at_two():
    fin = systole_moment(2, 1.999)
    assert math.isfinite(fin.value)
    div = systole_moment(2, 2.0)
    assert math.isinf(div.value)
    assert div.probe["log_slopes"]
    div3 = systole_moment(2, 3.0)
    assert math.isinf(div3.value)
    assert abs(div3.probe["exponent"] - 1.0) < 0.05  # eps^{-(beta-2)} blowup


def test_moment_validation():
    with pytest.raises(DomainError):
        systole_moment(2, 0.0)
    with pytest.raises(DomainError):
        systole_moment(2, 1.0, c_gamma=1.5)
    with pytest.raises(DomainError):
        systole_moment(1, 1.0)


def test_divergence_probe_slope_equals_ratio_table_constant():
    """At beta = 2 the log(1/eps) slope is the numerator's constant term
    over V_g, which the ratio table computes along a fully rational path."""
    rows = {r["g"]: r["combined"] for r in ratio_table(6)}
    for g in (2, 3, 4, 5, 6):
        probe = divergence_probe(g, 2.0, (1e-2, 1e-3, 1e-4, 1e-5))
        assert abs(probe["slope"] - rows[g]) < 1e-9 * rows[g]


def test_divergence_probe_slope_is_stable():
    probe = divergence_probe(4, 2.0, (1e-2, 1e-3, 1e-4, 1e-5))
    slopes = probe["log_slopes"]
    assert all(abs(s / slopes[-1] - 1.0) <= 0.10 for s in slopes)


def test_divergence_probe_validation():
    with pytest.raises(DomainError):
        divergence_probe(2, 1.5, (1e-2, 1e-3, 1e-4))
    with pytest.raises(FitUnstable):
        divergence_probe(2, 2.0, (1e-2, 1e-3))
    with pytest.raises(FitUnstable):
        divergence_probe(2, 2.0, (1e-3, 1e-2, 1e-4))
