import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moranlab.lattice import (
    KernelVariant,
    LatticeFunction,
    apply_operator,
    bernstein_apply,
    bernstein_iterate,
    build_transition_matrix,
    defect,
    evaluate_offlattice,
    iterate_operator,
    lattice_points,
    operator_moments,
    power_checkpoints,
    step_count,
)

PAPER, STANDARD = KernelVariant.PAPER, KernelVariant.STANDARD
variants = st.sampled_from([PAPER, STANDARD])


def e(m):
    return lambda x: np.asarray(x, dtype=float) ** m


class TestBuildTransitionMatrix:
    def test_paper_n3_row1_has_negative_diagonal(self):
        P = build_transition_matrix(3, PAPER).entries
        assert P[1, 0] == pytest.approx(2 / 3, abs=1e-15)
        assert P[1, 2] == pytest.approx(2 / 3, abs=1e-15)
        assert P[1, 1] == pytest.approx(-1 / 3, abs=1e-15)

    def test_standard_n3_row1(self):
        P = build_transition_matrix(3, STANDARD).entries
        np.testing.assert_allclose(P[1, :3], [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    @pytest.mark.parametrize("variant", [PAPER, STANDARD])
    def test_absorbing_rows(self, variant):
        P = build_transition_matrix(5, variant).entries
        np.testing.assert_array_equal(P[0], [1, 0, 0, 0, 0, 0])
        np.testing.assert_array_equal(P[5], [0, 0, 0, 0, 0, 1])

    @pytest.mark.parametrize("n", [0, 1, -3, 2.5])
    def test_rejects_small_or_fractional_n(self, n):
        with pytest.raises(ValueError):
            build_transition_matrix(n, PAPER)

    def test_variant_strings(self):
        assert build_transition_matrix(4, "Standard").variant is STANDARD
        with pytest.raises(ValueError):
            KernelVariant.parse("moran")

    @given(n=st.integers(2, 80), variant=variants)
    def test_invariants(self, n, variant):
        P = build_transition_matrix(n, variant)
        E = P.entries
        assert np.all(np.abs(E.sum(axis=1) - 1) < 1e-12)
        i, j = np.indices(E.shape)
        assert np.all(E[np.abs(i - j) > 1] == 0)
        off = E[np.abs(i - j) == 1]
        assert np.all((off >= 0) & (off <= 1))
        if variant is STANDARD:
            assert P.is_stochastic and np.all(E <= 1)
        else:
            # the factor 2 always pushes the middle diagonal below zero
            assert P.min_entry < 0 and not P.is_stochastic

    def test_entries_are_read_only(self):
        P = build_transition_matrix(4, PAPER)
        with pytest.raises(ValueError):
            P.entries[0, 0] = 2.0


class TestLatticeFunction:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            LatticeFunction(3, [0.0, 1.0])

    def test_finite_checked(self):
        with pytest.raises(ValueError):
            LatticeFunction(2, [0.0, np.nan, 1.0])


class TestApplyOperator:
    @given(n=st.integers(2, 60), variant=variants)
    def test_martingale_identity(self, n, variant):
        P = build_transition_matrix(n, variant)
        e1 = LatticeFunction.from_callable(e(1), n)
        np.testing.assert_allclose(apply_operator(P, e1).values, e1.values, atol=1e-15)

    def test_e2_at_two_fifths(self):
        P = build_transition_matrix(5, PAPER)
        g = apply_operator(P, LatticeFunction.from_callable(e(2), 5))
        assert g.values[2] == pytest.approx(0.16 + 4 * 0.4 * 0.6 / 20, abs=1e-15)
        assert g.values[2] == pytest.approx(0.208, abs=1e-15)

    def test_constants_fixed(self):
        P = build_transition_matrix(7, PAPER)
        one = LatticeFunction(7, np.ones(8))
        np.testing.assert_allclose(apply_operator(P, one).values, 1.0, atol=1e-15)

    @given(n=st.integers(2, 80))
    def test_second_moment_identity(self, n):
        P = build_transition_matrix(n, PAPER)
        x = lattice_points(n)
        d = defect(P, LatticeFunction.from_callable(e(2), n))
        np.testing.assert_allclose(d, 4 * x * (1 - x) / (n * (n - 1)), atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            apply_operator(build_transition_matrix(4), LatticeFunction(5, np.zeros(6)))

    @given(n=st.integers(3, 60), variant=variants, coeffs=st.lists(st.floats(-5, 5), min_size=4, max_size=4))
    def test_cubic_defect_matches_generator(self, n, variant, coeffs):
        P = build_transition_matrix(n, variant)
        c0, c1, c2, c3 = coeffs
        f = LatticeFunction.from_callable(lambda x: c0 + c1 * x + c2 * x**2 + c3 * x**3, n)
        x = lattice_points(n)[1:-1]
        lf = 0.5 * x * (1 - x) * (2 * c2 + 6 * c3 * x)
        np.testing.assert_allclose(P.time_scale * defect(P, f)[1:-1], lf, atol=1e-10)


class TestOperatorMoments:
    @pytest.mark.parametrize("n", [3, 10, 41])
    def test_paper_moments(self, n):
        mom = operator_moments(build_transition_matrix(n, PAPER))
        x = lattice_points(n)
        np.testing.assert_allclose(mom.mean_shift, 0.0, atol=1e-15)
        np.testing.assert_allclose(mom.second_central, 4 * x * (1 - x) / (n * (n - 1)), atol=1e-15)
        np.testing.assert_allclose(mom.abs_third_central, 4 * x * (1 - x) / (n**2 * (n - 1)), atol=1e-15)
        assert np.all(mom.abs_third_central <= 1 / (n**2 * (n - 1)) + 1e-16)


class TestIterateOperator:
    def test_zero_iterates_is_identity(self):
        P = build_transition_matrix(6, PAPER)
        f = LatticeFunction.from_callable(np.sin, 6)
        assert iterate_operator(P, f, 0) is f

    def test_n2_paper_squares_to_identity(self):
        # explicit kernel for n = 2: row 1 = (1, -1, 1)
        P2 = np.array([[1.0, 0, 0], [1, -1, 1], [0, 0, 1]])
        np.testing.assert_array_equal(P2 @ P2, np.eye(3))
        P = build_transition_matrix(2, PAPER)
        np.testing.assert_array_equal(P.entries, P2)
        f = LatticeFunction(2, [0.3, -1.7, 2.2])
        np.testing.assert_allclose(iterate_operator(P, f, 2).values, f.values, atol=1e-15)

    def test_standard_fixation_limit_n5(self):
        n = 5
        P = build_transition_matrix(n, STANDARD)
        # first-step analysis: h = P h with h(0) = 0, h(n) = 1
        A = np.eye(n + 1) - P.entries
        A[0], A[n] = 0, 0
        A[0, 0] = A[n, n] = 1
        rhs = np.zeros(n + 1)
        rhs[n] = 1
        h = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(h, np.arange(n + 1) / n, atol=1e-14)
        g = iterate_operator(P, LatticeFunction.from_callable(e(2), n), 10**4)
        np.testing.assert_allclose(g.values, h, atol=1e-8)

    @pytest.mark.parametrize("variant", [PAPER, STANDARD])
    @pytest.mark.parametrize("n,k", [(3, 1), (10, 37), (25, 500), (50, 1580)])
    def test_squaring_agrees_with_repeated(self, variant, n, k):
        P = build_transition_matrix(n, variant)
        f = LatticeFunction.from_callable(lambda x: np.abs(x - 0.3) + np.sin(5 * x), n)
        a = iterate_operator(P, f, k, "squaring").values
        b = iterate_operator(P, f, k, "repeated").values
        np.testing.assert_allclose(a, b, atol=1e-10)

    @given(n=st.integers(2, 30), variant=variants, k=st.integers(0, 5000))
    @settings(max_examples=40)
    def test_absorbing_corners(self, n, variant, k):
        P = build_transition_matrix(n, variant)
        f0 = LatticeFunction(n, np.eye(n + 1)[0])
        fn = LatticeFunction(n, np.eye(n + 1)[n])
        assert iterate_operator(P, f0, k).values[0] == pytest.approx(1.0, abs=1e-12)
        assert iterate_operator(P, fn, k).values[n] == pytest.approx(1.0, abs=1e-12)

    def test_unknown_method(self):
        P = build_transition_matrix(3)
        with pytest.raises(ValueError):
            iterate_operator(P, LatticeFunction(3, np.zeros(4)), 2, method="eigen")

    def test_power_checkpoints_end_at_kmax(self):
        M = build_transition_matrix(6, STANDARD).entries
        ks = [k for k, _ in power_checkpoints(M, 100)]
        assert ks == [1, 2, 4, 8, 16, 32, 64, 100]
        last = dict(power_checkpoints(M, 100))[100]
        np.testing.assert_allclose(last, np.linalg.matrix_power(M, 100), atol=1e-13)


class TestEvaluateOfflattice:
    def test_e1_interior(self):
        assert evaluate_offlattice(10, PAPER, e(1), 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_e2_clamp_region(self):
        v = evaluate_offlattice(10, PAPER, e(2), 0.05)
        assert v == pytest.approx(0.01 + 4 * 0.1 * 0.9 / 90, abs=1e-15)
        assert v == pytest.approx(1 / 100 + 4 / 1000, abs=1e-15)

    @given(n=st.integers(2, 200), variant=variants, x=st.floats(0, 1))
    def test_constants(self, n, variant, x):
        assert evaluate_offlattice(n, variant, lambda y: np.ones_like(y), x) == pytest.approx(1.0, abs=1e-14)

    def test_clamp_boundaries_are_half_open(self):
        n = 8
        f = np.cos
        at = evaluate_offlattice(n, PAPER, f, 1 / n)
        assert evaluate_offlattice(n, PAPER, f, 0.0) == at
        assert evaluate_offlattice(n, PAPER, f, 1 / n - 1e-9) == at
        hi = evaluate_offlattice(n, PAPER, f, (n - 1) / n)
        assert evaluate_offlattice(n, PAPER, f, 1.0) == hi

    def test_matches_matrix_on_interior_lattice(self):
        n = 12
        P = build_transition_matrix(n, PAPER)
        lat = apply_operator(P, LatticeFunction.from_callable(np.exp, n)).values
        off = evaluate_offlattice(n, PAPER, np.exp, lattice_points(n))
        np.testing.assert_allclose(off[1:-1], lat[1:-1], atol=1e-14)
        # the clamp replaces the absorbing endpoints
        assert off[0] == pytest.approx(lat[1])

    @pytest.mark.parametrize("x", [-0.1, 1.0001, np.nan])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            evaluate_offlattice(5, PAPER, e(1), x)


class TestBernstein:
    @given(n=st.integers(1, 50), x=st.floats(0, 1))
    def test_linear_reproduced(self, n, x):
        assert bernstein_apply(e(1), n, x) == pytest.approx(x, abs=1e-12)

    def test_e2_n4_half(self):
        direct = sum(math.comb(4, k) * 0.5**4 * (k / 4) ** 2 for k in range(5))
        assert direct == pytest.approx(0.3125, abs=1e-15)
        assert bernstein_apply(e(2), 4, 0.5) == pytest.approx(direct, abs=1e-15)

    @given(n=st.integers(1, 50), x=st.floats(0, 1))
    def test_e2_and_normalisation(self, n, x):
        assert bernstein_apply(lambda y: np.ones_like(y), n, x) == pytest.approx(1.0, abs=1e-12)
        assert bernstein_apply(e(2), n, x) == pytest.approx(x * x + x * (1 - x) / n, abs=1e-12)

    def test_iterate_e2_closed_form(self):
        n, k = 9, 13
        a = (1 - 1 / n) ** k
        x = lattice_points(n)
        got = bernstein_iterate(LatticeFunction.from_callable(e(2), n), k).values
        np.testing.assert_allclose(got, a * x**2 + (1 - a) * x, atol=1e-13)


class TestStepCount:
    def test_paper_scale(self):
        assert step_count(30, PAPER, 1.0) == (217, 0.5)

    def test_decimal_times_snap(self):
        # 0.1 * 90/2 must be exactly 4.5 and 0.2 * 90/2 exactly 9
        assert step_count(10, STANDARD, 0.1) == (4, 0.5)
        assert step_count(10, STANDARD, 0.2) == (9, 0.0)
        assert step_count(80, PAPER, 0.25) == (395, 0.0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            step_count(5, PAPER, -1.0)
