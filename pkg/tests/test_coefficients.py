import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldkde import (
    BandwidthSchedule,
    CoefficientModel,
    check_condition_c,
    check_decay_window,
    check_hallin,
    check_machkouri_qsum,
    tail_functionals,
)
from fieldkde.coefficients import (
    box_mass,
    coeff_at,
    coeff_box,
    model_from_config,
    pair_weight_sum,
    pair_weight_sum_truncated,
    residual_sqrt_mass,
    total_sq_mass,
)


def brute_orthant_tail(model, k, radius=4000):
    """Independent oracle: direct summation of sum_{i >= k} a_i^2 over a big box."""
    axes = [np.arange(t, t + radius) for t in k]
    if model.d == 1:
        vals = np.array([coeff_at(model, (i,)) for i in axes[0][:radius]])
        return math.sqrt(float(np.sum(vals**2)))
    grids = np.meshgrid(*axes, indexing="ij")
    if model.family == "power_decay":
        radial = np.maximum.reduce(grids)
        return math.sqrt(float(np.sum((model.scale * (1.0 + radial) ** -model.q) ** 2)))
    raise NotImplementedError


class TestGeometricClosedForms:
    def test_a_values_match_direct_summation(self, geometric_half):
        f = tail_functionals(geometric_half, n=10, m=1)
        # direct summation oracle
        k = np.arange(400)
        a = 0.5**k
        assert f.a_at([0]) == pytest.approx(math.sqrt(np.sum(a**2)), abs=1e-14)
        assert f.a_at([0]) == pytest.approx(2.0 / math.sqrt(3.0), abs=1e-13)
        assert f.a_at([1]) == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-13)
        assert f.b_m == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-13)
        assert f.total_sq == pytest.approx(4.0 / 3.0, abs=1e-13)

    def test_delta_matches_direct_summation(self, geometric_half):
        f = tail_functionals(geometric_half, n=25, m=2)
        kk = np.arange(1, 26)
        direct = sum(
            brute_orthant_tail(geometric_half, (k - 1,)) / math.sqrt(k) for k in kk
        )
        assert f.delta_n == pytest.approx(direct, rel=1e-12)

    def test_lag_weight_sums(self, geometric_half):
        # sum_k 2^-k 2^-(k+2) = 1/3
        assert pair_weight_sum(geometric_half, [2]) == pytest.approx(1.0 / 3.0, abs=1e-14)
        k = np.arange(200)
        a = 0.5**k
        assert pair_weight_sum(geometric_half, [1]) == pytest.approx(
            float(np.sum(a[:-1] * a[1:])), abs=1e-13
        )


class TestTrivialModels:
    def test_single_weight(self, identity_weights):
        f = tail_functionals(identity_weights, n=10, m=1)
        assert f.a_at([0]) == 1.0
        assert f.a_at([1]) == 0.0
        assert f.b_m == 0.0
        assert f.delta_n == 1.0

    def test_truncation_radius_invariance(self, identity_weights):
        # recomputing with any n, m beyond the support gives identical values
        f1 = tail_functionals(identity_weights, n=10, m=1)
        f2 = tail_functionals(identity_weights, n=50, m=7)
        assert f1.a_at([0]) == f2.a_at([0])
        assert f1.total_sq == f2.total_sq
        assert f1.b_m == f2.b_m == 0.0


class TestPowerDecay:
    def test_rejects_non_square_summable(self):
        with pytest.raises(ValueError):
            CoefficientModel(d=2, family="power_decay", q=1.0)

    def test_a_table_against_brute_force(self, power_d2):
        f = tail_functionals(power_d2, n=8, m=2)
        for k in [(0, 0), (3, 2), (7, 0), (8, 8)]:
            assert f.a_at(k) == pytest.approx(
                brute_orthant_tail(power_d2, k), abs=1e-11
            )

    def test_bracket_decay_exponent(self, power_d2):
        # slope of log A[n] vs log n on a dyadic grid ~ -(q - d/2) = -3
        ns = [8, 16, 32, 64, 128, 256, 512]
        vals = [tail_functionals(power_d2, n=n, m=1).a_bracket_n for n in ns]
        slope = np.polyfit(np.log(ns), np.log(vals), 1)[0]
        assert abs(slope - (-3.0)) < 0.1

    def test_negative_indices_clamp(self, power_d2):
        f = tail_functionals(power_d2, n=4, m=1)
        assert f.a_at([-3, -1]) == f.a_at([0, 0])

    def test_d3_orthant_tails_against_box_sum(self):
        model = CoefficientModel(d=3, family="power_decay", q=4.0)
        f = tail_functionals(model, n=4, m=2)
        for k in [(0, 0, 0), (2, 1, 0), (3, 3, 3)]:
            r = 160
            axes = [np.arange(t, t + r) for t in k]
            g1, g2, g3 = np.meshgrid(*axes, indexing="ij")
            radial = np.maximum(np.maximum(g1, g2), g3)
            box = float(np.sum((1.0 + radial) ** -8.0))
            # remainder of the box sum is below 3*160^(3-8)/5 ~ 6e-12 in mass
            assert f.a_at(k) == pytest.approx(math.sqrt(box), abs=1e-5)
        total_shells = sum(
            ((s + 1) ** 3 - s**3) * (1.0 + s) ** -8.0 for s in range(3000)
        )
        assert f.total_sq == pytest.approx(total_shells, rel=1e-12)


class TestInvariants:
    @given(
        m=st.integers(min_value=1, max_value=12),
        ratio=st.floats(min_value=0.2, max_value=0.9),
    )
    @settings(max_examples=25, deadline=None)
    def test_mass_consistency(self, m, ratio):
        # B_m^2 + box mass = total mass
        model = CoefficientModel(d=1, family="geometric", ratio=ratio)
        total = total_sq_mass(model)
        assert residual_sqrt_mass(model, m) ** 2 + box_mass(model, m) == pytest.approx(
            total, rel=1e-12
        )

    @given(st.data())
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_each_coordinate(self, data):
        d = data.draw(st.integers(min_value=1, max_value=2))
        if d == 1:
            model = CoefficientModel(d=1, family="geometric", ratio=0.6)
        else:
            model = CoefficientModel(d=2, family="power_decay", q=3.0)
        f = tail_functionals(model, n=6, m=1)
        k = tuple(data.draw(st.integers(min_value=0, max_value=5)) for _ in range(d))
        j = tuple(t + data.draw(st.integers(min_value=0, max_value=3)) for t in k)
        assert f.a_at(j) <= f.a_at(k) + 1e-12

    @given(scale=st.floats(min_value=0.1, max_value=8.0))
    @settings(max_examples=20, deadline=None)
    def test_power_decay_scaling_is_exact(self, scale):
        base = CoefficientModel(d=1, family="power_decay", q=2.5)
        scaled = CoefficientModel(d=1, family="power_decay", q=2.5, scale=scale)
        f0 = tail_functionals(base, n=6, m=2)
        f1 = tail_functionals(scaled, n=6, m=2)
        assert f1.a_bracket_n == pytest.approx(scale * f0.a_bracket_n, rel=1e-13)
        assert f1.b_m == pytest.approx(scale * f0.b_m, rel=1e-13)
        assert f1.delta_n == pytest.approx(scale * f0.delta_n, rel=1e-13)
        assert f1.a_at([3]) == pytest.approx(scale * f0.a_at([3]), rel=1e-13)

    def test_tabulated_functionals_match_brute_force(self):
        rng = np.random.default_rng(5)
        tab = rng.normal(size=(3, 3))
        model = CoefficientModel(d=2, family="tabulated", table=tab)
        f = tail_functionals(model, n=4, m=2)
        for k in [(0, 0), (1, 2), (2, 2)]:
            expect = math.sqrt(float(np.sum(tab[k[0] :, k[1] :] ** 2)))
            assert f.a_at(k) == pytest.approx(expect, abs=1e-14)
        assert f.b_m**2 + box_mass(model, 2) == pytest.approx(f.total_sq, abs=1e-14)

    def test_truncated_pair_sum(self, geometric_half):
        # both k and k+1 inside [0, 3): 2^0*2^-1 + 2^-1*2^-2
        assert pair_weight_sum_truncated(geometric_half, [1], 3) == pytest.approx(
            0.5 + 0.125, abs=1e-15
        )


class TestDecayWindow:
    def test_reference_triple(self):
        rep = check_decay_window(2, 3.0, 1.0)
        assert rep.passed
        assert rep.delta_interval == pytest.approx((1.0 / 3.0, 0.5))
        assert rep.delta_star == pytest.approx(5.0 / 12.0)
        assert not check_decay_window(1, 0.8, 0.3).passed  # beta <= d
        assert not check_decay_window(2, 3.0, 1.3).passed  # gamma >= 6/5

    def test_boundary_values_fail(self):
        # conditions are strict; exact rationals sit exactly on the boundary
        # (the float 1.2 is slightly below 6/5 and legitimately passes)
        from fractions import Fraction

        assert not check_decay_window(2, 2.0, 0.5).passed  # beta == d
        assert not check_decay_window(2, 3.0, Fraction(6, 5)).passed
        assert check_decay_window(2, 3.0, 1.2).passed

    @given(
        d=st.integers(min_value=1, max_value=3),
        beta=st.floats(min_value=0.2, max_value=8.0),
        gamma=st.floats(min_value=0.05, max_value=3.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_pass_iff_interval_nonempty(self, d, beta, gamma):
        from fractions import Fraction

        rep = check_decay_window(d, beta, gamma)
        # exact-rational interval: pass iff nonempty
        fb, fg, fd = Fraction(beta), Fraction(gamma), Fraction(d)
        lo = fg / fb
        hi = min(fg / fd, 1 - fg / fd)
        assert rep.passed == (lo < hi)
        if rep.passed:
            assert rep.details["interval_lo"] <= rep.delta_star <= rep.details["interval_hi"]
            if rep.details["interval_hi"] - rep.details["interval_lo"] > 1e-9:
                assert rep.details["interval_lo"] < rep.delta_star < rep.details["interval_hi"]


class TestHallin:
    def test_reference_triple(self):
        a = check_hallin(1, 5.0, 0.3)
        assert a.passed and a.details["exponent_ratio"] == pytest.approx(3.0)
        b = check_hallin(1, 5.0, 0.4)
        assert not b.passed
        assert b.details["window_pass"]
        assert b.details["window_gamma_bound"] == pytest.approx(4.5 / 5.5)
        c = check_hallin(1, 3.0, 0.1)
        assert not c.passed and c.details["window_pass"]

    def test_undefined_exponent_is_diagnosed(self):
        rep = check_hallin(1, 2.0, 0.1)  # 2q-1-4d = -1
        assert not rep.passed
        assert rep.details["exponent_defined"] is False


class TestQSum:
    def test_geometric_converges(self, geometric_half):
        rep = check_machkouri_qsum(geometric_half, 2.5, 128)
        assert rep.verdict == "pass"
        assert rep.details["increments"][-1] < 1e-12
        # value against direct summation
        k = np.arange(129, dtype=float)
        direct = float(np.sum(k**2.5 * 0.5**k))
        assert rep.details["partial_sums"][-1] == pytest.approx(direct, rel=1e-12)

    def test_divergent_power_decay_fails(self):
        slow = CoefficientModel(d=1, family="power_decay", q=1.2)
        rep = check_machkouri_qsum(slow, 2.5, 256)
        assert rep.verdict in ("fail", "inconclusive")
        inc = rep.details["increments"]
        assert inc[-1] > inc[0]

    def test_finite_support_exact(self, identity_weights):
        rep = check_machkouri_qsum(identity_weights, 7.0, 64)
        assert rep.verdict == "pass"
        assert rep.details["partial_sums"][-1] == 0.0  # |0|^q * a_0 contributes nothing


class TestScheduleLimits:
    def test_window_regime_passes(self, power_d2):
        bw = BandwidthSchedule(d=2, gamma=1.0)
        rep = check_condition_c(power_d2, bw, 5.0 / 12.0, [16, 32, 64, 128])
        assert rep.passed
        assert rep.verdict == "pass (window)"
        # frozen sequence for m^d * b (exact integers: m_n = 3,4,5,7)
        c3 = rep.details["sequences"]["m_vol_times_b"]["values"]
        assert c3 == pytest.approx([9.0 / 16, 16.0 / 32, 25.0 / 64, 49.0 / 128])

    def test_residual_sequence_against_shell_oracle(self, power_d2):
        bw = BandwidthSchedule(d=2, gamma=1.0)
        rep = check_condition_c(power_d2, bw, 5.0 / 12.0, [16, 32, 64, 128])
        c2 = rep.details["sequences"]["residual_over_b"]["values"]
        for row, val in zip(rep.grid_rows, c2):
            m, n = row["m_n"], row["n"]
            shells = sum(
                (2 * s + 1) * (1.0 + s) ** -8.0 for s in range(m, 6000)
            )
            assert val == pytest.approx(math.sqrt(shells) * n, rel=1e-6)

    def test_identity_weights_pass_inside_window(self, identity_weights):
        for gamma in (0.2, 0.5):
            bw = BandwidthSchedule(d=1, gamma=gamma)
            rep = check_condition_c(identity_weights, bw, gamma / 2.0, [16, 32, 64, 128])
            assert rep.passed
            assert rep.details["sequences"]["residual_over_b"]["values"] == [0.0] * 4

    def test_empty_window_fails(self, power_d2):
        bw = BandwidthSchedule(d=2, gamma=1.3)
        for delta in (0.1, 0.38, 0.45):
            rep = check_condition_c(power_d2, bw, delta, [16, 32, 64, 128])
            assert not rep.passed

    def test_rejects_bad_delta(self, power_d2):
        bw = BandwidthSchedule(d=2, gamma=1.0)
        with pytest.raises(ValueError):
            check_condition_c(power_d2, bw, 1.5, [16, 32, 64])


class TestSerialization:
    @given(
        st.sampled_from(["geometric", "power_decay", "finite_support"]),
        st.integers(min_value=1, max_value=2),
    )
    @settings(max_examples=20, deadline=None)
    def test_config_round_trip(self, family, d):
        if family == "geometric":
            model = CoefficientModel(d=d, family=family, ratio=0.4)
        elif family == "power_decay":
            model = CoefficientModel(d=d, family=family, q=3.5, scale=2.0)
        else:
            model = CoefficientModel(
                d=d, family=family, table=np.ones((2,) * d), beta=4.0
            )
        back = model_from_config(model.to_config())
        assert back.family == model.family and back.d == model.d
        assert coeff_box(back, 3) == pytest.approx(coeff_box(model, 3))
