from fractions import Fraction as F

import pytest

from resonance_lab.ladder import (
    AdmissibilityError,
    LadderCase,
    LadderOverflowError,
    RegularityClass,
    UnboundConstantError,
    ConstantChain,
    ConstantFactor,
    classify_case,
    closed_form_exponent,
    compute_j0,
    crossing_ratio,
    evaluate_chain,
    next_exponent,
    plan_ladder,
)


class TestCaseSelection:
    def test_each_admissible_input_hits_exactly_one_case(self):
        assert classify_case(8, None, True) is LadderCase.ZERO_V1
        assert classify_case(2, 2, False) is LadderCase.LOW_DIM
        assert classify_case(6, 10, False) is LadderCase.INTEGRABLE_HIGH_P
        assert classify_case(6, 4, False) is LadderCase.INTEGRABLE_MID_P
        # boundary p = N goes to the mid case
        assert classify_case(6, 6, False) is LadderCase.INTEGRABLE_MID_P

    @pytest.mark.parametrize("N,p", [(3, 4), (4, 2), (5, F(5, 2)), (0, 2)])
    def test_inadmissible_pairs_rejected(self, N, p):
        with pytest.raises(AdmissibilityError):
            classify_case(N, p, False)


class TestNextExponent:
    def test_zero_v1_n8_first_step_is_four(self):
        assert next_exponent(2, None, 8, LadderCase.ZERO_V1) == 4

    def test_high_p_hand_checked(self):
        assert next_exponent(2, 10, 6, LadderCase.INTEGRABLE_HIGH_P) == F(30, 13)

    def test_mid_p_hand_checked(self):
        assert next_exponent(2, 4, 6, LadderCase.INTEGRABLE_MID_P) == F(12, 5)

    def test_monotone_in_all_cases(self):
        assert next_exponent(2, None, 9, LadderCase.ZERO_V1) > 2
        assert next_exponent(2, 7, 6, LadderCase.INTEGRABLE_HIGH_P) > 2
        assert next_exponent(2, 5, 6, LadderCase.INTEGRABLE_MID_P) > 2

    def test_overflow_signals_violated_precondition(self):
        with pytest.raises(LadderOverflowError):
            next_exponent(5, None, 8, LadderCase.ZERO_V1)  # q >= N/2
        with pytest.raises(LadderOverflowError):
            next_exponent(7, 10, 6, LadderCase.INTEGRABLE_HIGH_P)  # q >= N
        with pytest.raises(LadderOverflowError):
            next_exponent(4, 5, 6, LadderCase.INTEGRABLE_MID_P)  # q > N/2


class TestStepCount:
    def test_n5_large_p_needs_no_iteration(self):
        assert compute_j0(5, 12, LadderCase.INTEGRABLE_HIGH_P) == 0

    def test_n4_is_trivial(self):
        assert compute_j0(4, 6, LadderCase.INTEGRABLE_HIGH_P) is None
        assert compute_j0(4, 3, LadderCase.INTEGRABLE_MID_P) is None
        assert compute_j0(4, None, LadderCase.ZERO_V1) is None

    def test_n6_p10_takes_two_steps(self):
        # iterate: 2, 30/13, 30/11, 10/3; first value >= 3 has index 3
        assert compute_j0(6, 10, LadderCase.INTEGRABLE_HIGH_P) == 2

    def test_low_dimension_rejected(self):
        with pytest.raises(AdmissibilityError):
            compute_j0(3, 4, LadderCase.INTEGRABLE_HIGH_P)

    @pytest.mark.parametrize("N", range(5, 42))
    def test_floor_rule_matches_iteration_zero_v1(self, N):
        # compute_j0 raises internally if its two routes disagree
        j0 = compute_j0(N, None, LadderCase.ZERO_V1)
        if N == 8:
            assert j0 == 0
        assert j0 is None or j0 >= 0


class TestPlanLadder:
    def test_n12_vanishing_part(self):
        lad = plan_ladder(12, v1_vanishes=True)
        assert lad.exponents == (F(2), F(3), F(6))
        assert lad.j0 == 1
        assert lad.terminal is RegularityClass.CB1
        assert lad.tail_exponent == 9  # crossing landed on N/2 = 6 exactly

    def test_n13_vanishing_part(self):
        lad = plan_ladder(13, v1_vanishes=True)
        assert lad.exponents == (F(2), F(26, 9), F(26, 5), F(26))
        assert lad.j0 == 2
        assert lad.terminal is RegularityClass.CB1
        assert lad.tail_exponent is None

    def test_planar_critical_case_gives_lq_only(self):
        lad = plan_ladder(2, 2)
        assert lad.terminal is RegularityClass.LQ_ALL

    def test_mid_p_gives_continuous_bounded(self):
        lad = plan_ladder(5, 4)
        assert lad.terminal is RegularityClass.CB0

    def test_exponents_strictly_increasing_and_cross_once(self):
        for N, p, vanish in [(9, None, True), (16, None, True), (7, 20, False),
                             (10, 8, False), (6, F(13, 2), False)]:
            lad = plan_ladder(N, p, vanish)
            half = F(N, 2)
            qs = lad.exponents
            assert all(a < b for a, b in zip(qs, qs[1:]))
            if lad.j0 is not None:
                assert all(q < half for q in qs[: lad.j0 + 1])
                assert qs[lad.j0 + 1] >= half

    def test_deterministic(self):
        assert plan_ladder(11, 9) == plan_ladder(11, 9)

    def test_tail_exponent_in_open_interval(self):
        lad = plan_ladder(6, 4)  # crossing ratio is exactly 2 here
        assert lad.exponents[-1] == 3
        assert 3 < lad.tail_exponent < 4


class TestConstantChain:
    def test_identity_product(self):
        lad = plan_ladder(13, v1_vanishes=True)
        ones = {f.key(): 1.0 for f in lad.chain.factors}
        assert evaluate_chain(lad.chain, ones) == 1.0

    def test_three_factor_product(self):
        chain = ConstantChain((
            ConstantFactor("C", (2, F(2), 6), 2.0),
            ConstantFactor("gamma", (F(2), 6), 3.0),
            ConstantFactor("C0", (2, F(3), 6), 5.0),
        ))
        assert evaluate_chain(chain) == 30.0

    def test_n12_structural_count(self):
        lad = plan_ladder(12, v1_vanishes=True)
        kinds = lad.chain.kinds()
        assert len(lad.chain) == 7
        assert kinds["C"] + kinds["C_tilde"] == 3
        assert kinds["gamma"] == 3
        assert kinds["C0"] == 1

    def test_chain_length_no_tail(self):
        lad = plan_ladder(13, v1_vanishes=True)  # j0 = 2, no tail
        kinds = lad.chain.kinds()
        assert kinds["C"] == lad.j0 + 1
        assert kinds["gamma"] == lad.j0 + 2
        assert kinds["C0"] == 1

    def test_missing_binding_is_reported_by_name(self):
        lad = plan_ladder(12, v1_vanishes=True)
        with pytest.raises(UnboundConstantError) as err:
            evaluate_chain(lad.chain, {})
        assert "gamma" in str(err.value)

    def test_scaling_one_binding_scales_the_product(self):
        lad = plan_ladder(9, v1_vanishes=True)
        ones = {f.key(): 1.0 for f in lad.chain.factors}
        base = evaluate_chain(lad.chain, ones)
        key = lad.chain.factors[0].key()
        scaled = dict(ones, **{key: 7.5})
        assert evaluate_chain(lad.chain, scaled) == pytest.approx(7.5 * base)


class TestClosedFormAgreement:
    @pytest.mark.parametrize("N", range(4, 41))
    def test_recurrence_reproduces_closed_form(self, N):
        sweeps = []
        for num in range(2 * N + 1, 2 * N + 20):
            sweeps.append((F(num, 2), LadderCase.INTEGRABLE_HIGH_P if F(num, 2) > N
                           else LadderCase.INTEGRABLE_MID_P))
        for p, case in sweeps:
            q = F(2)
            i = 0
            half = F(N, 2)
            if case is LadderCase.INTEGRABLE_HIGH_P:
                bound = -(-N * p // (2 * (p - N)))  # ceil of the negation bound
            else:
                bound = crossing_ratio(N, p, case) + 2
            while q < half:
                assert q == closed_form_exponent(i, N, p, case)
                q = next_exponent(q, p, N, case)
                i += 1
                if i > bound:
                    pytest.fail("iteration failed to terminate within the step bound")

    @pytest.mark.parametrize("N", range(9, 42))
    def test_parity_table_zero_v1(self, N):
        lad = plan_ladder(N, v1_vanishes=True)
        j = lad.j0
        pj, pj1 = lad.exponents[j], lad.exponents[j + 1]
        if N % 2 == 0:
            k = N // 2
            if k % 2 == 0:
                assert (pj, pj1) == (F(N, 4), F(N, 2))
            else:
                assert (pj, pj1) == (F(N, 3), F(N))
        else:
            k = (N - 1) // 2
            if k % 2 == 0:
                assert (pj, pj1) == (F(2 * N, 5), F(2 * N))
            else:
                assert (pj, pj1) == (F(2 * N, 7), F(2 * N, 3))
