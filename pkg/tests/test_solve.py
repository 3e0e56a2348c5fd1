import numpy as np
import pytest

from resonance_lab.model import build_example51, zero_nonlinearity
from resonance_lab.operator import Grid, assemble, dense_spectrum, lowest_eigenpairs
from resonance_lab.solve import (
    NonConvergenceError,
    collapse_threshold,
    continue_branch,
    eigenvector_seed,
    energy,
    energy_identity_check,
    newton_solve,
    nonexistence_probe,
    residual,
)
from tests.test_operator import WELL

# coarse version of the three-bound-state well, fast enough for every test
GRID = Grid(1, 20.0, 599)
OP = assemble(GRID, WELL)
ZERO = zero_nonlinearity()
NL = build_example51(5.0)


@pytest.fixture(scope="module")
def spectrum():
    return lowest_eigenpairs(OP, 3)


class TestResidual:
    def test_zero_is_a_root(self):
        F = residual(OP, NL, -0.3, np.zeros(GRID.ndof))
        assert np.all(F == 0.0)

    def test_linear_eigenpair_is_a_root(self, spectrum):
        psi = spectrum.eigenvectors[:, 1]
        F = residual(OP, ZERO, spectrum.eigenvalues[1], psi)
        assert GRID.norm(F) < 1e-9

    def test_spectral_gap_lower_bound(self):
        w, _ = dense_spectrum(OP)
        lam = 0.5 * (w[0] + w[1])  # strictly inside the first gap
        gap = np.min(np.abs(w - lam))
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.standard_normal(GRID.ndof)
            assert GRID.norm(residual(OP, ZERO, lam, u)) >= gap * GRID.norm(u) - 1e-9


class TestEnergy:
    def test_zero_state_zero_energy(self):
        assert energy(OP, NL, -0.3, np.zeros(GRID.ndof)) == 0.0

    def test_quadratic_form_on_an_eigenvector(self, spectrum):
        mu, psi = spectrum.eigenvalues[0], spectrum.eigenvectors[:, 0]
        lam = -0.3
        assert energy(OP, ZERO, lam, psi) == pytest.approx((mu - lam) / 2, abs=1e-9)

    def test_gradient_matches_central_difference_at_second_order(self):
        rng = np.random.default_rng(4)
        orders = []
        for _ in range(20):
            u = rng.standard_normal(GRID.ndof)
            v = rng.standard_normal(GRID.ndof)
            exact = GRID.inner(residual(OP, NL, -0.3, u), v)
            errs = []
            for t in (1e-3, 1e-4):
                fd = (energy(OP, NL, -0.3, u + t * v)
                      - energy(OP, NL, -0.3, u - t * v)) / (2 * t)
                errs.append(abs(fd - exact))
            if errs[0] > 1e-10:  # below that, round-off hides the order
                orders.append(np.log10(errs[0] / max(errs[1], 1e-16)))
        assert np.median(orders) == pytest.approx(2.0, abs=0.4)

    def test_monotone_in_lambda_by_the_exact_identity(self):
        rng = np.random.default_rng(5)
        u = rng.standard_normal(GRID.ndof)
        l1, l2 = -0.4, -0.1
        diff = energy(OP, NL, l2, u) - energy(OP, NL, l1, u)
        assert diff == pytest.approx(-(l2 - l1) / 2 * GRID.inner(u, u), rel=1e-12)
        assert diff < 0


class TestNewton:
    def test_linear_offspectrum_collapses_to_zero(self, spectrum):
        lam = 0.5 * (spectrum.eigenvalues[0] + spectrum.eigenvalues[1])
        rng = np.random.default_rng(6)
        state = newton_solve(OP, ZERO, lam, rng.standard_normal(GRID.ndof))
        assert state.converged
        assert state.l2 < collapse_threshold(GRID)

    def test_zero_seed_is_stationary(self):
        state = newton_solve(OP, NL, -0.1, np.zeros(GRID.ndof))
        assert state.converged and state.iterations == 0
        assert state.l2 == 0.0

    def test_small_seed_falls_into_the_trivial_basin(self):
        state = newton_solve(OP, NL, -0.2, eigenvector_seed(OP, 2, 0.5))
        assert state.l2 < collapse_threshold(GRID)
        # at zero the level lambda + g0 sits between mu_2 and mu_3
        assert (state.morse_m, state.morse_M) == (2, 2)

    def test_large_seed_finds_the_nontrivial_state(self):
        state = newton_solve(OP, NL, -0.2, eigenvector_seed(OP, 2, 4.0))
        assert state.converged and state.residual < 1e-9
        assert state.l2 > 1.0
        assert (state.morse_m, state.morse_M) == (3, 3)
        assert state.margin > 1e-6
        assert state.energy > 0

    def test_newton_agrees_with_an_independent_solver(self):
        # MINPACK's Powell hybrid method shares nothing with the damped
        # Newton loop; landing on the same state from the same seed is a
        # genuine cross-check
        from scipy.optimize import root

        lam = -0.2
        seed = eigenvector_seed(OP, 2, 4.0)
        sol = root(lambda u: residual(OP, NL, lam, u), seed,
                   jac=lambda u: (OP.matrix().toarray()
                                  - np.diag(lam + np.asarray(NL.gprime(u)))),
                   method="hybr", tol=1e-12)
        assert sol.success
        newton = newton_solve(OP, NL, lam, seed)
        assert GRID.norm(sol.x - newton.u) < 1e-8

    def test_nonconvergence_carries_the_best_state(self):
        with pytest.raises(NonConvergenceError) as err:
            newton_solve(OP, NL, -0.2, eigenvector_seed(OP, 2, 4.0),
                         tol=1e-10, max_iter=1)
        assert err.value.best_state is not None
        assert not err.value.best_state.converged


class TestEnergyIdentity:
    def test_zero_state_has_zero_deviation(self):
        state = newton_solve(OP, NL, -0.1, np.zeros(GRID.ndof))
        assert energy_identity_check(state, OP, NL) == 0.0

    def test_converged_state_deviation_tiny(self):
        state = newton_solve(OP, NL, -0.2, eigenvector_seed(OP, 2, 4.0))
        assert energy_identity_check(state, OP, NL) < 1e-6
        assert energy_identity_check(state, OP, NL) <= (
            state.residual * state.l2 + 1e-8)

    def test_random_state_deviation_large(self):
        rng = np.random.default_rng(8)
        u = rng.standard_normal(GRID.ndof)
        fake = newton_solve(OP, NL, -0.2, eigenvector_seed(OP, 2, 4.0))
        loose = fake.__class__(**{**fake.__dict__, "u": u,
                                  "energy": energy(OP, NL, -0.2, u)})
        assert energy_identity_check(loose, OP, NL) > 1.0


class TestContinuation:
    def test_trivial_branch_stays_at_zero(self):
        br = continue_branch(OP, ZERO, -0.2, 0.0, 10, np.zeros(GRID.ndof))
        assert br.outcome == "reached_end"
        assert br.sup_linf == 0.0

    def test_branch_reaches_the_threshold_nondegenerate(self):
        br = continue_branch(OP, NL, -0.2, 0.0, 20,
                             eigenvector_seed(OP, 2, 4.0))
        assert br.outcome == "reached_end"
        assert len(br.states) == 20
        lams = [s.lam for s in br.states]
        assert lams == sorted(lams) and lams[-1] == 0.0
        for s in br.states:
            assert s.residual < 1e-9
            assert (s.morse_m, s.morse_M) == (3, 3)
            assert s.margin > 1e-6
            assert s.energy > 0
        assert br.max_step_change < 0.1

    def test_branch_continues_past_the_threshold(self):
        br = continue_branch(OP, NL, -0.05, 0.05, 10,
                             eigenvector_seed(OP, 2, 4.0))
        assert br.outcome == "reached_end"
        assert all(s.margin > 1e-6 for s in br.states)

    def test_shrinking_nonlinearity_collapses_the_branch(self):
        # with the chord everywhere above g0 and the level above mu_3,
        # only the zero solution remains; the branch must notice
        weak = build_example51(2.0)
        br = continue_branch(OP, weak, -0.2, 0.0, 10,
                             eigenvector_seed(OP, 2, 4.0))
        assert br.outcome == "collapsed_to_zero"


class TestNonexistenceProbe:
    def test_zero_nonlinearity_fails_the_strict_premise(self):
        out = nonexistence_probe(OP, ZERO, -0.1, 1, 3)
        assert out["premise"]["chord_strictly_above_g0"] is False
        assert out["consistent_with_nonexistence"] is False

    def test_supercritical_level_collapses_every_start(self):
        weak = build_example51(2.0)
        out = nonexistence_probe(OP, weak, -0.1, 25, 3, seed=1)
        assert out["premise"]["level_above_mu_k"]
        assert out["collapsed"] + out["nonconverged"] == 25
        assert out["consistent_with_nonexistence"]

    def test_positive_control_finds_solutions(self):
        out = nonexistence_probe(OP, NL, -0.1, 10, 3, seed=2)
        assert not out["premise"]["level_above_mu_k"]
        assert len(out["counter_witnesses"]) >= 1
        for s in out["counter_witnesses"]:
            assert s.l2 > collapse_threshold(GRID)
