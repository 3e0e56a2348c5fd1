"""End-to-end verification battery.

One function per release criterion; each returns a plain dict with a
"passed" flag and enough detail to diagnose a failure from the report
alone.  The CLI `verify` subcommand and the release test suite both call
these, so the gate is defined in exactly one place.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .ladder import (
    LadderCase,
    RegularityClass,
    classify_case,
    closed_form_exponent,
    plan_ladder,
)
from .model import (
    NonlinearitySpec,
    PotentialSpec,
    Well,
    brezis_lieb_pointwise_gap,
    build_example51,
    check_hypotheses,
    zero_nonlinearity,
)
from .operator import (
    Grid,
    assemble,
    compare_spectra,
    dense_spectrum,
    lowest_eigenpairs,
)
from .solve import (
    collapse_threshold,
    continue_branch,
    eigenvector_seed,
    energy,
    energy_identity_check,
    nonexistence_probe,
    residual,
)

THREE_STATE_WELL = PotentialSpec(
    sigma0=0.0,
    wells=(Well("square", depth=16.0, radius=1.0, center=(0.0,)),),
    p=2.0)


def branch_scenario(points: int = 1999):
    """The reference setup: square well with exactly three bound states,
    logarithmic nonlinearity with slope -5 at the origin, so that the
    level lambda + g0 sits between the second and third eigenvalue for
    lambda near the threshold."""
    grid = Grid(1, 20.0, points)
    return grid, assemble(grid, THREE_STATE_WELL), build_example51(5.0)


def single_violation_specs() -> dict:
    """Seven nonlinearities, each failing exactly one battery hypothesis.

    Derivative and primitive evaluators are independent declarations, so a
    spec may supply surrogates (or omit them) to keep the other checks
    green; consistency between g, g', and G is a separate check and not
    part of the battery.
    """
    e51 = build_example51(1.0)

    def lorentz(t):
        t = np.asarray(t, float)
        return -t / (1.0 + t * t)

    def lorentz_prime(t):
        # positive for |t| > 1, yet stays strictly above the chord slope:
        # the gap is -2t^2/(1+t^2)^2, nonzero even where exp tails would
        # have underflowed
        t = np.asarray(t, float)
        return -(1.0 - t * t) / (1.0 + t * t) ** 2

    def lorentz_primitive(t):
        t = np.asarray(t, float)
        return -0.5 * np.log1p(t * t)

    def tiny_positive(t):
        t = np.asarray(t, float)
        return 0.5 * t * np.exp(-t * t)

    return {
        # linear decay at infinity keeps the chord slope at -1 forever
        "g1": NonlinearitySpec(
            g=lambda t: -np.asarray(t, float), g0=-1.0, beta=1.0,
            gprime=lambda t: -0.5 * np.ones_like(np.asarray(t, float)),
            G=lambda t: -np.abs(np.asarray(t, float)), label="linear"),
        # correct function, wrong declared slope at the origin
        "g2": NonlinearitySpec(g=e51.g, g0=-2.0, beta=e51.beta,
                               gprime=e51.gprime, G=e51.G,
                               label="misdeclared origin slope"),
        # wrong sign of g(t)/t; no derivative or primitive supplied, so
        # the checks entangled with the sign condition stay unchecked
        "g3": NonlinearitySpec(g=tiny_positive, g0=0.5, beta=0.5,
                               label="positive chord"),
        # the zero function turns the strict chord inequality into equality
        "g4": zero_nonlinearity(),
        # correct function, understated Lipschitz constant
        "g5": NonlinearitySpec(g=e51.g, g0=e51.g0, beta=0.5,
                               gprime=e51.gprime, G=e51.G,
                               label="understated beta"),
        # genuinely quadratic primitive surrogate
        "g7": NonlinearitySpec(g=e51.g, g0=e51.g0, beta=e51.beta,
                               gprime=e51.gprime,
                               G=lambda t: -0.1 * np.asarray(t, float) ** 2,
                               label="quadratic primitive"),
        # derivative turns positive beyond |t| = 1
        "g8": NonlinearitySpec(g=lorentz, g0=-1.0, beta=1.0,
                               gprime=lorentz_prime, G=lorentz_primitive,
                               label="rising derivative"),
    }


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    out["seconds"] = round(time.perf_counter() - t0, 3)
    return out


def criterion_1_ladder_golden_table() -> dict:
    """Closed forms, step counts, and parity identities over a dense
    sweep of dimensions and rational integrabilities."""
    failures = []
    for N in range(4, 42):
        lad = plan_ladder(N, v1_vanishes=True)
        for i, q in enumerate(lad.exponents):
            if q != closed_form_exponent(i, N, None, LadderCase.ZERO_V1):
                failures.append(("closed form", N, None, i))
        if lad.j0 is not None:
            pj, pj1 = lad.exponents[lad.j0], lad.exponents[lad.j0 + 1]
            k, odd = divmod(N, 2)
            if not odd:
                want = (Fraction(N, 4), Fraction(N, 2)) if k % 2 == 0 \
                    else (Fraction(N, 3), Fraction(N))
            else:
                want = (Fraction(2 * N, 5), Fraction(2 * N)) if k % 2 == 0 \
                    else (Fraction(2 * N, 7), Fraction(2 * N, 3))
            if (pj, pj1) != want:
                failures.append(("parity", N, None, lad.j0))
        if N >= 5:
            # multiplicative offsets keep the step counts moderate; p
            # approaching N/2 from above makes the ladder arbitrarily long
            ps = [N * Fraction(5 + j, 5) for j in range(1, 26)] \
                + [N * Fraction(26 + j, 52) for j in range(1, 26)]
            for p in ps:
                case = classify_case(N, p, False)
                lad = plan_ladder(N, p)
                for i, q in enumerate(lad.exponents):
                    if i <= (lad.j0 or 0) + 1 and q != closed_form_exponent(i, N, p, case):
                        failures.append(("closed form", N, p, i))
                # plan_ladder itself cross-checks floor-rule vs recurrence
    return {"criterion": 1, "name": "ladder golden table",
            "passed": not failures, "failures": failures[:10]}


def criterion_2_reference_points() -> dict:
    checks = {
        "N8_first_step": plan_ladder(8, v1_vanishes=True).exponents[1] == 4,
        "N5_p12_j0": plan_ladder(5, 12).j0 == 0,
        "N4_trivial": plan_ladder(4, 6).j0 is None,
        "N2_p2_lq_all": plan_ladder(2, 2).terminal is RegularityClass.LQ_ALL,
        "N5_p4_cb0": plan_ladder(5, 4).terminal is RegularityClass.CB0,
    }
    return {"criterion": 2, "name": "exact checkpoint values",
            "passed": all(checks.values()), "checks": checks}


def square_well_bound_states(depth: float, radius: float, count: int) -> list:
    """Bound-state energies of the 1D finite square well on the full
    line, by bisection on the even/odd matching conditions.  This shares
    no code with the stencil solver, which is the point."""
    import math

    levels = []
    branch = 0
    while len(levels) < count:
        lo = branch * math.pi / 2 / radius + 1e-12
        hi = min((branch + 1) * math.pi / 2 / radius,
                 math.sqrt(depth) / radius) - 1e-12
        if lo >= hi:
            raise ValueError("well holds fewer than %d bound states" % count)

        def match(q):
            kappa = math.sqrt(max(depth - q * q, 0.0))
            if branch % 2 == 0:
                return q * math.tan(q * radius) - kappa
            return -q / math.tan(q * radius) - kappa

        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if match(mid) < 0:
                a = mid
            else:
                b = mid
        q = 0.5 * (a + b)
        levels.append(q * q - depth)
        branch += 1
    return levels


def criterion_3_spectral_oracles(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    worst_rel = 0.0
    for _ in range(20):
        n = int(rng.integers(200, 900))
        k = int(rng.integers(3, 7))
        wells = tuple(
            Well("gaussian", depth=float(rng.uniform(1, 20)),
                 radius=float(rng.uniform(0.5, 3)),
                 center=(float(rng.uniform(-5, 5)),))
            for _ in range(rng.integers(1, 4)))
        pot = PotentialSpec(sigma0=float(rng.uniform(-1, 1)), wells=wells, p=2.0)
        op = assemble(Grid(1, 15.0, n), pot)
        it = lowest_eigenpairs(op, k).eigenvalues
        ref = dense_spectrum(op, k)[0]
        worst_rel = max(worst_rel, float(np.max(np.abs(it - ref) / np.abs(ref))))

    oracle = np.asarray(square_well_bound_states(16.0, 1.0, 3))
    g = Grid(1, 20.0, 999)
    mu_h = dense_spectrum(assemble(g, THREE_STATE_WELL), 3)[0]
    mu_h2 = dense_spectrum(assemble(g.refine(), THREE_STATE_WELL), 3)[0]
    extrapolated = (4 * mu_h2 - mu_h) / 3
    well_rel = float(np.max(np.abs(extrapolated - oracle) / np.abs(oracle)))
    return {"criterion": 3, "name": "spectral oracle equivalence",
            "passed": worst_rel <= 1e-8 and well_rel < 5e-4,
            "worst_random_rel_error": worst_rel,
            "square_well_rel_error": well_rel}


def criterion_4_comparison(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    g = Grid(1, 10.0, 80)
    violations = 0
    for _ in range(100):
        base = rng.uniform(-5, 0, g.ndof)
        bump = rng.uniform(0, 1, g.ndof) * (rng.random(g.ndof) < 0.3)
        if not np.any(bump > 0):
            bump[int(rng.integers(g.ndof))] = 0.5
        from .operator import DiscreteOperator
        op1 = DiscreteOperator(g, base)
        op2 = DiscreteOperator(g, base + bump)
        out = compare_spectra(op1, op2, 3, tol=1e-9)
        if not out["passed"]:
            violations += 1
    shift_err = 0.0
    for _ in range(10):
        base = rng.uniform(-5, 0, g.ndof)
        c = float(rng.uniform(0.1, 3))
        from .operator import DiscreteOperator
        w1 = dense_spectrum(DiscreteOperator(g, base), 4)[0]
        w2 = dense_spectrum(DiscreteOperator(g, base + c), 4)[0]
        shift_err = max(shift_err, float(np.max(np.abs(w2 - w1 - c))))
    return {"criterion": 4, "name": "comparison theorem sweep",
            "passed": violations == 0 and shift_err <= 1e-12,
            "ordering_violations": violations, "worst_shift_error": shift_err}


def criterion_5_brezis_lieb(seed: int = 0, trials: int = 100_000) -> dict:
    rng = np.random.default_rng(seed)
    betas = rng.uniform(0.01, 10, trials)
    phases = rng.uniform(0, 2 * np.pi, trials)
    freqs = rng.uniform(-1, 1, trials)
    a = rng.uniform(-100, 100, trials)
    b = rng.uniform(-100, 100, trials)
    violations = 0
    worst = -np.inf
    for i in range(trials):
        beta, om, ph = betas[i], freqs[i], phases[i]
        r = lambda s: beta * (np.sin(om * s + ph) - np.sin(ph))
        gap = brezis_lieb_pointwise_gap(r, beta, a[i], b[i])
        excess = abs(gap) - 2 * beta * abs(a[i] - b[i]) * abs(b[i])
        worst = max(worst, excess)
        if excess > 1e-9:
            violations += 1
    return {"criterion": 5, "name": "pointwise bracket bound",
            "passed": violations == 0, "trials": trials,
            "violations": violations, "worst_excess": float(worst)}


def criterion_6_hypothesis_battery() -> dict:
    base = check_hypotheses(build_example51(1.0))
    base_ok = base.passed() == ["g1", "g2", "g3", "g4", "g5", "g7", "g8"] \
        and base.failed() == []
    flags = {}
    for target, spec in single_violation_specs().items():
        flags[target] = check_hypotheses(spec).failed()
    singles_ok = all(got == [target] for target, got in flags.items())
    return {"criterion": 6, "name": "hypothesis battery",
            "passed": base_ok and singles_ok,
            "example_passes": base_ok, "violation_flags": flags}


def criterion_7_branch() -> dict:
    grid, op, nl = branch_scenario()
    br = continue_branch(op, nl, -0.2, 0.0, 40, eigenvector_seed(op, 2, 4.0))
    checks = {
        "reached": br.outcome == "reached_end" and len(br.states) == 40,
        "residuals": all(s.residual < 1e-9 for s in br.states),
        "morse_3_3": all((s.morse_m, s.morse_M) == (3, 3) for s in br.states),
        "margin": all(s.margin > 1e-6 for s in br.states),
        "energy_identity": all(energy_identity_check(s, op, nl) < 1e-6
                               for s in br.states),
        "positive_energy": all(s.energy > 0 for s in br.states),
    }
    fine_grid, fine_op, _ = branch_scenario(2 * 1999 + 1)
    fine = continue_branch(fine_op, nl, -0.2, 0.0, 40,
                           eigenvector_seed(fine_op, 2, 4.0))
    drift = abs(fine.sup_linf - br.sup_linf) / br.sup_linf
    checks["linf_drift"] = fine.outcome == "reached_end" and drift < 0.05
    return {"criterion": 7, "name": "solution branch to the threshold",
            "passed": all(checks.values()), "checks": checks,
            "sup_linf": br.sup_linf, "refined_sup_linf": fine.sup_linf,
            "drift": drift}


def criterion_8_nonexistence() -> dict:
    grid, op, strong = branch_scenario(999)
    weak = build_example51(2.0)
    probe = nonexistence_probe(op, weak, -0.1, 50, 3, seed=1)
    control = nonexistence_probe(op, strong, -0.1, 10, 3, seed=2)
    checks = {
        "premises_hold": probe["premise"]["chord_strictly_above_g0"]
        and probe["premise"]["level_above_mu_k"],
        "all_collapse": probe["consistent_with_nonexistence"],
        "control_in_existence_regime": not control["premise"]["level_above_mu_k"],
        "control_finds_solution": len(control["counter_witnesses"]) >= 1,
    }
    return {"criterion": 8, "name": "nonexistence probe",
            "passed": all(checks.values()), "checks": checks,
            "collapsed": probe["collapsed"],
            "witnesses_in_control": len(control["counter_witnesses"])}


def criterion_9_gradient_consistency(seed: int = 0) -> dict:
    grid, op, nl = branch_scenario(599)
    rng = np.random.default_rng(seed)
    lam = -0.3
    orders = []
    for _ in range(100):
        u = rng.standard_normal(grid.ndof)
        v = rng.standard_normal(grid.ndof)
        exact = grid.inner(residual(op, nl, lam, u), v)
        errs = []
        for t in (1e-2, 1e-3):
            fd = (energy(op, nl, lam, u + t * v)
                  - energy(op, nl, lam, u - t * v)) / (2 * t)
            errs.append(abs(fd - exact))
        orders.append(np.log10(errs[0] / max(errs[1], 1e-300)))
    orders = np.asarray(orders)
    median = float(np.median(orders))
    share = float(np.mean((orders > 1.8) & (orders < 2.2)))
    return {"criterion": 9, "name": "gradient consistency order",
            "passed": 1.8 <= median <= 2.2 and share >= 0.9,
            "median_order": median, "share_in_band": share}


ALL_CRITERIA = (
    criterion_1_ladder_golden_table,
    criterion_2_reference_points,
    criterion_3_spectral_oracles,
    criterion_4_comparison,
    criterion_5_brezis_lieb,
    criterion_6_hypothesis_battery,
    criterion_7_branch,
    criterion_8_nonexistence,
    criterion_9_gradient_consistency,
)


def run_all() -> list:
    return [_timed(fn) for fn in ALL_CRITERIA]
