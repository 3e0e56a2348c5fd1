"""Release gate: the nine verification criteria, one test each.

Every tolerance lives in resonance_lab.verify next to the check it
belongs to; these tests only assert the outcome, so `pytest -v` prints
one pass/fail line per criterion and the CLI `verify` subcommand runs
the identical battery.
"""

import json

from resonance_lab import verify


def _run(fn):
    out = fn()
    assert out["passed"], json.dumps(
        {k: v for k, v in out.items() if k != "passed"},
        default=str, indent=2)
    return out


def test_criterion_1_ladder_golden_table():
    # exact rational sweep must also be fast: it guards interactive use
    out = verify._timed(verify.criterion_1_ladder_golden_table)
    assert out["passed"], out["failures"]
    assert out["seconds"] < 1.0


def test_criterion_2_exact_checkpoint_values():
    _run(verify.criterion_2_reference_points)


def test_criterion_3_spectral_oracle_equivalence():
    out = _run(verify.criterion_3_spectral_oracles)
    assert out["worst_random_rel_error"] <= 1e-8
    assert out["square_well_rel_error"] < 5e-4


def test_criterion_4_comparison_theorem_sweep():
    out = _run(verify.criterion_4_comparison)
    assert out["ordering_violations"] == 0
    assert out["worst_shift_error"] <= 1e-12


def test_criterion_5_brezis_lieb_pointwise_bound():
    out = _run(verify.criterion_5_brezis_lieb)
    assert out["violations"] == 0
    assert out["trials"] == 100_000


def test_criterion_6_hypothesis_battery():
    out = _run(verify.criterion_6_hypothesis_battery)
    for target, flagged in out["violation_flags"].items():
        assert flagged == [target]


def test_criterion_7_solution_branch_to_the_threshold():
    out = _run(verify.criterion_7_branch)
    assert out["drift"] < 0.05


def test_criterion_8_nonexistence_probe():
    out = _run(verify.criterion_8_nonexistence)
    assert out["collapsed"] == 50
    assert out["witnesses_in_control"] >= 1


def test_criterion_9_gradient_consistency_order():
    out = _run(verify.criterion_9_gradient_consistency)
    assert 1.8 <= out["median_order"] <= 2.2
