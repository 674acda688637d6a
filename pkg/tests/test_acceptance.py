"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (shown even when output is
captured) and then asserts the outcome at the criterion's own tolerance.
"""

import pytest

from pcmwall.verification import CHECKS, check_periodic_oracle, get_check, run_check

CRITERIA = [
    (1, "sinusoid-fidelity"),
    (2, "periodic-oracle"),
    (3, "stefan"),
    (4, "energy-conservation"),
    (5, "calibrated-metrics"),
    (6, "incomplete-crystallization"),
    (7, "hotplate-plateau"),
    (8, "determinism-roundtrip"),
    (9, "order-of-accuracy"),
]


def report(capsys, number, result):
    with capsys.disabled():
        print(f"\n[criterion {number}] {result.line()}")


@pytest.mark.parametrize("number, name", CRITERIA, ids=[n for _, n in CRITERIA])
def test_criterion(number, name, capsys):
    result = run_check(get_check(name))
    report(capsys, number, result)
    assert result.passed, result.detail


def test_every_check_is_a_criterion():
    assert [c.name for c in CHECKS] == [n for _, n in CRITERIA]


def test_harness_detects_conductivity_perturbation(capsys):
    # a 10 % conductivity error in the simulated slab must fail the oracle check
    result = run_check(get_check("periodic-oracle"), lambda: check_periodic_oracle(1.1))
    report(capsys, "2 self-test", result)
    assert not result.passed
