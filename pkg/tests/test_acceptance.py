"""Acceptance gate: the fourteen desk-scale criteria at their stated tolerances.

Each case prints one PASS/FAIL line (visible even under output capture).
The Monte Carlo cases (7, 8, 14) take about a minute each.
"""
import pytest

from fracscalar.selftest import CHECKS, run_check


@pytest.mark.parametrize(
    "number",
    [pytest.param(num, id=f"{num:02d}-{name.replace(' ', '-')}", marks=[pytest.mark.slow] if slow else []) for num, name, _, slow in CHECKS],
)
def test_criterion(number, capsys):
    result = run_check(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
