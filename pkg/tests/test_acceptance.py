"""The twelve acceptance criteria at their stated tolerances.

Each criterion prints one ``[PASS]`` or ``[FAIL]`` line; the same checks
back ``mvcate verify``.
"""

from __future__ import annotations

import pytest

from mvcate.harness.checks import CRITERIA, run_check

SLOW = {5, 6, 7, 8}


@pytest.mark.parametrize(
    "number",
    [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n for n in sorted(CRITERIA)],
    ids=lambda n: f"criterion_{n:02d}",
)
def test_criterion(number, capsys):
    result = run_check(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
