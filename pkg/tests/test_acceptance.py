"""The eleven acceptance criteria at their pinned tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line, also visible without ``-s``.
"""
import pytest

from piezobeam.acceptance import format_line, run_one

# wall-clock budget per criterion [s]; the table's budget is the sum of 3..6
BUDGET = {1: 60, 2: 5, 3: 120, 4: 60, 5: 30, 6: 120, 7: 10, 8: 60, 9: 5, 10: 120}
BUDGET[11] = sum(BUDGET[k] for k in (3, 4, 5, 6))


@pytest.fixture(scope="module")
def cache():
    return {}


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(number, cache, capsys):
    res = run_one(number, cache)
    with capsys.disabled():
        print("\n" + format_line(res))
    assert res.seconds < BUDGET[number], f"took {res.seconds:.1f} s"
    assert res.passed, res.detail
