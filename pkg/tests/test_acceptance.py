"""Acceptance criteria at full scale, one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; each line is printed to the
terminal even when output capture is on.
"""

import pytest

from factorable import suites


def _first(name):
    return lambda: next(c for c in suites.criterion_factorization() if c.name.startswith(name))


CRITERIA = {
    "C1": _first("C1"),
    "C2": _first("C2"),
    "C3": _first("C3"),
    "C4": suites.criterion_shape,
    "C5": suites.criterion_tails,
    "C6": suites.criterion_entropy,
    "C7": suites.criterion_kr,
    "C8": suites.criterion_v,
    "C9": suites.criterion_rectangle,
    "C10": suites.criterion_heavy_tail,
    "C11": suites.criterion_micro,
}


@pytest.mark.parametrize("key", list(CRITERIA))
def test_criterion(key, capsys):
    result = CRITERIA[key]()
    with capsys.disabled():
        print(f"\n{result.line()}")
    assert result.status == suites.PASS, result.reason
