"""One test per acceptance criterion; each prints a PASS/FAIL line with its measured values."""

import json

import pytest

from conftest import ACCEPTANCE_LINES
from netlearn.verify import CHECKS


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    result = CHECKS[number]()
    ACCEPTANCE_LINES.append(result.line())
    print(result.line())
    assert result.passed, json.dumps(result.to_dict(), default=str, indent=1)[:4000]
