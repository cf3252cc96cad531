import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from docscribe.orthography import Alphabet


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_criterion_", "")
    outcome = "PASS" if report.passed else "FAIL"
    sys.stderr.write(f"[acceptance] {name}: {outcome}\n")

# the 3-sentence corpus every KN test builds on
KN_FIXTURE_CORPUS = [["A", "B"], ["A", "C"], ["B", "A"]]


@pytest.fixture(scope="session")
def tiny_alphabet():
    """Two-grapheme alphabet: V = 4 with blank and separator."""
    return Alphabet(graphemes=("A", "B"))


@pytest.fixture(scope="session")
def toy_alphabet():
    """Alphabet for the toy-language end-to-end runs."""
    return Alphabet(graphemes=("A", "B", "C", "D", "E", "F", "G", "H"))


@pytest.fixture(scope="session")
def cedilla_alphabet():
    """Letters with and without combining cedilla, as the target
    orthography mixes them."""
    return Alphabet(graphemes=("C", "Ç", "S", "T", "E", "N"))
