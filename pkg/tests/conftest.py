import sys
from pathlib import Path

import pytest

# Make the shared oracle helpers importable from every test module.
sys.path.insert(0, str(Path(__file__).parent))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.module.__name__ == "test_acceptance":
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE {verdict}] {item.name}")
