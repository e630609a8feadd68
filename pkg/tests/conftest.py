import sys
from pathlib import Path

# Let test modules import the shared oracle helpers as plain modules.
sys.path.insert(0, str(Path(__file__).parent))


def pytest_runtest_logreport(report):
    # one visible pass/fail line per shipping criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1].split("[")[0]
        verdict = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {verdict}", flush=True)
