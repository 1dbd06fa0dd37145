import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: cross-checks against mpmath or long runs")
    config.addinivalue_line("markers", "acceptance: spec acceptance criteria")
