#!/usr/bin/env python3
"""
Test suite driver for the ECBF toolkit.
Runs the unit tests, validates the shipped config files and reports results.

Usage:
    python scripts/run_tests.py [--verbose] [--slow] [--unit-only] [--config-only]
"""

import os
import sys
import unittest
import argparse
import time
from datetime import datetime

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, PROJECT_ROOT)

# Define colors for terminal output
GREEN = '\033[92m'
RED = '\033[91m'
YELLOW = '\033[93m'
BLUE = '\033[94m'
ENDC = '\033[0m'
BOLD = '\033[1m'


def run_unittest_suite(verbose=False):
    """Run the standard unittest suite."""
    print(f"{BLUE}{BOLD}Running unittest suite...{ENDC}")
    import tests.conftest  # noqa: F401  registers the Hypothesis profiles outside pytest

    test_loader = unittest.TestLoader()
    test_suite = test_loader.discover(os.path.join(PROJECT_ROOT, 'tests'), pattern='test_*.py', top_level_dir=PROJECT_ROOT)
    test_runner = unittest.TextTestRunner(verbosity=2 if verbose else 1)
    result = test_runner.run(test_suite)

    return len(result.failures) == 0 and len(result.errors) == 0


def _check(name, loader):
    start_time = time.time()
    try:
        loader()
    except Exception as e:
        print(f"{RED}✗ {name} failed: {e}{ENDC}")
        return False
    print(f"{GREEN}✓ {name} loaded ({time.time() - start_time:.2f}s){ENDC}")
    return True


def run_config_validation():
    """Load every shipped config file through its production loader."""
    print(f"{BLUE}{BOLD}Running config validation...{ENDC}")

    from config.ecbf_config import DEFAULT_ROBOT_MODEL, DEFAULT_SCENARIO, FULL_GRID, GUIDED_SEARCH, TWO_LINK_MODEL
    from src.manipulator.model import load_robot_model
    from src.search.grid import load_grid
    from src.search.guided import load_guided_config
    from src.simulation.scenario import load_scenario

    checks = {
        os.path.basename(DEFAULT_ROBOT_MODEL): lambda: load_robot_model(DEFAULT_ROBOT_MODEL),
        os.path.basename(TWO_LINK_MODEL): lambda: load_robot_model(TWO_LINK_MODEL),
        os.path.basename(DEFAULT_SCENARIO): lambda: load_scenario(DEFAULT_SCENARIO),
        os.path.basename(FULL_GRID): lambda: load_grid(FULL_GRID),
        os.path.basename(GUIDED_SEARCH): lambda: load_guided_config(GUIDED_SEARCH)
    }
    return {name: _check(name, loader) for name, loader in checks.items()}


def main():
    """Main function to run all tests."""
    parser = argparse.ArgumentParser(description='Run the ECBF test suite')
    parser.add_argument('--verbose', action='store_true', help='Run tests in verbose mode')
    parser.add_argument('--slow', action='store_true', help='Include the long end-to-end simulations')
    parser.add_argument('--unit-only', action='store_true', help='Run only unit tests')
    parser.add_argument('--config-only', action='store_true', help='Run only config validation')
    args = parser.parse_args()

    if args.slow:
        os.environ['ECBF_RUN_SLOW'] = '1'

    print(f"{BOLD}ECBF Test Suite Runner{ENDC}")
    print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print("-" * 60)

    all_passed = True

    if not args.config_only:
        unit_passed = run_unittest_suite(args.verbose)
        all_passed = all_passed and unit_passed

    if not args.unit_only:
        config_results = run_config_validation()
        all_passed = all_passed and all(config_results.values())

    print("-" * 60)
    if all_passed:
        print(f"{GREEN}{BOLD}All tests passed!{ENDC}")
        return 0
    else:
        print(f"{RED}{BOLD}Some tests failed!{ENDC}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
