#!/usr/bin/env python
"""Run the relifit test suite."""

import argparse
import sys

import pytest


def main():
    parser = argparse.ArgumentParser(description="Run relifit tests")
    parser.add_argument("--unit", action="store_true", help="Run only unit tests")
    parser.add_argument("--integration", action="store_true", help="Run only integration tests")
    parser.add_argument("--coverage", action="store_true", help="Report test coverage")
    parser.add_argument("--fast", action="store_true", help="Skip tests marked slow")
    parser.add_argument("-v", "--verbose", action="store_true", help="Verbose output")
    args = parser.parse_args()

    pytest_args = []
    if args.unit:
        pytest_args.append("tests/unit")
    if args.integration:
        pytest_args.append("tests/integration")
    if not pytest_args:
        pytest_args.append("tests")
    if args.fast:
        pytest_args += ["-m", "not slow"]
    if args.coverage:
        pytest_args += ["--cov=relifit", "--cov-report=term-missing"]
    if args.verbose:
        pytest_args.append("-v")

    return pytest.main(pytest_args)


if __name__ == "__main__":
    sys.exit(main())
