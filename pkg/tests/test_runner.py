#!/usr/bin/env python3
"""
Test runner for plasmoshape
Executes the unit, integration and end-to-end suites and writes a JSON report
"""

import json
import sys
from datetime import datetime
from pathlib import Path

import pytest


TESTS_DIR = Path(__file__).parent


def run_unit_tests():
    """Run unit tests with coverage"""
    print("🧪 Running Unit Tests...")
    return pytest.main([
        str(TESTS_DIR / "unit"),
        "-v",
        "--tb=short",
        "--cov=scripts",
        "--cov-report=term-missing",
        "--cov-report=html:tests/reports/coverage",
        "--cov-report=json:tests/reports/coverage.json"
    ])


def run_integration_tests():
    """Convergence orders, Jacobian agreement and experiment exports"""
    print("🔗 Running Integration Tests...")
    return pytest.main([str(TESTS_DIR / "integration"), "-v", "--tb=short"])


def run_e2e_tests():
    """CLI workflows in a subprocess"""
    print("🎯 Running End-to-End Tests...")
    return pytest.main([str(TESTS_DIR / "e2e" / "test_e2e_workflows.py"), "-v", "--tb=short"])


def coverage_percent():
    """Total line coverage of scripts/ from the unit run, if it produced a report"""
    coverage_file = TESTS_DIR / "reports" / "coverage.json"
    if not coverage_file.exists():
        return None
    with open(coverage_file) as f:
        return json.load(f)["totals"]["percent_covered"]


def generate_test_report(all_results):
    print("📊 Generating Test Report...")
    suites = {
        name: {'status': 'passed' if code == 0 else 'failed', 'returncode': int(code)}
        for name, code in all_results.items()
    }
    passed = sum(1 for s in suites.values() if s['status'] == 'passed')
    return {
        'timestamp': datetime.now().isoformat(),
        'summary': {
            'total_tests': len(suites),
            'passed': passed,
            'failed': len(suites) - passed,
            'coverage_percent': coverage_percent(),
        },
        'test_suites': suites,
    }


def print_test_summary(report):
    print("\n" + "=" * 60)
    print("🎯 TEST EXECUTION SUMMARY")
    print("=" * 60)
    print(f"Timestamp: {report['timestamp']}")
    print(f"Total Test Suites: {report['summary']['total_tests']}")
    print(f"✅ Passed: {report['summary']['passed']}")
    print(f"❌ Failed: {report['summary']['failed']}")
    coverage = report['summary']['coverage_percent']
    if coverage is not None:
        print(f"📈 Coverage of scripts/: {coverage:.1f}%")

    print("\n📋 Test Suite Details:")
    for suite_name, suite_result in report['test_suites'].items():
        status_icon = "✅" if suite_result['status'] == 'passed' else "❌"
        print(f"  {status_icon} {suite_name}: {suite_result['status'].upper()}")
    print("\n" + "=" * 60)


def save_report_to_file(report, filename="test_report.json"):
    reports_dir = TESTS_DIR / "reports"
    reports_dir.mkdir(exist_ok=True)
    report_file = reports_dir / filename
    with open(report_file, 'w') as f:
        json.dump(report, f, indent=2)
    print(f"📄 Test report saved to: {report_file}")
    return report_file


TEST_SUITES = {
    'unit_tests': run_unit_tests,
    'integration_tests': run_integration_tests,
    'e2e_tests': run_e2e_tests,
}


def main():
    print("🚀 plasmoshape - Test Runner")
    print("=" * 60)

    selected = sys.argv[1:] or list(TEST_SUITES)
    all_results = {}
    for suite_name in selected:
        if suite_name not in TEST_SUITES:
            print(f"⚠️  Unknown test suite: {suite_name}")
            continue
        print(f"\n🔍 Running {suite_name.replace('_', ' ')}...")
        try:
            all_results[suite_name] = TEST_SUITES[suite_name]()
        except Exception as e:
            print(f"❌ Error running {suite_name}: {e}")
            all_results[suite_name] = 1

    report = generate_test_report(all_results)
    print_test_summary(report)
    save_report_to_file(report)

    failed_suites = [name for name, code in all_results.items() if code != 0]
    if failed_suites:
        print(f"\n❌ Test execution failed for suites: {', '.join(failed_suites)}")
        return 1
    print("\n✅ All test suites passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
