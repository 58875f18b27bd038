"""The acceptance gate: every criterion at its stated tolerance.

Each test runs one numbered criterion from the shared registry (the same
one `maxbv verify --preset full` executes) and prints a PASS/FAIL line, so
the suite doubles as the sign-off protocol for the build.
"""

import pytest

from maxbv.cli import reproducibility_check
from maxbv.experiments import DEFAULT_MASTER_SEED, acceptance_criteria, run_experiment

CRITERIA = {c.number: c for c in acceptance_criteria()}


def run_criterion(number: int, capsys=None) -> None:
    criterion = CRITERIA[number]
    failures = []
    for spec in criterion.experiments:
        result = run_experiment(spec, DEFAULT_MASTER_SEED, workers=1)
        for row in result.rows:
            if row.passed is False:
                failures.append(
                    f"{row.experiment}/{row.check}: value={row.value} "
                    f"reference={row.reference} tolerance={row.tolerance}"
                )
    verdict = "PASS" if not failures else "FAIL"
    print(f"ACCEPTANCE {number:>2} {verdict}  {criterion.title}")
    assert not failures, "\n".join(failures)


@pytest.mark.parametrize("number", sorted(n for n in CRITERIA if n != 14))
def test_criterion(number):
    run_criterion(number)


def test_criterion_14_reproducibility(tmp_path):
    # worker invariance from the registry, CSV byte-identity via the CLI hook
    criterion = CRITERIA[14]
    failures = []
    for spec in criterion.experiments:
        result = run_experiment(spec, DEFAULT_MASTER_SEED, workers=1)
        failures += [r.check for r in result.rows if r.passed is False]
    repro = reproducibility_check(DEFAULT_MASTER_SEED, 1, tmp_path)
    failures += [r.check for r in repro.rows if r.passed is False]
    verdict = "PASS" if not failures else "FAIL"
    print(f"ACCEPTANCE 14 {verdict}  {criterion.title}")
    assert not failures, failures
