"""Result lines collected by the acceptance suite and echoed in the pytest summary."""

from __future__ import annotations

RESULTS: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return line
