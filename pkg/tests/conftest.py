"""Shared pytest hooks: collect acceptance verdicts and print them at the end."""

import pytest

VERDICTS: dict[int, tuple[bool, str]] = {}


class Criterion:
    """Context manager that records PASS/FAIL for one numbered criterion."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        detail = "; ".join(self.notes)
        if kind is not None and not issubclass(kind, pytest.skip.Exception):
            detail = (detail + "; " if detail else "") + f"{kind.__name__}: {exc}".splitlines()[0]
        VERDICTS[self.number] = (kind is None, f"{self.title}" + (f" ({detail})" if detail else ""))
        print(f"\nCRITERION {self.number}: {'PASS' if kind is None else 'FAIL'} {self.title}"
              + (f" ({detail})" if detail else ""))
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        ok, text = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")
