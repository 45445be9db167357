from __future__ import annotations

import pytest

_RESULTS = pytest.StashKey[list]()


class Checks:
    """Named boolean checks for one acceptance criterion."""

    def __init__(self, label: str):
        self.label = label
        self.items: list[tuple[str, bool]] = []

    def check(self, name: str, ok) -> bool:
        self.items.append((name, bool(ok)))
        return bool(ok)

    @property
    def failed(self) -> list[str]:
        return [n for n, ok in self.items if not ok]

    def line(self) -> str:
        status = "PASS" if not self.failed else "FAIL"
        detail = f"{len(self.items) - len(self.failed)}/{len(self.items)} checks"
        if self.failed:
            shown = "; ".join(self.failed[:6]) + (" ..." if len(self.failed) > 6 else "")
            detail += f"; failed: {shown}"
        return f"criterion {self.label}: {status} ({detail})"


@pytest.fixture
def criterion(request):
    """Factory for a Checks collector whose verdict is printed in the terminal summary."""
    store = request.config.stash.setdefault(_RESULTS, [])

    def make(label: str) -> Checks:
        c = Checks(label)
        store.append(c)
        return c

    return make


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(results, key=lambda c: c.label):
        terminalreporter.write_line(c.line())
