import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


class CriterionReport:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.parts: list[tuple[str, float, float, bool]] = []

    def check(self, label: str, value: float, limit: float) -> bool:
        ok = bool(value < limit)
        self.parts.append((label, float(value), float(limit), ok))
        return ok

    @property
    def passed(self) -> bool:
        return all(p[3] for p in self.parts)

    def line(self) -> str:
        detail = "; ".join(f"{lab} {val:.3g} < {lim:.3g} {'ok' if ok else 'NO'}"
                           for lab, val, lim, ok in self.parts)
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.title}: {detail}"

    def finish(self):
        _CRITERIA[self.number] = (self.title, self.passed, self.line())
        print(self.line())
        failed = [p for p in self.parts if not p[3]]
        assert not failed, self.line()


@pytest.fixture
def criterion():
    return CriterionReport


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[number][2])
