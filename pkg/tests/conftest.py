from __future__ import annotations

import pytest

# criterion id -> (title, [(check, ok, detail), ...]); filled by the acceptance tests
_REPORT: dict[str, tuple[str, list]] = {}


class AcceptanceReport:
    def check(self, crit: str, title: str, check: str, ok: bool, detail: str) -> bool:
        _REPORT.setdefault(crit, (title, []))[1].append((check, bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def report() -> AcceptanceReport:
    return AcceptanceReport()


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_REPORT, key=lambda c: (c[0] != "C", int(c[1:]))):
        title, checks = _REPORT[crit]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        detail = "; ".join(f"{c}: {d}{'' if ok else ' [FAIL]'}" for c, ok, d in checks)
        tr.write_line(f"{status}  {crit:<4} {title} | {detail}")
