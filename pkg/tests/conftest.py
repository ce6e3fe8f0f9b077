"""Shared pytest wiring: one summary line per acceptance criterion."""


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    lines = []
    for outcome, mark in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL")):
        for rep in tr.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if getattr(rep, "when", "call") != "call" and outcome == "passed":
                continue
            lines.append((nodeid.split("::")[-1], mark))
    if not lines:
        return
    tr.write_sep("-", "acceptance criteria")
    for name, mark in sorted(set(lines)):
        tr.write_line("%s %s" % (mark, name))
