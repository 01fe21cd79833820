import acceptance_log


def pytest_terminal_summary(terminalreporter):
    out = acceptance_log.lines()
    if out:
        terminalreporter.section("acceptance criteria")
        for line in out:
            terminalreporter.write_line(line)
