def pytest_terminal_summary(terminalreporter):
    """Replay the acceptance-criterion verdict lines after the test run."""
    try:
        from test_acceptance import VERDICT_LINES
    except ImportError:
        return
    if not VERDICT_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in VERDICT_LINES:
        terminalreporter.write_line(line)
