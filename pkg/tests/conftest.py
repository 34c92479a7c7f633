import pytest

from laburst.ingest import Message

_criteria: list[tuple[str, str, str]] = []


def msg(ts, text, author="a", id=None, rt=False):
    return Message(id or f"{author}-{ts}-{abs(hash(text)) % 10_000}", ts, author, text, rt)


@pytest.fixture
def make_msg():
    return msg


@pytest.fixture(scope="session")
def trained():
    """(training set, ensemble, seconds spent) for the standard training stream."""
    import time
    from pipeline import harvest, train, training_config
    start = time.perf_counter()
    data = harvest(training_config())
    model = train(data)
    return data, model, time.perf_counter() - start


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        verdict = "PASS" if report.outcome == "passed" else "FAIL"
        _criteria.append((props["criterion"], verdict, props.get("detail", report.outcome)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, detail in sorted(_criteria):
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
