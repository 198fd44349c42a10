import pytest

from digrad.harness.config import TrainConfig


@pytest.fixture
def tiny_config(tmp_path):
    """A run small enough to finish in well under a second."""
    return TrainConfig(env="mini-4link", episodes=4, max_steps=8, hidden=[8, 8], batch_size=8,
                       eval_every=2, eval_episodes=2, seeds=[0], output_dir=str(tmp_path / "runs"))


# -- acceptance report ---------------------------------------------------------------------
# Tests marked ``@pytest.mark.criterion(n, title)`` get one summary line each at the end
# of the session; details come from ``record_property("detail", ...)``.

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed and not report.skipped):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    previous = _criteria.get(number)
    if previous is None or previous[1] == "PASS":
        _criteria[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, detail = _criteria[number]
        line = f"criterion {number:>2} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
