import pytest


def pytest_collection_modifyitems(items):
    # run the acceptance module last so its summary follows the unit tests
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is not None and rep.when == "call":
        item.config._acceptance = getattr(item.config, "_acceptance", [])
        detail = dict(item.user_properties).get("detail", "")
        item.config._acceptance.append((crit.args[0], crit.args[1], rep.passed, detail))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter, config):
    rows = getattr(config, "_acceptance", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(rows):
        line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
