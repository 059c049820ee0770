"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

_results: dict[str, list] = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    name = props.get("criterion")
    if name is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _results.setdefault(name, []).append(
            (report.passed, props.get("detail", "") or _short_error(report)))


def _short_error(report):
    if report.passed:
        return ""
    text = str(report.longrepr).strip().splitlines()
    return text[-1][:160] if text else "failed"


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, parts in _results.items():
        ok = all(p for p, _ in parts)
        details = "; ".join(d for _, d in parts if d)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {details}")


def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", marker.args[0]))
