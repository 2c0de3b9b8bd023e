import numpy as np
import pytest

from roomtrace.ingestion import RssiMatrix
from roomtrace.museum import default_graph, load_graph


@pytest.fixture(scope="session")
def graph():
    return default_graph()


def ring_config(k: int, receivers_per_room: int = 1) -> str:
    """Ring of ``k`` interior rooms plus Outside, room 0 is the entrance."""
    lines = []
    for i in range(k):
        lines += ["[[rooms]]", f'name = "R{i}"'] + (["entrance = true"] if i == 0 else [])
    lines += ["[[rooms]]", 'name = "Out"', "outside = true"]
    for i in range(k * receivers_per_room):
        lines += ["[[receivers]]", f"room = {i // receivers_per_room}"]
    for i in range(k):
        j = (i + 1) % k
        lines += ["[[doors]]", f"from = {i}", f"to = {j}", 'orientation = "ccw"']
        lines += ["[[doors]]", f"from = {j}", f"to = {i}", 'orientation = "cw"']
    lines += ["[[doors]]", "from = 0", f"to = {k}", "[[doors]]", f"from = {k}", "to = 0"]
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def ring8():
    return load_graph(ring_config(8))


def matrix(values, floor=-100.0, coverage=None, dt=10.0, beacon="b"):
    values = np.asarray(values, dtype=float)
    if coverage is None:
        coverage = (values != floor).astype(int)
    return RssiMatrix(beacon, 0, dt, values, np.asarray(coverage), floor)


ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
