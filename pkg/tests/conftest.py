import re

import pytest

from zhseg import bmes_encode, train_lm, train_perceptron

_CRITERION = re.compile(r"test_acceptance\.py::(test_c\d{2}_\w+)")
_RESULTS = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    name = m.group(1)
    if report.failed:
        _RESULTS[name] = "FAIL"
    elif report.when == "call" and report.passed:
        _RESULTS.setdefault(name, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS):
        terminalreporter.write_line(f"{name}: {_RESULTS[name]}")

TOY_WORDS = [
    ["我们", "喜欢", "吃", "苹果"],
    ["他们", "喜欢", "喝", "茶"],
    ["我们", "喝", "茶"],
    ["苹果", "好吃"],
    ["他们", "吃", "苹果"],
]


@pytest.fixture(scope="session")
def toy_words():
    return [list(ws) for ws in TOY_WORDS]


@pytest.fixture(scope="session")
def toy_tagged():
    return [bmes_encode(ws) for ws in TOY_WORDS]


@pytest.fixture(scope="session")
def toy_model(toy_tagged):
    return train_perceptron(toy_tagged, epochs=5, seed=42)


@pytest.fixture(scope="session")
def toy_lm():
    return train_lm([list(ws) for ws in TOY_WORDS], order=2)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
