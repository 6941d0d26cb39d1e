import pytest

from slicebench import kernels


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    mod = kernels.available_backends()[request.param]
    for name in ("hash_key", "hash_keys", "mix64", "yates", "simulate_batch"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


_CRITERIA: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the outcome is decided when the block exits."""

    class Recorder:
        def __init__(self):
            self.detail = ""

        def __call__(self, number, title):
            self.number, self.title = number, title
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            line = f"[{status}] criterion {self.number}: {self.title}"
            if self.detail:
                line += f" ({self.detail})"
            _CRITERIA.append(line)
            print(line)
            return False

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
